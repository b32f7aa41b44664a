// Held-out evaluation: PSNR of the denoised image vs the identity (no-op)
// baseline under matched correlated noise, averaged over test images.

import * as fs from "fs";
import * as path from "path";

import { readImage } from "./cim";
import { sampleCorrelatedNoise, subbandLayout } from "./haar";
import { Checkpoint, denoiseImage, loadCheckpoint } from "./model";
import { Rng } from "./rng";

export interface EvalResult {
  noisyPsnr: number;
  denoisedPsnr: number;
  gainDb: number;
}

function psnr(a: ArrayLike<number>, ref: Float64Array): number {
  let peak = 0;
  let err = 0;
  const n = ref.length / 2;
  for (let p = 0; p < n; p++) {
    peak = Math.max(peak, ref[2 * p] ** 2 + ref[2 * p + 1] ** 2);
    err += ((a[2 * p] as number) - ref[2 * p]) ** 2
      + ((a[2 * p + 1] as number) - ref[2 * p + 1]) ** 2;
  }
  return 10 * Math.log10((n * peak) / err);
}

export function evaluate(ck: Checkpoint, dir: string, sd: number, depth: number,
                         seed = 1): EvalResult {
  const files = fs.readdirSync(dir).filter((f) => f.endsWith(".cim")).sort();
  const rng = new Rng(seed);
  let noisy = 0;
  let denoised = 0;
  for (const f of files) {
    const img = readImage(path.join(dir, f));
    const clean = Float64Array.from(img.data);
    const nBands = subbandLayout(img.height, img.width, depth).length;
    const gammas = new Float64Array(nBands).fill(1 / (sd * sd));
    const v = sampleCorrelatedNoise(gammas, img.height, img.width, depth, rng);
    const u = new Float64Array(clean.length);
    for (let i = 0; i < u.length; i++) u[i] = clean[i] + v[i];
    const noises = [sampleCorrelatedNoise(gammas, img.height, img.width, depth, rng)];
    const out = denoiseImage(ck, u, noises, img.height, img.width);
    noisy += psnr(u, clean);
    denoised += psnr(out, clean);
  }
  noisy /= files.length;
  denoised /= files.length;
  return { noisyPsnr: noisy, denoisedPsnr: denoised, gainDb: denoised - noisy };
}

function main(): void {
  const args = process.argv.slice(2);
  let checkpoint = "checkpoint.json";
  let dir = "data/heldout";
  let sd = 0.3;
  let depth = 3;
  for (let i = 0; i < args.length; i++) {
    if (args[i] === "--checkpoint" && args[i + 1]) checkpoint = args[++i];
    else if (args[i] === "--dir" && args[i + 1]) dir = args[++i];
    else if (args[i] === "--sd" && args[i + 1]) sd = parseFloat(args[++i]);
    else if (args[i] === "--depth" && args[i + 1]) depth = parseInt(args[++i], 10);
  }
  const ck = loadCheckpoint(checkpoint);
  const res = evaluate(ck, dir, sd, depth);
  console.log(`noisy ${res.noisyPsnr.toFixed(2)} dB -> denoised ` +
    `${res.denoisedPsnr.toFixed(2)} dB (gain ${res.gainDb.toFixed(2)} dB)`);
}

if (require.main === module) {
  main();
}
