// Training loop: draw per-subband noise precisions, corrupt clean patches
// with the correlated noise, hand the net the noisy patch plus K independent
// noise realizations, and regress the noise with l2 loss.

import * as tf from "@tensorflow/tfjs";
import * as fs from "fs";
import * as path from "path";

import { readImage } from "./cim";
import { TrainSpec, loadTrainSpec } from "./config";
import { sampleCorrelatedNoise, subbandLayout } from "./haar";
import { Checkpoint, buildModel, packInput, saveCheckpoint } from "./model";
import { Rng } from "./rng";

interface Patch {
  data: Float64Array;  // interleaved complex, patch*patch
}

export function cutPatches(spec: TrainSpec): Patch[] {
  const files = fs.readdirSync(spec.dataset).filter((f) => f.endsWith(".cim")).sort();
  if (files.length === 0) throw new Error(`no .cim images in ${spec.dataset}`);
  const patches: Patch[] = [];
  const p = spec.patch;
  for (const f of files) {
    const img = readImage(path.join(spec.dataset, f));
    for (let i = 0; i + p <= img.height; i += spec.stride) {
      for (let j = 0; j + p <= img.width; j += spec.stride) {
        const data = new Float64Array(p * p * 2);
        for (let r = 0; r < p; r++) {
          for (let c = 0; c < p; c++) {
            data[2 * (r * p + c)] = img.data[2 * ((i + r) * img.width + j + c)];
            data[2 * (r * p + c) + 1] = img.data[2 * ((i + r) * img.width + j + c) + 1];
          }
        }
        patches.push({ data });
      }
    }
  }
  return patches;
}

function drawGammas(spec: TrainSpec, nBands: number, rng: Rng): Float64Array {
  const g = new Float64Array(nBands);
  for (let i = 0; i < nBands; i++) {
    // subband SD uniform in [sdMin, sdMax]; keep the precision finite
    const sd = Math.max(spec.sdMin + (spec.sdMax - spec.sdMin) * rng.next(), 1e-4);
    g[i] = 1 / (sd * sd);
  }
  return g;
}

export interface BatchTensors {
  input: Float32Array;   // [batch, p, p, 2(1+K)]
  target: Float32Array;  // [batch, p, p, 2]
}

export function makeBatch(spec: TrainSpec, patches: Patch[], rng: Rng): BatchTensors {
  const p = spec.patch;
  const bands = subbandLayout(p, p, spec.depth);
  const cIn = 2 * (1 + spec.kChannels);
  const input = new Float32Array(spec.batch * p * p * cIn);
  const target = new Float32Array(spec.batch * p * p * 2);
  for (let b = 0; b < spec.batch; b++) {
    const patch = patches[rng.int(patches.length)];
    const gammas = drawGammas(spec, bands.length, rng);
    // the network is positively homogeneous (bias-free), so normalizing each
    // sample by its overall noise RMS leaves the learned function unchanged
    // while giving every noise level equal weight in the l2 loss
    let pow = 0;
    bands.forEach((band, ell) => { pow += band.size / gammas[ell]; });
    const scale = 1 / Math.sqrt(pow / (p * p));
    const v = sampleCorrelatedNoise(gammas, p, p, spec.depth, rng);
    const noises: Float64Array[] = [];
    for (let k = 0; k < spec.kChannels; k++) {
      const n = sampleCorrelatedNoise(gammas, p, p, spec.depth, rng);
      for (let i = 0; i < n.length; i++) n[i] *= scale;
      noises.push(n);
    }
    const u = new Float64Array(p * p * 2);
    for (let i = 0; i < u.length; i++) u[i] = (patch.data[i] + v[i]) * scale;
    input.set(packInput(u, noises, p, p), b * p * p * cIn);
    const t = new Float32Array(p * p * 2);
    for (let i = 0; i < t.length; i++) t[i] = v[i] * scale;
    target.set(t, b * p * p * 2);
  }
  return { input, target };
}

export async function train(spec: TrainSpec,
                            log: (msg: string) => void = console.log): Promise<Checkpoint> {
  const patches = cutPatches(spec);
  log(`training on ${patches.length} patches of ${spec.patch}x${spec.patch}`);
  const meta = {
    kChannels: spec.kChannels, filters: spec.filters, layers: spec.layers,
    trainedSdRange: [spec.sdMin, spec.sdMax] as [number, number], seed: spec.seed,
  };
  const model = buildModel(meta);
  const rng = new Rng(spec.seed);
  let lr = spec.lr;
  let optimizer = tf.train.adam(lr);
  const p = spec.patch;
  const cIn = 2 * (1 + spec.kChannels);
  let firstLoss = NaN;
  let lastLoss = NaN;
  for (let epoch = 0; epoch < spec.epochs; epoch++) {
    if (epoch > 0 && epoch % Math.max(2, Math.floor(spec.epochs / 3)) === 0) {
      lr /= 2;
      optimizer.dispose();
      optimizer = tf.train.adam(lr);
    }
    let epochLoss = 0;
    for (let step = 0; step < spec.stepsPerEpoch; step++) {
      const { input, target } = makeBatch(spec, patches, rng);
      const lossVal = tf.tidy(() => {
        const x = tf.tensor4d(input, [spec.batch, p, p, cIn]);
        const y = tf.tensor4d(target, [spec.batch, p, p, 2]);
        const loss = optimizer.minimize(
          () => tf.losses.meanSquaredError(y, model.apply(x) as tf.Tensor),
          true) as tf.Scalar;
        return loss.dataSync()[0];
      });
      epochLoss += lossVal;
      if (!Number.isFinite(lossVal)) throw new Error(`loss diverged at epoch ${epoch}`);
    }
    epochLoss /= spec.stepsPerEpoch;
    if (epoch === 0) firstLoss = epochLoss;
    lastLoss = epochLoss;
    log(`epoch ${epoch + 1}/${spec.epochs}: loss ${epochLoss.toExponential(3)} (lr ${lr})`);
  }
  optimizer.dispose();
  log(`loss ${firstLoss.toExponential(3)} -> ${lastLoss.toExponential(3)}`);
  return { meta, model };
}

async function main(): Promise<void> {
  const args = process.argv.slice(2);
  let configPath = "";
  for (let i = 0; i < args.length; i++) {
    if (args[i] === "--config" && args[i + 1]) configPath = args[++i];
  }
  if (!configPath) {
    console.error("usage: node dist/train.js --config train.cfg");
    process.exit(6);
  }
  const spec = loadTrainSpec(configPath);
  const ck = await train(spec);
  await saveCheckpoint(ck, spec.out);
  console.log(`wrote ${spec.out}`);
}

if (require.main === module) {
  main().catch((err) => {
    console.error(err.message);
    process.exit(4);
  });
}
