// Flat key = value training configuration, mirroring the solver side's
// format: blank lines and # comments ignored, unknown keys rejected.

import * as fs from "fs";

export interface TrainSpec {
  dataset: string;       // directory of clean .cim images
  out: string;           // checkpoint path
  patch: number;
  stride: number;
  sdMin: number;
  sdMax: number;         // subband SDs drawn uniformly from [sdMin, sdMax]
  depth: number;         // wavelet depth for the noise model
  kChannels: number;
  filters: number;
  layers: number;
  epochs: number;
  batch: number;
  stepsPerEpoch: number;
  lr: number;
  seed: number;
}

export const DEFAULTS: TrainSpec = {
  dataset: "", out: "checkpoint.json",
  patch: 16, stride: 8,
  sdMin: 0.0, sdMax: 50 / 255,
  depth: 2, kChannels: 1,
  filters: 12, layers: 5,
  epochs: 8, batch: 8, stepsPerEpoch: 40,
  lr: 1e-3, seed: 0,
};

const KEYS: Record<string, keyof TrainSpec> = {
  dataset: "dataset", out: "out", patch: "patch", stride: "stride",
  sd_min: "sdMin", sd_max: "sdMax", depth: "depth", k_channels: "kChannels",
  filters: "filters", layers: "layers", epochs: "epochs", batch: "batch",
  steps_per_epoch: "stepsPerEpoch", lr: "lr", seed: "seed",
};

export function parseTrainSpec(text: string): TrainSpec {
  const spec: TrainSpec = { ...DEFAULTS };
  text.split("\n").forEach((line, idx) => {
    const body = line.split("#", 1)[0].trim();
    if (!body) return;
    const eq = body.indexOf("=");
    if (eq < 0) throw new Error(`line ${idx + 1}: expected 'key = value'`);
    const key = body.slice(0, eq).trim();
    const raw = body.slice(eq + 1).trim();
    const field = KEYS[key];
    if (field === undefined) throw new Error(`line ${idx + 1}: unknown key '${key}'`);
    if (field === "dataset" || field === "out") {
      (spec[field] as string) = raw;
    } else {
      const num = Number(raw);
      if (!Number.isFinite(num)) throw new Error(`line ${idx + 1}: bad number '${raw}'`);
      (spec[field] as number) = num;
    }
  });
  if (spec.sdMin < 0 || spec.sdMax <= spec.sdMin) {
    throw new Error("need 0 <= sd_min < sd_max");
  }
  if (spec.kChannels < 1) throw new Error("need k_channels >= 1");
  return spec;
}

export function loadTrainSpec(path: string): TrainSpec {
  return parseTrainSpec(fs.readFileSync(path, "utf8"));
}
