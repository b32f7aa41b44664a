// Bias-free residual CNN for noise-conditioned denoising.
//
// The network sees the noisy complex image as two channels (re, im) plus K
// extra channel pairs, each an independent realization of noise with the
// same statistics as the corruption.  All convolutions are bias-free, so the
// map is positively homogeneous: f(a*u, a*N) = a*f(u, N), which makes one
// model usable across image scalings.  The net predicts the noise; the
// denoised image is u minus the prediction.

import * as tf from "@tensorflow/tfjs";
import * as fs from "fs";

export interface ModelMeta {
  kChannels: number;
  filters: number;
  layers: number;
  trainedSdRange: [number, number];
  seed: number;
}

export interface Checkpoint {
  meta: ModelMeta;
  model: tf.LayersModel;
}

export function buildModel(meta: ModelMeta): tf.LayersModel {
  const inChannels = 2 * (1 + meta.kChannels);
  const model = tf.sequential();
  model.add(tf.layers.conv2d({
    inputShape: [null as unknown as number, null as unknown as number, inChannels],
    filters: meta.filters, kernelSize: 3, padding: "same", useBias: false,
    activation: "relu",
    kernelInitializer: tf.initializers.heNormal({ seed: meta.seed }),
  }));
  for (let i = 1; i < meta.layers - 1; i++) {
    model.add(tf.layers.conv2d({
      filters: meta.filters, kernelSize: 3, padding: "same", useBias: false,
      activation: "relu",
      kernelInitializer: tf.initializers.heNormal({ seed: meta.seed + i }),
    }));
  }
  model.add(tf.layers.conv2d({
    filters: 2, kernelSize: 3, padding: "same", useBias: false,
    kernelInitializer: tf.initializers.heNormal({ seed: meta.seed + meta.layers }),
  }));
  return model;
}

/** interleaved complex planes -> [1, h, w, 2*(1+K)] channel tensor data */
export function packInput(u: ArrayLike<number>, noises: ArrayLike<number>[],
                          h: number, w: number): Float32Array {
  const c = 2 * (1 + noises.length);
  const out = new Float32Array(h * w * c);
  for (let p = 0; p < h * w; p++) {
    out[p * c] = u[2 * p] as number;
    out[p * c + 1] = u[2 * p + 1] as number;
    noises.forEach((n, k) => {
      out[p * c + 2 + 2 * k] = n[2 * p] as number;
      out[p * c + 3 + 2 * k] = n[2 * p + 1] as number;
    });
  }
  return out;
}

/**
 * Run the denoiser on one interleaved-complex image.
 *
 * The residual prediction is energy-capped by the noise channels: the
 * channels carry an independent realization of the corrupting noise, so the
 * true noise energy is known up to sampling error, and a prediction that
 * removes substantially more energy than that is out of the model's
 * competence (seen at noise levels far below the trained range).  The cap
 * keeps a repeated application at low noise close to the identity.
 */
export function denoiseImage(ck: Checkpoint, u: Float64Array,
                             noises: Float64Array[], h: number, w: number): Float32Array {
  const kUse = ck.meta.kChannels;
  if (noises.length < kUse) {
    throw new Error(`model needs ${kUse} noise channels, got ${noises.length}`);
  }
  const packed = packInput(u, noises.slice(0, kUse), h, w);
  const out = tf.tidy(() => {
    const inp = tf.tensor4d(packed, [1, h, w, 2 * (1 + kUse)]);
    const pred = ck.model.predict(inp) as tf.Tensor4D;
    return pred.dataSync() as Float32Array;
  });
  let predEnergy = 0;
  for (let i = 0; i < out.length; i++) predEnergy += out[i] * out[i];
  let noiseEnergy = 0;
  for (let k = 0; k < kUse; k++) {
    for (let i = 0; i < noises[k].length; i++) noiseEnergy += noises[k][i] ** 2;
  }
  noiseEnergy /= kUse;
  const cap = predEnergy > 0 ? Math.min(1, Math.sqrt(1.5625 * noiseEnergy / predEnergy)) : 1;
  const denoised = new Float32Array(h * w * 2);
  for (let p = 0; p < h * w; p++) {
    denoised[2 * p] = (u[2 * p] as number) - cap * out[2 * p];
    denoised[2 * p + 1] = (u[2 * p + 1] as number) - cap * out[2 * p + 1];
  }
  return denoised;
}

export async function saveCheckpoint(ck: Checkpoint, path: string): Promise<void> {
  const weights = ck.model.getWeights().map((t) => ({
    shape: t.shape.slice(),
    data: Array.from(t.dataSync()),
  }));
  fs.writeFileSync(path, JSON.stringify({ meta: ck.meta, weights }));
}

export function loadCheckpoint(path: string): Checkpoint {
  const raw = JSON.parse(fs.readFileSync(path, "utf8"));
  const meta = raw.meta as ModelMeta;
  const model = buildModel(meta);
  model.setWeights(raw.weights.map((w: { shape: number[]; data: number[] }) =>
    tf.tensor(Float32Array.from(w.data), w.shape)));
  return { meta, model };
}
