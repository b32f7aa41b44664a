// Orthonormal 2D Haar transform on interleaved-complex arrays, plus the
// correlated-noise sampler used for training and inference side channels:
// noise that is white per wavelet subband with variance 1/gamma_ell, mapped
// to the pixel domain by the inverse transform.
//
// Subband order matches the solver side: scaling band at depth D first, then
// (LH, HL, HH) per level from coarsest to finest; LH is high-pass along the
// second (width) axis.

import { Rng } from "./rng";

export interface Subband {
  level: number;
  start: number; // complex offset into the flat coefficient vector
  size: number;  // number of complex coefficients
}

export function subbandLayout(height: number, width: number, depth: number): Subband[] {
  const bands: Subband[] = [];
  let pos = 0;
  const add = (level: number, h: number, w: number) => {
    bands.push({ level, start: pos, size: h * w });
    pos += h * w;
  };
  add(0, height >> depth, width >> depth);
  for (let d = depth; d >= 1; d--) {
    const h = height >> d;
    const w = width >> d;
    add(d, h, w);
    add(d, h, w);
    add(d, h, w);
  }
  return bands;
}

function analysisLevel(src: Float64Array, h: number, w: number,
                       ll: Float64Array, lh: Float64Array,
                       hl: Float64Array, hh: Float64Array): void {
  const hw = w >> 1;
  for (let i = 0; i < h >> 1; i++) {
    for (let j = 0; j < hw; j++) {
      for (let c = 0; c < 2; c++) {
        const a = src[2 * ((2 * i) * w + 2 * j) + c];
        const b = src[2 * ((2 * i) * w + 2 * j + 1) + c];
        const cc = src[2 * ((2 * i + 1) * w + 2 * j) + c];
        const d = src[2 * ((2 * i + 1) * w + 2 * j + 1) + c];
        const o = 2 * (i * hw + j) + c;
        ll[o] = (a + b + cc + d) * 0.5;
        lh[o] = (a - b + cc - d) * 0.5;
        hl[o] = (a + b - cc - d) * 0.5;
        hh[o] = (a - b - cc + d) * 0.5;
      }
    }
  }
}

function synthesisLevel(ll: Float64Array, lh: Float64Array, hl: Float64Array,
                        hh: Float64Array, h: number, w: number,
                        dst: Float64Array): void {
  const w2 = w * 2;
  for (let i = 0; i < h; i++) {
    for (let j = 0; j < w; j++) {
      for (let c = 0; c < 2; c++) {
        const o = 2 * (i * w + j) + c;
        const pa = ll[o], pb = lh[o], pc = hl[o], pd = hh[o];
        dst[2 * ((2 * i) * w2 + 2 * j) + c] = (pa + pb + pc + pd) * 0.5;
        dst[2 * ((2 * i) * w2 + 2 * j + 1) + c] = (pa - pb + pc - pd) * 0.5;
        dst[2 * ((2 * i + 1) * w2 + 2 * j) + c] = (pa + pb - pc - pd) * 0.5;
        dst[2 * ((2 * i + 1) * w2 + 2 * j + 1) + c] = (pa - pb - pc + pd) * 0.5;
      }
    }
  }
}

/** Forward transform: pixel image (interleaved complex) -> flat coefficients. */
export function dwt2(img: Float64Array, height: number, width: number,
                     depth: number): Float64Array {
  const out = new Float64Array(height * width * 2);
  const bands = subbandLayout(height, width, depth);
  let cur = img.slice();
  let h = height;
  let w = width;
  let bandIdx = bands.length;
  for (let d = 1; d <= depth; d++) {
    const hh2 = h >> 1;
    const wh2 = w >> 1;
    const n = hh2 * wh2 * 2;
    const ll = new Float64Array(n);
    const lh = new Float64Array(n);
    const hl = new Float64Array(n);
    const hhb = new Float64Array(n);
    analysisLevel(cur, h, w, ll, lh, hl, hhb);
    bandIdx -= 3;
    out.set(lh, bands[bandIdx].start * 2);
    out.set(hl, bands[bandIdx + 1].start * 2);
    out.set(hhb, bands[bandIdx + 2].start * 2);
    cur = ll;
    h = hh2;
    w = wh2;
  }
  out.set(cur, 0);
  return out;
}

/** Inverse transform: flat coefficients -> pixel image (interleaved complex). */
export function idwt2(coeffs: Float64Array, height: number, width: number,
                      depth: number): Float64Array {
  const bands = subbandLayout(height, width, depth);
  let h = height >> depth;
  let w = width >> depth;
  let cur = coeffs.slice(0, h * w * 2);
  let bandIdx = 1;
  for (let d = depth; d >= 1; d--) {
    const lh = coeffs.slice(bands[bandIdx].start * 2, (bands[bandIdx].start + bands[bandIdx].size) * 2);
    const hl = coeffs.slice(bands[bandIdx + 1].start * 2, (bands[bandIdx + 1].start + bands[bandIdx + 1].size) * 2);
    const hh = coeffs.slice(bands[bandIdx + 2].start * 2, (bands[bandIdx + 2].start + bands[bandIdx + 2].size) * 2);
    bandIdx += 3;
    const dst = new Float64Array(h * w * 8);
    synthesisLevel(cur, lh, hl, hh, h, w, dst);
    cur = dst;
    h <<= 1;
    w <<= 1;
  }
  return cur;
}

/**
 * Pixel-domain noise whose wavelet subbands are white with per-complex
 * variance 1 / gamma_ell (real and imaginary parts each carry half).
 */
export function sampleCorrelatedNoise(gammas: Float64Array, height: number,
                                      width: number, depth: number,
                                      rng: Rng): Float64Array {
  const bands = subbandLayout(height, width, depth);
  if (bands.length !== gammas.length) {
    throw new Error(`layout has ${bands.length} subbands, got ${gammas.length} precisions`);
  }
  const coeffs = new Float64Array(height * width * 2);
  bands.forEach((band, ell) => {
    const sd = Math.sqrt(0.5 / gammas[ell]);
    for (let i = 0; i < band.size * 2; i++) {
      coeffs[band.start * 2 + i] = sd * rng.gauss();
    }
  });
  return idwt2(coeffs, height, width, depth);
}
