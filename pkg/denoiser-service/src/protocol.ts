// DNZ1 wire protocol: little-endian, length-prefixed frames over TCP or stdio.
//
// Request payload:
//   magic "DNZ1" | op u8 (0x01 denoise) | H u32 | W u32 | K u8 | L u16 |
//   L float64 subband precisions |
//   (1 + K) complex images, each H*W float32 (re, im) pairs row-major.
// Response payload:
//   magic "DNZ1" | status u8 (0 ok, 1 shape error, 2 internal) |
//   on ok one complex image.

export const MAGIC = "DNZ1";
export const OP_DENOISE = 0x01;
export const STATUS_OK = 0;
export const STATUS_SHAPE = 1;
export const STATUS_INTERNAL = 2;
export const MAX_PIXELS = 4096 * 4096;

export interface DenoiseRequest {
  height: number;
  width: number;
  gammas: Float64Array;
  /** noisy image followed by K noise-channel realizations; interleaved re/im */
  images: Float32Array[];
}

export class ProtocolError extends Error {}

export function decodeRequest(buf: Buffer): DenoiseRequest {
  if (buf.length < 16) throw new ProtocolError("truncated request header");
  if (buf.toString("latin1", 0, 4) !== MAGIC) {
    throw new ProtocolError(`bad magic ${buf.toString("hex", 0, 4)}`);
  }
  const op = buf.readUInt8(4);
  if (op !== OP_DENOISE) throw new ProtocolError(`unknown op ${op}`);
  const height = buf.readUInt32LE(5);
  const width = buf.readUInt32LE(9);
  const k = buf.readUInt8(13);
  const nGamma = buf.readUInt16LE(14);
  if (height === 0 || width === 0 || height * width > MAX_PIXELS) {
    throw new ProtocolError(`image size ${height}x${width} out of range`);
  }
  let off = 16;
  if (buf.length < off + 8 * nGamma) throw new ProtocolError("truncated precision block");
  const gammas = new Float64Array(nGamma);
  for (let i = 0; i < nGamma; i++) gammas[i] = buf.readDoubleLE(off + 8 * i);
  off += 8 * nGamma;
  const imgBytes = height * width * 8;
  const images: Float32Array[] = [];
  for (let i = 0; i < 1 + k; i++) {
    if (buf.length < off + imgBytes) throw new ProtocolError("truncated image payload");
    const img = new Float32Array(height * width * 2);
    for (let j = 0; j < img.length; j++) img[j] = buf.readFloatLE(off + 4 * j);
    images.push(img);
    off += imgBytes;
  }
  if (off !== buf.length) throw new ProtocolError(`${buf.length - off} trailing bytes`);
  return { height, width, gammas, images };
}

export function encodeResponse(status: number, image?: Float32Array): Buffer {
  const head = Buffer.alloc(5);
  head.write(MAGIC, 0, "latin1");
  head.writeUInt8(status, 4);
  if (status !== STATUS_OK || image === undefined) return head;
  const body = Buffer.alloc(image.length * 4);
  for (let i = 0; i < image.length; i++) body.writeFloatLE(image[i], 4 * i);
  return Buffer.concat([head, body]);
}

export function frame(payload: Buffer): Buffer {
  const len = Buffer.alloc(4);
  len.writeUInt32LE(payload.length, 0);
  return Buffer.concat([len, payload]);
}

/** Incremental splitter for length-prefixed frames arriving in chunks. */
export class FrameReader {
  private pending: Buffer = Buffer.alloc(0);

  push(chunk: Buffer): Buffer[] {
    this.pending = Buffer.concat([this.pending, chunk]);
    const frames: Buffer[] = [];
    while (this.pending.length >= 4) {
      const len = this.pending.readUInt32LE(0);
      if (this.pending.length < 4 + len) break;
      frames.push(this.pending.subarray(4, 4 + len));
      this.pending = this.pending.subarray(4 + len);
    }
    return frames;
  }
}
