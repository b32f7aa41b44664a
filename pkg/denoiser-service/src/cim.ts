// CIM1 complex-image container: 16-byte header (magic "CIM1", u32 height,
// u32 width, u32 flags) followed by float32 (re, im) pairs, row-major,
// little-endian.

import * as fs from "fs";

export interface ComplexImage {
  height: number;
  width: number;
  /** interleaved re/im, length height*width*2 */
  data: Float32Array;
}

export function decodeImage(buf: Buffer): ComplexImage {
  if (buf.length < 16) throw new Error("truncated CIM1 header");
  if (buf.toString("latin1", 0, 4) !== "CIM1") throw new Error("bad CIM1 magic");
  const height = buf.readUInt32LE(4);
  const width = buf.readUInt32LE(8);
  const need = 16 + height * width * 8;
  if (buf.length !== need) throw new Error(`CIM1 payload ${buf.length}, expected ${need}`);
  const data = new Float32Array(height * width * 2);
  for (let i = 0; i < data.length; i++) data[i] = buf.readFloatLE(16 + 4 * i);
  return { height, width, data };
}

export function encodeImage(img: ComplexImage): Buffer {
  const buf = Buffer.alloc(16 + img.data.length * 4);
  buf.write("CIM1", 0, "latin1");
  buf.writeUInt32LE(img.height, 4);
  buf.writeUInt32LE(img.width, 8);
  buf.writeUInt32LE(0, 12);
  for (let i = 0; i < img.data.length; i++) buf.writeFloatLE(img.data[i], 16 + 4 * i);
  return buf;
}

export function readImage(path: string): ComplexImage {
  return decodeImage(fs.readFileSync(path));
}

export function writeImage(path: string, img: ComplexImage): void {
  fs.writeFileSync(path, encodeImage(img));
}
