import * as fs from "fs";
import * as path from "path";
import { describe, expect, it } from "vitest";

import { buildModel } from "../src/model";
import { handlePayload } from "../src/serve";
import {
  MAGIC, STATUS_OK, STATUS_SHAPE, decodeRequest, encodeResponse,
} from "../src/protocol";

const FIXTURES = path.join(__dirname, "..", "..", "tests", "fixtures");

function tinyCheckpoint() {
  const meta = {
    kChannels: 1, filters: 4, layers: 3,
    trainedSdRange: [0, 0.2] as [number, number], seed: 0,
  };
  return { meta, model: buildModel(meta) };
}

describe("request handling", () => {
  it("answers the golden request with an ok frame of the right size", () => {
    const ck = tinyCheckpoint();
    const req = fs.readFileSync(path.join(FIXTURES, "golden_request.bin"));
    const resp = handlePayload(ck, req);
    expect(resp.toString("latin1", 0, 4)).toBe(MAGIC);
    expect(resp.readUInt8(4)).toBe(STATUS_OK);
    expect(resp.length).toBe(5 + 2 * 2 * 8);
    for (let i = 0; i < 8; i++) {
      expect(Number.isFinite(resp.readFloatLE(5 + 4 * i))).toBe(true);
    }
  });

  it("returns status 1 for malformed frames", () => {
    const ck = tinyCheckpoint();
    const resp = handlePayload(ck, Buffer.from("garbage-frame"));
    expect(resp.readUInt8(4)).toBe(STATUS_SHAPE);
    expect(resp.length).toBe(5);
  });

  it("returns status 1 when noise channels are missing", () => {
    const ck = tinyCheckpoint();
    const req = fs.readFileSync(path.join(FIXTURES, "golden_request.bin"));
    const parsed = decodeRequest(req);
    // rebuild a request with K = 0 (no noise channel)
    const head = Buffer.from(req.subarray(0, 16));
    head.writeUInt8(0, 13);
    const body = req.subarray(16, 16 + 8 * parsed.gammas.length + parsed.height * parsed.width * 8);
    const resp = handlePayload(ck, Buffer.concat([head, body]));
    expect(resp.readUInt8(4)).toBe(STATUS_SHAPE);
  });

  it("rejects sizes incompatible with the subband count", () => {
    const ck = tinyCheckpoint();
    // 2x2 image with L = 13 precisions implies depth 4: indivisible
    const head = Buffer.alloc(16);
    head.write("DNZ1", 0, "latin1");
    head.writeUInt8(1, 4);
    head.writeUInt32LE(2, 5);
    head.writeUInt32LE(2, 9);
    head.writeUInt8(1, 13);
    head.writeUInt16LE(13, 14);
    const gam = Buffer.alloc(8 * 13);
    for (let i = 0; i < 13; i++) gam.writeDoubleLE(1.0, 8 * i);
    const img = Buffer.alloc(2 * 2 * 8);
    const resp = handlePayload(ck, Buffer.concat([head, gam, img, img]));
    expect(resp.readUInt8(4)).toBe(STATUS_SHAPE);
  });
});

describe("response encoding", () => {
  it("error responses carry no payload", () => {
    expect(encodeResponse(STATUS_SHAPE).length).toBe(5);
  });
});
