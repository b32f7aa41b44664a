// DNZ1 inference server: answers denoise requests with the loaded model over
// TCP or stdio.  Requests are handled one at a time per connection; malformed
// frames yield status 1 (shape error) and leave the connection open; model
// failures yield status 2.

import * as net from "net";

import { Checkpoint, denoiseImage, loadCheckpoint } from "./model";
import {
  FrameReader, ProtocolError, STATUS_INTERNAL, STATUS_OK, STATUS_SHAPE,
  decodeRequest, encodeResponse, frame,
} from "./protocol";

export function handlePayload(ck: Checkpoint, payload: Buffer): Buffer {
  let req;
  try {
    req = decodeRequest(payload);
  } catch (err) {
    if (err instanceof ProtocolError) return encodeResponse(STATUS_SHAPE);
    return encodeResponse(STATUS_INTERNAL);
  }
  const { height, width, gammas, images } = req;
  if (images.length < 1 + ck.meta.kChannels) return encodeResponse(STATUS_SHAPE);
  if (gammas.length < 1 || (gammas.length - 1) % 3 !== 0) {
    return encodeResponse(STATUS_SHAPE);
  }
  const depth = (gammas.length - 1) / 3;
  if (height % (1 << depth) !== 0 || width % (1 << depth) !== 0) {
    return encodeResponse(STATUS_SHAPE);
  }
  try {
    const u = Float64Array.from(images[0]);
    const noises = images.slice(1).map((n) => Float64Array.from(n));
    const out = denoiseImage(ck, u, noises, height, width);
    if (!out.every(Number.isFinite)) return encodeResponse(STATUS_INTERNAL);
    return encodeResponse(STATUS_OK, out);
  } catch {
    return encodeResponse(STATUS_INTERNAL);
  }
}

export function serveTcp(ck: Checkpoint, port: number,
                         onListen?: (port: number) => void): net.Server {
  const server = net.createServer((conn) => {
    const reader = new FrameReader();
    conn.on("data", (chunk: Buffer) => {
      for (const payload of reader.push(chunk)) {
        conn.write(frame(handlePayload(ck, payload)));
      }
    });
    conn.on("error", () => conn.destroy());
  });
  server.listen(port, "127.0.0.1", () => {
    const addr = server.address() as net.AddressInfo;
    console.log(`denoiser listening on 127.0.0.1:${addr.port}`);
    if (onListen) onListen(addr.port);
  });
  return server;
}

export function serveStdio(ck: Checkpoint): void {
  const reader = new FrameReader();
  process.stdin.on("data", (chunk: Buffer) => {
    for (const payload of reader.push(chunk)) {
      process.stdout.write(frame(handlePayload(ck, payload)));
    }
  });
  process.stdin.on("end", () => process.exit(0));
}

function main(): void {
  const args = process.argv.slice(2);
  let checkpoint = "";
  let tcpPort: number | null = null;
  let stdio = false;
  for (let i = 0; i < args.length; i++) {
    if (args[i] === "--checkpoint" && args[i + 1]) checkpoint = args[++i];
    else if (args[i] === "--tcp" && args[i + 1]) tcpPort = parseInt(args[++i], 10);
    else if (args[i] === "--stdio") stdio = true;
  }
  if (!checkpoint || (tcpPort === null && !stdio)) {
    console.error("usage: node dist/serve.js --checkpoint ck.json (--tcp PORT | --stdio)");
    process.exit(6);
  }
  const ck = loadCheckpoint(checkpoint);
  if (stdio) serveStdio(ck);
  else serveTcp(ck, tcpPort as number);
}

if (require.main === module) {
  main();
}
