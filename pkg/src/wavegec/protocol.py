"""Wire protocol for external denoisers ("DNZ1"), client side plus a loopback
echo server for conformance testing.

Framing: every message is a little-endian u32 byte length followed by that
many payload bytes, over TCP or a child process's stdin/stdout.

Request payload:
    magic b"DNZ1" | op u8 (0x01 = denoise) | H u32 | W u32 | K u8 | L u16 |
    L float64 subband precisions |
    (1 + K) complex images, each H*W float32 (re, im) pairs row-major
    (the noisy image first, then the K noise-channel realizations).

Response payload:
    magic b"DNZ1" | status u8 (0 = ok, 1 = shape error, 2 = internal error) |
    on ok, one complex image encoded as above.

Run ``python -m wavegec.protocol --echo (--tcp PORT | --stdio)`` to start an
echo server that returns the noisy image unchanged.
"""

import argparse
import socket
import struct
import subprocess
import sys

import numpy as np

MAGIC = b"DNZ1"
OP_DENOISE = 0x01
STATUS_OK = 0
STATUS_SHAPE = 1
STATUS_INTERNAL = 2

_REQ_FIXED = struct.Struct("<4sBIIBH")
_RESP_FIXED = struct.Struct("<4sB")
MAX_PIXELS = 4096 * 4096


class ProtocolError(RuntimeError):
    """Malformed frame or unexpected response."""


class EndpointTimeout(ProtocolError):
    """The endpoint did not answer in time."""


class ServerReportedError(ProtocolError):
    """The endpoint answered with a nonzero status."""

    def __init__(self, status):
        super().__init__(f"denoiser endpoint returned status {status}")
        self.status = status


def _pack_image(img):
    img = np.asarray(img)
    inter = np.empty(img.shape + (2,), dtype="<f4")
    inter[..., 0] = img.real
    inter[..., 1] = img.imag
    return inter.tobytes()


def _unpack_image(buf, offset, h, w):
    need = h * w * 8
    if len(buf) < offset + need:
        raise ProtocolError("truncated image payload")
    inter = np.frombuffer(buf, dtype="<f4", count=h * w * 2, offset=offset)
    inter = inter.reshape(h, w, 2)
    return (inter[..., 0] + 1j * inter[..., 1]).astype(np.complex128), offset + need


def encode_request(u, noises, gammas):
    u = np.asarray(u)
    h, w = u.shape
    k = len(noises)
    gammas = np.asarray(gammas, dtype="<f8")
    head = _REQ_FIXED.pack(MAGIC, OP_DENOISE, h, w, k, gammas.size)
    parts = [head, gammas.tobytes(), _pack_image(u)]
    for nimg in noises:
        if np.asarray(nimg).shape != (h, w):
            raise ProtocolError("noise channel shape differs from the image")
        parts.append(_pack_image(nimg))
    return b"".join(parts)


def decode_request(buf):
    if len(buf) < _REQ_FIXED.size:
        raise ProtocolError("truncated request header")
    magic, op, h, w, k, n_gamma = _REQ_FIXED.unpack_from(buf)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if op != OP_DENOISE:
        raise ProtocolError(f"unknown op {op:#x}")
    if h * w > MAX_PIXELS or h == 0 or w == 0:
        raise ProtocolError(f"image size {h}x{w} out of range")
    off = _REQ_FIXED.size
    if len(buf) < off + 8 * n_gamma:
        raise ProtocolError("truncated precision block")
    gammas = np.frombuffer(buf, dtype="<f8", count=n_gamma, offset=off).copy()
    off += 8 * n_gamma
    u, off = _unpack_image(buf, off, h, w)
    noises = []
    for _ in range(k):
        nimg, off = _unpack_image(buf, off, h, w)
        noises.append(nimg)
    if off != len(buf):
        raise ProtocolError(f"{len(buf) - off} trailing bytes in request")
    return u, noises, gammas


def encode_response(status, img=None):
    head = _RESP_FIXED.pack(MAGIC, status)
    if status == STATUS_OK:
        return head + _pack_image(img)
    return head


def decode_response(buf, h, w):
    if len(buf) < _RESP_FIXED.size:
        raise ProtocolError("truncated response header")
    magic, status = _RESP_FIXED.unpack_from(buf)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if status != STATUS_OK:
        raise ServerReportedError(status)
    img, off = _unpack_image(buf, _RESP_FIXED.size, h, w)
    if off != len(buf):
        raise ProtocolError(f"{len(buf) - off} trailing bytes in response")
    return img


def write_frame(stream, payload):
    stream.write(struct.pack("<I", len(payload)) + payload)
    stream.flush()


def read_frame(stream, max_len=256 * 1024 * 1024):
    raw = _read_exact(stream, 4)
    if raw is None:
        return None
    (length,) = struct.unpack("<I", raw)
    if length > max_len:
        raise ProtocolError(f"frame of {length} bytes exceeds limit")
    body = _read_exact(stream, length)
    if body is None:
        raise ProtocolError("connection closed mid-frame")
    return body


def _read_exact(stream, n):
    chunks = []
    got = 0
    while got < n:
        chunk = stream.read(n - got)
        if not chunk:
            if got == 0:
                return None
            raise ProtocolError("connection closed mid-frame")
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)


class DenoiserEndpoint:
    """Client connection to a denoiser server.

    spec is either "HOST:PORT" (TCP) or "stdio:CMD ARGS..." (spawn CMD and
    talk over its stdin/stdout).
    """

    def __init__(self, spec, timeout=60.0):
        self.spec = spec
        self.timeout = timeout
        self._sock = None
        self._proc = None
        if spec.startswith("stdio:"):
            cmd = spec[len("stdio:"):].split()
            self._proc = subprocess.Popen(cmd, stdin=subprocess.PIPE,
                                          stdout=subprocess.PIPE)
            self._rd, self._wr = self._proc.stdout, self._proc.stdin
        else:
            host, _, port = spec.rpartition(":")
            try:
                self._sock = socket.create_connection((host, int(port)), timeout=timeout)
            except (OSError, ValueError) as exc:
                raise ProtocolError(f"cannot connect to {spec}: {exc}") from exc
            f = self._sock.makefile("rwb")
            self._rd = self._wr = f

    def close(self):
        if self._sock is not None:
            self._rd.close()
            self._sock.close()
            self._sock = None
        if self._proc is not None:
            self._proc.stdin.close()
            self._proc.wait(timeout=10)
            self._proc = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def roundtrip(self, payload):
        try:
            write_frame(self._wr, payload)
            resp = read_frame(self._rd)
        except socket.timeout as exc:
            raise EndpointTimeout(f"no answer from {self.spec}") from exc
        except (OSError, ValueError) as exc:
            raise ProtocolError(f"transport failure: {exc}") from exc
        if resp is None:
            raise ProtocolError("endpoint closed the connection")
        return resp

    def denoise(self, u, noises, gammas):
        h, w = np.asarray(u).shape
        resp = self.roundtrip(encode_request(u, noises, gammas))
        out = decode_response(resp, h, w)
        if out.shape != (h, w):
            raise ProtocolError(f"response shape {out.shape} differs from input")
        return out


def _handle_echo(payload):
    try:
        u, _noises, _gammas = decode_request(payload)
    except ProtocolError:
        return encode_response(STATUS_SHAPE)
    return encode_response(STATUS_OK, u)


def serve_echo_stdio():
    rd = sys.stdin.buffer
    wr = sys.stdout.buffer
    while True:
        payload = read_frame(rd)
        if payload is None:
            return
        write_frame(wr, _handle_echo(payload))


def serve_echo_tcp(port, once=False):
    srv = socket.create_server(("127.0.0.1", port))
    port = srv.getsockname()[1]
    print(f"echo denoiser listening on 127.0.0.1:{port}", flush=True)
    while True:
        conn, _ = srv.accept()
        with conn, conn.makefile("rwb") as f:
            while True:
                payload = read_frame(f)
                if payload is None:
                    break
                write_frame(f, _handle_echo(payload))
        if once:
            return


def main(argv=None):
    ap = argparse.ArgumentParser(description="DNZ1 echo server (test fixture)")
    ap.add_argument("--echo", action="store_true", required=True)
    grp = ap.add_mutually_exclusive_group(required=True)
    grp.add_argument("--tcp", type=int, metavar="PORT")
    grp.add_argument("--stdio", action="store_true")
    ap.add_argument("--once", action="store_true", help="exit after one connection")
    args = ap.parse_args(argv)
    if args.stdio:
        serve_echo_stdio()
    else:
        serve_echo_tcp(args.tcp, once=args.once)


if __name__ == "__main__":
    main()
