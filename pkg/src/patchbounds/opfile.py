"""PBOP1 operator container.

Layout (all integers u64 little-endian)::

    b"PBOP1"
    count
    count x { name_len, name (ASCII), rows, cols, rows*cols x (re f64, im f64) }
    meta_len, meta (UTF-8 "key=value\\n" lines, sorted by key)

Matrices are row-major.  Readers should reject anything after the metadata.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .mom import OperatorSet

MAGIC = b"PBOP1"
MATRICES = ("Z", "R", "X", "R_ohm", "F_s")
_U64 = struct.Struct("<Q")
_CDT = np.dtype("<c16")


class OperatorFileError(ValueError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


def encode(matrices: dict, metadata: dict | None = None) -> bytes:
    parts = [MAGIC, _U64.pack(len(matrices))]
    for name, A in matrices.items():
        A = np.asarray(A)
        if A.ndim != 2:
            raise ValueError(f"{name}: only 2-D matrices can be stored")
        raw = name.encode("ascii")
        parts += [_U64.pack(len(raw)), raw, _U64.pack(A.shape[0]), _U64.pack(A.shape[1])]
        parts.append(np.ascontiguousarray(A, dtype=_CDT).tobytes())
    meta = "".join(f"{k}={v}\n" for k, v in sorted((metadata or {}).items())).encode()
    parts += [_U64.pack(len(meta)), meta]
    return b"".join(parts)


class _Reader:
    def __init__(self, buf):
        self.buf = memoryview(buf)
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise OperatorFileError(f"truncated file: need {n} bytes for {what}, {len(self.buf) - self.pos} left", self.pos)
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u64(self, what):
        return _U64.unpack(self.take(8, what))[0]


def decode(buf: bytes) -> tuple[dict, dict]:
    r = _Reader(buf)
    if bytes(r.take(len(MAGIC), "magic")) != MAGIC:
        raise OperatorFileError("bad magic, not a PBOP1 file", 0)
    count = r.u64("matrix count")
    mats = {}
    for _ in range(count):
        start = r.pos
        n = r.u64("name length")
        try:
            name = bytes(r.take(n, "name")).decode("ascii")
        except UnicodeDecodeError:
            raise OperatorFileError("matrix name is not ASCII", start) from None
        rows, cols = r.u64(f"{name} rows"), r.u64(f"{name} cols")
        if rows * cols * 16 > len(r.buf) - r.pos:
            raise OperatorFileError(f"truncated file: {name} declares {rows}x{cols} entries", r.pos)
        data = r.take(rows * cols * 16, name)
        mats[name] = np.frombuffer(data, dtype=_CDT).astype(complex).reshape(rows, cols)
    meta_len = r.u64("metadata length")
    meta = {}
    for line in bytes(r.take(meta_len, "metadata")).decode().splitlines():
        k, sep, v = line.partition("=")
        if not sep:
            raise OperatorFileError(f"malformed metadata line {line!r}", r.pos)
        meta[k] = v
    if r.pos != len(r.buf):
        raise OperatorFileError(f"{len(r.buf) - r.pos} trailing bytes", r.pos)
    return mats, meta


def dump(ops: OperatorSet, path) -> None:
    mats = {name: getattr(ops, name) for name in MATRICES}
    Path(path).write_bytes(encode(mats, ops.metadata))


def load(path) -> OperatorSet:
    mats, meta = decode(Path(path).read_bytes())
    missing = [m for m in MATRICES if m not in mats]
    if missing:
        raise OperatorFileError(f"missing matrices: {', '.join(missing)}")
    N = mats["Z"].shape
    if N[0] != N[1]:
        raise OperatorFileError(f"Z is not square: {N}")
    for name in ("R", "X", "R_ohm"):
        if mats[name].shape != N:
            raise OperatorFileError(f"{name} has shape {mats[name].shape}, expected {N}")
    if mats["F_s"].shape[1] != N[0]:
        raise OperatorFileError(f"F_s has {mats['F_s'].shape[1]} columns, expected {N[0]}")
    return OperatorSet(mats["Z"], mats["R"], mats["X"], mats["R_ohm"], mats["F_s"], meta)
