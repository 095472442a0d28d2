import struct

import numpy as np
import pytest

from patchbounds import opfile
from patchbounds.opfile import MAGIC, OperatorFileError


def _read_norms(buf):
    """Independent reader: walks the byte layout with struct only."""
    pos = len(MAGIC)
    (count,) = struct.unpack_from("<Q", buf, pos)
    pos += 8
    out = {}
    for _ in range(count):
        (n,) = struct.unpack_from("<Q", buf, pos)
        pos += 8
        name = buf[pos : pos + n].decode("ascii")
        pos += n
        rows, cols = struct.unpack_from("<QQ", buf, pos)
        pos += 16
        vals = struct.unpack_from(f"<{2 * rows * cols}d", buf, pos)
        pos += 16 * rows * cols
        out[name] = (rows, cols, sum(v * v for v in vals) ** 0.5)
    return out


def test_round_trip_byte_identical(small_lossy, tmp_path):
    *_, ops = small_lossy
    p1, p2 = tmp_path / "a.pbop", tmp_path / "b.pbop"
    opfile.dump(ops, p1)
    back = opfile.load(p1)
    opfile.dump(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    for name in opfile.MATRICES:
        np.testing.assert_array_equal(getattr(back, name), getattr(ops, name))
    assert back.metadata == ops.metadata


def test_independent_reader_norms(small_lossy, tmp_path):
    *_, ops = small_lossy
    p = tmp_path / "a.pbop"
    opfile.dump(ops, p)
    norms = _read_norms(p.read_bytes())
    assert list(norms) == list(opfile.MATRICES)
    for name in opfile.MATRICES:
        A = getattr(ops, name)
        rows, cols, nrm = norms[name]
        assert (rows, cols) == A.shape
        ref = np.linalg.norm(A)
        assert abs(nrm - ref) <= 1e-12 * max(ref, 1e-300)


def test_truncated_file_reports_offset(small_lossy, tmp_path):
    *_, ops = small_lossy
    buf = opfile.encode({n: getattr(ops, n) for n in opfile.MATRICES}, ops.metadata)
    cut = len(buf) // 3
    with pytest.raises(OperatorFileError, match="truncated") as e:
        opfile.decode(buf[:cut])
    assert e.value.offset is not None and 0 < e.value.offset <= cut
    assert "offset" in str(e.value)


def test_bad_magic():
    with pytest.raises(OperatorFileError, match="magic") as e:
        opfile.decode(b"PBOP2" + bytes(16))
    assert e.value.offset == 0


def test_trailing_bytes_rejected():
    buf = opfile.encode({"A": np.eye(2)}, {"k": "v"})
    opfile.decode(buf)
    with pytest.raises(OperatorFileError, match="trailing"):
        opfile.decode(buf + b"\0")


def test_dimension_mismatch(tmp_path):
    mats = {"Z": np.eye(3), "R": np.eye(3), "X": np.eye(2), "R_ohm": np.eye(3), "F_s": np.ones((4, 3))}
    p = tmp_path / "bad.pbop"
    p.write_bytes(opfile.encode(mats))
    with pytest.raises(OperatorFileError, match="X has shape"):
        opfile.load(p)
    mats["X"] = np.eye(3)
    del mats["F_s"]
    p.write_bytes(opfile.encode(mats))
    with pytest.raises(OperatorFileError, match="missing"):
        opfile.load(p)


def test_layout_header_is_little_endian():
    buf = opfile.encode({"AB": np.array([[1 + 2j]])}, {})
    assert buf[:5] == MAGIC
    assert buf[5:13] == (1).to_bytes(8, "little")
    assert buf[13:21] == (2).to_bytes(8, "little")
    assert buf[21:23] == b"AB"
    assert struct.unpack("<dd", buf[39:55]) == (1.0, 2.0)
