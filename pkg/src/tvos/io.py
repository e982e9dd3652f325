"""Binary Netpbm (P5/P6), EMB1 embedding containers, and head files.

All readers validate aggressively and raise a distinct exception type per
failure so the CLI can name what went wrong.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "FormatError",
    "BadMagicError",
    "UnsupportedVariantError",
    "MaxvalError",
    "TruncatedError",
    "NonFiniteError",
    "read_ppm",
    "write_ppm",
    "read_pgm",
    "write_pgm",
    "read_emb1",
    "write_emb1",
    "read_head",
    "write_head",
    "list_frames",
]


class FormatError(ValueError):
    """Base class for malformed input files."""


class BadMagicError(FormatError):
    pass


class UnsupportedVariantError(FormatError):
    pass


class MaxvalError(FormatError):
    pass


class TruncatedError(FormatError):
    pass


class NonFiniteError(FormatError):
    pass


_WS = b" \t\n\r\v\f"


def _parse_header(data: bytes, path) -> tuple[bytes, list[int], int]:
    """Return (magic, [width, height, maxval], payload offset)."""
    magic = data[:2]
    if magic in (b"P1", b"P2", b"P3", b"P4", b"P7"):
        raise UnsupportedVariantError(f"{path}: Netpbm variant {magic.decode()} is not supported "
                                      "(only binary P5/P6)")
    if magic not in (b"P5", b"P6"):
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected b'P5' or b'P6'")
    pos = 2
    values = []
    while len(values) < 3:
        # skip whitespace and comments between tokens
        while pos < len(data) and (data[pos] in _WS or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                end = data.find(b"\n", pos)
                pos = len(data) if end < 0 else end + 1
            else:
                pos += 1
        start = pos
        while pos < len(data) and data[pos] in b"0123456789":
            pos += 1
        if start == pos:
            raise TruncatedError(f"{path}: truncated or malformed header")
        values.append(int(data[start:pos]))
    if pos >= len(data) or data[pos] not in _WS:
        raise TruncatedError(f"{path}: missing whitespace after maxval")
    return magic, values, pos + 1


def _read_netpbm(path, want: bytes) -> np.ndarray:
    data = Path(path).read_bytes()
    magic, (width, height, maxval), offset = _parse_header(data, path)
    if magic != want:
        raise BadMagicError(f"{path}: expected {want.decode()}, found {magic.decode()}")
    if maxval != 255:
        raise MaxvalError(f"{path}: maxval {maxval} unsupported (need 255)")
    channels = 3 if magic == b"P6" else 1
    n = width * height * channels
    payload = data[offset:offset + n]
    if len(payload) < n:
        raise TruncatedError(f"{path}: payload has {len(payload)} bytes, expected {n}")
    arr = np.frombuffer(payload, dtype=np.uint8)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return arr.reshape(shape).copy()


def _write_netpbm(path, img: np.ndarray, magic: bytes) -> None:
    h, w = img.shape[:2]
    header = b"%s\n%d %d\n255\n" % (magic, w, h)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_ppm(path) -> np.ndarray:
    """Read a binary P6 image as uint8 (H, W, 3)."""
    return _read_netpbm(path, b"P6")


def write_ppm(path, img) -> None:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"PPM image must be (H, W, 3), got {img.shape}")
    if img.dtype != np.uint8:
        raise ValueError(f"PPM image must be uint8, got {img.dtype}")
    _write_netpbm(path, img, b"P6")


def read_pgm(path) -> np.ndarray:
    """Read a binary P5 image as uint8 (H, W)."""
    return _read_netpbm(path, b"P5")


def write_pgm(path, img) -> None:
    img = np.asarray(img)
    if img.ndim != 2:
        raise ValueError(f"PGM image must be 2-D, got {img.shape}")
    if img.size and (img.min() < 0 or img.max() > 255):
        raise ValueError("PGM values must lie in [0, 255]")
    _write_netpbm(path, img.astype(np.uint8), b"P5")


# -- EMB1 ---------------------------------------------------------------------

_EMB1_MAGIC = b"EMB1"
_EMB1_HEADER = struct.Struct("<4sIIII")


def write_emb1(path, grids) -> None:
    """Write a (T, H, W, C) float array as an EMB1 file (float32, little endian)."""
    arr = np.asarray(grids, dtype=np.float64)
    if arr.ndim != 4:
        raise ValueError(f"EMB1 payload must be (T, H, W, C), got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError("EMB1 payload contains non-finite values")
    t, h, w, c = arr.shape
    with open(path, "wb") as fh:
        fh.write(_EMB1_HEADER.pack(_EMB1_MAGIC, t, h, w, c))
        fh.write(arr.astype("<f4").tobytes())


def read_emb1(path) -> np.ndarray:
    """Read an EMB1 file into a float32 (T, H, W, C) array, unmodified."""
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != _EMB1_MAGIC:
        raise BadMagicError(f"{path}: bad magic {data[:4]!r}, expected {_EMB1_MAGIC!r}")
    if len(data) < _EMB1_HEADER.size:
        raise TruncatedError(f"{path}: truncated EMB1 header")
    _, t, h, w, c = _EMB1_HEADER.unpack_from(data)
    n = t * h * w * c
    expected = _EMB1_HEADER.size + 4 * n
    if len(data) < expected:
        raise TruncatedError(f"{path}: EMB1 payload has {len(data) - _EMB1_HEADER.size} bytes, "
                             f"expected {4 * n}")
    if len(data) > expected:
        raise FormatError(f"{path}: {len(data) - expected} trailing bytes after EMB1 payload")
    arr = np.frombuffer(data, dtype="<f4", count=n, offset=_EMB1_HEADER.size)
    arr = arr.reshape(t, h, w, c).astype(np.float32)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{path}: EMB1 payload contains non-finite values")
    return arr


# -- projection head text format ----------------------------------------------

_HEAD_MAGIC = "TVOSHEAD"


def write_head(path, weight, bias) -> None:
    """Header ``TVOSHEAD c_in c_out``, then weight rows, then the bias row."""
    weight = np.asarray(weight, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64)
    c_in, c_out = weight.shape
    if bias.shape != (c_out,):
        raise ValueError(f"bias shape {bias.shape} does not match c_out={c_out}")
    lines = [f"{_HEAD_MAGIC} {c_in} {c_out}"]
    lines += [" ".join(repr(float(v)) for v in row) for row in weight]
    lines.append(" ".join(repr(float(v)) for v in bias))
    Path(path).write_text("\n".join(lines) + "\n")


def read_head(path) -> tuple[np.ndarray, np.ndarray]:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise TruncatedError(f"{path}: empty head file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != _HEAD_MAGIC:
        raise BadMagicError(f"{path}: expected header '{_HEAD_MAGIC} c_in c_out', got {lines[0]!r}")
    c_in, c_out = int(head[1]), int(head[2])
    if len(lines) != c_in + 2:
        raise TruncatedError(f"{path}: expected {c_in + 2} lines, found {len(lines)}")
    try:
        rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    if any(len(r) != c_out for r in rows):
        raise FormatError(f"{path}: every row must hold {c_out} values")
    weight = np.array(rows[:c_in])
    bias = np.array(rows[c_in])
    if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
        raise NonFiniteError(f"{path}: head parameters must be finite")
    return weight, bias


def list_frames(directory, suffix: str) -> list[Path]:
    """Sorted files with ``suffix`` in ``directory``; errors if none exist."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory}: not a directory")
    files = sorted(p for p in directory.iterdir() if p.suffix == suffix)
    if not files:
        raise FileNotFoundError(f"{directory}: no *{suffix} files")
    return files


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
