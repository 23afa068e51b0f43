"""Binary and CSV serialization of feature matrices.

Binary layout (little-endian throughout)::

    bytes 0-3   magic b"FEA1"
    bytes 4-7   uint32 frame count
    bytes 8-11  uint32 dimension count
    bytes 12-   frames * dims float64 values, row-major

The CSV form is a debugging aid: a header row ``c0,c1,...`` followed by
one comma-separated row per frame with '.' as the decimal separator.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

FEATURE_MAGIC = b"FEA1"
_HEADER = struct.Struct("<4sII")


class FeatureFileError(ValueError):
    """Raised when a feature file is truncated or malformed."""


def _as_feature_matrix(features) -> np.ndarray:
    arr = np.ascontiguousarray(features, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("features must be a non-empty (frames, dims) matrix")
    if not np.all(np.isfinite(arr)):
        raise ValueError("features must be finite")
    return arr


def write_features(path, features) -> None:
    """Write a feature matrix in the FEA1 binary layout."""
    arr = _as_feature_matrix(features)
    frames, dims = arr.shape
    payload = _HEADER.pack(FEATURE_MAGIC, frames, dims) + arr.astype("<f8").tobytes(order="C")
    Path(path).write_bytes(payload)


def read_features(path) -> np.ndarray:
    """Read a FEA1 feature file back into a (frames, dims) matrix."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise FeatureFileError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, frames, dims = _HEADER.unpack_from(blob)
    if magic != FEATURE_MAGIC:
        raise FeatureFileError(f"{path}: bad magic {magic!r} (expected {FEATURE_MAGIC!r})")
    if frames == 0 or dims == 0:
        raise FeatureFileError(f"{path}: empty matrix ({frames} x {dims})")
    expected = _HEADER.size + frames * dims * 8
    if len(blob) != expected:
        raise FeatureFileError(
            f"{path}: payload is {len(blob)} bytes, expected {expected} for {frames} x {dims}"
        )
    arr = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(frames, dims)
    values = arr.astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise FeatureFileError(f"{path}: non-finite values in payload")
    return values


def write_features_csv(path, features) -> None:
    """Write a feature matrix as CSV with a ``c0,c1,...`` header row."""
    arr = _as_feature_matrix(features)
    header = ",".join(f"c{i}" for i in range(arr.shape[1]))
    lines = [header]
    for row in arr:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
