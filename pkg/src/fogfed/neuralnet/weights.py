"""WeightSet container and the canonical binary format used to ship weights.

Wire layout (all integers little-endian):
  magic  b"FGFW"
  u8     version (1)
  u32    tensor count
  per tensor:
    u32    rank
    u32[]  dims
    f32[]  values, IEEE-754, row-major (C order)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

WEIGHT_MAGIC = b"FGFW"
WEIGHT_VERSION = 1


class WeightFormatError(ValueError):
    """Raised when a weight payload does not match the canonical layout."""


@dataclass
class WeightSet:
    """Ordered list of layer tensors; the unit that is trained, shipped, and fused.

    tensors hold float32 values (float64 only in the high-precision gradient
    check path, which is never serialized). layer_of maps each tensor to the
    index of the layer that owns it; it is derived from the architecture and
    not part of the wire format.
    """

    tensors: list[np.ndarray]
    layer_of: tuple[int, ...] | None = None

    def __post_init__(self):
        self.tensors = [np.asarray(t) for t in self.tensors]
        if self.layer_of is not None and len(self.layer_of) != len(self.tensors):
            raise ValueError("layer_of length must match tensor count")

    @property
    def n_params(self) -> int:
        return int(sum(t.size for t in self.tensors))

    def copy(self) -> "WeightSet":
        return WeightSet([t.copy() for t in self.tensors], self.layer_of)

    def astype(self, dtype) -> "WeightSet":
        return WeightSet([t.astype(dtype) for t in self.tensors], self.layer_of)

    def __eq__(self, other) -> bool:
        if not isinstance(other, WeightSet):
            return NotImplemented
        if len(self.tensors) != len(other.tensors):
            return False
        for a, b in zip(self.tensors, other.tensors):
            if a.shape != b.shape or a.dtype != b.dtype or a.tobytes() != b.tobytes():
                return False
        return True


def serialize_weights(weights: WeightSet) -> bytes:
    """Encode a float32 WeightSet into the canonical byte layout (round-trip exact)."""
    parts = [WEIGHT_MAGIC, struct.pack("<BI", WEIGHT_VERSION, len(weights.tensors))]
    for t in weights.tensors:
        if t.dtype != np.float32:
            raise WeightFormatError(f"serialize_weights requires float32 tensors, got {t.dtype}")
        parts.append(struct.pack("<I", t.ndim))
        parts.append(struct.pack(f"<{t.ndim}I", *t.shape))
        parts.append(np.ascontiguousarray(t, dtype="<f4").tobytes())
    return b"".join(parts)


def deserialize_weights(data: bytes) -> WeightSet:
    """Decode the canonical byte layout back into a WeightSet."""
    if len(data) < 9:
        raise WeightFormatError(f"payload too short ({len(data)} bytes, need at least 9)")
    if data[:4] != WEIGHT_MAGIC:
        raise WeightFormatError(f"bad magic {data[:4]!r}, expected {WEIGHT_MAGIC!r}")
    version, count = struct.unpack_from("<BI", data, 4)
    if version != WEIGHT_VERSION:
        raise WeightFormatError(f"unsupported version {version}")
    offset = 9
    tensors = []
    for i in range(count):
        if offset + 4 > len(data):
            raise WeightFormatError(f"truncated payload reading rank of tensor {i}")
        (rank,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if offset + 4 * rank > len(data):
            raise WeightFormatError(f"truncated payload reading dims of tensor {i}")
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        n_values = 1
        for d in dims:
            n_values *= d
        nbytes = 4 * n_values
        if offset + nbytes > len(data):
            raise WeightFormatError(
                f"truncated payload: tensor {i} declares {n_values} values "
                f"but only {len(data) - offset} bytes remain"
            )
        values = np.frombuffer(data, dtype="<f4", count=n_values, offset=offset)
        offset += nbytes
        tensors.append(values.reshape(dims).astype(np.float32))
    if offset != len(data):
        raise WeightFormatError(f"{len(data) - offset} trailing bytes after last tensor")
    return WeightSet(tensors)
