import struct

import numpy as np
import pytest

from fogfed.neuralnet.network import default_arch, init_weights
from fogfed.neuralnet.weights import (
    WeightFormatError,
    WeightSet,
    deserialize_weights,
    serialize_weights,
)


def small_set():
    return WeightSet(
        [
            np.array([1.5, -2.0], dtype=np.float32),
            np.array([[0.25, 0.0, -1.0]], dtype=np.float32),
        ]
    )


def test_round_trip_bitwise():
    w = init_weights(default_arch(561, 6), seed=3)
    assert deserialize_weights(serialize_weights(w)) == w


def test_round_trip_preserves_shapes():
    w = small_set()
    back = deserialize_weights(serialize_weights(w))
    assert [t.shape for t in back.tensors] == [(2,), (1, 3)]
    assert all(t.dtype == np.float32 for t in back.tensors)


def test_golden_bytes():
    """The wire layout, spelled out with struct; the codec must match it exactly."""
    expected = b"FGFW"
    expected += struct.pack("<BI", 1, 2)  # version, tensor count
    expected += struct.pack("<II", 1, 2)  # rank 1, dim 2
    expected += struct.pack("<2f", 1.5, -2.0)
    expected += struct.pack("<III", 2, 1, 3)  # rank 2, dims (1, 3)
    expected += struct.pack("<3f", 0.25, 0.0, -1.0)
    assert serialize_weights(small_set()) == expected


def test_empty_weight_set_is_nine_bytes():
    data = serialize_weights(WeightSet([]))
    assert len(data) == 9
    assert deserialize_weights(data) == WeightSet([])


def test_rejects_float64():
    w = WeightSet([np.array([1.0], dtype=np.float64)])
    with pytest.raises(WeightFormatError, match="float32"):
        serialize_weights(w)


def test_bad_magic():
    data = b"XXXX" + serialize_weights(small_set())[4:]
    with pytest.raises(WeightFormatError, match="magic"):
        deserialize_weights(data)


def test_bad_version():
    data = bytearray(serialize_weights(small_set()))
    data[4] = 9
    with pytest.raises(WeightFormatError, match="version"):
        deserialize_weights(bytes(data))


def test_too_short():
    with pytest.raises(WeightFormatError, match="short"):
        deserialize_weights(b"FGFW\x01")


@pytest.mark.parametrize("cut", [10, 17, 25])
def test_truncation_detected(cut):
    data = serialize_weights(small_set())
    with pytest.raises(WeightFormatError, match="truncated"):
        deserialize_weights(data[:cut])


def test_trailing_bytes_detected():
    data = serialize_weights(small_set()) + b"\x00"
    with pytest.raises(WeightFormatError, match="trailing"):
        deserialize_weights(data)


def test_value_byte_flip_changes_payload():
    """Any value flip survives the round trip as a different tensor (no silent
    normalization), so digests over the serialization detect it."""
    data = bytearray(serialize_weights(small_set()))
    data[-1] ^= 0x01
    back = deserialize_weights(bytes(data))
    assert back != small_set()
