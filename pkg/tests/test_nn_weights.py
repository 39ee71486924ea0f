import struct

import numpy as np
import pytest

from c2fseg import ModelWeights, UNetSpec, load_weights, save_weights
from c2fseg.errors import FormatError
from c2fseg.nn.unet import init_weights


@pytest.fixture
def weights(rng):
    return ModelWeights(
        {
            "enc0.w": rng.standard_normal((4, 1, 3, 3)).astype(np.float32),
            "enc0.b": rng.standard_normal(4).astype(np.float32),
            "head.w": rng.standard_normal((1, 4, 1, 1)).astype(np.float32),
        }
    )


class TestRoundTrip:
    def test_bit_exact(self, weights, tmp_path):
        path = tmp_path / "w.c2fw"
        save_weights(weights, path)
        assert load_weights(path) == weights

    def test_full_net_roundtrip(self, tmp_path):
        spec = UNetSpec(depth=2, base_channels=8)
        w = ModelWeights(init_weights(spec, 42))
        save_weights(w, tmp_path / "net.c2fw")
        back = load_weights(tmp_path / "net.c2fw")
        assert back == w
        assert back.names() == w.names()

    def test_empty_parameter_set(self, tmp_path):
        w = ModelWeights({})
        save_weights(w, tmp_path / "empty.c2fw")
        assert len(load_weights(tmp_path / "empty.c2fw")) == 0

    def test_scalar_rank_zero(self, tmp_path):
        w = ModelWeights({"s": np.float32(3.5)})
        save_weights(w, tmp_path / "s.c2fw")
        assert load_weights(tmp_path / "s.c2fw")["s"] == np.float32(3.5)


class TestRejection:
    def test_bad_magic(self, weights, tmp_path):
        path = tmp_path / "w.c2fw"
        save_weights(weights, path)
        raw = bytearray(path.read_bytes())
        raw[:4] = b"NOPE"
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="magic"):
            load_weights(path)

    def test_bad_version(self, weights, tmp_path):
        path = tmp_path / "w.c2fw"
        save_weights(weights, path)
        raw = bytearray(path.read_bytes())
        raw[4:8] = struct.pack("<I", 9)
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="version 9"):
            load_weights(path)

    def test_truncation_names_parameter(self, weights, tmp_path):
        path = tmp_path / "w.c2fw"
        save_weights(weights, path)
        raw = path.read_bytes()
        # cut into the middle of the last parameter's payload
        path.write_bytes(raw[: len(raw) - 12])
        with pytest.raises(FormatError, match="truncated at parameter 2"):
            load_weights(path)

    def test_truncation_at_first_parameter(self, weights, tmp_path):
        path = tmp_path / "w.c2fw"
        save_weights(weights, path)
        path.write_bytes(path.read_bytes()[:14])
        with pytest.raises(FormatError, match="truncated at parameter 0"):
            load_weights(path)

    def test_crc_corruption(self, weights, tmp_path):
        path = tmp_path / "w.c2fw"
        save_weights(weights, path)
        raw = bytearray(path.read_bytes())
        raw[-8] ^= 0xFF  # inside the last parameter's payload, structure intact
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="checksum mismatch"):
            load_weights(path)

    def test_trailing_junk(self, weights, tmp_path):
        path = tmp_path / "w.c2fw"
        save_weights(weights, path)
        path.write_bytes(path.read_bytes() + b"JUNKJUNK")
        with pytest.raises(FormatError):
            load_weights(path)

    def test_nonfinite_parameters_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            ModelWeights({"w": np.array([np.inf], dtype=np.float32)})
