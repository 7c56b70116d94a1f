"""Synthetic generators (golden-pinned) and MVGF round-trips."""

import struct

import numpy as np
import pytest

from framescope.errors import (
    ArgumentError,
    BadMagicError,
    DimensionOverflowError,
    FormatError,
    TruncatedPayloadError,
)
from framescope.features import (
    EncoderSpec,
    read_features,
    splitmix64,
    synth_image_features,
    synth_video_features,
    tensor_digest,
    write_features,
)

GAMMA = 0x9E3779B97F4A7C15
MASK = (1 << 64) - 1


class TestSplitmix64:
    def test_reference_sequence(self):
        """First outputs of the canonical generator seeded with 1234567."""
        seq = [splitmix64((1234567 + i * GAMMA) & MASK) for i in range(3)]
        assert seq == [6457827717110365317, 3203168211198807973, 9817491932198370423]

    def test_zero_input(self):
        assert splitmix64(0) == 16294208416658607535

    def test_vectorized_matches_scalar(self):
        xs = np.array([0, 1, 42, MASK], dtype=np.uint64)
        vec = splitmix64(xs)
        assert [int(v) for v in vec] == [splitmix64(int(x)) for x in xs]


class TestSyntheticImage:
    def test_shape_for_default_geometry(self):
        spec = EncoderSpec("synthetic-image", (14, 14), 768)
        feats = synth_image_features(0, 16, spec)
        assert feats.tensor.shape == (16, 14, 14, 768)
        assert feats.tensor.dtype == np.float32

    def test_deterministic(self):
        spec = EncoderSpec("synthetic-image", (4, 4), 8)
        a = synth_image_features(9, 3, spec)
        b = synth_image_features(9, 3, spec)
        assert np.array_equal(a.tensor, b.tensor)

    def test_seed_changes_values(self):
        spec = EncoderSpec("synthetic-image", (4, 4), 8)
        a = synth_image_features(0, 2, spec)
        b = synth_image_features(1, 2, spec)
        assert not np.array_equal(a.tensor, b.tensor)

    def test_values_in_unit_range(self):
        feats = synth_image_features(3, 2, EncoderSpec("synthetic-image", (5, 5), 16))
        assert np.all(feats.tensor >= -1.0) and np.all(feats.tensor < 1.0)

    def test_golden_digest(self):
        feats = synth_image_features(7, 2, EncoderSpec("synthetic-image", (3, 3), 4))
        assert tensor_digest(feats.tensor) == "e83985d27afcb408"

    def test_golden_digest_default_geometry(self):
        feats = synth_image_features(0, 16)
        assert tensor_digest(feats.tensor) == "74a76adf454cb876"

    def test_zero_frames_rejected(self):
        with pytest.raises(ArgumentError):
            synth_image_features(0, 0)


class TestSyntheticVideo:
    def test_shape_for_default_geometry(self):
        spec = EncoderSpec("synthetic-video", (14, 14), 576)
        feats = synth_video_features(0, list(range(8)), spec)
        assert feats.tensor.shape == (8, 14, 14, 576)

    def test_deterministic(self):
        spec = EncoderSpec("synthetic-video", (2, 2), 3)
        a = synth_video_features(5, [1, 4], spec)
        b = synth_video_features(5, [1, 4], spec)
        assert np.array_equal(a.tensor, b.tensor)

    def test_index_set_changes_values(self):
        spec = EncoderSpec("synthetic-video", (2, 2), 3)
        a = synth_video_features(5, [0, 2], spec)
        b = synth_video_features(5, [0, 3], spec)
        assert np.array_equal(a.tensor[0], b.tensor[0])  # shared first frame
        assert not np.array_equal(a.tensor[1], b.tensor[1])

    def test_golden_digest(self):
        feats = synth_video_features(7, [0, 2, 5], EncoderSpec("synthetic-video", (2, 2), 3))
        assert tensor_digest(feats.tensor) == "dc659a07405452cd"

    def test_golden_digest_default_geometry(self):
        feats = synth_video_features(0, list(range(8)))
        assert tensor_digest(feats.tensor) == "ed07c8c590d93632"

    @pytest.mark.parametrize("bad", [[], [3, 2], [1, 1], [-1, 0]])
    def test_bad_index_lists_rejected(self, bad):
        with pytest.raises(ArgumentError):
            synth_video_features(0, bad)


class TestMvgfRoundTrip:
    @pytest.mark.parametrize("dtype", [np.float32, np.float64])
    @pytest.mark.parametrize("rank", [1, 2, 3, 4])
    def test_round_trip_bitwise(self, tmp_path, dtype, rank):
        rng = np.random.default_rng(rank)
        shape = tuple(rng.integers(1, 5) for _ in range(rank))
        t = rng.standard_normal(shape).astype(dtype)
        path = tmp_path / "t.mvgf"
        write_features(path, t)
        back = read_features(path)
        assert back.dtype == t.dtype
        assert back.shape == t.shape
        assert np.array_equal(back.view(np.uint8), t.view(np.uint8))

    def test_round_trip_sweep(self, tmp_path):
        rng = np.random.default_rng(0)
        for i in range(100):
            rank = int(rng.integers(1, 5))
            shape = tuple(int(d) for d in rng.integers(1, 6, size=rank))
            dtype = np.float32 if i % 2 == 0 else np.float64
            t = rng.standard_normal(shape).astype(dtype)
            path = tmp_path / f"t{i}.mvgf"
            write_features(path, t)
            back = read_features(path)
            assert back.shape == t.shape and back.dtype == t.dtype
            assert np.array_equal(back.view(np.uint8), t.view(np.uint8))

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.mvgf"
        path.write_bytes(b"XXXX" + b"\x00" * 20)
        with pytest.raises(BadMagicError):
            read_features(path)

    def test_truncated_payload(self, tmp_path):
        # header declares 2x2 float32 but only 3 floats follow
        path = tmp_path / "trunc.mvgf"
        body = struct.pack("<BB", 1, 2) + struct.pack("<2Q", 2, 2)
        payload = struct.pack("<3f", 1.0, 2.0, 3.0)
        path.write_bytes(b"MVGF" + struct.pack("<I", 1) + body + payload)
        with pytest.raises(TruncatedPayloadError):
            read_features(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "short.mvgf"
        path.write_bytes(b"MVGF" + struct.pack("<I", 1) + b"\x01")
        with pytest.raises(TruncatedPayloadError):
            read_features(path)

    def test_dimension_overflow(self, tmp_path):
        path = tmp_path / "huge.mvgf"
        body = struct.pack("<BB", 1, 2) + struct.pack("<2Q", 2**40, 2**40)
        path.write_bytes(b"MVGF" + struct.pack("<I", 1) + body)
        with pytest.raises(DimensionOverflowError):
            read_features(path)

    def test_unknown_dtype_code(self, tmp_path):
        path = tmp_path / "dtype.mvgf"
        body = struct.pack("<BB", 9, 1) + struct.pack("<Q", 1) + struct.pack("<f", 0.0)
        path.write_bytes(b"MVGF" + struct.pack("<I", 1) + body)
        with pytest.raises(FormatError):
            read_features(path)

    def test_unsupported_version(self, tmp_path):
        path = tmp_path / "ver.mvgf"
        body = struct.pack("<BB", 1, 1) + struct.pack("<Q", 1) + struct.pack("<f", 0.0)
        path.write_bytes(b"MVGF" + struct.pack("<I", 2) + body)
        with pytest.raises(FormatError):
            read_features(path)

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "extra.mvgf"
        t = np.zeros((2,), dtype=np.float32)
        write_features(path, t)
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(FormatError):
            read_features(path)


class TestDigest:
    def test_digest_is_stable_and_shape_aware(self):
        a = np.arange(6, dtype=np.float32).reshape(2, 3)
        b = np.arange(6, dtype=np.float32).reshape(3, 2)
        assert tensor_digest(a) == tensor_digest(a.copy())
        assert tensor_digest(a) != tensor_digest(b)
        assert tensor_digest(a) != tensor_digest(a.astype(np.float64))
