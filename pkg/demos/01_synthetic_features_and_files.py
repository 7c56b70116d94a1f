"""Deterministic encoder stand-ins and the MVGF tensor container.

Generates reproducible image/video features, shows that the value streams
are pure functions of (seed, arguments), and round-trips a tensor through
the binary container.
"""

import tempfile
from pathlib import Path

import numpy as np

from framescope import (
    EncoderSpec,
    read_features,
    synth_image_features,
    synth_video_features,
    tensor_digest,
    write_features,
)

# Image features: one patch grid per frame, values uniform in [-1, 1).
spec = EncoderSpec("synthetic-image", grid=(14, 14), depth=768)
feats = synth_image_features(seed=7, frames=16, spec=spec)
print("image features:", feats.tensor.shape, feats.tensor.dtype)
print("  digest:", tensor_digest(feats.tensor))

again = synth_image_features(seed=7, frames=16, spec=spec)
print("  regenerated bitwise equal:", np.array_equal(feats.tensor, again.tensor))

other_seed = synth_image_features(seed=8, frames=16, spec=spec)
print("  different seed differs:", not np.array_equal(feats.tensor, other_seed.tensor))

# Video features consume the selected key-frame indices, so a different
# selection produces different downstream values.
vspec = EncoderSpec("synthetic-video", grid=(14, 14), depth=576)
clip_a = synth_video_features(seed=7, keyframe_indices=[0, 2, 4, 6], spec=vspec)
clip_b = synth_video_features(seed=7, keyframe_indices=[0, 2, 4, 7], spec=vspec)
print("video features:", clip_a.tensor.shape)
print("  shared frames equal:", np.array_equal(clip_a.tensor[:3], clip_b.tensor[:3]))
print("  selected frames differ:", not np.array_equal(clip_a.tensor[3], clip_b.tensor[3]))

# MVGF: magic 'MVGF', version, dtype code, rank, dims, raw little-endian payload.
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "features.mvgf"
    write_features(path, feats.tensor)
    back = read_features(path)
    print("round trip bitwise lossless:", np.array_equal(back, feats.tensor))
    print("file size bytes:", path.stat().st_size)
