"""Frame feature extraction at two granularities, with cost accounting.

The fine encoder sees the whole raw frame vector; the coarse encoder is
narrower and sees only a masked prefix of the coordinates. Both project
to the common model width (2d) so the reasoning pipeline never cares
which one produced a feature. Extraction costs are flop-count stand-ins
(GFLOP-equivalents per frame) tracked by a ledger during inference.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .numerics import MlpParams, Tensor, init_mlp, mlp, stack


class Granularity(IntEnum):
    COARSE = 0
    FINE = 1


class BoundsError(IndexError):
    """Frame index outside the video."""


@dataclass
class VideoSource:
    """Ordered raw frame vectors; the thing glimpses are taken from."""

    frames: np.ndarray  # (T, D_raw)
    id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] < 1:
            raise ValueError("VideoSource needs a (T >= 1, D_raw) frame array")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def raw_dim(self) -> int:
        return self.frames.shape[1]


@dataclass
class EncoderPairParams:
    """Fine and coarse MLP encoders ending in a shared-width projection."""

    fine: MlpParams
    coarse: MlpParams
    coarse_mask: np.ndarray  # (D_raw,) of {0,1}; coarse sees mask * frame

    @property
    def feature_dim(self) -> int:
        return self.fine.layers[-1].out_features

    def named(self, prefix: str = "encoders") -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for tag, m in (("fine", self.fine), ("coarse", self.coarse)):
            for i, layer in enumerate(m.layers):
                out[f"{prefix}.{tag}.{i}.w"] = layer.w
                out[f"{prefix}.{tag}.{i}.b"] = layer.b
        return out


def init_encoders(
    raw_dim: int,
    feature_dim: int,
    out_dim: int,
    width_fine: int,
    width_coarse: int,
    coarse_visible_dims: int,
    rng: np.random.Generator,
) -> EncoderPairParams:
    if not 0 < coarse_visible_dims <= raw_dim:
        raise ValueError("coarse_visible_dims must be in (0, raw_dim]")
    mask = np.zeros(raw_dim)
    mask[:coarse_visible_dims] = 1.0
    return EncoderPairParams(
        fine=init_mlp([raw_dim, width_fine, feature_dim, out_dim], rng),
        coarse=init_mlp([raw_dim, width_coarse, feature_dim, out_dim], rng),
        coarse_mask=mask,
    )


@dataclass
class CostModel:
    """Per-frame extraction costs plus fixed per-step pipeline overhead."""

    cost_fine: float = 7.8
    cost_coarse: float = 0.3
    cost_overhead_per_step: float = 0.01

    def __post_init__(self):
        if not (self.cost_fine > self.cost_coarse >= 0.0):
            raise ValueError("cost model requires cost_fine > cost_coarse >= 0")
        if self.cost_overhead_per_step < 0.0:
            raise ValueError("overhead must be non-negative")

    def extraction_cost(self, granularity: Granularity | None) -> float:
        if granularity is None:
            return 0.0
        if granularity == Granularity.FINE:
            return self.cost_fine
        return self.cost_coarse


@dataclass
class CostLedger:
    """Online record of extraction events during an accounted rollout."""

    model: CostModel
    events: list[tuple[int, Granularity | None, float]] = field(default_factory=list)

    def record(self, frame_idx: int, granularity: Granularity | None) -> float:
        cost = self.model.extraction_cost(granularity)
        self.events.append((frame_idx, granularity, cost))
        return cost

    def total(self, steps: int) -> float:
        return (sum(cost for _, _, cost in self.events)
                + steps * self.model.cost_overhead_per_step)


def extract(
    video: VideoSource,
    frame_idx: int,
    granularity: Granularity,
    params: EncoderPairParams,
    ledger: CostLedger | None = None,
) -> Tensor:
    """Feature for one frame at one granularity; logs cost when accounted."""
    if not 0 <= frame_idx < video.num_frames:
        raise BoundsError(
            f"frame {frame_idx} out of range for video of {video.num_frames} frames"
        )
    raw = video.frames[frame_idx]
    if granularity == Granularity.FINE:
        feature = mlp(params.fine, Tensor(raw))
    else:
        feature = mlp(params.coarse, Tensor(raw * params.coarse_mask))
    if ledger is not None:
        ledger.record(frame_idx, granularity)
    return feature


def extract_all(video: VideoSource, granularity: Granularity,
                params: EncoderPairParams) -> Tensor:
    """All frames at one granularity, stacked to (T, 2d).

    Built row-by-row from extract() so a lazily extracted feature is
    bit-identical to its bank row.
    """
    return stack([extract(video, i, granularity, params)
                  for i in range(video.num_frames)])


def feature_bank(video: VideoSource, params: EncoderPairParams) -> Tensor:
    """(T*2, 2d) matrix holding every (frame, granularity) feature.

    Row layout is frame-major with granularity interleaved
    (row = frame*2 + granularity), matching the glimpse logit layout.
    """
    rows = []
    for i in range(video.num_frames):
        rows.append(extract(video, i, Granularity.COARSE, params))
        rows.append(extract(video, i, Granularity.FINE, params))
    return stack(rows)


def measure_cost(trace, model: CostModel) -> float:
    """Recompute a trace's total cost from its per-step granularities."""
    steps = list(trace.steps)
    return (sum(model.extraction_cost(s.granularity) for s in steps)
            + len(steps) * model.cost_overhead_per_step)


# Per-video feature files: magic, version, T, D header + row-major float64.
_MAGIC = b"ECFV"
_VERSION = 1


def write_feature_file(path: str, frames: np.ndarray) -> None:
    frames = np.ascontiguousarray(frames, dtype="<f8")
    if frames.ndim != 2:
        raise ValueError("feature file payload must be (T, D_raw)")
    header = _MAGIC + struct.pack("<III", _VERSION, frames.shape[0], frames.shape[1])
    tmp = path + ".tmp~"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(frames.tobytes())
    os.replace(tmp, path)


def read_feature_file(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a feature file")
        version, t, d = struct.unpack("<III", fh.read(12))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported feature file version {version}")
        data = np.frombuffer(fh.read(t * d * 8), dtype="<f8")
    if data.size != t * d:
        raise ValueError(f"{path}: truncated feature file")
    return data.reshape(t, d).astype(np.float64)


def load_video_dir(directory: str) -> list[VideoSource]:
    """Read every feature file in a directory; video id = file stem."""
    videos = []
    for name in sorted(os.listdir(directory)):
        path = os.path.join(directory, name)
        if os.path.isfile(path):
            videos.append(VideoSource(read_feature_file(path),
                                      id=os.path.splitext(name)[0]))
    return videos
