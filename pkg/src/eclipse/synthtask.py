"""Synthetic video-QA episodes with planted evidence frames.

Each episode hides k attribute values in k evidence frames; the question
names one attribute and the correct answer is its value. Evidence frames
always carry a coarse-visible attribute tag, while the value sub-vector
lands in the coarse-visible region or (with probability rho) in
coordinates only the fine encoder can see. Evidence positions cluster
around per-attribute anchors so a skip policy has something to learn,
and non-evidence frames are pure noise.

Two task flavours: "choice" (pick the value among N options) and
"binary" (the question carries a claimed value; answer yes/no), the
binary/multi-choice evaluation settings respectively.
"""
from __future__ import annotations

import dataclasses
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .frames import VideoSource
from .qa import QAInstance, Vocab


class SpecError(ValueError):
    """The generator spec is internally inconsistent."""


@dataclass
class SynthSpec:
    t_min: int = 20
    t_max: int = 40
    raw_dim: int = 32
    coarse_visible_dims: int = 16
    vocab_size: int = 32
    num_answers: int = 4
    num_evidence: int = 2          # k: one evidence frame per attribute
    rho: float = 0.0               # P(value survives only fine encoding)
    noise_scale: float = 0.5
    signal_amp: float = 3.0
    anchor_jitter: float = 0.05    # evidence position jitter, fraction of T
    task: str = "choice"           # "choice" or "binary"
    permute_answers: bool = False  # shuffle option order per episode
    n_train: int = 300
    n_val: int = 100
    n_test: int = 300

    def validate(self) -> None:
        if self.t_min < 1 or self.t_max < self.t_min:
            raise SpecError("need 1 <= t_min <= t_max")
        if self.num_evidence < 1 or self.num_evidence > self.t_min:
            raise SpecError("need 1 <= num_evidence <= t_min")
        if not 0.0 <= self.rho <= 1.0:
            raise SpecError("rho must lie in [0, 1]")
        if self.task not in ("choice", "binary"):
            raise SpecError(f"unknown task {self.task!r}")
        if self.task == "binary" and self.num_answers != 2:
            raise SpecError("binary task requires num_answers == 2")
        if self.noise_scale < 0:
            raise SpecError("noise_scale must be non-negative")
        k, n = self.num_evidence, self.num_values
        if not 0 < self.coarse_visible_dims < self.raw_dim:
            raise SpecError("coarse_visible_dims must split the raw vector")
        if k + n > self.coarse_visible_dims:
            raise SpecError("visible region too small for tag + value blocks")
        if n > self.raw_dim - self.coarse_visible_dims:
            raise SpecError("hidden region too small for the value block")
        if len(self._filler_tokens()) < 1:
            raise SpecError("vocab_size too small for this spec")

    @property
    def num_values(self) -> int:
        """Distinct attribute values; the choice task answers among these."""
        return self.num_answers if self.task == "choice" else 4

    def build_vocab(self) -> Vocab:
        tokens = [f"ask_attr{j}" for j in range(self.num_evidence)]
        tokens += [f"opt_{v}" for v in range(self.num_values)]
        tokens += ["yes", "no"]
        tokens += self._filler_tokens()
        return Vocab(tokens)

    def _filler_tokens(self) -> list[str]:
        used = self.num_evidence + self.num_values + 2 + 2  # + reserved
        return [f"filler_{i}" for i in range(self.vocab_size - used)]


@dataclass
class SynthEpisode:
    video: VideoSource
    instance: QAInstance
    evidence_frames: list[int]     # frame index per attribute
    values: list[int]              # latent value per attribute
    queried: int                   # attribute the question asks about
    signal_visible: list[bool]     # per attribute: value readable coarsely?
    answer_order: list[int]        # option value shown at each answer slot
    claim: int | None = None       # binary task: the claimed value


def _evidence_positions(t: int, k: int, jitter_frac: float,
                        rng: np.random.Generator) -> list[int]:
    positions: list[int] = []
    jitter = int(round(jitter_frac * t))
    for j in range(k):
        anchor = int(round((j + 1) / (k + 1) * (t - 1)))
        pos = int(np.clip(anchor + rng.integers(-jitter, jitter + 1), 0, t - 1))
        while pos in positions:  # collisions only matter for tiny T
            pos = (pos + 1) % t
        positions.append(pos)
    return positions


def _build_question(spec: SynthSpec, vocab: Vocab, queried: int,
                    claim: int | None, rng: np.random.Generator) -> list[int]:
    tokens = [f"ask_attr{queried}"]
    if claim is not None:
        tokens.append(f"opt_{claim}")
    fillers = spec._filler_tokens()
    for _ in range(int(rng.integers(1, 4))):
        tokens.append(fillers[int(rng.integers(0, len(fillers)))])
    return vocab.encode(tokens)


def make_episode(spec: SynthSpec, vocab: Vocab, index: int,
                 seed: int) -> SynthEpisode:
    """Deterministic episode from (seed, index); parallel-safe by counter."""
    rng = np.random.default_rng([seed, index])
    t = int(rng.integers(spec.t_min, spec.t_max + 1))
    frames = rng.normal(0.0, spec.noise_scale, size=(t, spec.raw_dim))

    k, n = spec.num_evidence, spec.num_values
    positions = _evidence_positions(t, k, spec.anchor_jitter, rng)
    values = [int(rng.integers(0, n)) for _ in range(k)]
    visible = [bool(rng.random() >= spec.rho) for _ in range(k)]
    for j in range(k):
        f = frames[positions[j]]
        f[j] += spec.signal_amp  # attribute tag, always coarse-visible
        if visible[j]:
            f[k + values[j]] += spec.signal_amp
        else:
            f[spec.coarse_visible_dims + values[j]] += spec.signal_amp

    queried = int(rng.integers(0, k))
    answer = values[queried]

    if spec.task == "binary":
        claim_correct = bool(rng.random() < 0.5)
        claim = answer if claim_correct else int(
            (answer + 1 + rng.integers(0, n - 1)) % n
        )
        question = _build_question(spec, vocab, queried, claim, rng)
        answers = [vocab.encode(["yes"]), vocab.encode(["no"])]
        gt = 0 if claim == answer else 1
        order = [0, 1]
    else:
        claim = None
        question = _build_question(spec, vocab, queried, None, rng)
        order = list(range(n))
        if spec.permute_answers:
            order = [int(x) for x in rng.permutation(n)]
        answers = [vocab.encode([f"opt_{order[i]}"]) for i in range(n)]
        gt = order.index(answer)

    return SynthEpisode(
        video=VideoSource(frames, id=f"synth-{seed}-{index}"),
        instance=QAInstance(question=question, answers=answers, gt=gt),
        evidence_frames=positions,
        values=values,
        queried=queried,
        signal_visible=visible,
        answer_order=order,
        claim=claim,
    )


def generate(spec: SynthSpec, seed: int, count: int | None = None
             ) -> list[SynthEpisode]:
    spec.validate()
    vocab = spec.build_vocab()
    count = spec.n_train if count is None else count
    return [make_episode(spec, vocab, i, seed) for i in range(count)]


def generate_splits(spec: SynthSpec, seed: int
                    ) -> dict[str, list[SynthEpisode]]:
    """Disjoint train/val/test sets via per-split sub-seeds."""
    spec.validate()
    vocab = spec.build_vocab()
    splits = {}
    for offset, (name, count) in enumerate(
        [("train", spec.n_train), ("val", spec.n_val), ("test", spec.n_test)]
    ):
        sub_seed = seed * 4 + offset + 1
        splits[name] = [make_episode(spec, vocab, i, sub_seed)
                        for i in range(count)]
    return splits


def oracle_answer(episode: SynthEpisode) -> int:
    """Recompute gt from the latent signal; must match the stored gt."""
    value = episode.values[episode.queried]
    if episode.claim is not None:
        return 0 if episode.claim == value else 1
    return episode.answer_order.index(value)


# Dataset files: header (spec, seed, count) + per-episode records, where the
# frame payload uses the same (T, D) + row-major float64 block layout as the
# per-video feature files.
_MAGIC = b"ECDS"
_VERSION = 1


def write_dataset(path: str, spec: SynthSpec, seed: int,
                  episodes: list[SynthEpisode]) -> None:
    header = json.dumps({
        "spec": dataclasses.asdict(spec),
        "seed": seed,
        "count": len(episodes),
    }).encode()
    tmp = path + ".tmp~"
    with open(tmp, "wb") as fh:
        fh.write(_MAGIC + struct.pack("<II", _VERSION, len(header)) + header)
        for ep in episodes:
            meta = json.dumps({
                "id": ep.video.id,
                "question": ep.instance.question,
                "answers": ep.instance.answers,
                "gt": ep.instance.gt,
                "evidence_frames": ep.evidence_frames,
                "values": ep.values,
                "queried": ep.queried,
                "signal_visible": [int(v) for v in ep.signal_visible],
                "answer_order": ep.answer_order,
                "claim": ep.claim,
            }).encode()
            frames = np.ascontiguousarray(ep.video.frames, dtype="<f8")
            fh.write(struct.pack("<I", len(meta)) + meta)
            fh.write(struct.pack("<II", frames.shape[0], frames.shape[1]))
            fh.write(frames.tobytes())
    os.replace(tmp, path)


def read_dataset(path: str) -> tuple[SynthSpec, int, list[SynthEpisode]]:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a dataset file")
        version, header_len = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported dataset version {version}")
        header = json.loads(fh.read(header_len))
        spec = SynthSpec(**header["spec"])
        episodes = []
        for _ in range(header["count"]):
            (meta_len,) = struct.unpack("<I", fh.read(4))
            meta = json.loads(fh.read(meta_len))
            t, d = struct.unpack("<II", fh.read(8))
            frames = np.frombuffer(fh.read(t * d * 8), dtype="<f8").reshape(t, d)
            episodes.append(SynthEpisode(
                video=VideoSource(frames.astype(np.float64), id=meta["id"]),
                instance=QAInstance(meta["question"], meta["answers"],
                                    meta["gt"]),
                evidence_frames=list(meta["evidence_frames"]),
                values=list(meta["values"]),
                queried=meta["queried"],
                signal_visible=[bool(v) for v in meta["signal_visible"]],
                answer_order=list(meta["answer_order"]),
                claim=meta["claim"],
            ))
    return spec, header["seed"], episodes
