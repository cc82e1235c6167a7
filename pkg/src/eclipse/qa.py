"""Question/answer encoding: vocabulary, instances, and the BiLSTM bank.

Question and candidate answers are embedded with a shared trainable
table and encoded by a shared bidirectional LSTM; row j of an encoding
is [forward hidden at j ; backward hidden at j], so rows have width 2d.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import (
    LstmCellParams,
    Tensor,
    atomic_write_text,
    concat,
    embedding_lookup,
    init_lstm,
    lstm_step,
    row,
    stack,
    zeros,
)

PAD_INDEX = 0
UNK_INDEX = 1
NUM_RESERVED = 2


class ValidationError(ValueError):
    """A QA instance violates its structural contract."""


@dataclass
class Vocab:
    """token -> index map; index 0 is padding, index 1 is unknown."""

    tokens: list[str] = field(default_factory=list)

    def __post_init__(self):
        self._index = {tok: i + NUM_RESERVED for i, tok in enumerate(self.tokens)}
        if len(self._index) != len(self.tokens):
            raise ValidationError("vocab: duplicate tokens")

    def __len__(self) -> int:
        return len(self.tokens) + NUM_RESERVED

    def index(self, token: str) -> int:
        return self._index.get(token, UNK_INDEX)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.index(t) for t in tokens]

    def save(self, path: str) -> None:
        atomic_write_text(path, "".join(t + "\n" for t in self.tokens))

    @classmethod
    def load(cls, path: str) -> "Vocab":
        with open(path) as fh:
            return cls([line.rstrip("\n") for line in fh if line.rstrip("\n")])


@dataclass
class QAInstance:
    """One reasoning problem: a question, N candidate answers, and gt."""

    question: list[int]
    answers: list[list[int]]
    gt: int

    def validate(self) -> None:
        if len(self.question) < 1:
            raise ValidationError("question must be non-empty")
        if len(self.answers) < 2:
            raise ValidationError("need at least 2 candidate answers")
        if any(len(a) < 1 for a in self.answers):
            raise ValidationError("answers must be non-empty")
        if not 0 <= self.gt < len(self.answers):
            raise ValidationError(
                f"gt {self.gt} out of range for N={len(self.answers)}"
            )

    @property
    def num_answers(self) -> int:
        return len(self.answers)


@dataclass
class TextMemory:
    """Per-word contextual encodings: hq is n_q x 2d, ha[i] is n_ai x 2d."""

    hq: Tensor
    ha: list[Tensor]


@dataclass
class QABankParams:
    embedding: Tensor  # (vocab_size, emb_dim)
    fwd: LstmCellParams
    bwd: LstmCellParams

    @property
    def hidden_size(self) -> int:
        return self.fwd.hidden_size

    def named(self, prefix: str = "qa_bank") -> dict[str, Tensor]:
        out = {f"{prefix}.embedding": self.embedding}
        for tag, cell in (("fwd", self.fwd), ("bwd", self.bwd)):
            out[f"{prefix}.bilstm.{tag}.w_ih"] = cell.w_ih
            out[f"{prefix}.bilstm.{tag}.w_hh"] = cell.w_hh
            out[f"{prefix}.bilstm.{tag}.b"] = cell.b
        return out


def init_qa_bank(vocab_size: int, emb_dim: int, hidden: int,
                 rng: np.random.Generator) -> QABankParams:
    bound = 1.0 / np.sqrt(emb_dim)
    return QABankParams(
        embedding=Tensor(rng.uniform(-bound, bound, size=(vocab_size, emb_dim)),
                         requires_grad=True),
        fwd=init_lstm(emb_dim, hidden, rng),
        bwd=init_lstm(emb_dim, hidden, rng),
    )


def clamp_oov(instance: QAInstance, vocab_size: int) -> QAInstance:
    """Map out-of-vocab token ids to the unknown token (never an error)."""

    def clamp(ids: list[int]) -> list[int]:
        return [i if 0 <= i < vocab_size else UNK_INDEX for i in ids]

    return QAInstance(question=clamp(instance.question),
                      answers=[clamp(a) for a in instance.answers],
                      gt=instance.gt)


def _encode_sequence(ids: list[int], params: QABankParams) -> Tensor:
    d = params.hidden_size
    emb = embedding_lookup(params.embedding, ids)
    n = len(ids)
    rows_fwd: list[Tensor | None] = [None] * n
    rows_bwd: list[Tensor | None] = [None] * n
    c, h = zeros(d), zeros(d)
    for j in range(n):
        c, h = lstm_step(params.fwd, row(emb, j), c, h)
        rows_fwd[j] = h
    c, h = zeros(d), zeros(d)
    for j in reversed(range(n)):
        c, h = lstm_step(params.bwd, row(emb, j), c, h)
        rows_bwd[j] = h
    return stack([concat([rows_fwd[j], rows_bwd[j]]) for j in range(n)])


def encode_qa(instance: QAInstance, params: QABankParams) -> TextMemory:
    """Encode question and all candidate answers into 2d-wide row matrices."""
    instance.validate()
    instance = clamp_oov(instance, params.embedding.shape[0])
    return TextMemory(
        hq=_encode_sequence(instance.question, params),
        ha=[_encode_sequence(a, params) for a in instance.answers],
    )
