"""The full parameter set of the glimpse network, with init and flattening.

Widths chain together as: text BiLSTM hidden d -> rows and frame features
are 2d wide -> each per-answer fusion vector is 10d -> the interaction
LSTM consumes the N*10d concatenation and carries a d_h hidden state that
feeds the prediction, glimpse, and exit heads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .frames import EncoderPairParams, init_encoders
from .numerics import LinearParams, LstmCellParams, Tensor, init_linear, init_lstm
from .qa import QABankParams, init_qa_bank


@dataclass
class ModelConfig:
    vocab_size: int = 64
    emb_dim: int = 64
    text_hidden: int = 150          # d; frame/text feature width is 2d
    interaction_hidden: int = 300   # d_h
    num_answers: int = 4
    t_max: int = 40                 # glimpse head covers t_max frames
    raw_dim: int = 32
    feature_dim: int = 64
    width_fine: int = 64
    width_coarse: int = 16
    coarse_visible_dims: int = 16
    head: str = "concat"            # "concat" or "shared"
    shared_score_dim: int = 32

    def validate(self) -> None:
        positive = [
            ("vocab_size", self.vocab_size), ("emb_dim", self.emb_dim),
            ("text_hidden", self.text_hidden),
            ("interaction_hidden", self.interaction_hidden),
            ("num_answers", self.num_answers), ("t_max", self.t_max),
            ("raw_dim", self.raw_dim), ("feature_dim", self.feature_dim),
            ("width_fine", self.width_fine), ("width_coarse", self.width_coarse),
            ("coarse_visible_dims", self.coarse_visible_dims),
            ("shared_score_dim", self.shared_score_dim),
        ]
        for name, value in positive:
            if value < 1:
                raise ValueError(f"{name} must be positive, got {value}")
        if self.num_answers < 2:
            raise ValueError("num_answers must be at least 2")
        if self.coarse_visible_dims > self.raw_dim:
            raise ValueError("coarse_visible_dims cannot exceed raw_dim")
        if self.head not in ("concat", "shared"):
            raise ValueError(f"unknown head kind {self.head!r}")

    @property
    def feature_width(self) -> int:
        return 2 * self.text_hidden

    @property
    def fusion_width(self) -> int:
        return 5 * self.feature_width

    @property
    def interaction_input(self) -> int:
        return self.num_answers * self.fusion_width


@dataclass
class EclipseParams:
    config: ModelConfig
    qa_bank: QABankParams
    encoders: EncoderPairParams
    interaction: LstmCellParams
    pred_head: LinearParams            # (N, d_h); used by the concat head
    shared_v: LinearParams             # shared head: score from (v_i, h)
    shared_h: LinearParams
    shared_out: LinearParams
    glimpse_head: LinearParams         # (t_max*2, d_h)
    exit_head: LinearParams            # (1, d_h)

    def named(self) -> dict[str, Tensor]:
        out = self.qa_bank.named()
        out.update(self.encoders.named())
        out.update({
            "interaction.w_ih": self.interaction.w_ih,
            "interaction.w_hh": self.interaction.w_hh,
            "interaction.b": self.interaction.b,
        })
        for prefix, head in (
            ("pred_head", self.pred_head),
            ("shared_head.v", self.shared_v),
            ("shared_head.h", self.shared_h),
            ("shared_head.out", self.shared_out),
            ("glimpse_head", self.glimpse_head),
            ("exit_head", self.exit_head),
        ):
            out[f"{prefix}.w"] = head.w
            out[f"{prefix}.b"] = head.b
        return out


def init_model(cfg: ModelConfig, rng: np.random.Generator) -> EclipseParams:
    cfg.validate()
    return EclipseParams(
        config=cfg,
        qa_bank=init_qa_bank(cfg.vocab_size, cfg.emb_dim, cfg.text_hidden, rng),
        encoders=init_encoders(
            cfg.raw_dim, cfg.feature_dim, cfg.feature_width,
            cfg.width_fine, cfg.width_coarse, cfg.coarse_visible_dims, rng,
        ),
        interaction=init_lstm(cfg.interaction_input, cfg.interaction_hidden, rng),
        pred_head=init_linear(cfg.num_answers, cfg.interaction_hidden, rng),
        shared_v=init_linear(cfg.shared_score_dim, cfg.fusion_width, rng),
        shared_h=init_linear(cfg.shared_score_dim, cfg.interaction_hidden, rng),
        shared_out=init_linear(1, cfg.shared_score_dim, rng),
        glimpse_head=init_linear(2 * cfg.t_max, cfg.interaction_hidden, rng),
        exit_head=init_linear(1, cfg.interaction_hidden, rng),
    )
