"""One inference step: fuse, interact, predict, decide the next glimpse, exit.

The glimpse decision is a single categorical over all (frame,
granularity) cells. Sampling uses the Gumbel-max trick; the relaxed
softmax sample carries the gradients while the forward pass consumes the
hard one-hot (straight-through).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frames import Granularity
from .model import EclipseParams
from .numerics import (
    DimensionError,
    LinearParams,
    LstmCellParams,
    Tensor,
    add,
    concat,
    gather,
    linear,
    lstm_step,
    matmul,
    mul,
    log_softmax,
    narrow,
    pick,
    sigmoid,
    softmax,
    sub,
    tanh,
    total,
    zeros,
)

MASK_VALUE = -1e30  # additive mask for cells beyond the video / pinned off


class ParameterError(ValueError):
    """A sampling parameter is outside its valid range."""


@dataclass
class GlimpseState:
    """Recurrent reasoning state after step t."""

    t: int
    c: Tensor
    h: Tensor
    current_frame: int
    current_granularity: Granularity
    margins: list[float] = field(default_factory=list)


@dataclass
class JointDecision:
    """One joint (frame, granularity) choice plus its relaxed sample.

    ``z``/``pi``/``l_soft`` are detached reporting copies over the valid
    cells; ``soft`` is the live relaxed sample (flat, length t_frames*2)
    used for gradients, present only when sampled under a tape.
    """

    z: np.ndarray                 # (t_frames, 2) raw logits
    pi: np.ndarray                # (t_frames*2,) exact categorical
    l_soft: np.ndarray            # (t_frames, 2) relaxed sample
    s: int                        # chosen frame
    g: int                        # chosen granularity, 0=coarse 1=fine
    fine_mass: float              # sum of l_soft fine column
    soft: Tensor | None = None
    fine_mass_soft: Tensor | None = None

    @property
    def granularity(self) -> Granularity:
        return Granularity(self.g)


@dataclass
class StepOutput:
    """Everything one reasoning step produces."""

    p: Tensor                     # answer distribution (live)
    decision: JointDecision
    e: Tensor                     # exit confidence (live scalar)
    h: Tensor


def attend(frame_feature: Tensor, text: Tensor) -> Tensor:
    """Dot-product attention of a frame feature over text rows."""
    if frame_feature.shape[0] != text.shape[1]:
        raise DimensionError(
            f"attend: feature width {frame_feature.shape[0]} != text width "
            f"{text.shape[1]}"
        )
    alpha = softmax(matmul(text, frame_feature))
    return matmul(alpha, text)


def context_query_fuse(frame_feature: Tensor, hq: Tensor,
                       ha: list[Tensor]) -> tuple[Tensor, list[Tensor]]:
    """Fuse a frame with the question and each answer.

    Per answer i the block is [I; F_q; F_ai; I*F_q; I*F_ai] (width 10d);
    returns both the per-answer blocks and their concatenation.
    """
    f_q = attend(frame_feature, hq)
    i_fq = mul(frame_feature, f_q)
    blocks = []
    for text in ha:
        f_a = attend(frame_feature, text)
        blocks.append(concat([frame_feature, f_q, f_a, i_fq,
                              mul(frame_feature, f_a)]))
    return concat(blocks), blocks


def interaction_step(params: LstmCellParams, v: Tensor,
                     c_prev: Tensor, h_prev: Tensor) -> tuple[Tensor, Tensor]:
    """One interaction-LSTM update over the fused representation."""
    return lstm_step(params, v, c_prev, h_prev)


def predict(model: EclipseParams, h: Tensor,
            v_blocks: list[Tensor] | None = None) -> Tensor:
    """Answer distribution from the hidden state.

    The concat head is a single FC layer + softmax. The shared head
    scores every answer with one weight set from (v_i, h), which makes
    the scorer answer-order equivariant by construction.
    """
    if model.config.head == "shared":
        if v_blocks is None:
            raise ParameterError("shared head needs the per-answer fusion blocks")
        scores = [
            linear(model.shared_out,
                   tanh(add(linear(model.shared_v, v_i),
                            linear(model.shared_h, h))))
            for v_i in v_blocks
        ]
        return softmax(concat(scores))
    return softmax(linear(model.pred_head, h))


def exit_score(head: LinearParams, h: Tensor) -> Tensor:
    """Confidence in (0,1) that reasoning can stop at this step."""
    return sigmoid(pick(linear(head, h), 0))


def _gumbel_noise(rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.random(n)
    u = np.clip(u, 1e-300, 1.0 - 1e-16)
    return -np.log(-np.log(u))


def glimpse_decide(
    model: EclipseParams,
    h: Tensor,
    t_frames: int,
    tau: float,
    rng: np.random.Generator | None,
    force_granularity: Granularity | None = None,
) -> JointDecision:
    """Jointly choose the next (frame, granularity).

    With an rng, sampling follows the Gumbel-max trick and the relaxed
    softmax sample at temperature ``tau`` is kept for gradients. With
    ``rng=None`` the choice is the noise-free argmax of the categorical
    (deterministic inference). Frames beyond ``t_frames`` are masked out;
    ``force_granularity`` pins the granularity column instead of a policy.
    """
    if tau <= 0.0:
        raise ParameterError(f"temperature must be positive, got {tau}")
    t_cap = model.config.t_max
    if not 1 <= t_frames <= t_cap:
        raise DimensionError(
            f"t_frames {t_frames} outside [1, t_max={t_cap}]"
        )
    valid = 2 * t_frames
    logits = linear(model.glimpse_head, h)

    mask = np.zeros(2 * t_cap)
    mask[valid:] = MASK_VALUE
    if force_granularity is not None:
        off = 1 - int(force_granularity)
        mask[off:valid:2] = MASK_VALUE
    masked = add(logits, Tensor(mask))

    logp = log_softmax(masked)
    if rng is not None:
        noise = np.zeros(2 * t_cap)
        noise[:valid] = _gumbel_noise(rng, valid)
        perturbed = add(logp, Tensor(noise))
    else:
        perturbed = logp

    hard = int(np.argmax(perturbed.data[:valid]))
    s, g = divmod(hard, 2)

    l_soft = softmax(mul(perturbed, 1.0 / tau))
    fine_mass_soft = total(gather(l_soft, np.arange(1, valid, 2)))

    l_soft_np = l_soft.data[:valid].reshape(t_frames, 2).copy()
    return JointDecision(
        z=logits.data[:valid].reshape(t_frames, 2).copy(),
        pi=np.exp(logp.data[:valid]),
        l_soft=l_soft_np,
        s=s,
        g=g,
        fine_mass=float(l_soft_np[:, 1].sum()),
        soft=l_soft if l_soft.requires_grad else None,
        fine_mass_soft=fine_mass_soft if fine_mass_soft.requires_grad else None,
    )


def select_feature(bank: Tensor, decision: JointDecision) -> Tensor:
    """Straight-through feature pick from the (T*2, 2d) bank.

    Forward value is exactly the hard row; gradients flow into both the
    relaxed sample and the bank rows it weights.
    """
    valid = bank.shape[0]
    hard = np.zeros(valid)
    hard[decision.s * 2 + decision.g] = 1.0
    if decision.soft is None:
        return matmul(Tensor(hard), bank)
    soft = narrow(decision.soft, 0, valid)
    straight_through = add(sub(soft, soft.detach()), Tensor(hard))
    return matmul(straight_through, bank)
