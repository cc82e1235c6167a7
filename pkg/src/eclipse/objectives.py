"""Training losses and the dynamic exit-label rule.

Per step t the pieces are: answer cross-entropy, margin-increment reward
for the skip policy, a fine-feature usage penalty for the granularity
policy, and a binary cross-entropy for the exit head whose labels are
synthesized after the rollout from the full margin sequence.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import Tensor, add, log, mul, neg, pick, sub, tensor
from .reasoning import JointDecision


@dataclass
class ExitLabels:
    """Binary exit targets derived from margins via the mu rule."""

    y_exit: list[int]
    mu: float


@dataclass
class LossBundle:
    """Per-step loss pieces plus their lambda-weighted totals.

    ``objective`` is the live scalar for backward; the float lists are
    detached values for logging.
    """

    pred: list[float] = field(default_factory=list)
    incre: list[float] = field(default_factory=list)
    feat: list[float] = field(default_factory=list)
    glimpse: list[float] = field(default_factory=list)
    exit: list[float] = field(default_factory=list)
    step_total: list[float] = field(default_factory=list)
    lam: float = 0.01
    total: float = 0.0
    objective: Tensor | None = None

    @property
    def num_steps(self) -> int:
        return len(self.pred)


def margin(p: Tensor, gt: int) -> Tensor:
    """p[gt] minus the best other probability; exact ties give 0."""
    n = p.shape[0]
    if n < 2:
        raise ValueError("margin needs at least 2 candidate answers")
    if not 0 <= gt < n:
        raise ValueError(f"gt {gt} out of range for {n} answers")
    others = [i for i in range(n) if i != gt]
    best_other = others[int(np.argmax(p.data[others]))]
    return sub(pick(p, gt), pick(p, best_other))


def loss_pred(p: Tensor, gt: int) -> Tensor:
    """Cross-entropy against the one-hot ground truth: -log p[gt]."""
    if not 0 <= gt < p.shape[0]:
        raise ValueError(f"gt {gt} out of range for {p.shape[0]} answers")
    return neg(log(pick(p, gt)))


def loss_incre(m_t: Tensor, m_prev: Tensor) -> Tensor:
    """-(m_t - m_prev): rewards a growing margin; defined for step >= 2."""
    return neg(sub(m_t, m_prev))


def loss_feat(decision: JointDecision, soft: bool = True):
    """Fine-usage penalty.

    Training mode returns the differentiable fine mass of the relaxed
    sample; reporting mode returns the hard decision in {0, 1}.
    """
    if not soft:
        return float(decision.g)
    if decision.fine_mass_soft is None:
        return tensor(decision.fine_mass)
    return decision.fine_mass_soft


def exit_labels(margins: list[float], mu: float) -> ExitLabels:
    """y[t] = 1 iff m_T - m_t < mu * (m_T - m_1), strict inequality."""
    if len(margins) < 1:
        raise ValueError("need at least one margin")
    m_last = margins[-1]
    threshold = mu * (m_last - margins[0])
    return ExitLabels(
        y_exit=[1 if (m_last - m_t) < threshold else 0 for m_t in margins],
        mu=mu,
    )


def loss_exit(e: Tensor, y: int) -> Tensor:
    """Binary cross-entropy of the exit confidence against label y."""
    if y not in (0, 1):
        raise ValueError(f"exit label must be 0 or 1, got {y}")
    if y == 1:
        return neg(log(e))
    return neg(log(sub(tensor(1.0), e)))


def loss_total(
    pred: list[Tensor],
    exit_: list[Tensor],
    incre: list[Tensor | None],
    feat: list[Tensor | float],
    lam: float,
) -> LossBundle:
    """Assemble L^t = L_pred + L_exit + lam * (L_incre + L_feat), summed over t.

    Step 1 has no previous margin, so its increment entry is None and
    counts as zero.
    """
    steps = len(pred)
    if not (len(exit_) == len(incre) == len(feat) == steps):
        raise ValueError("per-step loss lists must have equal length")
    bundle = LossBundle(lam=lam)
    objective: Tensor | None = None
    for t in range(steps):
        l_incre = incre[t]
        l_feat = feat[t] if isinstance(feat[t], Tensor) else tensor(float(feat[t]))
        incre_val = 0.0 if l_incre is None else float(l_incre.data)
        feat_val = float(l_feat.data)
        glimpse = add(l_incre, l_feat) if l_incre is not None else l_feat
        step = add(add(pred[t], exit_[t]), mul(glimpse, lam))
        objective = step if objective is None else add(objective, step)

        bundle.pred.append(float(pred[t].data))
        bundle.exit.append(float(exit_[t].data))
        bundle.incre.append(incre_val)
        bundle.feat.append(feat_val)
        bundle.glimpse.append(incre_val + feat_val)
        bundle.step_total.append(
            bundle.pred[-1] + bundle.exit[-1] + lam * bundle.glimpse[-1]
        )
    bundle.objective = objective
    bundle.total = float(objective.data) if objective is not None else 0.0
    return bundle
