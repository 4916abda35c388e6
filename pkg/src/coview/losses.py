"""Objective terms: smoothed cross-entropy, symmetric KL, pairwise hinge,
unlabeled-pair loss, cross-view consistency, and their weighted total.

Everything uses natural logarithms. Distributions are clamped elementwise to
``prob_clamp`` and renormalized before any KL so the discrepancy stays finite;
the symmetrized KL is otherwise unbounded, which is what makes a hinge margin
of 2 meaningful (a bounded divergence would never saturate it).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LossConfig:
    alpha: float = 2.0  # hinge margin for must-not-link pairs
    beta: float = 0.2  # consistency weight
    smoothing_eps: float = 0.1
    prob_clamp: float = 1e-8

    def validate(self) -> None:
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if not 0 <= self.smoothing_eps < 1:
            raise ValueError("smoothing_eps must be in [0, 1)")
        if self.prob_clamp <= 0:
            raise ValueError("prob_clamp must be > 0")


def smoothed_ce(
    pred_probs: np.ndarray,
    true_class: int,
    cfg: LossConfig,
    num_known: int | None = None,
) -> float:
    """Label-smoothed cross-entropy over all classes of ``pred_probs``.

    The smoothed target is (1 - eps) on ``true_class`` plus eps / C spread
    over every class. ``num_known`` bounds the valid range of ``true_class``
    (defaults to the full width).
    """
    p = np.asarray(pred_probs, dtype=np.float64)
    c = p.shape[-1]
    limit = c if num_known is None else num_known
    if not 0 <= true_class < limit:
        raise ValueError(f"true_class {true_class} outside known range [0, {limit})")
    y = np.full(c, cfg.smoothing_eps / c)
    y[true_class] += 1.0 - cfg.smoothing_eps
    return float(-(y * np.log(np.maximum(p, cfg.prob_clamp))).sum())


def smoothed_ce_grad(
    pred_probs: np.ndarray, true_class: int, cfg: LossConfig
) -> np.ndarray:
    """d smoothed_ce / d pred_probs (zero where the clamp is active)."""
    p = np.asarray(pred_probs, dtype=np.float64)
    c = p.shape[-1]
    y = np.full(c, cfg.smoothing_eps / c)
    y[true_class] += 1.0 - cfg.smoothing_eps
    clamped = np.maximum(p, cfg.prob_clamp)
    return np.where(p > cfg.prob_clamp, -y / clamped, 0.0)


def clamp_renorm(p: np.ndarray, clamp: float) -> np.ndarray:
    """Clamp entries to >= clamp and renormalize rows to sum to 1."""
    c = np.maximum(np.asarray(p, dtype=np.float64), clamp)
    return c / c.sum(axis=-1, keepdims=True)


def clamp_renorm_backward(p: np.ndarray, clamp: float, d_r: np.ndarray) -> np.ndarray:
    """Gradient through clamp_renorm back to the raw distribution."""
    c = np.maximum(np.asarray(p, dtype=np.float64), clamp)
    s = c.sum(axis=-1, keepdims=True)
    r = c / s
    d_c = (d_r - (d_r * r).sum(axis=-1, keepdims=True)) / s
    return np.where(p > clamp, d_c, 0.0)


def sym_kl(p: np.ndarray, q: np.ndarray, cfg: LossConfig) -> float:
    """Symmetrized KL, (KL(p||q) + KL(q||p)) / 2, after clamp + renorm."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {q.shape}")
    rp = clamp_renorm(p, cfg.prob_clamp)
    rq = clamp_renorm(q, cfg.prob_clamp)
    return float(0.5 * ((rp - rq) * (np.log(rp) - np.log(rq))).sum())


def _sym_kl_grad_wrt_first(rp: np.ndarray, rq: np.ndarray) -> np.ndarray:
    # d/d rp of 0.5 * sum((rp - rq) * (log rp - log rq))
    return 0.5 * (np.log(rp) - np.log(rq) + 1.0 - rq / rp)


def sym_kl_grads(
    p: np.ndarray, q: np.ndarray, cfg: LossConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of sym_kl w.r.t. both raw distributions."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    rp = clamp_renorm(p, cfg.prob_clamp)
    rq = clamp_renorm(q, cfg.prob_clamp)
    dp = clamp_renorm_backward(p, cfg.prob_clamp, _sym_kl_grad_wrt_first(rp, rq))
    dq = clamp_renorm_backward(q, cfg.prob_clamp, _sym_kl_grad_wrt_first(rq, rp))
    return dp, dq


def pair_loss(d: float, q_same: int, cfg: LossConfig) -> float:
    """q * d + (1 - q) * max(0, alpha - d)."""
    return q_same * d + (1 - q_same) * max(0.0, cfg.alpha - d)


def pair_loss_dd(d: float, q_same: int, cfg: LossConfig) -> float:
    """Derivative of pair_loss in d (hinge subgradient 0 at d == alpha)."""
    if q_same:
        return 1.0
    return -1.0 if d < cfg.alpha else 0.0


def unsup_batch_loss(
    preds_view1: np.ndarray,
    preds_view2: np.ndarray,
    pseudo1: np.ndarray,
    pseudo2: np.ndarray,
    cfg: LossConfig,
) -> float:
    """Mean over within-batch pairs of the cross-supervised pair losses.

    For each unordered pair (i, j): the first view's discrepancy is scored
    against the second view's pseudo-pair label and vice versa. Batches with
    fewer than two instances contribute 0.
    """
    p1 = np.asarray(preds_view1, dtype=np.float64)
    p2 = np.asarray(preds_view2, dtype=np.float64)
    pseudo1 = np.asarray(pseudo1)
    pseudo2 = np.asarray(pseudo2)
    b = p1.shape[0]
    if not (p2.shape[0] == len(pseudo1) == len(pseudo2) == b):
        raise ValueError("all four inputs must have the same batch size")
    if b < 2:
        return 0.0
    total = 0.0
    for i in range(b):
        for j in range(i + 1, b):
            d1 = sym_kl(p1[i], p1[j], cfg)
            d2 = sym_kl(p2[i], p2[j], cfg)
            q1 = int(pseudo1[i] == pseudo1[j])
            q2 = int(pseudo2[i] == pseudo2[j])
            total += pair_loss(d1, q2, cfg) + pair_loss(d2, q1, cfg)
    return total / (b * (b - 1) // 2)


def consistency_loss(
    preds_view1: np.ndarray, preds_view2: np.ndarray, cfg: LossConfig
) -> float:
    """Mean per-instance symmetrized KL between the two views' predictions."""
    p1 = np.asarray(preds_view1, dtype=np.float64)
    p2 = np.asarray(preds_view2, dtype=np.float64)
    if p1.shape != p2.shape:
        raise ValueError(f"shape mismatch: {p1.shape} vs {p2.shape}")
    if p1.shape[0] < 1:
        raise ValueError("need at least one instance")
    return float(np.mean([sym_kl(p1[i], p2[i], cfg) for i in range(p1.shape[0])]))


def total_loss(sup: float, unsup: float, consist: float, cfg: LossConfig) -> float:
    """sup + unsup + beta * consist."""
    return sup + unsup + cfg.beta * consist
