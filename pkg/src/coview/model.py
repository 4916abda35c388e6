"""Two projection networks plus four classifier heads, and the per-batch
loss/gradient computation that trains them.

Predictions follow one rule: project a view, run both of its heads, and
softmax the concatenated [known ; unknown] logits. The batch computation
returns the supervised, unlabeled-pair and consistency terms separately
together with gradients of their weighted total, keyed by tensor name.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .losses import LossConfig, clamp_renorm, clamp_renorm_backward

VIEW_BOTH = "both"
VIEW_ONLY_TOKEN = "token"
VIEW_ONLY_MASK = "mask"

COMPONENTS = (
    "proj_token",
    "proj_mask",
    "head_known_token",
    "head_unknown_token",
    "head_known_mask",
    "head_unknown_mask",
)


@dataclass
class ModelParams:
    proj_token: nn.Mlp
    proj_mask: nn.Mlp
    head_known_token: nn.Mlp
    head_unknown_token: nn.Mlp
    head_known_mask: nn.Mlp
    head_unknown_mask: nn.Mlp

    def component(self, name: str) -> nn.Mlp:
        return getattr(self, name)

    def proj(self, view: str) -> nn.Mlp:
        return self.proj_token if view == "token" else self.proj_mask

    def heads(self, view: str) -> tuple[nn.Mlp, nn.Mlp]:
        if view == "token":
            return self.head_known_token, self.head_unknown_token
        return self.head_known_mask, self.head_unknown_mask

    @property
    def num_known(self) -> int:
        return self.head_known_token.weights[-1].shape[1]

    @property
    def num_unknown(self) -> int:
        return self.head_unknown_token.weights[-1].shape[1]

    def copy(self) -> "ModelParams":
        return ModelParams(*(self.component(c).copy() for c in COMPONENTS))

    def named_tensors(self) -> dict[str, np.ndarray]:
        """Live views of every parameter, named ``component.w0`` etc."""
        out: dict[str, np.ndarray] = {}
        for comp in COMPONENTS:
            mlp = self.component(comp)
            for k, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
                out[f"{comp}.w{k}"] = w
                out[f"{comp}.b{k}"] = b
        return out


def init_model_params(
    token_dim: int,
    mask_dim: int,
    num_known: int,
    num_unknown: int,
    seed: int,
    proj_hidden: int = 256,
    proj_out: int = 256,
    head_hidden: int = 256,
) -> ModelParams:
    """Seeded initialization; the projection input dim follows each view's data."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x1017]))
    dims = {
        "proj_token": [token_dim, proj_hidden, proj_out],
        "proj_mask": [mask_dim, proj_hidden, proj_out],
        "head_known_token": [proj_out, head_hidden, num_known],
        "head_unknown_token": [proj_out, head_hidden, num_unknown],
        "head_known_mask": [proj_out, head_hidden, num_known],
        "head_unknown_mask": [proj_out, head_hidden, num_unknown],
    }
    return ModelParams(*(nn.init_mlp(dims[c], rng) for c in COMPONENTS))


def params_from_tensors(tensors: dict[str, np.ndarray]) -> ModelParams:
    """Rebuild ModelParams from checkpoint tensors."""
    mlps = []
    for comp in COMPONENTS:
        weights, biases = [], []
        k = 0
        while f"{comp}.w{k}" in tensors:
            weights.append(np.asarray(tensors[f"{comp}.w{k}"], dtype=np.float64))
            biases.append(np.asarray(tensors[f"{comp}.b{k}"], dtype=np.float64))
            k += 1
        if not weights:
            raise ValueError(f"checkpoint is missing component '{comp}'")
        mlps.append(nn.Mlp(weights, biases))
    return ModelParams(*mlps)


def active_views(mode: str) -> tuple[str, ...]:
    if mode == VIEW_BOTH:
        return ("token", "mask")
    if mode in (VIEW_ONLY_TOKEN, VIEW_ONLY_MASK):
        return (mode,)
    raise ValueError(f"bad view mode '{mode}'")


def view_probs(
    params: ModelParams, view: str, x: np.ndarray, known_only: bool = False
) -> np.ndarray:
    """Prediction distribution for one view (no caches kept)."""
    h, _ = nn.forward(params.proj(view), x)
    head_known, head_unknown = params.heads(view)
    lk, _ = nn.forward(head_known, h)
    if known_only:
        return nn.softmax(lk)
    lu, _ = nn.forward(head_unknown, h)
    return nn.softmax(np.concatenate([lk, lu], axis=1))


def _smoothed_ce_batch(
    probs: np.ndarray, targets: np.ndarray, cfg: LossConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per-row smoothed CE values and gradients w.r.t. probs."""
    b, c = probs.shape
    y = np.full((b, c), cfg.smoothing_eps / c)
    y[np.arange(b), targets] += 1.0 - cfg.smoothing_eps
    clamped = np.maximum(probs, cfg.prob_clamp)
    values = -(y * np.log(clamped)).sum(axis=1)
    grads = np.where(probs > cfg.prob_clamp, -y / clamped, 0.0)
    return values, grads


def _pairwise_sym_kl(r: np.ndarray, log_r: np.ndarray) -> np.ndarray:
    s = (r * log_r).sum(axis=1)
    d = 0.5 * (s[:, None] + s[None, :] - r @ log_r.T - log_r @ r.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def _pair_weight(d: np.ndarray, q: np.ndarray, alpha: float) -> np.ndarray:
    """dl/dd for every pair: 1 where must-link, -1 inside the margin."""
    w = np.where(q == 1, 1.0, np.where(d < alpha, -1.0, 0.0))
    np.fill_diagonal(w, 0.0)
    return w


def _pair_grad_wrt_r(
    w: np.ndarray, r: np.ndarray, log_r: np.ndarray, scale: float
) -> np.ndarray:
    """Sum over partners j of w_ij * d sym_kl(r_i, r_j) / d r_i, times scale."""
    row = w.sum(axis=1, keepdims=True)
    return 0.5 * scale * (row * (log_r + 1.0) - w @ log_r - (w @ r) / r)


@dataclass
class BatchTerms:
    sup: float
    unsup: float
    consist: float
    total: float
    n_labeled: int
    n_unlabeled: int


def batch_loss_and_grads(
    params: ModelParams,
    x_by_view: dict[str, np.ndarray],
    labeled_mask: np.ndarray,
    known_targets: np.ndarray,
    pseudo_by_view: dict[str, np.ndarray],
    cfg: LossConfig,
    view_mode: str = VIEW_BOTH,
    include_sup: bool = True,
    include_unsup: bool = True,
    include_consist: bool = True,
) -> tuple[BatchTerms, dict[str, np.ndarray]]:
    """Loss terms for one mixed batch and gradients of their weighted total.

    ``labeled_mask`` marks which batch rows are labeled; ``known_targets``
    gives the known-class index per labeled row (in mask order);
    ``pseudo_by_view`` gives each active view's pseudo-cluster id per
    unlabeled row. Pairs are formed among the batch's unlabeled rows only;
    fewer than two of them means zero unlabeled-pair loss.
    """
    views = active_views(view_mode)
    labeled_mask = np.asarray(labeled_mask, dtype=bool)
    n_lab = int(labeled_mask.sum())
    n_unlab = int((~labeled_mask).sum())
    unlab = ~labeled_mask

    probs: dict[str, np.ndarray] = {}
    caches: dict[str, tuple] = {}
    r_unlab: dict[str, np.ndarray] = {}
    log_r: dict[str, np.ndarray] = {}
    d_probs: dict[str, np.ndarray] = {}
    d_r: dict[str, np.ndarray] = {}

    for v in views:
        h, cache_p = nn.forward(params.proj(v), x_by_view[v])
        head_known, head_unknown = params.heads(v)
        lk, cache_k = nn.forward(head_known, h)
        lu, cache_u = nn.forward(head_unknown, h)
        p = nn.softmax(np.concatenate([lk, lu], axis=1))
        probs[v] = p
        caches[v] = (cache_p, cache_k, cache_u, lk.shape[1])
        d_probs[v] = np.zeros_like(p)
        if n_unlab:
            r = clamp_renorm(p[unlab], cfg.prob_clamp)
            r_unlab[v] = r
            log_r[v] = np.log(r)
            d_r[v] = np.zeros_like(r)

    sup = 0.0
    if include_sup and n_lab:
        for v in views:
            values, grads = _smoothed_ce_batch(probs[v][labeled_mask], known_targets, cfg)
            sup += values.mean() / len(views)
            d_probs[v][labeled_mask] += grads / (n_lab * len(views))

    unsup = 0.0
    if include_unsup and n_unlab >= 2:
        n_pairs = n_unlab * (n_unlab - 1) // 2
        d_mats = {v: _pairwise_sym_kl(r_unlab[v], log_r[v]) for v in views}
        q_mats = {
            v: (pseudo_by_view[v][:, None] == pseudo_by_view[v][None, :]).astype(np.int8)
            for v in views
        }
        for v in views:
            # each view's discrepancies are supervised by the other view's
            # pseudo pair labels; a lone view supervises itself
            other = views[1] if v == views[0] and len(views) == 2 else views[0]
            q = q_mats[other]
            d = d_mats[v]
            hinge = np.where(q == 1, d, np.maximum(0.0, cfg.alpha - d))
            unsup += float(np.triu(hinge, k=1).sum()) / n_pairs
            w = _pair_weight(d, q, cfg.alpha)
            d_r[v] += _pair_grad_wrt_r(w, r_unlab[v], log_r[v], 1.0 / n_pairs)

    consist = 0.0
    if include_consist and len(views) == 2 and n_unlab:
        rt, rm = r_unlab["token"], r_unlab["mask"]
        lt, lm = log_r["token"], log_r["mask"]
        consist = float((0.5 * ((rt - rm) * (lt - lm)).sum(axis=1)).mean())
        scale = cfg.beta / n_unlab
        d_r["token"] += scale * 0.5 * (lt - lm + 1.0 - rm / rt)
        d_r["mask"] += scale * 0.5 * (lm - lt + 1.0 - rt / rm)

    grads: dict[str, np.ndarray] = {}
    for v in views:
        if n_unlab:
            d_probs[v][unlab] += clamp_renorm_backward(
                probs[v][unlab], cfg.prob_clamp, d_r[v]
            )
        d_logits = nn.softmax_backward(probs[v], d_probs[v])
        cache_p, cache_k, cache_u, n_known = caches[v]
        head_known, head_unknown = params.heads(v)
        dh_k, grads_k = nn.backward(head_known, cache_k, d_logits[:, :n_known])
        dh_u, grads_u = nn.backward(head_unknown, cache_u, d_logits[:, n_known:])
        _, grads_p = nn.backward(params.proj(v), cache_p, dh_k + dh_u)
        comp_known, comp_unknown = (
            (f"head_known_{v}", f"head_unknown_{v}")
        )
        for k, (dw, db) in enumerate(grads_p):
            grads[f"proj_{v}.w{k}"] = dw
            grads[f"proj_{v}.b{k}"] = db
        for k, (dw, db) in enumerate(grads_k):
            grads[f"{comp_known}.w{k}"] = dw
            grads[f"{comp_known}.b{k}"] = db
        for k, (dw, db) in enumerate(grads_u):
            grads[f"{comp_unknown}.w{k}"] = dw
            grads[f"{comp_unknown}.b{k}"] = db

    total = sup + unsup + cfg.beta * consist
    return BatchTerms(sup, unsup, consist, total, n_lab, n_unlab), grads


def pretrain_batch_loss_and_grads(
    params: ModelParams,
    x_by_view: dict[str, np.ndarray],
    known_targets: np.ndarray,
    cfg: LossConfig,
    view_mode: str = VIEW_BOTH,
) -> tuple[float, dict[str, np.ndarray]]:
    """Warmup loss: smoothed CE over known logits only, labeled rows only."""
    views = active_views(view_mode)
    b = len(known_targets)
    loss = 0.0
    grads: dict[str, np.ndarray] = {}
    for v in views:
        h, cache_p = nn.forward(params.proj(v), x_by_view[v])
        head_known, _ = params.heads(v)
        lk, cache_k = nn.forward(head_known, h)
        p = nn.softmax(lk)
        values, d_p = _smoothed_ce_batch(p, known_targets, cfg)
        loss += values.mean() / len(views)
        d_logits = nn.softmax_backward(p, d_p / (b * len(views)))
        dh, grads_k = nn.backward(head_known, cache_k, d_logits)
        _, grads_p = nn.backward(params.proj(v), cache_p, dh)
        for k, (dw, db) in enumerate(grads_p):
            grads[f"proj_{v}.w{k}"] = dw
            grads[f"proj_{v}.b{k}"] = db
        for k, (dw, db) in enumerate(grads_k):
            grads[f"head_known_{v}.w{k}"] = dw
            grads[f"head_known_{v}.b{k}"] = db
    return loss, grads
