"""Dense layers with manual backprop, AdamW and gradient checking.

Batches are row-major (one instance per row). ReLU is applied between
layers but not after the last one; its subgradient at exactly 0 is 0.
Parameters are float64 in memory and float32 in checkpoints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class Mlp:
    """Affine layers with ReLU between them.

    ``weights[k]`` has shape (dims[k], dims[k+1]); ``biases[k]`` has shape
    (dims[k+1],).
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])


def init_mlp(layer_dims: list[int], rng: np.random.Generator) -> Mlp:
    """Uniform init in [-a, a] with a = sqrt(6 / (fan_in + fan_out)); zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-a, a, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(weights, biases)


def forward(mlp: Mlp, x: np.ndarray) -> tuple[np.ndarray, list]:
    """Run the net on a batch; returns (output, cache for backward).

    The cache holds each layer's input and pre-activation.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[1] != mlp.weights[0].shape[0]:
        raise ValueError(
            f"input has {x.shape[1]} columns, net expects {mlp.weights[0].shape[0]}"
        )
    cache = []
    a = x
    last = len(mlp.weights) - 1
    for k, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        z = a @ w + b
        cache.append((a, z))
        a = np.maximum(z, 0.0) if k < last else z
    return a, cache


def backward(
    mlp: Mlp, cache: list, d_out: np.ndarray
) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
    """Exact gradients of the cached forward pass.

    Returns (d_input, [(dW, db) per layer]).
    """
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(mlp.weights)  # type: ignore
    dz = np.asarray(d_out, dtype=np.float64)
    if dz.shape != (cache[-1][1].shape):
        raise ValueError(f"d_out shape {dz.shape} != output shape {cache[-1][1].shape}")
    for k in range(len(mlp.weights) - 1, -1, -1):
        a, z = cache[k]
        dw = a.T @ dz
        db = dz.sum(axis=0)
        grads[k] = (dw, db)
        da = dz @ mlp.weights[k].T
        if k > 0:
            dz = da * (cache[k - 1][1] > 0.0)
        else:
            dz = da
    return dz, grads


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax along the last axis."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_backward(probs: np.ndarray, d_probs: np.ndarray) -> np.ndarray:
    """Gradient through softmax: dlogits = p * (dp - sum(dp * p))."""
    inner = (d_probs * probs).sum(axis=-1, keepdims=True)
    return probs * (d_probs - inner)


@dataclass
class OptimState:
    """AdamW with decoupled weight decay and a linear decay schedule.

    Effective lr at a step is base_lr * max(0, 1 - step / total_steps) where
    ``step`` counts completed steps; bias correction uses step + 1.
    """

    base_lr: float
    total_steps: int
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def lr_at(self, step: int) -> float:
        if self.total_steps <= 0:
            return self.base_lr
        return self.base_lr * max(0.0, 1.0 - step / self.total_steps)


def adamw_step(
    state: OptimState, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]
) -> dict[str, np.ndarray]:
    """One in-place AdamW update over named parameters."""
    lr = state.lr_at(state.step)
    t = state.step + 1
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != param shape {p.shape} for {name}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m += (1.0 - state.beta1) * (g - m)
        v += (1.0 - state.beta2) * (g * g - v)
        p -= lr * ((m / bc1) / (np.sqrt(v / bc2) + state.eps) + state.weight_decay * p)
    state.step += 1
    return params


def grad_check(
    mlp: Mlp,
    loss_fn,
    x: np.ndarray,
    h: float = 1e-4,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``loss_fn(out) -> (scalar, d_out)``. Inputs sitting on a ReLU kink
    (|pre-activation| < 1e-6) are nudged before checking.
    """
    x = np.asarray(x, dtype=np.float64).copy()
    # a bias step of h can flip any ReLU whose pre-activation is within h of
    # zero, so keep a margin comfortably wider than the difference step
    margin = max(1e-6, 10.0 * h)
    rng = np.random.default_rng(0)
    out, cache = forward(mlp, x)
    for attempt in range(50):
        if all(np.abs(z).min() >= margin for _, z in cache[:-1]):
            break
        x = x + rng.normal(scale=margin * (attempt + 1), size=x.shape)
        out, cache = forward(mlp, x)

    _, d_out = loss_fn(out)
    _, grads = backward(mlp, cache, d_out)

    worst = 0.0
    for k in range(len(mlp.weights)):
        for arr, analytic in ((mlp.weights[k], grads[k][0]), (mlp.biases[k], grads[k][1])):
            it = np.nditer(arr, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                orig = arr[idx]
                arr[idx] = orig + h
                lo_plus, _ = loss_fn(forward(mlp, x)[0])
                arr[idx] = orig - h
                lo_minus, _ = loss_fn(forward(mlp, x)[0])
                arr[idx] = orig
                numeric = (lo_plus - lo_minus) / (2.0 * h)
                a = analytic[idx]
                err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
                worst = max(worst, err)
    return worst


def relative_grad_errors(
    analytic: dict[str, np.ndarray], numeric: dict[str, np.ndarray]
) -> float:
    """Max elementwise relative error, |a - n| / max(1, |a|, |n|)."""
    worst = 0.0
    for name, a in analytic.items():
        n = numeric[name]
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst
