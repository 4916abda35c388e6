import numpy as np
import pytest

from coview import nn
from coview.nn import Mlp, OptimState, adamw_step, backward, forward, grad_check, softmax


def reference_forward(mlp, x):
    """Independent straightforward re-evaluation, scalar loops."""
    out = np.zeros((x.shape[0], mlp.weights[-1].shape[1]))
    for r in range(x.shape[0]):
        a = x[r].astype(np.float64)
        for k, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
            z = np.array([sum(a[i] * w[i, j] for i in range(w.shape[0])) + b[j] for j in range(w.shape[1])])
            a = np.maximum(z, 0) if k < len(mlp.weights) - 1 else z
        out[r] = a
    return out


def random_mlp(dims, seed=0):
    rng = np.random.default_rng(seed)
    return nn.init_mlp(dims, rng)


def test_forward_identity_single_layer():
    mlp = Mlp([np.eye(2)], [np.zeros(2)])
    out, _ = forward(mlp, np.array([[1.0, -1.0]]))
    assert np.allclose(out, [[1.0, -1.0]])


def test_forward_zero_weights_gives_bias():
    b = np.array([0.5, -2.0, 3.0])
    mlp = Mlp([np.zeros((4, 3))], [b])
    out, _ = forward(mlp, np.random.default_rng(0).normal(size=(6, 4)))
    assert np.allclose(out, np.tile(b, (6, 1)))


def test_forward_matches_independent_reevaluation():
    mlp = random_mlp([4, 3, 2], seed=7)
    x = np.random.default_rng(8).normal(size=(5, 4))
    out, _ = forward(mlp, x)
    assert np.allclose(out, reference_forward(mlp, x), atol=1e-12)


def test_forward_dim_mismatch():
    mlp = random_mlp([4, 3], seed=1)
    with pytest.raises(ValueError):
        forward(mlp, np.zeros((2, 5)))


def test_backward_linear_outer_product():
    # y = x W, dOut = ones: dW[i, j] = sum_r x[r, i]
    rng = np.random.default_rng(2)
    w = rng.normal(size=(3, 3))
    mlp = Mlp([w], [np.zeros(3)])
    x = rng.normal(size=(4, 3))
    out, cache = forward(mlp, x)
    d_out = np.ones_like(out)
    dx, grads = backward(mlp, cache, d_out)
    assert np.allclose(grads[0][0], x.T @ d_out)
    assert np.allclose(dx, d_out @ w.T)


def test_relu_subgradient_zero_at_kink():
    # hidden pre-activation exactly 0: no gradient flows through that unit
    w0 = np.array([[1.0]])
    mlp = Mlp([w0, np.array([[1.0]])], [np.zeros(1), np.zeros(1)])
    x = np.array([[0.0]])
    out, cache = forward(mlp, x)
    dx, grads = backward(mlp, cache, np.ones_like(out))
    assert dx[0, 0] == 0.0
    assert grads[0][0][0, 0] == 0.0


def test_backward_matches_finite_differences():
    mlp = random_mlp([5, 4, 3], seed=3)
    x = np.random.default_rng(4).normal(size=(6, 5))

    def loss_fn(out):
        # smooth, nonlinear in out
        value = float((out**2).sum() + np.sin(out).sum())
        return value, 2.0 * out + np.cos(out)

    assert grad_check(mlp, loss_fn, x) <= 1e-4


def test_grad_check_linear_quadratic_tight():
    mlp = Mlp([np.random.default_rng(5).normal(size=(4, 2))], [np.zeros(2)])
    x = np.random.default_rng(6).normal(size=(3, 4))

    def loss_fn(out):
        return float((out**2).sum()), 2.0 * out

    assert grad_check(mlp, loss_fn, x) <= 1e-7


def test_grad_check_perturbs_kinks():
    # weights chosen so some pre-activations are exactly 0 at x=0
    mlp = random_mlp([2, 3, 1], seed=9)
    x = np.zeros((2, 2))

    def loss_fn(out):
        return float((out**2).sum()), 2.0 * out

    assert grad_check(mlp, loss_fn, x) <= 1e-4


def test_softmax_basics():
    assert np.allclose(softmax(np.array([0.0, 0.0])), [0.5, 0.5])
    big = softmax(np.array([1000.0, 0.0]))
    assert np.isfinite(big).all()
    assert big[0] > 1 - 1e-12 and big[1] < 1e-12
    expected = [0.09003057, 0.24472847, 0.66524096]
    assert np.allclose(softmax(np.array([1.0, 2.0, 3.0])), expected, atol=1e-8)


def test_softmax_valid_distribution_random():
    rng = np.random.default_rng(11)
    for _ in range(200):
        logits = rng.normal(scale=rng.uniform(0.1, 100), size=rng.integers(2, 9))
        p = softmax(logits)
        assert (p > 0).all()
        assert abs(p.sum() - 1.0) < 1e-6


def test_softmax_backward_matches_fd():
    rng = np.random.default_rng(12)
    logits = rng.normal(size=7)
    target = rng.normal(size=7)

    def value(lg):
        return float((softmax(lg) * target).sum())

    p = softmax(logits)
    analytic = nn.softmax_backward(p, target)
    h = 1e-6
    for i in range(7):
        e = np.zeros(7)
        e[i] = h
        numeric = (value(logits + e) - value(logits - e)) / (2 * h)
        assert abs(analytic[i] - numeric) <= 1e-6


def test_adamw_pure_decay_with_zero_grad():
    params = {"w": np.array([2.0])}
    state = OptimState(base_lr=0.1, total_steps=10, weight_decay=0.01)
    adamw_step(state, params, {"w": np.array([0.0])})
    assert np.allclose(params["w"], 2.0 * (1 - 0.1 * 0.01))


def test_adamw_single_step_hand_computed():
    params = {"w": np.array([1.0])}
    state = OptimState(base_lr=1e-3, total_steps=10**9, weight_decay=0.0)
    adamw_step(state, params, {"w": np.array([1.0])})
    # m-hat = v-hat = 1 at step 1, so the update is lr / (1 + eps)
    assert np.allclose(params["w"], 1.0 - 1e-3 / (1.0 + 1e-8), atol=1e-12)
    assert abs(params["w"][0] - 0.999) < 1e-9


def test_adamw_schedule_reaches_zero():
    params = {"w": np.array([1.5])}
    state = OptimState(base_lr=0.1, total_steps=5, weight_decay=0.01, step=5)
    before = params["w"].copy()
    adamw_step(state, params, {"w": np.array([3.0])})
    assert np.array_equal(params["w"], before)
    assert state.step == 6


def test_adamw_deterministic_sequence():
    def run():
        rng = np.random.default_rng(13)
        params = {"w": rng.normal(size=(3, 2))}
        state = OptimState(base_lr=1e-2, total_steps=20)
        for _ in range(20):
            adamw_step(state, params, {"w": rng.normal(size=(3, 2))})
        return params["w"]

    a, b = run(), run()
    assert np.array_equal(a, b)


def test_init_deterministic_and_bounded():
    a = nn.init_mlp([6, 4, 2], np.random.default_rng(99))
    b = nn.init_mlp([6, 4, 2], np.random.default_rng(99))
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    bound0 = np.sqrt(6.0 / (6 + 4))
    assert np.abs(a.weights[0]).max() <= bound0
    assert all(np.all(bias == 0) for bias in a.biases)
