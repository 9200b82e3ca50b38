"""Shared test oracles: central finite differences and gradient harnesses.

The finite-difference oracle only evaluates forward passes; it never reads
the gradients it is checking.
"""

import numpy as np

from care import tensor as T

FD_STEP = 1e-5
FD_TOL = 1e-4
# relative error floor: near-zero gradients are compared absolutely
REL_FLOOR = 1e-3


def central_diff(loss_fn, values, h=FD_STEP):
    """d loss / d values by central differences, one entry at a time.

    loss_fn takes the list of ndarrays and returns a float; values are
    perturbed in place and restored.
    """
    grads = []
    for v in values:
        g = np.zeros_like(v)
        flat, gf = v.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = loss_fn(values)
            flat[i] = orig - h
            down = loss_fn(values)
            flat[i] = orig
            gf[i] = (up - down) / (2.0 * h)
        grads.append(g)
    return grads


def max_rel_err(analytic, numeric, floor=REL_FLOOR):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    if analytic.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom))


def analytic_grads(build, values):
    """Backward-pass gradients of build(tensors) w.r.t. every input."""
    tensors = [T.Tensor(v, requires_grad=True) for v in values]
    loss = build(tensors)
    T.backward(loss)
    return [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]


def assert_grad_matches(build, values, tol=FD_TOL, h=FD_STEP):
    """Compare backward() against central differences for a scalar graph.

    build maps a list of Tensors to a scalar loss Tensor; values is the list
    of input ndarrays. Returns the worst relative error observed.
    """

    def loss_fn(vals):
        tensors = [T.Tensor(v) for v in vals]
        return float(build(tensors).data)

    got = analytic_grads(build, values)
    want = central_diff(loss_fn, values, h=h)
    worst = 0.0
    for g, w in zip(got, want):
        worst = max(worst, max_rel_err(g, w))
    assert worst < tol, f"gradient mismatch: rel err {worst:.3e} >= {tol}"
    return worst


# ---------------------------------------------------------------------------
# one random gradient-check case per differentiable primitive
# ---------------------------------------------------------------------------


def _rand(rng, *shape):
    return rng.uniform(-2.0, 2.0, size=shape)


def _rand_away_from_zero(rng, *shape, margin=0.05):
    v = rng.uniform(margin, 2.0, size=shape)
    return v * rng.choice([-1.0, 1.0], size=shape)


def primitive_grad_cases(rng):
    """Yield (name, build, values) triples, one fresh random case each.

    Every differentiable primitive in care.tensor appears. Losses are
    scalarized with tsum/tmean, which are themselves under test.
    """
    n = int(rng.integers(2, 5))
    m = int(rng.integers(2, 5))
    d = int(rng.integers(2, 4))

    yield "add", lambda ts: T.tsum(T.mul(T.add(ts[0], ts[1]), T.add(ts[0], ts[1]))), [
        _rand(rng, n, m),
        _rand(rng, m),  # broadcast across rows
    ]
    yield "mul", lambda ts: T.tsum(T.mul(ts[0], ts[1])), [
        _rand(rng, n, m),
        _rand(rng, n, 1),  # broadcast across columns
    ]
    yield "matmul", lambda ts: T.tsum(T.matmul(ts[0], ts[1])), [
        _rand(rng, n, m),
        _rand(rng, m, d),
    ]
    yield "relu", lambda ts: T.tsum(T.relu(ts[0])), [
        _rand_away_from_zero(rng, n, m)
    ]
    yield "sigmoid", lambda ts: T.tsum(T.sigmoid(ts[0])), [_rand(rng, n, m)]
    yield "softmax_rows", (
        lambda ts: T.tsum(T.mul(T.softmax_rows(ts[0]), ts[1]))
    ), [_rand(rng, n, m), _rand(rng, n, m)]
    yield "concat", (
        lambda ts: T.tsum(T.mul(T.concat([ts[0], ts[1]]), T.concat([ts[1], ts[0]])))
    ), [_rand(rng, n, m), _rand(rng, n, m)]

    idx = rng.integers(0, n, size=(m,))
    yield "embedding", lambda ts: T.tsum(T.mul(T.embedding(ts[0], idx), T.embedding(ts[0], idx))), [
        _rand(rng, n, d)
    ]

    k = int(rng.choice([1, 3]))
    c_in, c_out = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    yield "conv2d", lambda ts: T.tsum(T.conv2d(ts[0], ts[1])), [
        _rand(rng, n, m, c_in),
        _rand(rng, k, k, c_in, c_out),
    ]
    yield "transpose_last2", (
        lambda ts: T.tsum(T.mul(T.transpose_last2(ts[0]), ts[1]))
    ), [_rand(rng, n, m), _rand(rng, m, n)]
    yield "reshape", (
        lambda ts: T.tsum(T.mul(T.reshape(ts[0], (m, n)), ts[1]))
    ), [_rand(rng, n, m), _rand(rng, m, n)]
    yield "repeat_rows", (
        lambda ts: T.tsum(T.mul(T.repeat_rows(ts[0], m), ts[1]))
    ), [_rand(rng, n, d), _rand(rng, n, m, d)]
    yield "repeat_cols", (
        lambda ts: T.tsum(T.mul(T.repeat_cols(ts[0], m), ts[1]))
    ), [_rand(rng, n, d), _rand(rng, m, n, d)]
    yield "tsum", lambda ts: T.tsum(T.mul(ts[0], ts[0])), [_rand(rng, n, m)]
    yield "tmean", lambda ts: T.tmean(T.mul(ts[0], ts[0])), [_rand(rng, n, m)]

    targets = rng.integers(0, 2, size=(n, m)).astype(float)
    weights = rng.integers(0, 2, size=(n, m)).astype(float)
    yield "bce_sum", lambda ts: T.bce_sum(T.sigmoid(ts[0]), targets, weights), [
        _rand(rng, n, m)
    ]


PRIMITIVE_NAMES = [name for name, _, _ in primitive_grad_cases(np.random.default_rng(0))]


def param_fd_check(make_loss, params, tol=FD_TOL, h=FD_STEP):
    """Gradient check of a parameterized scalar loss over Parameter objects.

    make_loss() must rebuild the forward pass from the parameters' current
    data. Returns the worst relative error across all parameters.
    """
    for p in params:
        p.tensor.grad = None
    loss = make_loss()
    T.backward(loss)
    analytic = [
        p.tensor.grad.copy() if p.tensor.grad is not None else np.zeros_like(p.tensor.data)
        for p in params
    ]

    def loss_fn(_values):
        return float(make_loss().data)

    worst = 0.0
    for p, a in zip(params, analytic):
        numeric = central_diff(loss_fn, [p.tensor.data], h=h)[0]
        err = max_rel_err(a, numeric)
        assert err < tol, f"gradient mismatch for {p.name}: rel err {err:.3e} >= {tol}"
        worst = max(worst, err)
    return worst


def reference_adam(value, grads, lr, beta1, beta2, eps):
    """Scalar Adam oracle, written independently of care.optim."""
    m = 0.0
    v = 0.0
    x = float(value)
    for t, g in enumerate(grads, start=1):
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        x = x - lr * m_hat / (v_hat**0.5 + eps)
    return x
