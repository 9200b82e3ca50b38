"""Dense tensors with reverse-mode automatic differentiation.

Conventions:
    - values are float64 (DTYPE); shapes follow numpy
    - sequence representations are (N, d) matrices, one row per token
    - word-pair grids are (N, N, channels), HWC layout
    - an op joins the gradient tape only when some input requires grad;
      backward() consumes and clears the tape

Every differentiable primitive lives in this module so the gradient
checks in the test suite can enumerate them.
"""

import numpy as np

DTYPE = np.float64

# clamp bounds applied to probabilities inside bce_sum only
_P_LO = 1e-12
_P_HI = 1.0 - 1e-12


class ShapeError(ValueError):
    """Raised when operand shapes violate a primitive's contract."""


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return tsum(self)

    def mean(self):
        return tmean(self)

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item: tensor of shape {self.data.shape} is not scalar")
        return float(self.data)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, backward_fn):
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _accumulate(t, g):
    if t.grad is None:
        t.grad = g.astype(DTYPE, copy=True)
    else:
        t.grad = t.grad + g


def _unbroadcast(g, shape):
    """Reduce gradient g back to `shape` after numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# primitives
# ---------------------------------------------------------------------------


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}") from None

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g, b.data.shape))

    return _node(data, (a, b), backward_fn)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul: cannot broadcast {a.shape} with {b.shape}") from None

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(data, (a, b), backward_fn)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    data = a.data @ b.data

    def backward_fn(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _node(data, (a, b), backward_fn)


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    data = np.where(mask, x.data, 0.0)

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g * mask)

    return _node(data, (x,), backward_fn)


def sigmoid(x):
    x = as_tensor(x)
    # split by sign so exp never overflows
    data = np.where(
        x.data >= 0,
        1.0 / (1.0 + np.exp(-np.abs(x.data))),
        np.exp(-np.abs(x.data)) / (1.0 + np.exp(-np.abs(x.data))),
    )

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g * data * (1.0 - data))

    return _node(data, (x,), backward_fn)


def softmax_rows(x):
    """Softmax along the last axis; rows of the output sum to 1."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=-1, keepdims=True)

    def backward_fn(g):
        if x.requires_grad:
            inner = (g * data).sum(axis=-1, keepdims=True)
            _accumulate(x, (g - inner) * data)

    return _node(data, (x,), backward_fn)


def concat(tensors):
    """Concatenate along the last axis; leading dims must agree."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: no inputs")
    lead = tensors[0].data.shape[:-1]
    for t in tensors[1:]:
        if t.data.shape[:-1] != lead:
            raise ShapeError(
                f"concat: leading dims differ, {tensors[0].shape} vs {t.shape}"
            )
    data = np.concatenate([t.data for t in tensors], axis=-1)
    widths = [t.data.shape[-1] for t in tensors]

    def backward_fn(g):
        offset = 0
        for t, w in zip(tensors, widths):
            if t.requires_grad:
                _accumulate(t, g[..., offset : offset + w])
            offset += w

    return _node(data, tuple(tensors), backward_fn)


def embedding(table, indices):
    """Row lookup: table (V, d), int indices of any shape -> indices.shape + (d,)."""
    table = as_tensor(table)
    if table.data.ndim != 2:
        raise ShapeError(f"embedding: table must be 2-d, got {table.shape}")
    idx = np.asarray(indices)
    if not np.issubdtype(idx.dtype, np.integer):
        raise ShapeError("embedding: indices must be integers")
    if idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ShapeError(
            f"embedding: index out of range for table with {table.data.shape[0]} rows"
        )
    data = table.data[idx]

    def backward_fn(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, idx.reshape(-1), g.reshape(-1, table.data.shape[1]))
            _accumulate(table, acc)

    return _node(data, (table,), backward_fn)


def conv2d(x, kernel):
    """2-d convolution over a (H, W, C_in) grid with a (k, k, C_in, C_out) kernel.

    Stride 1, symmetric zero padding of (k-1)/2, so spatial dims are preserved.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if x.data.ndim != 3 or kernel.data.ndim != 4:
        raise ShapeError(f"conv2d: need (H,W,C) input and (k,k,Cin,Cout) kernel, got {x.shape} and {kernel.shape}")
    k = kernel.data.shape[0]
    if kernel.data.shape[1] != k or k % 2 == 0:
        raise ShapeError(f"conv2d: kernel must be odd and square, got {kernel.shape}")
    if kernel.data.shape[2] != x.data.shape[2]:
        raise ShapeError(f"conv2d: channel mismatch, input {x.shape} vs kernel {kernel.shape}")
    h, w, _ = x.data.shape
    c_out = kernel.data.shape[3]
    pad = (k - 1) // 2
    xp = np.pad(x.data, ((pad, pad), (pad, pad), (0, 0)))
    data = np.zeros((h, w, c_out), dtype=DTYPE)
    for di in range(k):
        for dj in range(k):
            data += xp[di : di + h, dj : dj + w, :] @ kernel.data[di, dj]

    def backward_fn(g):
        if kernel.requires_grad:
            gk = np.zeros_like(kernel.data)
            for di in range(k):
                for dj in range(k):
                    patch = xp[di : di + h, dj : dj + w, :]
                    gk[di, dj] = np.einsum("hwi,hwo->io", patch, g)
            _accumulate(kernel, gk)
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for di in range(k):
                for dj in range(k):
                    gxp[di : di + h, dj : dj + w, :] += g @ kernel.data[di, dj].T
            _accumulate(x, gxp[pad : pad + h, pad : pad + w, :])

    return _node(data, (x, kernel), backward_fn)


def transpose_last2(x):
    x = as_tensor(x)
    if x.data.ndim < 2:
        raise ShapeError(f"transpose_last2: need at least 2 dims, got {x.shape}")
    data = x.data.swapaxes(-1, -2)

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g.swapaxes(-1, -2))

    return _node(data, (x,), backward_fn)


def reshape(x, shape):
    x = as_tensor(x)
    shape = tuple(shape)
    if int(np.prod(shape, dtype=np.int64)) != x.data.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
    data = x.data.reshape(shape)
    old = x.data.shape

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g.reshape(old))

    return _node(data, (x,), backward_fn)


def repeat_rows(x, n):
    """(N, d) -> (N, n, d) grid with out[i, j] = x[i]."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"repeat_rows: need a 2-d input, got {x.shape}")
    rows, d = x.data.shape
    data = np.broadcast_to(x.data[:, None, :], (rows, n, d)).copy()

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g.sum(axis=1))

    return _node(data, (x,), backward_fn)


def repeat_cols(x, n):
    """(N, d) -> (n, N, d) grid with out[i, j] = x[j]."""
    x = as_tensor(x)
    if x.data.ndim != 2:
        raise ShapeError(f"repeat_cols: need a 2-d input, got {x.shape}")
    rows, d = x.data.shape
    data = np.broadcast_to(x.data[None, :, :], (n, rows, d)).copy()

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, g.sum(axis=0))

    return _node(data, (x,), backward_fn)


def tsum(x):
    x = as_tensor(x)
    data = x.data.sum()

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, np.full(x.data.shape, float(g), dtype=DTYPE))

    return _node(data, (x,), backward_fn)


def tmean(x):
    x = as_tensor(x)
    data = x.data.mean()
    n = x.data.size

    def backward_fn(g):
        if x.requires_grad:
            _accumulate(x, np.full(x.data.shape, float(g) / n, dtype=DTYPE))

    return _node(data, (x,), backward_fn)


def bce_sum(probs, targets, weights):
    """Weighted binary cross-entropy, summed to a scalar.

    targets and weights are constants of the same shape as probs; weights of 0
    exclude cells from the loss (and from its gradient). Probabilities are
    clamped to [1e-12, 1-1e-12] inside the loss only; the gradient is cut
    where the clamp binds.
    """
    probs = as_tensor(probs)
    t = np.asarray(targets, dtype=DTYPE)
    w = np.asarray(weights, dtype=DTYPE)
    if t.shape != probs.data.shape or w.shape != probs.data.shape:
        raise ShapeError(
            f"bce_sum: shape mismatch, probs {probs.shape}, targets {t.shape}, weights {w.shape}"
        )
    p = np.clip(probs.data, _P_LO, _P_HI)
    data = -(w * (t * np.log(p) + (1.0 - t) * np.log1p(-p))).sum()
    inside = (probs.data > _P_LO) & (probs.data < _P_HI)

    def backward_fn(g):
        if probs.requires_grad:
            gp = float(g) * w * (p - t) / (p * (1.0 - p)) * inside
            _accumulate(probs, gp)

    return _node(data, (probs,), backward_fn)


# ---------------------------------------------------------------------------
# backward pass
# ---------------------------------------------------------------------------


def backward(loss):
    """Run reverse-mode accumulation from a scalar loss, then clear the tape.

    Visits the recorded graph in reverse topological order; every reachable
    tensor with requires_grad receives (accumulates) its gradient. The graph
    is released afterwards, so a second backward on the same loss fails.
    """
    if not isinstance(loss, Tensor):
        raise TypeError("backward: loss must be a Tensor")
    if loss.data.ndim != 0:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if loss._backward_fn is None:
        raise RuntimeError("backward: tape is empty (no recorded operations)")

    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited and parent._backward_fn is not None:
                stack.append((parent, False))

    loss.grad = np.asarray(1.0, dtype=DTYPE)
    for node in reversed(topo):
        if node._backward_fn is not None and node.grad is not None:
            node._backward_fn(node.grad)
    for node in topo:
        node._parents = ()
        node._backward_fn = None
