"""Cross-task interaction stack.

Per layer, over the current pair of task representations:

    grid[i, j] = [h_i_ner ; h_j_re ; dist(j - i)]     (N, N, 2*d_task + d_dist)
    shared     = relu(conv2d(grid) + bias)            (N, N, d_share)
    A[i, j]    = scalar feed-forward score of shared[i, j]
    alpha      = row softmax of A, beta = row softmax of A^T
    g_i_ner    = h_i_ner + sum_j alpha[i, j] * h_j_re   (and symmetrically for re)

The distance slice and the attention update are independently switchable for
the ablation settings; with attention off the scorer is never evaluated and
the representations pass through unchanged.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .optim import normal_init, uniform_init
from .tensor import ShapeError, Tensor


@dataclass
class TaskReps:
    h_ner: Tensor
    h_re: Tensor

    @property
    def n(self):
        return self.h_ner.shape[0]


@dataclass
class AttentionPair:
    scores: Tensor  # (N, N)
    alpha: Tensor  # row-stochastic (N, N)
    beta: Tensor  # row-stochastic (N, N)


class Mlp2:
    """Two linear layers with a ReLU between them.

    Weights and biases are uniform in +-1/sqrt(fan_in); non-zero biases keep
    pre-activations away from the ReLU kink at a generic point."""

    def __init__(self, reg, prefix, d_in, d_hidden, d_out, rng):
        self.w1 = reg.add(f"{prefix}.w1", uniform_init(rng, (d_in, d_hidden), d_in))
        self.b1 = reg.add(f"{prefix}.b1", uniform_init(rng, (d_hidden,), d_in))
        self.w2 = reg.add(f"{prefix}.w2", uniform_init(rng, (d_hidden, d_out), d_hidden))
        self.b2 = reg.add(f"{prefix}.b2", uniform_init(rng, (d_out,), d_hidden))

    def __call__(self, x):
        h = T.relu(T.add(T.matmul(x, self.w1.tensor), self.b1.tensor))
        return T.add(T.matmul(h, self.w2.tensor), self.b2.tensor)


class DistanceEmbedding:
    """Trainable embedding of the clamped signed offset j - i."""

    def __init__(self, reg, prefix, clamp_k, d_dist, rng):
        self.clamp_k = clamp_k
        self.d_dist = d_dist
        self.table = reg.add(f"{prefix}.table", normal_init(rng, (2 * clamp_k + 1, d_dist)))

    def index_grid(self, n):
        offsets = np.arange(n)[None, :] - np.arange(n)[:, None]  # j - i
        return np.clip(offsets, -self.clamp_k, self.clamp_k) + self.clamp_k

    def lookup(self, n):
        return T.embedding(self.table.tensor, self.index_grid(n))


class ConvBlock:
    """Same-size 2-d convolution plus bias, ReLU-activated."""

    def __init__(self, reg, prefix, kernel_size, c_in, c_out, rng):
        fan_in = kernel_size * kernel_size * c_in
        self.kernel = reg.add(
            f"{prefix}.kernel", uniform_init(rng, (kernel_size, kernel_size, c_in, c_out), fan_in)
        )
        self.bias = reg.add(f"{prefix}.bias", uniform_init(rng, (c_out,), fan_in))

    def __call__(self, grid):
        return T.relu(T.add(T.conv2d(grid, self.kernel.tensor), self.bias.tensor))


def project_tasks(h, ner_mlp, re_mlp):
    """Disjoint task-specific projections of the shared token matrix."""
    return TaskReps(h_ner=ner_mlp(h), h_re=re_mlp(h))


def build_pair_grid(reps, dist=None):
    """Pairwise concatenation grid; the distance slice is optional (ablation)."""
    n = reps.n
    parts = [T.repeat_rows(reps.h_ner, n), T.repeat_cols(reps.h_re, n)]
    if dist is not None and dist.d_dist > 0:
        parts.append(dist.lookup(n))
    return T.concat(parts)


def attention_scores(shared, ffnn):
    """Scalar score per cell, then paired row softmaxes of A and A^T."""
    n, _, d = shared.shape
    flat = T.reshape(shared, (n * n, d))
    a = T.reshape(ffnn(flat), (n, n))
    alpha = T.softmax_rows(a)
    beta = T.softmax_rows(T.transpose_last2(a))
    return AttentionPair(scores=a, alpha=alpha, beta=beta)


def coattention_update(reps, att):
    """Skip-connected cross-task aggregation."""
    if reps.h_ner.shape != reps.h_re.shape:
        raise ShapeError(
            f"coattention_update: stream shapes differ, {reps.h_ner.shape} vs {reps.h_re.shape}"
        )
    g_ner = T.add(reps.h_ner, T.matmul(att.alpha, reps.h_re))
    g_re = T.add(reps.h_re, T.matmul(att.beta, reps.h_ner))
    return TaskReps(h_ner=g_ner, h_re=g_re)


class CoattentionLayer:
    def __init__(self, reg, prefix, config, rng):
        c_in = 2 * config.d_task + (config.d_dist if config.use_distance else 0)
        self.dist = None
        if config.use_distance and config.d_dist > 0:
            self.dist = DistanceEmbedding(
                reg, f"{prefix}.dist", config.distance_clamp_k, config.d_dist, rng
            )
        self.conv = ConvBlock(reg, f"{prefix}.conv", config.kernel_size, c_in, config.d_share, rng)
        self.attn_ffnn = None
        if config.use_coattention:
            self.attn_ffnn = Mlp2(reg, f"{prefix}.attn", config.d_share, config.d_share, 1, rng)

    def forward(self, reps):
        shared = self.conv(build_pair_grid(reps, self.dist))
        if self.attn_ffnn is None:
            return reps, shared, None
        att = attention_scores(shared, self.attn_ffnn)
        return coattention_update(reps, att), shared, att


class CoattentionStack:
    """Task projections followed by n_layers interaction layers (untied)."""

    def __init__(self, reg, d_model, config, rng):
        if config.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {config.n_layers}")
        self.ner_mlp = Mlp2(reg, "proj.ner", d_model, config.d_task, config.d_task, rng)
        self.re_mlp = Mlp2(reg, "proj.re", d_model, config.d_task, config.d_task, rng)
        self.layers = [
            CoattentionLayer(reg, f"layer{i}", config, rng) for i in range(config.n_layers)
        ]

    def run(self, h):
        """Returns the final task representations and the final shared grid."""
        reps = project_tasks(h, self.ner_mlp, self.re_mlp)
        shared = None
        for layer in self.layers:
            reps, shared, _ = layer.forward(reps)
        return reps, shared
