"""Per-cell classification heads and the binary cross-entropy objective.

Both tasks score every ordered word pair: cell (i, j) gets one independent
sigmoid per label (multi-label). The entity loss runs over cells i <= j, the
relation loss over i != j; cells outside each index set are masked out of
the loss and therefore of its gradient.
"""

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .coattention import Mlp2
from .tensor import Tensor


@dataclass
class PairLogits:
    entity_probs: Tensor  # (N, N, |E|), strictly inside (0, 1)
    relation_probs: Tensor  # (N, N, |R|)


class PairClassifier:
    def __init__(self, reg, config, n_entity_types, n_relation_types, rng):
        self.use_shared = config.use_shared_in_classifier
        width = 2 * config.d_task + (config.d_share if self.use_shared else 0)
        self.feature_width = width
        self.entity_head = Mlp2(reg, "head.entity", width, config.d_task, n_entity_types, rng)
        self.relation_head = Mlp2(reg, "head.relation", width, config.d_task, n_relation_types, rng)


def build_pair_features(reps, shared, use_shared=True):
    """u_e[i,j] = [g_i_ner; g_j_ner; shared(i,j)] and likewise for the re stream."""
    n = reps.n
    shared_part = [shared] if use_shared else []
    u_e = T.concat([T.repeat_rows(reps.h_ner, n), T.repeat_cols(reps.h_ner, n)] + shared_part)
    u_r = T.concat([T.repeat_rows(reps.h_re, n), T.repeat_cols(reps.h_re, n)] + shared_part)
    return u_e, u_r


def score_cells(u_e, u_r, classifier):
    """Two-layer heads with a final sigmoid, applied per cell."""
    n = u_e.shape[0]

    def head(grid, mlp):
        flat = T.reshape(grid, (n * n, grid.shape[-1]))
        out = T.sigmoid(mlp(flat))
        return T.reshape(out, (n, n, out.shape[-1]))

    return PairLogits(
        entity_probs=head(u_e, classifier.entity_head),
        relation_probs=head(u_r, classifier.relation_head),
    )


def ner_loss_mask(n, n_labels):
    """1 on cells i <= j, replicated across labels."""
    upper = np.triu(np.ones((n, n)))
    return np.repeat(upper[:, :, None], n_labels, axis=2)


def re_loss_mask(n, n_labels):
    """1 on cells i != j, replicated across labels."""
    off_diag = np.ones((n, n)) - np.eye(n)
    return np.repeat(off_diag[:, :, None], n_labels, axis=2)


def bce_losses(logits, tables):
    """Summed binary cross-entropy per task over each task's index set."""
    n = logits.entity_probs.shape[0]
    l_ner = T.bce_sum(
        logits.entity_probs,
        tables.entity_table,
        ner_loss_mask(n, logits.entity_probs.shape[-1]),
    )
    l_re = T.bce_sum(
        logits.relation_probs,
        tables.relation_table,
        re_loss_mask(n, logits.relation_probs.shape[-1]),
    )
    return l_ner, l_re


def total_loss(l_ner, l_re):
    return T.add(l_ner, l_re)
