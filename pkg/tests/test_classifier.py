"""Classification-head and loss tests against a naively looped reference."""

import math

import numpy as np
import pytest

from care import classifier as cl
from care import tensor as T
from care.coattention import TaskReps
from care.config import CareConfig
from care.data import AnnotatedSentence, EntityMention, LabelTables, RelationTriplet, Schema, build_label_tables
from care.optim import ParamRegistry
from care.tensor import Tensor

from helpers import param_fd_check

SCHEMA = Schema(("A", "B"), ("R", "S"))


def looped_bce(probs, table, index_set):
    """Independent reference: explicit loops over cells and labels."""
    n = probs.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            if index_set == "ner" and not i <= j:
                continue
            if index_set == "re" and i == j:
                continue
            for c in range(probs.shape[2]):
                p = min(max(probs[i, j, c], 1e-12), 1 - 1e-12)
                y = table[i, j, c]
                total += -(y * math.log(p) + (1 - y) * math.log(1 - p))
    return total


def _classifier(config=None, seed=0):
    config = config or CareConfig(d_task=4, d_share=5).validate()
    reg = ParamRegistry()
    clf = cl.PairClassifier(reg, config, 2, 2, np.random.default_rng(seed))
    return reg, clf, config


def _reps_and_shared(n, d_task=4, d_share=5, seed=1):
    rng = np.random.default_rng(seed)
    reps = TaskReps(Tensor(rng.normal(size=(n, d_task))), Tensor(rng.normal(size=(n, d_task))))
    shared = Tensor(rng.normal(size=(n, n, d_share)))
    return reps, shared


class TestPairFeatures:
    def test_feature_width(self):
        reps, shared = _reps_and_shared(3)
        u_e, u_r = cl.build_pair_features(reps, shared, use_shared=True)
        assert u_e.shape == (3, 3, 13) and u_r.shape == (3, 3, 13)
        u_e2, _ = cl.build_pair_features(reps, shared, use_shared=False)
        assert u_e2.shape == (3, 3, 8)

    def test_ordered_concatenation_is_asymmetric(self):
        reps, shared = _reps_and_shared(3)
        u_e, _ = cl.build_pair_features(reps, shared)
        assert not np.array_equal(u_e.data[0, 2], u_e.data[2, 0])

    def test_single_token_cell(self):
        reps, shared = _reps_and_shared(1)
        u_e, _ = cl.build_pair_features(reps, shared)
        want = np.concatenate([reps.h_ner.data[0], reps.h_ner.data[0], shared.data[0, 0]])
        np.testing.assert_array_equal(u_e.data[0, 0], want)


class TestScoreCells:
    def test_zero_parameters_give_half_everywhere(self):
        reg, clf, _ = _classifier()
        for p in reg.all():
            p.tensor.data = np.zeros_like(p.tensor.data)
        reps, shared = _reps_and_shared(3)
        u_e, u_r = cl.build_pair_features(reps, shared)
        logits = cl.score_cells(u_e, u_r, clf)
        np.testing.assert_allclose(logits.entity_probs.data, 0.5, atol=1e-15)
        np.testing.assert_allclose(logits.relation_probs.data, 0.5, atol=1e-15)

    def test_probabilities_strictly_interior(self):
        reg, clf, _ = _classifier(seed=3)
        reps, shared = _reps_and_shared(4, seed=4)
        u_e, u_r = cl.build_pair_features(reps, shared)
        logits = cl.score_cells(u_e, u_r, clf)
        for probs in (logits.entity_probs.data, logits.relation_probs.data):
            assert np.all(probs > 0) and np.all(probs < 1)

    def test_monotone_in_final_bias(self):
        reg, clf, _ = _classifier(seed=5)
        reps, shared = _reps_and_shared(3, seed=6)
        u_e, u_r = cl.build_pair_features(reps, shared)
        base = cl.score_cells(u_e, u_r, clf).entity_probs.data.copy()
        clf.entity_head.b2.tensor.data = clf.entity_head.b2.tensor.data + np.array([1.0, 0.0])
        up = cl.score_cells(u_e, u_r, clf).entity_probs.data
        assert np.all(up[:, :, 0] > base[:, :, 0])
        np.testing.assert_array_equal(up[:, :, 1], base[:, :, 1])

    def test_head_gradients_match_finite_differences(self):
        reg, clf, _ = _classifier(seed=7)
        reps, shared = _reps_and_shared(3, seed=8)
        table = np.random.default_rng(9).integers(0, 2, size=(3, 3, 2)).astype(float)

        def make_loss():
            u_e, u_r = cl.build_pair_features(reps, shared)
            logits = cl.score_cells(u_e, u_r, clf)
            l_ner, l_re = cl.bce_losses(logits, LabelTables(table, table))
            return cl.total_loss(l_ner, l_re)

        param_fd_check(make_loss, reg.all())


class TestBceLosses:
    def test_single_cell_half_prob_is_ln2(self):
        logits = cl.PairLogits(
            entity_probs=Tensor(np.full((1, 1, 1), 0.5)),
            relation_probs=Tensor(np.full((1, 1, 1), 0.5)),
        )
        tables = LabelTables(np.ones((1, 1, 1)), np.ones((1, 1, 1)))
        l_ner, l_re = cl.bce_losses(logits, tables)
        assert float(l_ner.data) == pytest.approx(math.log(2), abs=1e-12)
        # N=1 has no off-diagonal cells, so the relation loss is empty
        assert float(l_re.data) == 0.0

    def test_perfect_probabilities_give_zero_loss(self):
        table = np.zeros((2, 2, 2))
        table[0, 1, 1] = 1.0
        logits = cl.PairLogits(
            entity_probs=Tensor(table.copy()),
            relation_probs=Tensor(table.copy()),
        )
        l_ner, l_re = cl.bce_losses(logits, LabelTables(table, table))
        # probabilities exactly at the labels are clamped to 1e-12 edges
        assert float(l_ner.data) == pytest.approx(0.0, abs=1e-9)
        assert float(l_re.data) == pytest.approx(0.0, abs=1e-9)

    def test_matches_looped_reference(self):
        rng = np.random.default_rng(10)
        for _ in range(25):
            n = int(rng.integers(1, 5))
            ent = rng.uniform(0.01, 0.99, size=(n, n, 2))
            rel = rng.uniform(0.01, 0.99, size=(n, n, 2))
            te = rng.integers(0, 2, size=(n, n, 2)).astype(float)
            tr = rng.integers(0, 2, size=(n, n, 2)).astype(float)
            logits = cl.PairLogits(Tensor(ent), Tensor(rel))
            l_ner, l_re = cl.bce_losses(logits, LabelTables(te, tr))
            assert float(l_ner.data) == pytest.approx(looped_bce(ent, te, "ner"), abs=1e-10)
            assert float(l_re.data) == pytest.approx(looped_bce(rel, tr, "re"), abs=1e-10)

    def test_ner_loss_ignores_lower_triangle(self):
        rng = np.random.default_rng(11)
        ent = rng.uniform(0.2, 0.8, size=(3, 3, 2))
        te = rng.integers(0, 2, size=(3, 3, 2)).astype(float)
        base = cl.bce_losses(
            cl.PairLogits(Tensor(ent), Tensor(ent)), LabelTables(te, te)
        )[0]
        ent2 = ent.copy()
        ent2[2, 0] = 0.99  # i > j
        ent2[1, 0] = 0.01
        pert = cl.bce_losses(
            cl.PairLogits(Tensor(ent2), Tensor(ent2)), LabelTables(te, te)
        )[0]
        assert float(base.data) == float(pert.data)

    def test_re_loss_ignores_diagonal(self):
        rng = np.random.default_rng(12)
        rel = rng.uniform(0.2, 0.8, size=(3, 3, 2))
        tr = rng.integers(0, 2, size=(3, 3, 2)).astype(float)
        base = cl.bce_losses(cl.PairLogits(Tensor(rel), Tensor(rel)), LabelTables(tr, tr))[1]
        rel2 = rel.copy()
        rel2[1, 1] = 0.99
        pert = cl.bce_losses(cl.PairLogits(Tensor(rel2), Tensor(rel2)), LabelTables(tr, tr))[1]
        assert float(base.data) == float(pert.data)

    def test_masked_cells_have_zero_gradient(self):
        rng = np.random.default_rng(13)
        ent = Tensor(rng.uniform(0.2, 0.8, size=(3, 3, 2)), requires_grad=True)
        rel = Tensor(rng.uniform(0.2, 0.8, size=(3, 3, 2)), requires_grad=True)
        te = rng.integers(0, 2, size=(3, 3, 2)).astype(float)
        l_ner, l_re = cl.bce_losses(cl.PairLogits(ent, rel), LabelTables(te, te))
        T.backward(cl.total_loss(l_ner, l_re))
        for i in range(3):
            for j in range(3):
                if i > j:
                    assert not ent.grad[i, j].any()
                if i == j:
                    assert not rel.grad[i, j].any()

    def test_gradient_per_label_is_local(self):
        # d L / d p(e | i, j) depends only on that cell's probability and label
        rng = np.random.default_rng(14)
        te = rng.integers(0, 2, size=(3, 3, 2)).astype(float)
        ent1 = rng.uniform(0.2, 0.8, size=(3, 3, 2))
        ent2 = ent1.copy()
        ent2[0, 2, 1] = 0.9  # a different cell

        grads = []
        for ent in (ent1, ent2):
            t = Tensor(ent, requires_grad=True)
            l_ner, _ = cl.bce_losses(
                cl.PairLogits(t, Tensor(np.full((3, 3, 2), 0.5))), LabelTables(te, te)
            )
            T.backward(l_ner)
            grads.append(t.grad)
        assert grads[0][0, 1, 0] == grads[1][0, 1, 0]

    def test_loss_positive_unless_perfect(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            n = int(rng.integers(1, 4))
            ent = rng.uniform(0.01, 0.99, size=(n, n, 2))
            te = rng.integers(0, 2, size=(n, n, 2)).astype(float)
            l_ner, l_re = cl.bce_losses(
                cl.PairLogits(Tensor(ent), Tensor(ent)), LabelTables(te, te)
            )
            assert float(l_ner.data) > 0 and float(l_re.data) >= 0

    def test_gold_tables_from_sentence(self):
        head = EntityMention(0, 0, "A")
        tail = EntityMention(1, 2, "B")
        s = AnnotatedSentence(
            ["x", "y", "z"], [head, tail], [RelationTriplet(head, tail, "S")]
        )
        tables = build_label_tables(s, SCHEMA)
        probs_e = np.where(tables.entity_table > 0, 0.9, 0.1)
        probs_r = np.where(tables.relation_table > 0, 0.9, 0.1)
        l_ner, l_re = cl.bce_losses(cl.PairLogits(Tensor(probs_e), Tensor(probs_r)), tables)
        assert float(l_ner.data) == pytest.approx(looped_bce(probs_e, tables.entity_table, "ner"), abs=1e-10)
        assert float(l_re.data) == pytest.approx(looped_bce(probs_r, tables.relation_table, "re"), abs=1e-10)


class TestTotalLoss:
    def test_sum_of_parts(self):
        a, b = Tensor(math.log(2)), Tensor(math.log(2))
        assert float(cl.total_loss(a, b).data) == pytest.approx(2 * math.log(2), abs=1e-15)

    def test_zero_plus_x(self):
        assert float(cl.total_loss(Tensor(0.0), Tensor(3.25)).data) == 3.25

    def test_equals_independent_resumming(self):
        rng = np.random.default_rng(16)
        ent = rng.uniform(0.1, 0.9, size=(2, 2, 2))
        te = rng.integers(0, 2, size=(2, 2, 2)).astype(float)
        l_ner, l_re = cl.bce_losses(cl.PairLogits(Tensor(ent), Tensor(ent)), LabelTables(te, te))
        total = cl.total_loss(l_ner, l_re)
        assert float(total.data) == pytest.approx(float(l_ner.data) + float(l_re.data), abs=1e-12)
