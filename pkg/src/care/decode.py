"""Decoding probability tables into typed predictions, and micro-F1 scoring.

Matching modes follow the two dataset conventions: STRICT compares full span
boundaries plus types; PARTIAL keys every mention by its last token plus
type. After projecting to the mode's key, counts are pooled over the corpus
as multisets, so a projection that merges distinct gold mentions still
credits each prediction at most once per remaining gold item.
"""

from collections import Counter, defaultdict
from dataclasses import dataclass
from enum import Enum


class MatchMode(str, Enum):
    PARTIAL = "partial"
    STRICT = "strict"


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    fn: int


@dataclass(frozen=True)
class Prediction:
    """Decoded (or gold) mention and triplet sets for one sentence.

    Mentions are (start, end, entity_type) tuples; triplets are
    (head_mention, tail_mention, relation_type).
    """

    mentions: frozenset
    triplets: frozenset

    def __post_init__(self):
        for head, tail, _ in self.triplets:
            if head not in self.mentions or tail not in self.mentions:
                raise ValueError(f"triplet references a mention outside the set: {head}, {tail}")


def _check_threshold(threshold):
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must be in (0, 1), got {threshold}")


def decode_entities(entity_probs, entity_types, threshold=0.5):
    """Mentions (i, j, type) for every cell with i <= j scoring above threshold."""
    _check_threshold(threshold)
    mentions = set()
    for i, j, e in zip(*(idx.tolist() for idx in (entity_probs > threshold).nonzero())):
        if i <= j:
            mentions.add((i, j, entity_types[e]))
    return mentions


def decode_relations(relation_probs, mentions, relation_types, threshold=0.5):
    """Triplets for every hot off-diagonal cell, expanded over head-word matches.

    A cell (i, j, r) yields one triplet per pair of decoded mentions ending at
    i and j respectively; hot cells with no matching mention are dropped.
    """
    _check_threshold(threshold)
    by_end = defaultdict(list)
    for m in mentions:
        by_end[m[1]].append(m)
    triplets = set()
    for i, j, r in zip(*(idx.tolist() for idx in (relation_probs > threshold).nonzero())):
        if i == j:
            continue
        for head in by_end.get(i, ()):
            for tail in by_end.get(j, ()):
                triplets.add((head, tail, relation_types[r]))
    return triplets


def decode_prediction(entity_probs, relation_probs, schema, threshold=0.5):
    mentions = decode_entities(entity_probs, schema.entity_types, threshold)
    triplets = decode_relations(relation_probs, mentions, schema.relation_types, threshold)
    return Prediction(mentions=frozenset(mentions), triplets=frozenset(triplets))


def gold_prediction(sentence):
    """The gold annotation of a sentence in Prediction form."""
    mentions = frozenset(m.as_tuple() for m in sentence.entities)
    triplets = frozenset(
        (r.head.as_tuple(), r.tail.as_tuple(), r.relation_type) for r in sentence.relations
    )
    return Prediction(mentions=mentions, triplets=triplets)


def _project_mention(m, mode):
    if mode == MatchMode.STRICT:
        return m
    return (m[1], m[2])  # last token + type


def _project(pred, mode, task):
    if task == "ner":
        return Counter(_project_mention(m, mode) for m in pred.mentions)
    if task == "re":
        return Counter(
            (_project_mention(h, mode), _project_mention(t, mode), r)
            for h, t, r in pred.triplets
        )
    raise ValueError(f"task must be 'ner' or 're', got {task!r}")


def prf_from_counts(tp, fp, fn):
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f1, tp, fp, fn)


def micro_f1(preds, golds, mode, task):
    """Corpus-pooled precision/recall/F1 for one task under one match mode."""
    mode = MatchMode(mode)
    if len(preds) != len(golds):
        raise ValueError(f"micro_f1: {len(preds)} predictions vs {len(golds)} gold sentences")
    tp = fp = fn = 0
    for p, g in zip(preds, golds):
        pc, gc = _project(p, mode, task), _project(g, mode, task)
        overlap = sum((pc & gc).values())
        tp += overlap
        fp += sum(pc.values()) - overlap
        fn += sum(gc.values()) - overlap
    return prf_from_counts(tp, fp, fn)
