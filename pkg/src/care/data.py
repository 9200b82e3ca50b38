"""Annotated corpora: parsing, validation, gold label tables, batching.

Corpus files are UTF-8 JSON lines. Each record:

    {"tokens": ["..."],
     "entities": [[start, end, type], ...],
     "relations": [[[hs, he, htype], [ts, te, ttype], rtype], ...]}

Span indices are inclusive and 0-based. A relation's head/tail triples must
match entries of "entities" exactly. The head word of a mention is its last
token; relations are keyed by head-word pairs, so a relation whose two
mentions end on the same token cannot be represented and is rejected.
"""

import json
from dataclasses import dataclass

import numpy as np


class CorpusError(ValueError):
    """Malformed corpus or schema content; message carries the line number."""


@dataclass(frozen=True)
class EntityMention:
    start: int
    end: int
    entity_type: str

    def head_word(self):
        return self.end

    def as_tuple(self):
        return (self.start, self.end, self.entity_type)


@dataclass(frozen=True)
class RelationTriplet:
    head: EntityMention
    tail: EntityMention
    relation_type: str


@dataclass
class AnnotatedSentence:
    tokens: list
    entities: list
    relations: list
    line_number: int = 0

    def __len__(self):
        return len(self.tokens)


@dataclass(frozen=True)
class Schema:
    entity_types: tuple
    relation_types: tuple

    def __post_init__(self):
        for label, types in (("entity", self.entity_types), ("relation", self.relation_types)):
            if not types:
                raise CorpusError(f"schema: {label} types must be non-empty")
            if len(set(types)) != len(types):
                raise CorpusError(f"schema: duplicate {label} type")
        object.__setattr__(self, "_e_index", {t: i for i, t in enumerate(self.entity_types)})
        object.__setattr__(self, "_r_index", {t: i for i, t in enumerate(self.relation_types)})

    def entity_index(self, t):
        return self._e_index[t]

    def relation_index(self, t):
        return self._r_index[t]

    @classmethod
    def load(cls, path):
        with open(path, encoding="utf-8") as f:
            obj = json.load(f)
        try:
            return cls(tuple(obj["entity_types"]), tuple(obj["relation_types"]))
        except KeyError as e:
            raise CorpusError(f"schema file {path}: missing field {e}") from None

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(
                {"entity_types": list(self.entity_types), "relation_types": list(self.relation_types)},
                f,
            )
            f.write("\n")


@dataclass
class LabelTables:
    """Binary gold tables: entities over cells i <= j, relations over i != j."""

    entity_table: np.ndarray  # (N, N, |E|)
    relation_table: np.ndarray  # (N, N, |R|)


def _parse_mention(raw, n_tokens, schema, lineno, fieldname):
    if not (isinstance(raw, (list, tuple)) and len(raw) == 3):
        raise CorpusError(f"line {lineno}: {fieldname}: expected [start, end, type], got {raw!r}")
    start, end, etype = raw
    if not (isinstance(start, int) and isinstance(end, int)):
        raise CorpusError(f"line {lineno}: {fieldname}: span indices must be integers")
    if not (0 <= start <= end < n_tokens):
        raise CorpusError(
            f"line {lineno}: {fieldname}: span ({start}, {end}) out of range for {n_tokens} tokens"
        )
    if etype not in schema._e_index:
        raise CorpusError(f"line {lineno}: {fieldname}: unknown entity type {etype!r}")
    return EntityMention(start, end, etype)


def parse_record(line, schema, lineno=0):
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise CorpusError(f"line {lineno}: invalid record: {e.msg}") from None
    if not isinstance(obj, dict):
        raise CorpusError(f"line {lineno}: record must be an object")

    tokens = obj.get("tokens")
    if not (isinstance(tokens, list) and tokens and all(isinstance(t, str) for t in tokens)):
        raise CorpusError(f"line {lineno}: tokens: need a non-empty list of strings")
    n = len(tokens)

    entities = [
        _parse_mention(raw, n, schema, lineno, f"entities[{k}]")
        for k, raw in enumerate(obj.get("entities", []))
    ]
    known = set(m.as_tuple() for m in entities)

    relations = []
    for k, raw in enumerate(obj.get("relations", [])):
        fieldname = f"relations[{k}]"
        if not (isinstance(raw, (list, tuple)) and len(raw) == 3):
            raise CorpusError(
                f"line {lineno}: {fieldname}: expected [head, tail, type], got {raw!r}"
            )
        head = _parse_mention(raw[0], n, schema, lineno, fieldname + ".head")
        tail = _parse_mention(raw[1], n, schema, lineno, fieldname + ".tail")
        rtype = raw[2]
        if rtype not in schema._r_index:
            raise CorpusError(f"line {lineno}: {fieldname}: unknown relation type {rtype!r}")
        for side, m in (("head", head), ("tail", tail)):
            if m.as_tuple() not in known:
                raise CorpusError(
                    f"line {lineno}: {fieldname}.{side}: mention {m.as_tuple()} not listed in entities"
                )
        if head == tail:
            raise CorpusError(f"line {lineno}: {fieldname}: head and tail are the same mention")
        if head.end == tail.end:
            raise CorpusError(
                f"line {lineno}: {fieldname}: head and tail share head word {head.end}"
            )
        relations.append(RelationTriplet(head, tail, rtype))

    return AnnotatedSentence(tokens, entities, relations, line_number=lineno)


def parse_corpus(path, schema):
    sentences = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            sentences.append(parse_record(line, schema, lineno=lineno))
    return sentences


def sentence_to_record(s):
    return {
        "tokens": list(s.tokens),
        "entities": [[m.start, m.end, m.entity_type] for m in s.entities],
        "relations": [
            [
                [r.head.start, r.head.end, r.head.entity_type],
                [r.tail.start, r.tail.end, r.tail.entity_type],
                r.relation_type,
            ]
            for r in s.relations
        ],
    }


def serialize_record(s):
    return json.dumps(sentence_to_record(s), ensure_ascii=False, separators=(",", ":"))


def write_corpus(path, sentences):
    with open(path, "w", encoding="utf-8") as f:
        for s in sentences:
            f.write(serialize_record(s))
            f.write("\n")


def build_label_tables(s, schema):
    """Gold 0/1 tables for one sentence; multi-label cells are allowed."""
    n = len(s.tokens)
    ent = np.zeros((n, n, len(schema.entity_types)))
    rel = np.zeros((n, n, len(schema.relation_types)))
    for m in s.entities:
        ent[m.start, m.end, schema.entity_index(m.entity_type)] = 1.0
    for r in s.relations:
        rel[r.head.end, r.tail.end, schema.relation_index(r.relation_type)] = 1.0
    return LabelTables(ent, rel)


def batch_iter(sentences, batch_size, seed, epoch=0):
    """Deterministic shuffled batches for one epoch.

    The permutation is a pure function of (seed, epoch). Sentences are
    bucketed by length (stable sort over the shuffled order) so each batch
    groups similar lengths, then batch order is shuffled.
    """
    if batch_size < 1:
        raise ValueError(f"batch_iter: batch_size must be >= 1, got {batch_size}")
    rng = np.random.default_rng([seed, epoch])
    order = rng.permutation(len(sentences))
    order = sorted(order, key=lambda i: len(sentences[i].tokens))
    batches = [
        [sentences[i] for i in order[k : k + batch_size]]
        for k in range(0, len(order), batch_size)
    ]
    return [batches[i] for i in rng.permutation(len(batches))]
