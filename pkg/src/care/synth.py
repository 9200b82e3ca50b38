"""Synthetic corpora: a fixed overfit set and randomized fuzz sentences."""

import numpy as np

from .data import AnnotatedSentence, EntityMention, RelationTriplet, Schema

_PERSONS = ["amy", "bob", "carl", "dana", "evan"]
_ORGS = ["acme", "globex", "initech", "umbrella", "stark"]
_ORG_SUFFIX = ["corp", "labs"]
_VERBS = [("likes", "Likes"), ("hates", "Hates")]
_FILLERS = ["reportedly", "today"]


def overfit_schema():
    return Schema(("Per", "Org"), ("Likes", "Hates"))


def overfit_corpus():
    """A fixed 20-sentence corpus with token-determined entities and relations.

    Entity types follow word identity (person vs organization words), the verb
    selects the relation type, and a third of the organizations span two
    tokens, so the patterns are learnable by construction.
    """
    sentences = []
    for i in range(20):
        verb_tok, verb_rel = _VERBS[i % 2]
        tokens = []
        if i % 5 == 0:
            tokens.append(_FILLERS[0])
        p_start = len(tokens)
        tokens.append(_PERSONS[i % 5])
        tokens.append(verb_tok)
        o_start = len(tokens)
        tokens.append(_ORGS[(i * 3) % 5])
        if i % 3 == 0:
            tokens.append(_ORG_SUFFIX[i % 2])
        o_end = len(tokens) - 1
        if i % 4 == 0:
            tokens.append(_FILLERS[1])
        person = EntityMention(p_start, p_start, "Per")
        org = EntityMention(o_start, o_end, "Org")
        sentences.append(
            AnnotatedSentence(
                tokens,
                [person, org],
                [RelationTriplet(person, org, verb_rel)],
                line_number=i + 1,
            )
        )
    return sentences


_FUZZ_WORDS = [f"w{k}" for k in range(18)]


def random_sentence(rng, schema, max_len=12, unique_head_words=False):
    """One random sentence with nested/overlapping mentions and valid relations.

    Mentions are distinct (span, type) pairs; relations never pair mentions
    sharing a head word. With unique_head_words, all mentions get distinct end
    tokens, which makes relation decoding unambiguous at the triplet level.
    """
    n = int(rng.integers(1, max_len + 1))
    tokens = [str(rng.choice(_FUZZ_WORDS)) for _ in range(n)]

    mentions = []
    seen_spans = set()
    used_ends = set()
    for _ in range(int(rng.integers(0, 5))):
        start = int(rng.integers(0, n))
        end = int(rng.integers(start, min(n, start + 4)))
        etype = str(rng.choice(schema.entity_types))
        if (start, end, etype) in seen_spans:
            continue
        if unique_head_words and end in used_ends:
            continue
        seen_spans.add((start, end, etype))
        used_ends.add(end)
        mentions.append(EntityMention(start, end, etype))
        # sometimes nest a strictly inner mention
        if end > start and rng.random() < 0.35:
            inner_s = int(rng.integers(start, end + 1))
            inner_e = int(rng.integers(inner_s, end + 1))
            ityp = str(rng.choice(schema.entity_types))
            if (inner_s, inner_e, ityp) not in seen_spans and not (
                unique_head_words and inner_e in used_ends
            ):
                seen_spans.add((inner_s, inner_e, ityp))
                used_ends.add(inner_e)
                mentions.append(EntityMention(inner_s, inner_e, ityp))

    relations = []
    seen_rel = set()
    if len(mentions) >= 2:
        for _ in range(int(rng.integers(0, 4))):
            hi, ti = rng.integers(0, len(mentions), size=2)
            head, tail = mentions[int(hi)], mentions[int(ti)]
            if head == tail or head.end == tail.end:
                continue
            rtype = str(rng.choice(schema.relation_types))
            key = (head.as_tuple(), tail.as_tuple(), rtype)
            if key in seen_rel:
                continue
            seen_rel.add(key)
            relations.append(RelationTriplet(head, tail, rtype))

    return AnnotatedSentence(tokens, mentions, relations)


def random_corpus(rng, count, schema=None, max_len=12, unique_head_words=False):
    schema = schema or overfit_schema()
    return [
        random_sentence(rng, schema, max_len=max_len, unique_head_words=unique_head_words)
        for _ in range(count)
    ]
