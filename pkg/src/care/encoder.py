"""Token representation providers.

Two interchangeable sources for the (N, d_model) contextual matrix the rest
of the model consumes:

    - ToyEncoder: trainable token + position embeddings mixed over a +-1
      token window; end-to-end differentiable.
    - EmbeddingArchive: precomputed float32 matrices loaded from a binary
      file and treated as constants.

Archive binary layout (all integers little-endian):

    magic "CAREEMB1" | u32 dim | u32 count
    count records: u32 id | u32 token_count | token_count*dim float32
    count index entries: u32 id | u64 byte offset of the record
"""

import struct

import numpy as np

from . import tensor as T
from .optim import normal_init, uniform_init
from .tensor import Tensor

ARCHIVE_MAGIC = b"CAREEMB1"
MAX_POSITIONS = 64

_UNK = "<unk>"


class ArchiveError(ValueError):
    """Malformed archive file or invalid lookup."""


class Vocab:
    """Token -> id map with an <unk> fallback at index 0."""

    def __init__(self, tokens):
        toks = list(tokens)
        if toks and toks[0] == _UNK:
            toks = toks[1:]
        self.tokens = [_UNK] + toks
        self._index = {t: i for i, t in enumerate(self.tokens)}

    @classmethod
    def build(cls, sentences):
        seen = sorted({tok for s in sentences for tok in s.tokens})
        return cls(seen)

    def __len__(self):
        return len(self.tokens)

    def ids(self, tokens):
        return np.array([self._index.get(t, 0) for t in tokens], dtype=np.int64)


class ToyEncoder:
    """Trainable embeddings plus one ReLU mixing layer over a +-1 window."""

    def __init__(self, reg, vocab, d_model, rng):
        self.vocab = vocab
        self.d_model = d_model
        self.tok_emb = reg.add("encoder.tok_emb", normal_init(rng, (len(vocab), d_model)))
        self.pos_emb = reg.add("encoder.pos_emb", normal_init(rng, (MAX_POSITIONS, d_model)))
        self.w_prev = reg.add("encoder.mix.w_prev", uniform_init(rng, (d_model, d_model), d_model))
        self.w_self = reg.add("encoder.mix.w_self", uniform_init(rng, (d_model, d_model), d_model))
        self.w_next = reg.add("encoder.mix.w_next", uniform_init(rng, (d_model, d_model), d_model))
        self.bias = reg.add("encoder.mix.bias", uniform_init(rng, (d_model,), d_model))

    def encode(self, tokens):
        n = len(tokens)
        if n == 0:
            raise ValueError("encode: empty sentence")
        if n > MAX_POSITIONS:
            raise ValueError(f"encode: sentence of {n} tokens exceeds the {MAX_POSITIONS}-position table")
        x = T.add(
            T.embedding(self.tok_emb.tensor, self.vocab.ids(tokens)),
            T.embedding(self.pos_emb.tensor, np.arange(n)),
        )
        # shift matrices route each row's +-1 neighbours (zero at the edges)
        shift_prev = Tensor(np.eye(n, k=-1))
        shift_next = Tensor(np.eye(n, k=1))
        mixed = T.add(
            T.add(
                T.matmul(T.matmul(shift_prev, x), self.w_prev.tensor),
                T.matmul(x, self.w_self.tensor),
            ),
            T.add(T.matmul(T.matmul(shift_next, x), self.w_next.tensor), self.bias.tensor),
        )
        return T.relu(mixed)


# ---------------------------------------------------------------------------
# precomputed-embedding archives
# ---------------------------------------------------------------------------


def write_archive(path, dim, records):
    """Write (sentence_id, float32 matrix) pairs in the archive format."""
    records = list(records)
    ids = [int(i) for i, _ in records]
    if len(set(ids)) != len(ids):
        raise ArchiveError("write_archive: duplicate sentence ids")
    with open(path, "wb") as f:
        f.write(ARCHIVE_MAGIC)
        f.write(struct.pack("<II", dim, len(records)))
        index = []
        for sid, mat in records:
            mat = np.ascontiguousarray(mat, dtype="<f4")
            if mat.ndim != 2 or mat.shape[1] != dim:
                raise ArchiveError(
                    f"write_archive: record {sid} has shape {mat.shape}, want (*, {dim})"
                )
            index.append((sid, f.tell()))
            f.write(struct.pack("<II", sid, mat.shape[0]))
            f.write(mat.tobytes())
        for sid, offset in index:
            f.write(struct.pack("<IQ", sid, offset))


class EmbeddingArchive:
    """Read-only random access over an archive file, loaded fully in memory."""

    def __init__(self, path):
        with open(path, "rb") as f:
            self._blob = f.read()
        blob = self._blob
        head = len(ARCHIVE_MAGIC)
        if blob[:head] != ARCHIVE_MAGIC:
            raise ArchiveError(f"{path}: bad magic, not an embedding archive")
        if len(blob) < head + 8:
            raise ArchiveError(f"{path}: truncated header")
        self.dim, self.count = struct.unpack_from("<II", blob, head)
        index_bytes = 12 * self.count
        if len(blob) < head + 8 + index_bytes:
            raise ArchiveError(f"{path}: truncated index")
        self._offsets = {}
        pos = len(blob) - index_bytes
        for _ in range(self.count):
            sid, offset = struct.unpack_from("<IQ", blob, pos)
            if sid in self._offsets:
                raise ArchiveError(f"{path}: duplicate id {sid} in index")
            if offset >= len(blob) - index_bytes:
                raise ArchiveError(f"{path}: index offset {offset} out of range")
            self._offsets[sid] = offset
            pos += 12
        self.path = str(path)

    def ids(self):
        return sorted(self._offsets)

    def token_count(self, sentence_id):
        offset = self._record_offset(sentence_id)
        _, n = struct.unpack_from("<II", self._blob, offset)
        return n

    def _record_offset(self, sentence_id):
        try:
            return self._offsets[sentence_id]
        except KeyError:
            raise ArchiveError(f"{self.path}: no record for sentence id {sentence_id}") from None

    def load(self, sentence_id):
        offset = self._record_offset(sentence_id)
        sid, n = struct.unpack_from("<II", self._blob, offset)
        if sid != sentence_id:
            raise ArchiveError(
                f"{self.path}: index points id {sentence_id} at a record labelled {sid}"
            )
        start = offset + 8
        nbytes = 4 * n * self.dim
        if start + nbytes > len(self._blob):
            raise ArchiveError(f"{self.path}: record {sentence_id} is truncated")
        flat = np.frombuffer(self._blob, dtype="<f4", count=n * self.dim, offset=start)
        return flat.reshape(n, self.dim).copy()


def encode_from_archive(archive, sentence_id, n_tokens):
    """Constant (no-gradient) representation for one archived sentence."""
    mat = archive.load(sentence_id)
    if mat.shape[0] != n_tokens:
        raise ArchiveError(
            f"archive record {sentence_id} has {mat.shape[0]} tokens, sentence has {n_tokens}"
        )
    return Tensor(mat.astype(np.float64))
