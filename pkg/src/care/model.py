"""Full model: encoder provider -> interaction stack -> pair classifiers."""

import numpy as np

from . import tensor as T
from .classifier import PairClassifier, bce_losses, build_pair_features, score_cells, total_loss
from .coattention import CoattentionStack
from .data import build_label_tables
from .decode import decode_prediction
from .encoder import EmbeddingArchive, ToyEncoder, Vocab, encode_from_archive
from .optim import ParamRegistry, parameter_count, zero_grads


class CareModel:
    """Owns all parameters and the per-sentence forward pass.

    The encoder provider comes from config.encoder_provider: "toy" builds a
    trainable encoder over `vocab`; "archive:<path>" reads fixed embeddings,
    in which case d_model is taken from the archive file.
    """

    def __init__(self, config, schema, vocab=None, archive=None):
        config.validate()
        self.config = config
        self.schema = schema
        rng = np.random.default_rng(config.seed)
        self.registry = ParamRegistry()

        self.archive = None
        self.encoder = None
        if config.encoder_provider == "toy":
            if vocab is None:
                raise ValueError("toy encoder needs a vocab")
            self.vocab = vocab
            d_model = config.d_model
            self.encoder = ToyEncoder(self.registry, vocab, d_model, rng)
        else:
            path = config.encoder_provider.split(":", 1)[1]
            self.archive = archive if archive is not None else EmbeddingArchive(path)
            self.vocab = vocab if vocab is not None else Vocab([])
            d_model = self.archive.dim
        self.d_model = d_model

        self.stack = CoattentionStack(self.registry, d_model, config, rng)
        self.classifier = PairClassifier(
            self.registry, config, len(schema.entity_types), len(schema.relation_types), rng
        )
        self.init_rng_state = rng.bit_generator.state

    def params(self):
        return self.registry.all()

    def parameter_count(self):
        return parameter_count(self.params())

    def zero_grads(self):
        zero_grads(self.params())

    def encode(self, sentence, sentence_id=None):
        if self.encoder is not None:
            return self.encoder.encode(sentence.tokens)
        if sentence_id is None:
            raise ValueError("archive provider needs a sentence id")
        return encode_from_archive(self.archive, sentence_id, len(sentence.tokens))

    def forward(self, sentence, sentence_id=None):
        """Probability tables for one sentence; also returns the stack outputs."""
        h = self.encode(sentence, sentence_id)
        reps, shared = self.stack.run(h)
        u_e, u_r = build_pair_features(reps, shared, self.classifier.use_shared)
        logits = score_cells(u_e, u_r, self.classifier)
        return logits, reps, shared

    def sentence_loss(self, sentence, sentence_id=None):
        logits, _, _ = self.forward(sentence, sentence_id)
        tables = build_label_tables(sentence, self.schema)
        l_ner, l_re = bce_losses(logits, tables)
        return total_loss(l_ner, l_re), l_ner, l_re

    def predict(self, sentence, sentence_id=None, threshold=None):
        logits, _, _ = self.forward(sentence, sentence_id)
        thr = self.config.threshold if threshold is None else threshold
        return decode_prediction(logits.entity_probs.data, logits.relation_probs.data, self.schema, thr)

    def probability_tables(self, sentence, sentence_id=None):
        logits, _, _ = self.forward(sentence, sentence_id)
        return logits.entity_probs.data.copy(), logits.relation_probs.data.copy()
