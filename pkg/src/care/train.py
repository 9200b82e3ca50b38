"""Training loop, evaluation, prediction dumps, and the ablation sweep."""

import json
import math
import os
from dataclasses import dataclass
from functools import reduce

from . import tensor as T
from .checkpoint import save_checkpoint
from .classifier import bce_losses, total_loss
from .data import batch_iter, build_label_tables
from .decode import decode_prediction, gold_prediction, micro_f1
from .encoder import EmbeddingArchive, Vocab
from .model import CareModel
from .optim import adam_step


class NumericError(RuntimeError):
    """Non-finite loss during training; carries the last good checkpoint."""

    def __init__(self, message, checkpoint_path=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path


@dataclass
class EvalResult:
    ner: object  # PRF
    re: object  # PRF
    loss: float


@dataclass
class TrainResult:
    best_epoch: int
    best_ner_f1: float
    best_re_f1: float
    parameter_count: int
    best_path: str
    last_path: str
    log_path: str


class MetricLog:
    """Append-only JSON lines with deterministic key order."""

    def __init__(self, path):
        self.path = str(path)
        open(self.path, "w").close()

    def write(self, **fields):
        with open(self.path, "a", encoding="utf-8") as f:
            f.write(json.dumps(fields, sort_keys=True))
            f.write("\n")


def evaluate(model, sentences, threshold=None, mode=None):
    """Micro-F1 for both tasks plus the mean per-sentence loss."""
    if not sentences:
        raise ValueError("evaluate: empty corpus")
    threshold = model.config.threshold if threshold is None else threshold
    mode = model.config.match_mode if mode is None else mode
    preds, golds, losses = [], [], []
    for idx, s in enumerate(sentences):
        logits, _, _ = model.forward(s, sentence_id=idx)
        tables = build_label_tables(s, model.schema)
        l_ner, l_re = bce_losses(logits, tables)
        losses.append(float(total_loss(l_ner, l_re).data))
        preds.append(
            decode_prediction(
                logits.entity_probs.data, logits.relation_probs.data, model.schema, threshold
            )
        )
        golds.append(gold_prediction(s))
    return EvalResult(
        ner=micro_f1(preds, golds, mode, "ner"),
        re=micro_f1(preds, golds, mode, "re"),
        loss=sum(losses) / len(losses),
    )


class Trainer:
    """Epoch loop with best-dev-RE-F1 checkpoint retention.

    Batches only group sentences for one optimizer step; each sentence runs
    through its own graph and the batch loss is the mean of sentence losses.
    """

    def __init__(self, config, schema, train_sentences, dev_sentences, out_dir, vocab=None):
        config.validate()
        if not train_sentences:
            raise ValueError("trainer: empty training corpus")
        if not dev_sentences:
            raise ValueError("trainer: empty dev corpus")
        self.config = config
        self.schema = schema
        self.train_sentences = list(train_sentences)
        self.dev_sentences = list(dev_sentences)
        self.out_dir = str(out_dir)
        os.makedirs(self.out_dir, exist_ok=True)

        archive = None
        if config.encoder_provider == "toy":
            vocab = vocab or Vocab.build(self.train_sentences)
        else:
            archive = EmbeddingArchive(config.encoder_provider.split(":", 1)[1])
        self.model = CareModel(config, schema, vocab=vocab, archive=archive)
        self._train_ids = {id(s): i for i, s in enumerate(self.train_sentences)}

        self.log = MetricLog(os.path.join(self.out_dir, "metrics.log"))
        self.best_path = os.path.join(self.out_dir, "best.ckpt")
        self.last_path = os.path.join(self.out_dir, "last.ckpt")

    def _batch_loss(self, batch):
        losses = []
        for s in batch:
            loss, _, _ = self.model.sentence_loss(s, sentence_id=self._train_ids[id(s)])
            losses.append(loss)
        return T.mul(reduce(T.add, losses), 1.0 / len(losses))

    def train(self, on_epoch=None):
        """Runs all epochs; on_epoch(epoch, train_loss, dev) may return True to stop."""
        model = self.model
        self.log.write(split="meta", parameter_count=model.parameter_count(),
                       config=self.config.to_dict())
        save_checkpoint(self.last_path, model, epoch=-1)

        best_re = -1.0
        best = None
        for epoch in range(self.config.epochs):
            batch_losses = []
            for batch in batch_iter(
                self.train_sentences, self.config.batch_size, self.config.seed, epoch
            ):
                model.zero_grads()
                loss = self._batch_loss(batch)
                value = float(loss.data)
                if not math.isfinite(value):
                    raise NumericError(
                        f"non-finite loss {value} at epoch {epoch}; "
                        f"last good checkpoint: {self.last_path}",
                        checkpoint_path=self.last_path,
                    )
                T.backward(loss)
                adam_step(model.params(), lr=self.config.lr)
                batch_losses.append(value)

            train_loss = sum(batch_losses) / len(batch_losses)
            self.log.write(epoch=epoch, split="train", task="all", precision=None,
                           recall=None, f1=None, loss=train_loss)

            dev = evaluate(model, self.dev_sentences)
            for task, prf in (("ner", dev.ner), ("re", dev.re)):
                self.log.write(epoch=epoch, split="dev", task=task,
                               precision=prf.precision, recall=prf.recall, f1=prf.f1,
                               loss=dev.loss)

            save_checkpoint(self.last_path, model, epoch=epoch)
            if dev.re.f1 > best_re:
                best_re = dev.re.f1
                best = (epoch, dev.ner.f1, dev.re.f1)
                save_checkpoint(self.best_path, model, epoch=epoch)

            if on_epoch is not None and on_epoch(epoch, train_loss, dev):
                break

        return TrainResult(
            best_epoch=best[0],
            best_ner_f1=best[1],
            best_re_f1=best[2],
            parameter_count=model.parameter_count(),
            best_path=self.best_path,
            last_path=self.last_path,
            log_path=self.log.path,
        )


def predict_records(model, sentences, threshold=None, with_probs=False):
    """Prediction dump records mirroring the corpus format; deterministic order."""
    records = []
    for idx, s in enumerate(sentences):
        logits, _, _ = model.forward(s, sentence_id=idx)
        pred = decode_prediction(
            logits.entity_probs.data,
            logits.relation_probs.data,
            model.schema,
            model.config.threshold if threshold is None else threshold,
        )
        record = {
            "tokens": list(s.tokens),
            "entities": [list(m) for m in sorted(pred.mentions)],
            "relations": [
                [list(h), list(t), r] for h, t, r in sorted(pred.triplets)
            ],
        }
        if with_probs:
            record["entity_probs"] = logits.entity_probs.data.round(6).tolist()
            record["relation_probs"] = logits.relation_probs.data.round(6).tolist()
        records.append(record)
    return records


ABLATION_SETTINGS = [
    ("default", None, None),
    ("no-distance", "use_distance", False),
    ("no-shared", "use_shared_in_classifier", False),
    ("conv-1x1", "kernel_size", 1),
    ("no-coattention", "use_coattention", False),
]
DEPTH_SWEEP = [1, 2, 3, 4]


def ablation_rows(config):
    """The (name, field, value) grid: five switches plus the depth sweep."""
    rows = list(ABLATION_SETTINGS)
    rows += [(f"depth-{n}", "n_layers", n) for n in DEPTH_SWEEP]
    return rows


def run_ablation(config, schema, train_sentences, dev_sentences, out_dir):
    """Train every ablation setting; returns machine-readable result rows."""
    results = []
    for name, fieldname, value in ablation_rows(config):
        cfg = config if fieldname is None else config.replace(**{fieldname: value})
        run_dir = os.path.join(out_dir, f"ablate-{name}")
        trainer = Trainer(cfg, schema, train_sentences, dev_sentences, run_dir)
        outcome = trainer.train()
        results.append(
            {
                "setting": name,
                "field": fieldname,
                "value": value,
                "parameter_count": outcome.parameter_count,
                "ner_f1": outcome.best_ner_f1,
                "re_f1": outcome.best_re_f1,
                "best_epoch": outcome.best_epoch,
            }
        )
    return results
