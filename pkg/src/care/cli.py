"""Command-line entry point: train | eval | predict | ablate.

Exit codes: 0 ok, 1 usage error, 2 data/config error, 3 numeric failure.
Config resolution order: dataclass defaults, then --config file (key=value
lines), then explicit flags.
"""

import argparse
import json
import os
import sys
from dataclasses import fields

from .checkpoint import CheckpointError, load_model
from .config import CareConfig, ConfigError, read_config_file
from .data import CorpusError, Schema, parse_corpus
from .decode import MatchMode
from .encoder import ArchiveError
from .train import NumericError, Trainer, evaluate, predict_records, run_ablation

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_bool(raw):
    low = raw.strip().lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {raw!r}")


def _add_config_flags(parser):
    group = parser.add_argument_group("model configuration")
    for f in fields(CareConfig):
        flag = "--" + f.name.replace("_", "-")
        kind = _parse_bool if f.type is bool else f.type
        group.add_argument(flag, dest=f.name, type=kind, default=None, metavar=f.name.upper())


def _resolve_config(args):
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for f in fields(CareConfig):
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            values[f.name] = flag_value
    return CareConfig.from_dict({**CareConfig().to_dict(), **values})


def build_parser():
    parser = _Parser(prog="care", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (
        ("train", "train a model and keep the best dev-RE-F1 checkpoint"),
        ("ablate", "train every ablation setting plus the depth sweep"),
    ):
        p = sub.add_parser(name, help=helptext, parents=[], add_help=True)
        p.add_argument("--train", dest="train_corpus", required=True, help="training corpus (jsonl)")
        p.add_argument("--dev", dest="dev_corpus", required=True, help="dev corpus (jsonl)")
        p.add_argument("--schema", required=True, help="schema json")
        p.add_argument("--out-dir", required=True, help="directory for checkpoints and logs")
        p.add_argument("--config", default=None, help="key=value config file")
        _add_config_flags(p)

    p = sub.add_parser("eval", help="score a checkpoint on a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--mode", choices=[m.value for m in MatchMode], default=None,
                   help="matching mode (default: the checkpoint's match_mode)")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--out", default=None, help="write scores as JSON here")

    p = sub.add_parser("predict", help="dump decoded predictions for a corpus")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True, help="prediction dump (jsonl)")
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--with-probs", action="store_true", help="attach probability tables")

    return parser


def _cmd_train(args):
    config = _resolve_config(args)
    schema = Schema.load(args.schema)
    train_sentences = parse_corpus(args.train_corpus, schema)
    dev_sentences = parse_corpus(args.dev_corpus, schema)
    trainer = Trainer(config, schema, train_sentences, dev_sentences, args.out_dir)
    result = trainer.train()
    print(f"parameters: {result.parameter_count}")
    print(
        f"best epoch {result.best_epoch}: dev ner_f1={result.best_ner_f1:.4f} "
        f"re_f1={result.best_re_f1:.4f}"
    )
    print(f"checkpoints: {result.best_path} (best), {result.last_path} (last)")
    print(f"metrics: {result.log_path}")
    return EXIT_OK


def _cmd_ablate(args):
    config = _resolve_config(args)
    schema = Schema.load(args.schema)
    train_sentences = parse_corpus(args.train_corpus, schema)
    dev_sentences = parse_corpus(args.dev_corpus, schema)
    rows = run_ablation(config, schema, train_sentences, dev_sentences, args.out_dir)
    out_path = os.path.join(args.out_dir, "ablation.jsonl")
    with open(out_path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row, sort_keys=True))
            f.write("\n")
    width = max(len(r["setting"]) for r in rows)
    for r in rows:
        print(
            f"{r['setting']:<{width}}  params={r['parameter_count']:<8} "
            f"ner_f1={r['ner_f1']:.4f}  re_f1={r['re_f1']:.4f}"
        )
    print(f"table: {out_path}")
    return EXIT_OK


def _cmd_eval(args):
    model, _, _ = load_model(args.checkpoint)
    corpus = parse_corpus(args.corpus, model.schema)
    result = evaluate(model, corpus, threshold=args.threshold, mode=args.mode)
    payload = {}
    for task, prf in (("ner", result.ner), ("re", result.re)):
        payload[task] = {
            "precision": prf.precision, "recall": prf.recall, "f1": prf.f1,
            "tp": prf.tp, "fp": prf.fp, "fn": prf.fn,
        }
        print(
            f"{task}: precision={prf.precision:.4f} recall={prf.recall:.4f} "
            f"f1={prf.f1:.4f} (tp={prf.tp} fp={prf.fp} fn={prf.fn})"
        )
    payload["loss"] = result.loss
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(payload, f, sort_keys=True, indent=2)
            f.write("\n")
    return EXIT_OK


def _cmd_predict(args):
    model, _, _ = load_model(args.checkpoint)
    corpus = parse_corpus(args.corpus, model.schema)
    if not corpus:
        raise CorpusError(f"{args.corpus}: empty corpus")
    records = predict_records(
        model, corpus, threshold=args.threshold, with_probs=args.with_probs
    )
    with open(args.out, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
            f.write("\n")
    print(f"wrote {len(records)} records to {args.out}")
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "ablate": _cmd_ablate,
    "eval": _cmd_eval,
    "predict": _cmd_predict,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except NumericError as e:
        print(f"care: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (CorpusError, ConfigError, ArchiveError, CheckpointError, FileNotFoundError, ValueError) as e:
        print(f"care: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
