"""Command line for the embedding exporter.

Exit codes: 0 ok, 1 usage error, 2 data/model error.
"""

import argparse
import sys

from .archive import ArchiveWriteError
from .corpus import CorpusFormatError
from .exporter import POOLING_RULES, ExportError, ExportManifest, export

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="embed-export", description=__doc__)
    parser.add_argument("--corpus", required=True, help="annotated corpus (jsonl)")
    parser.add_argument("--model", required=True, help="pretrained model name or local path")
    parser.add_argument("--out", required=True, help="output archive path")
    parser.add_argument("--pooling", choices=POOLING_RULES, default="first_subword")
    parser.add_argument("--dim", type=int, default=None,
                        help="expected hidden size (checked against the model)")
    parser.add_argument("--report", default=None,
                        help="sidecar report path (default: <out>.report.txt)")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        manifest = ExportManifest(
            corpus=args.corpus, model=args.model, out=args.out,
            pooling=args.pooling, dim=args.dim, report=args.report,
        )
        result = export(manifest)
    except (ExportError, CorpusFormatError, ArchiveWriteError, OSError) as e:
        print(f"embed-export: {e}", file=sys.stderr)
        return EXIT_DATA
    print(f"exported {len(result.exported)} sentences (dim {result.dim}) to {result.out_path}")
    if result.skipped:
        print(f"skipped {len(result.skipped)} sentences; see {result.report_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
