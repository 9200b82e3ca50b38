"""Run a frozen pretrained encoder over a corpus and write an embedding archive.

Word alignment uses first-subword pooling: every corpus token is encoded as
its word pieces, and the hidden state of the first piece represents the
token. Final-layer hidden states only; the encoder stays in eval mode under
no_grad, so a re-export of the same manifest is byte-identical.

Sentences the tokenizer cannot represent (a token with no pieces, or a piece
sequence exceeding the encoder's position table) are skipped and listed in
the sidecar report, never dropped silently.
"""

from dataclasses import dataclass, field

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .archive import write_archive
from .corpus import read_token_lists

POOLING_RULES = ("first_subword",)


class ExportError(ValueError):
    pass


@dataclass
class ExportManifest:
    corpus: str
    model: str  # hub identifier or local directory
    out: str
    pooling: str = "first_subword"
    dim: int | None = None  # must equal the model hidden size when given
    report: str | None = None  # defaults to <out>.report.txt

    def __post_init__(self):
        if self.pooling not in POOLING_RULES:
            raise ExportError(f"unknown pooling rule {self.pooling!r}; known: {POOLING_RULES}")
        if self.report is None:
            self.report = str(self.out) + ".report.txt"


@dataclass
class ExportResult:
    dim: int
    exported: list = field(default_factory=list)  # sentence ids
    skipped: list = field(default_factory=list)  # (sentence id, reason)
    out_path: str = ""
    report_path: str = ""


def _piece_alignment(tokenizer, tokens):
    """(flat piece list with specials, first-piece position per token)."""
    pieces_per_word = []
    for k, word in enumerate(tokens):
        pieces = tokenizer.tokenize(word)
        if not pieces:
            raise ExportError(f"token {k} ({word!r}) produced no word pieces")
        pieces_per_word.append(pieces)
    flat = [tokenizer.cls_token]
    positions = []
    for pieces in pieces_per_word:
        positions.append(len(flat))
        flat.extend(pieces)
    flat.append(tokenizer.sep_token)
    return flat, positions


def export(manifest):
    """Write the archive and sidecar report; returns an ExportResult."""
    sentences = read_token_lists(manifest.corpus)

    tokenizer = AutoTokenizer.from_pretrained(manifest.model)
    model = AutoModel.from_pretrained(manifest.model)
    model.eval()
    hidden_size = int(model.config.hidden_size)
    if manifest.dim is not None and manifest.dim != hidden_size:
        raise ExportError(
            f"manifest dim {manifest.dim} does not match the model hidden size {hidden_size}"
        )
    max_positions = getattr(model.config, "max_position_embeddings", None)

    result = ExportResult(dim=hidden_size, out_path=str(manifest.out), report_path=manifest.report)
    records = []
    with torch.no_grad():
        for sid, tokens in sentences:
            try:
                flat, positions = _piece_alignment(tokenizer, tokens)
                if max_positions is not None and len(flat) > max_positions:
                    raise ExportError(
                        f"{len(flat)} word pieces exceed the encoder's {max_positions} positions"
                    )
                ids = tokenizer.convert_tokens_to_ids(flat)
                hidden = model(input_ids=torch.tensor([ids])).last_hidden_state[0]
            except ExportError as e:
                result.skipped.append((sid, str(e)))
                continue
            mat = hidden[positions].numpy().astype(np.float32)
            records.append((sid, mat))
            result.exported.append(sid)

    write_archive(manifest.out, hidden_size, records)
    _write_report(manifest.report, manifest, result)
    return result


def _write_report(path, manifest, result):
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"corpus={manifest.corpus}\n")
        f.write(f"model={manifest.model}\n")
        f.write(f"pooling={manifest.pooling}\n")
        f.write(f"dim={result.dim}\n")
        f.write(f"exported={len(result.exported)}\n")
        f.write(f"skipped={len(result.skipped)}\n")
        for sid, reason in result.skipped:
            f.write(f"skip id={sid} reason={reason}\n")
