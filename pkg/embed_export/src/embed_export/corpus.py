"""Minimal reader for the line-delimited annotated-corpus format.

The exporter only consumes token lists; annotations are validated for shape
but otherwise ignored. Sentence ids are 0-based record positions.
"""

import json


class CorpusFormatError(ValueError):
    pass


def read_token_lists(path):
    """[(sentence_id, tokens), ...] in record order."""
    out = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise CorpusFormatError(f"line {lineno}: invalid record: {e.msg}") from None
            if not isinstance(obj, dict):
                raise CorpusFormatError(f"line {lineno}: record must be an object")
            tokens = obj.get("tokens")
            if not (isinstance(tokens, list) and tokens and all(isinstance(t, str) for t in tokens)):
                raise CorpusFormatError(f"line {lineno}: tokens: need a non-empty list of strings")
            for fieldname in ("entities", "relations"):
                if fieldname in obj and not isinstance(obj[fieldname], list):
                    raise CorpusFormatError(f"line {lineno}: {fieldname}: must be a list")
            out.append((len(out), tokens))
    return out
