"""Versioned binary checkpoints.

Layout:

    magic "CARECKPT1" | u32 header length | header JSON (UTF-8, sorted keys)
    per parameter, in header order: data, adam_m, adam_v as little-endian f64

The header carries the config snapshot, schema, vocab, epoch, RNG state and
a self-describing parameter table (name, shape, step count), so a reload can
rebuild the model skeleton and verify it before filling in the values.
"""

import json
import struct

import numpy as np

from .config import CareConfig
from .data import Schema
from .encoder import Vocab
from .model import CareModel

CHECKPOINT_MAGIC = b"CARECKPT1"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model, epoch, rng_state=None):
    params = model.params()
    header = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "schema": {
            "entity_types": list(model.schema.entity_types),
            "relation_types": list(model.schema.relation_types),
        },
        "vocab": list(model.vocab.tokens),
        "epoch": int(epoch),
        "rng_state": rng_state if rng_state is not None else model.init_rng_state,
        "params": [
            {"name": p.name, "shape": list(p.tensor.shape), "step_count": p.step_count}
            for p in params
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for p in params:
            for arr in (p.tensor.data, p.adam_m, p.adam_v):
                f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def read_checkpoint(path):
    """Returns (header dict, {name: (data, adam_m, adam_v)})."""
    with open(path, "rb") as f:
        blob = f.read()
    head = len(CHECKPOINT_MAGIC)
    if blob[:head] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    (header_len,) = struct.unpack_from("<I", blob, head)
    start = head + 4
    try:
        header = json.loads(blob[start : start + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header: {e}") from None
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported format version {header.get('format_version')}"
        )
    pos = start + header_len
    arrays = {}
    for spec in header["params"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        triple = []
        for _ in range(3):
            nbytes = 8 * count
            if pos + nbytes > len(blob):
                raise CheckpointError(f"{path}: truncated payload at {spec['name']}")
            triple.append(
                np.frombuffer(blob, dtype="<f8", count=count, offset=pos).reshape(shape).copy()
            )
            pos += nbytes
        arrays[spec["name"]] = tuple(triple)
    if pos != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - pos} trailing bytes")
    return header, arrays


def load_model(path, archive=None):
    """Rebuild the model a checkpoint describes; returns (model, epoch, rng_state)."""
    header, arrays = read_checkpoint(path)
    config = CareConfig.from_dict(header["config"])
    schema = Schema(
        tuple(header["schema"]["entity_types"]), tuple(header["schema"]["relation_types"])
    )
    vocab = Vocab(header["vocab"])
    model = CareModel(config, schema, vocab=vocab, archive=archive)

    want = [(p["name"], tuple(p["shape"])) for p in header["params"]]
    have = [(p.name, p.tensor.shape) for p in model.params()]
    if want != have:
        raise CheckpointError(
            f"{path}: parameter table mismatch between checkpoint and rebuilt model"
        )
    steps = {p["name"]: p["step_count"] for p in header["params"]}
    for p in model.params():
        data, m, v = arrays[p.name]
        p.tensor.data = data
        p.adam_m = m
        p.adam_v = v
        p.step_count = steps[p.name]
    return model, header["epoch"], header["rng_state"]
