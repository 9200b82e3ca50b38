"""CAREEMB1 archive writer.

Layout (integers little-endian):

    magic "CAREEMB1" | u32 dim | u32 count
    count records: u32 id | u32 token_count | token_count*dim float32
    count index entries: u32 id | u64 byte offset of the record
"""

import struct

import numpy as np

MAGIC = b"CAREEMB1"


class ArchiveWriteError(ValueError):
    pass


def write_archive(path, dim, records):
    """Write (sentence_id, float32 (n, dim) matrix) pairs."""
    records = list(records)
    ids = [int(i) for i, _ in records]
    if len(set(ids)) != len(ids):
        raise ArchiveWriteError("duplicate sentence ids")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", dim, len(records)))
        index = []
        for sid, mat in records:
            mat = np.ascontiguousarray(mat, dtype="<f4")
            if mat.ndim != 2 or mat.shape[1] != dim:
                raise ArchiveWriteError(f"record {sid}: shape {mat.shape}, want (*, {dim})")
            index.append((sid, f.tell()))
            f.write(struct.pack("<II", sid, mat.shape[0]))
            f.write(mat.tobytes())
        for sid, offset in index:
            f.write(struct.pack("<IQ", sid, offset))
