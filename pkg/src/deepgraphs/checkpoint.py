"""Binary checkpoint files for trained (cell, head) pairs.

Layout, all little-endian:

    offset  size  field
    0       8     magic b"DGCKPT\\x00\\x00"
    8       4     uint32 format version (1)
    12      4     uint32 K (unroll depth)
    16      4     uint32 d (feature width)
    20      4     uint32 p (vertex attribute width, 0 if none)
    24      4     uint32 cell kind (0 sigmoid, 1 gru)
    28      4     uint32 head kind (0 regression, 1 classification)
    32      4     uint32 t_out (head output width)
    36      4     uint32 task (0 pagerank, 1 hits, 2 classification, 255 unspecified)
    40      4     uint32 n_cell, number of cell parameters
    44      4     uint32 n_head, number of head parameters
    48      8*n_cell  float64 cell parameters
    ...     8*n_head  float64 head parameters

Parameter order is the flat layout of ``CellParams`` (sigmoid: W, W_in,
W_out, W_attr, b; gru: per gate z, r, h the blocks U, W, b) and of
``HeadParams`` (regression: W_hidden, b_hidden, W_out, b_out;
classification: W_out, b_out); matrices are row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cell import CellParams
from .heads import HeadParams

MAGIC = b"DGCKPT\x00\x00"
VERSION = 1
_HEADER = struct.Struct("<10I")
CELL_CODES = {"sigmoid": 0, "gru": 1}
HEAD_CODES = {"regression": 0, "classification": 1}
TASK_CODES = {"pagerank": 0, "hits": 1, "classification": 2, None: 255}


@dataclass
class Checkpoint:
    cell: CellParams
    head: HeadParams
    K: int
    task: Optional[str] = None


def _inverse(table, code, what):
    for k, v in table.items():
        if v == code:
            return k
    raise ValueError(f"unknown {what} code {code}")


def to_bytes(ckpt: Checkpoint) -> bytes:
    cell, head = ckpt.cell, ckpt.head
    header = _HEADER.pack(
        VERSION, ckpt.K, cell.d, cell.p, CELL_CODES[cell.kind], HEAD_CODES[head.kind],
        head.t_out, TASK_CODES[ckpt.task], len(cell), len(head),
    )
    body = np.concatenate([cell.vector, head.vector]).astype("<f8").tobytes()
    return MAGIC + header + body


def from_bytes(blob: bytes) -> Checkpoint:
    if blob[:8] != MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    fields = _HEADER.unpack_from(blob, 8)
    version, K, d, p, cell_code, head_code, t_out, task_code, n_cell, n_head = fields
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    start = 8 + _HEADER.size
    values = np.frombuffer(blob, dtype="<f8", count=n_cell + n_head, offset=start).astype(np.float64)
    if start + 8 * (n_cell + n_head) != len(blob):
        raise ValueError("checkpoint length does not match its header")
    cell = CellParams(_inverse(CELL_CODES, cell_code, "cell"), d, p, values[:n_cell].copy())
    head = HeadParams(_inverse(HEAD_CODES, head_code, "head"), d, t_out, values[n_cell:].copy())
    return Checkpoint(cell, head, K, _inverse(TASK_CODES, task_code, "task"))


def save_checkpoint(path, ckpt: Checkpoint) -> None:
    with open(path, "wb") as fh:
        fh.write(to_bytes(ckpt))


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        return from_bytes(fh.read())
