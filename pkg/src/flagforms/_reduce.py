"""Deterministic cascade summation.

Values are cut into fixed-size chunks, each chunk is summed by numpy's
pairwise reduction, and the chunk totals are combined in a binary tree in
chunk order. The result depends only on the input order and the chunk
size, never on how many workers produced the chunk totals.
"""

from __future__ import annotations

import numpy as np

CHUNK = 4096


def tree_combine(totals):
    totals = list(totals)
    if not totals:
        return 0.0
    while len(totals) > 1:
        nxt = [totals[i] + totals[i + 1] for i in range(0, len(totals) - 1, 2)]
        if len(totals) % 2:
            nxt.append(totals[-1])
        totals = nxt
    return totals[0]


def chunk_totals(values, chunk: int = CHUNK) -> list:
    arr = np.ascontiguousarray(values).reshape(-1)
    return [arr[i : i + chunk].sum() for i in range(0, arr.size, chunk)]


def pairwise_sum(values, chunk: int = CHUNK):
    """Sum a 1-d array (real or complex) in a fixed cascade order."""
    arr = np.ascontiguousarray(values).reshape(-1)
    if arr.size == 0:
        return arr.dtype.type(0)
    return tree_combine(chunk_totals(arr, chunk))
