"""Exact integer/rational elimination.

Rank decisions in this package never touch floating point. Rows are
integer (or Fraction) sequences; elimination is the fraction-free
Bareiss scheme, so every intermediate entry is a minor of the input and
every division is exact.
"""

from __future__ import annotations

from fractions import Fraction
from math import lcm
from typing import Iterable, Sequence

Row = Sequence[int | Fraction]


def _as_int_rows(rows: Iterable[Row]) -> list[list[int]]:
    out = []
    for row in rows:
        row = list(row)
        if any(isinstance(v, Fraction) for v in row):
            den = lcm(*(Fraction(v).denominator for v in row)) if row else 1
            row = [int(Fraction(v) * den) for v in row]
        else:
            row = [int(v) for v in row]
        out.append(row)
    return out


def echelon(rows: Iterable[Row]) -> tuple[list[list[int]], list[int]]:
    """Fraction-free row echelon form.

    Returns the nonzero echelon rows (integers) and their pivot columns.
    Scaling a row by a nonzero rational does not change the row space, so
    Fraction input is first cleared of denominators.
    """
    a = _as_int_rows(rows)
    m = len(a)
    if m == 0:
        return [], []
    n = len(a[0])
    if any(len(r) != n for r in a):
        raise ValueError("ragged matrix")
    prev = 1
    r = 0
    pivots: list[int] = []
    for c in range(n):
        if r == m:
            break
        p = next((i for i in range(r, m) if a[i][c] != 0), None)
        if p is None:
            continue
        a[r], a[p] = a[p], a[r]
        piv = a[r][c]
        prow = a[r]
        for i in range(r + 1, m):
            row = a[i]
            lead = row[c]
            for j in range(c + 1, n):
                row[j] = (piv * row[j] - lead * prow[j]) // prev
            row[c] = 0
        prev = piv
        pivots.append(c)
        r += 1
    return a[:r], pivots


def rank(rows: Iterable[Row]) -> int:
    return len(echelon(rows)[1])


def rref(rows: Iterable[Row]) -> list[tuple[Fraction, ...]]:
    """Reduced row echelon basis of the row space, as Fraction tuples."""
    ech, pivots = echelon(rows)
    red = [[Fraction(v) for v in row] for row in ech]
    for k in range(len(red) - 1, -1, -1):
        c = pivots[k]
        piv = red[k][c]
        red[k] = [v / piv for v in red[k]]
        for i in range(k):
            f = red[i][c]
            if f:
                red[i] = [x - f * y for x, y in zip(red[i], red[k])]
    return [tuple(r) for r in red]


def in_row_space(vec: Row, rows: Sequence[Row]) -> bool:
    """True iff ``vec`` lies in the rational span of ``rows``."""
    rows = list(rows)
    if not any(any(v != 0 for v in r) for r in rows):
        return not any(v != 0 for v in vec)
    return rank(rows + [vec]) == rank(rows)
