"""Lattice points of boxes cut by halfspaces, and cube packings of them.

A :class:`LatticeRegion` is ``[lo, hi]^D`` intersected with integer
halfspaces ``g.x <= beta`` and optionally a coset ``x = r (mod q)``.
Enumeration is lexicographic: the first ``D - 1`` coordinates form a
prefix grid and the admissible range of the last coordinate is solved
exactly per prefix, so points are never rejection-tested.

``pack_cubes`` lays an axis-aligned grid of cubes of side ``q L``
(``L = floor(eps' N)``) anchored at the box corner, keeps the cubes lying
inside the region and splits each into ``q^D`` dilated cubes, one per
residue class mod ``q``. Everything else is the boundary set ``S``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .linear_systems import LinearForm, LinearSystem
from .series import Progression

Halfspace = tuple[tuple[int, ...], int]


@dataclass(frozen=True)
class LatticeRegion:
    D: int
    lo: int
    hi: int
    halfspaces: tuple[Halfspace, ...] = ()
    coset: tuple[int, tuple[int, ...]] | None = None

    def __post_init__(self):
        if self.D < 1:
            raise ValueError("D must be >= 1")
        hs = tuple((tuple(int(v) for v in g), int(b)) for g, b in self.halfspaces)
        if any(len(g) != self.D for g, _ in hs):
            raise ValueError("halfspace normal has wrong length")
        object.__setattr__(self, "halfspaces", hs)
        if self.coset is not None:
            q, r = self.coset
            if q < 1 or len(r) != self.D:
                raise ValueError("coset needs q >= 1 and one residue per coordinate")
            object.__setattr__(self, "coset", (int(q), tuple(int(v) % q for v in r)))

    @classmethod
    def box(cls, D: int, N: int) -> "LatticeRegion":
        return cls(D, -N, N)

    @property
    def N(self) -> int:
        return max(abs(self.lo), abs(self.hi))

    @property
    def box_size(self) -> int:
        return (self.hi - self.lo + 1) ** self.D

    @property
    def face_bound(self) -> int:
        """Upper bound on the number of facets of the convex hull."""
        return 2 * self.D + len(self.halfspaces)

    def with_halfspaces(self, extra: Sequence[Halfspace]) -> "LatticeRegion":
        return LatticeRegion(self.D, self.lo, self.hi, self.halfspaces + tuple(extra), self.coset)

    def contains(self, point: Sequence[int]) -> bool:
        if len(point) != self.D:
            raise ValueError("dimension mismatch")
        if any(not self.lo <= v <= self.hi for v in point):
            return False
        if any(sum(a * b for a, b in zip(g, point)) > beta for g, beta in self.halfspaces):
            return False
        if self.coset is not None:
            q, r = self.coset
            if any((v - rv) % q for v, rv in zip(point, r)):
                return False
        return True

    def to_json(self) -> dict:
        out: dict = {
            "D": self.D,
            "N": self.N,
            "halfspaces": [{"g": list(g), "beta": b} for g, b in self.halfspaces],
        }
        if (self.lo, self.hi) != (-self.N, self.N):
            out["box"] = [self.lo, self.hi]
        if self.coset is not None:
            out["coset"] = {"q": self.coset[0], "r": list(self.coset[1])}
        return out

    @classmethod
    def from_json(cls, data: dict) -> "LatticeRegion":
        try:
            D = int(data["D"])
            if "box" in data:
                lo, hi = (int(v) for v in data["box"])
            else:
                N = int(data["N"])
                lo, hi = -N, N
            hs = tuple((tuple(h["g"]), int(h["beta"])) for h in data.get("halfspaces", []))
            coset = data.get("coset")
            coset = (int(coset["q"]), tuple(coset["r"])) if coset else None
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed region spec: {exc}") from exc
        return cls(D, lo, hi, hs, coset)


def load_region(path: str | Path) -> LatticeRegion:
    return LatticeRegion.from_json(json.loads(Path(path).read_text()))


def preimage_region(
    system: LinearSystem,
    N: int,
    target: tuple[int, int] | None = None,
    shift: int = 0,
    box: tuple[int, int] | None = None,
) -> LatticeRegion:
    """``box^D`` intersected with ``{x : psi_i(x) + shift in target for all i}``.

    Defaults: box and target both ``[-N, N]``, shift 0, which is the region
    ``K = [-N, N]^D cap Psi^{-1}([-N, N]^t)``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    tlo, thi = target if target is not None else (-N, N)
    blo, bhi = box if box is not None else (-N, N)
    hs: list[Halfspace] = []
    for f in system.forms:
        g = f.coeffs
        hs.append((g, thi - shift))
        hs.append((tuple(-v for v in g), -(tlo - shift)))
    return LatticeRegion(system.D, blo, bhi, tuple(hs))


# ---------------------------------------------------------------- enumeration


def _last_coord_ranges(region: LatticeRegion, prefixes: np.ndarray):
    """Per prefix: lower bound, upper bound, step for the last coordinate."""
    m = prefixes.shape[0]
    lower = np.full(m, region.lo, dtype=np.int64)
    upper = np.full(m, region.hi, dtype=np.int64)
    feasible = np.ones(m, dtype=bool)
    for g, beta in region.halfspaces:
        gl = g[-1]
        rest = beta - (prefixes @ np.array(g[:-1], dtype=np.int64) if region.D > 1 else 0)
        rest = np.broadcast_to(np.asarray(rest, dtype=np.int64), (m,))
        if gl > 0:
            upper = np.minimum(upper, np.floor_divide(rest, gl))
        elif gl < 0:
            lower = np.maximum(lower, -np.floor_divide(rest, -gl))
        else:
            feasible &= rest >= 0
    step = 1
    if region.coset is not None:
        q, r = region.coset
        step = q
        if region.D > 1:
            feasible &= np.all((prefixes - np.array(r[:-1])) % q == 0, axis=1)
        lower = lower + (r[-1] - lower) % q
    counts = np.where(feasible & (upper >= lower), (upper - lower) // step + 1, 0)
    return lower, counts, step


def _prefix_grid(region: LatticeRegion, first_values: np.ndarray) -> np.ndarray:
    if region.D == 1:
        return np.zeros((1, 0), dtype=np.int64)
    side = np.arange(region.lo, region.hi + 1, dtype=np.int64)
    axes = [first_values] + [side] * (region.D - 2)
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.reshape(-1) for a in grid], axis=1)


def iter_point_chunks(region: LatticeRegion, rows_per_chunk: int = 1) -> Iterator[np.ndarray]:
    """Points in lexicographic order, chunked by values of the first coordinate."""
    if region.hi < region.lo:
        return
    if region.D == 1:
        firsts = [np.array([0])]
    else:
        vals = np.arange(region.lo, region.hi + 1, dtype=np.int64)
        firsts = [vals[i : i + rows_per_chunk] for i in range(0, vals.size, rows_per_chunk)]
    for fv in firsts:
        prefixes = _prefix_grid(region, fv)
        lower, counts, step = _last_coord_ranges(region, prefixes)
        total = int(counts.sum())
        if total == 0:
            continue
        rep = np.repeat(np.arange(prefixes.shape[0]), counts)
        starts = np.cumsum(counts) - counts
        offs = np.arange(total) - np.repeat(starts, counts)
        last = lower[rep] + step * offs
        yield np.column_stack([prefixes[rep], last]).astype(np.int64)


def points(region: LatticeRegion) -> np.ndarray:
    """All integer points, one per row, lexicographically ordered."""
    chunks = list(iter_point_chunks(region, rows_per_chunk=64))
    if not chunks:
        return np.zeros((0, region.D), dtype=np.int64)
    return np.concatenate(chunks)


def enumerate_points(region: LatticeRegion) -> Iterator[tuple[int, ...]]:
    for chunk in iter_point_chunks(region):
        for row in chunk:
            yield tuple(int(v) for v in row)


def count(region: LatticeRegion) -> int:
    total = 0
    if region.hi < region.lo:
        return 0
    vals = np.arange(region.lo, region.hi + 1, dtype=np.int64)
    firsts = [np.array([0])] if region.D == 1 else [vals[i : i + 64] for i in range(0, vals.size, 64)]
    for fv in firsts:
        _, counts, _ = _last_coord_ranges(region, _prefix_grid(region, fv))
        total += int(counts.sum())
    return total


# ---------------------------------------------------------------- cube packing


@dataclass(frozen=True)
class DilatedCube:
    """``{anchor + spacing * v : v in [0, side_count)^D}``."""

    anchor: tuple[int, ...]
    spacing: int
    side_count: int

    @property
    def D(self) -> int:
        return len(self.anchor)

    @property
    def size(self) -> int:
        return self.side_count**self.D

    def points(self) -> np.ndarray:
        grid = np.meshgrid(*([np.arange(self.side_count)] * self.D), indexing="ij")
        v = np.stack([g.reshape(-1) for g in grid], axis=1)
        return np.array(self.anchor, dtype=np.int64) + self.spacing * v


@dataclass
class CellPartition:
    cells: list[DilatedCube]
    boundary: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def L(self) -> int:
        return self.params["L"]

    @property
    def q(self) -> int:
        return self.params["q"]

    @property
    def covered(self) -> int:
        return sum(c.size for c in self.cells)

    def anchors(self) -> np.ndarray:
        D = self.params["D"]
        if not self.cells:
            return np.zeros((0, D), dtype=np.int64)
        return np.array([c.anchor for c in self.cells], dtype=np.int64)

    def to_json(self, include_boundary: bool = True) -> dict:
        out = {
            "params": dict(self.params),
            "cells": [{"anchor": list(c.anchor), "spacing": c.spacing, "side_count": c.side_count} for c in self.cells],
            "boundary_size": int(self.boundary.shape[0]),
        }
        if include_boundary:
            out["boundary"] = self.boundary.tolist()
        return out


def _satisfies(region: LatticeRegion, pts: np.ndarray, scale: int = 1) -> np.ndarray:
    """Row-wise test of ``g.p <= scale * beta`` for every halfspace."""
    ok = np.ones(pts.shape[0], dtype=bool)
    for g, beta in region.halfspaces:
        ok &= pts @ np.array(g, dtype=np.int64) <= scale * beta
    return ok


def pack_cubes(region: LatticeRegion, q: int, eps: float, N: int | None = None) -> CellPartition:
    """Exact partition of ``region`` into dilated cubes plus a boundary set."""
    if region.coset is not None:
        raise ValueError("pack_cubes needs a region without a coset constraint")
    if q < 1:
        raise ValueError("q must be >= 1")
    if not 0 < eps <= 1:
        raise ValueError("eps' must lie in (0, 1]")
    N = region.N if N is None else N
    if eps * N < 1:
        raise ValueError(f"cube side q*eps'*N < q (eps'*N = {eps * N})")
    L = max(1, math.floor(eps * N))
    side = q * L
    D = region.D
    per_axis = (region.hi - region.lo + 1) // side

    kept_idx: list[tuple[int, ...]] = []
    if per_axis > 0:
        grid = np.meshgrid(*([np.arange(per_axis)] * D), indexing="ij")
        idx = np.stack([g.reshape(-1) for g in grid], axis=1)
        # real cube [lo, lo + side]^D of the grid, not just the hull of its lattice points
        lo = region.lo + side * idx
        hi = lo + side
        keep = np.ones(idx.shape[0], dtype=bool)
        for corner in itertools.product((0, 1), repeat=D):
            c = np.where(np.array(corner, dtype=bool), hi, lo)
            keep &= _satisfies(region, c)
        keep &= _satisfies(region, lo + hi, scale=2)  # centre, doubled to stay integral
        kept_idx = [tuple(int(v) for v in row) for row in idx[keep]]

    cells = []
    for j in kept_idx:
        base = [region.lo + side * v for v in j]
        for res in itertools.product(range(q), repeat=D):
            cells.append(DilatedCube(tuple(b + r for b, r in zip(base, res)), q, L))

    pts = points(region)
    if pts.shape[0] and kept_idx:
        cidx = (pts - region.lo) // side
        in_grid = np.all(cidx < per_axis, axis=1)
        flat = np.ravel_multi_index(np.minimum(cidx, per_axis - 1).T, (per_axis,) * D)
        kept_flat = np.zeros(per_axis**D, dtype=bool)
        kept_flat[np.ravel_multi_index(np.array(kept_idx).T, (per_axis,) * D)] = True
        covered = in_grid & kept_flat[flat]
        boundary = pts[~covered]
    else:
        boundary = pts
    params = {"q": q, "eps": eps, "N": N, "L": L, "side": side, "D": D, "cubes": len(kept_idx), "region_size": int(pts.shape[0])}
    return CellPartition(cells, boundary, params)


def extract_subprogression(cell: DilatedCube, form: LinearForm, c: int) -> Progression:
    """Image of the cell's line along the first coordinate where ``form`` is nonzero.

    All other coordinates are fixed at the anchor; the result has
    ``side_count`` terms and common difference ``spacing * coeff_j``.
    """
    j = next(k for k, g in enumerate(form.coeffs) if g != 0)
    start = sum(g * a for g, a in zip(form.coeffs, cell.anchor)) + c
    return Progression.normalised(start, cell.spacing * form.coeffs[j], cell.side_count)


def incidence_count(partition: CellPartition, form: LinearForm, c: int, n: int) -> int:
    """Number of cells ``P`` with ``n`` in ``form(P) + c``.

    Per cell: solve ``sum_k q g_k v_k = n - c - form(anchor)`` over
    ``v in [0, L)^D`` by ranging over all coordinates but the last one with
    nonzero coefficient and solving for that one.
    """
    if not partition.cells:
        return 0
    g = np.array(form.coeffs, dtype=np.int64)
    q, L = partition.q, partition.L
    anchors = partition.anchors()
    target = n - c - anchors @ g
    j = int(np.flatnonzero(g)[-1])
    others = [k for k in range(g.size) if k != j]
    if others:
        grid = np.meshgrid(*([np.arange(L)] * len(others)), indexing="ij")
        V = np.stack([a.reshape(-1) for a in grid], axis=1)
        partial = q * (V @ g[others])
    else:
        partial = np.zeros(1, dtype=np.int64)
    rem = target[:, None] - partial[None, :]
    div = q * g[j]
    ok = rem % div == 0
    v = rem // div
    ok &= (v >= 0) & (v < L)
    return int(np.count_nonzero(ok.any(axis=1)))


def incidence_range(partition: CellPartition, form: LinearForm, c: int) -> tuple[int, int]:
    """Smallest window of ``n`` outside which every incidence count is zero."""
    g = np.array(form.coeffs, dtype=np.int64)
    anchors = partition.anchors()
    if anchors.shape[0] == 0:
        return 0, -1
    span = partition.q * (partition.L - 1) * np.abs(g).sum()
    vals = anchors @ g + c
    return int(vals.min() - span), int(vals.max() + span)


def max_incidence(partition: CellPartition, form: LinearForm, c: int = 0) -> tuple[int, int]:
    """``(max_n incidence_count, argmax n)`` over all ``n``."""
    lo, hi = incidence_range(partition, form, c)
    best, arg = 0, lo
    for n in range(lo, hi + 1):
        k = incidence_count(partition, form, c, n)
        if k > best:
            best, arg = k, n
    return best, arg
