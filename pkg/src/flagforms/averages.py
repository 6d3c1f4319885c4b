"""Multilinear averages of linear-form systems and the inequalities around them.

``multilinear_average`` is ``E_{x in K} prod_i f_i(psi_i(x) + c)`` over an
enumerated lattice region. The rest of the module checks, at finite N,
the statements that control such averages:

* ``reduction_pipeline`` rescales a (possibly non-flag) system into a
  translation-invariant one and confirms the substitution
  ``f~_i(a_i psi_i(x) + aN) = f_i(psi_i(x))`` leaves the average unchanged;
* ``smallN_chain`` evaluates every link of the Cauchy-Schwarz chain
  bounding an average by ``C N^{1/4} min_i ||f_i||_{U^{s+1}[N]}``;
* ``cyclic_ap_average`` tests the von Neumann bound on ``Z_N``;
* ``interval_vn_check`` records (average, min norm) pairs at the
  Cauchy-Schwarz complexity for trend analysis.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import gowers
from ._reduce import pairwise_sum, tree_combine
from .linear_systems import LinearSystem, cs_complexity, flagify
from .regions import LatticeRegion, _satisfies, iter_point_chunks, preimage_region
from .series import Series, dilate_embed

IDENTITY_TOL = 1e-12
CHAIN_TOL = 1e-9


@dataclass
class AverageReport:
    value: complex
    region_size: int
    shift: int = 0
    norms: list[dict] = field(default_factory=list)
    trace: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "value": [self.value.real, self.value.imag],
            "abs": abs(self.value),
            "region_size": self.region_size,
            "shift": self.shift,
            "norms": self.norms,
            "trace": self.trace,
        }


def _chunk_sum(system_matrix: np.ndarray, functions: Sequence[Series], c: int, pts: np.ndarray):
    vals = pts @ system_matrix.T + c
    prod = np.ones(pts.shape[0], dtype=complex)
    for i, f in enumerate(functions):
        prod *= f.at(vals[:, i])
    return pairwise_sum(prod), pts.shape[0]


def multilinear_average(
    system: LinearSystem,
    functions: Sequence[Series],
    region: LatticeRegion,
    c: int = 0,
    jobs: int = 1,
) -> AverageReport:
    """Mean of ``prod_i f_i(psi_i(x) + c)`` over the region's points.

    Points are processed in fixed chunks (blocks of first-coordinate values);
    chunk totals are combined in a fixed binary tree, so the value does not
    depend on ``jobs``.
    """
    if len(functions) != system.t:
        raise ValueError(f"need {system.t} functions, got {len(functions)}")
    if region.D != system.D:
        raise ValueError("region and system dimensions differ")
    mat = np.array(system.rows, dtype=np.int64)
    chunks = iter_point_chunks(region, rows_per_chunk=16)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            results = list(ex.map(lambda p: _chunk_sum(mat, functions, c, p), chunks))
    else:
        results = [_chunk_sum(mat, functions, c, p) for p in chunks]
    size = sum(n for _, n in results)
    if size == 0:
        raise ValueError("empty region")
    total = tree_combine([s for s, _ in results])
    return AverageReport(complex(total) / size, size, c)


# ----------------------------------------------------------- reduction pipeline


def reduction_pipeline(
    system: LinearSystem,
    functions: Sequence[Series],
    N: int,
    jobs: int = 1,
    check: bool = True,
) -> AverageReport:
    """Box average of a system via its flagified rescaling.

    Steps: K = preimage region; witness and scalars ``a_i``; ``f~_i``;
    both sides of ``E_K prod f_i(psi_i x) = E_K prod f~_i(a_i psi_i x + aN)``;
    then the box average against ``C |E_K ...|`` plus a boundary term.
    Returns the box average with the full trace.
    """
    K = preimage_region(system, N)
    fl = flagify(system)
    a = fl.amax
    tilde = [dilate_embed(f, ai, a, N) for f, ai in zip(functions, fl.a)]
    lhs = multilinear_average(system, functions, K, 0, jobs)
    rhs = multilinear_average(fl.rescaled, tilde, K, a * N, jobs)
    gap = abs(lhs.value - rhs.value)
    if check and gap > IDENTITY_TOL:
        raise AssertionError(f"substitution identity off by {gap:.3e}")

    box = LatticeRegion.box(system.D, N)
    box_avg = multilinear_average(system, functions, box, 0, jobs)
    outside_max = 0.0
    mat = np.array(system.rows, dtype=np.int64)
    for pts in iter_point_chunks(box, rows_per_chunk=16):
        out = pts[~_satisfies(K, pts)]
        if out.shape[0]:
            vals = out @ mat.T
            prod = np.ones(out.shape[0], dtype=complex)
            for i, f in enumerate(functions):
                prod *= f.at(vals[:, i])
            outside_max = max(outside_max, float(np.abs(prod).max()))
    n_box, n_K = box_avg.region_size, lhs.region_size
    C = n_box / n_K
    boundary_term = (n_box - n_K) * outside_max / n_box
    trace = {
        "system": system.to_json(),
        "N": N,
        "K_size": n_K,
        "box_size": n_box,
        "flagification": fl.to_json(),
        "a": a,
        "shift": a * N,
        "avg_K": [lhs.value.real, lhs.value.imag],
        "avg_K_rescaled": [rhs.value.real, rhs.value.imag],
        "identity_gap": gap,
        "identity_holds": gap <= IDENTITY_TOL,
        "avg_box": [box_avg.value.real, box_avg.value.imag],
        "C_box_over_K": C,
        "K_over_box": n_K / n_box,
        "max_product_outside_K": outside_max,
        "boundary_term": boundary_term,
        "box_bound_holds": abs(box_avg.value) <= C * abs(lhs.value) + boundary_term + IDENTITY_TOL,
        # products vanish off K, so the box average is exactly |K|/|box| times the K average
        "box_identity_gap": abs(box_avg.value * n_box - lhs.value * n_K) / n_box,
    }
    return AverageReport(box_avg.value, n_box, 0, trace=trace)


# ------------------------------------------------------------------ small N


@dataclass
class ChainLink:
    name: str
    lhs: float
    rhs: float
    kind: str  # "inequality" or "identity"
    tol: float = CHAIN_TOL

    @property
    def holds(self) -> bool:
        if self.kind == "identity":
            return gowers.close(self.lhs, self.rhs, rel=self.tol, abs_=self.tol)
        return self.lhs <= self.rhs + self.tol * max(1.0, abs(self.rhs))

    def to_json(self) -> dict:
        return {"name": self.name, "lhs": self.lhs, "rhs": self.rhs, "kind": self.kind, "tol": self.tol, "holds": self.holds}


@dataclass
class ChainReport:
    j: int
    links: list[ChainLink]
    constants: dict

    @property
    def holds(self) -> bool:
        return all(link.holds for link in self.links)

    def link(self, name: str) -> ChainLink:
        return next(l for l in self.links if l.name == name)

    def to_json(self) -> dict:
        return {"j": self.j, "holds": self.holds, "constants": self.constants, "links": [l.to_json() for l in self.links]}


def monotonicity_constant(N: int, s: int) -> float:
    """``C`` with ``||f||_{U^2[N]} <= C ||f||_{U^{s+1}[N]}`` for every f on [N].

    Embeds [N] into ``Z_M`` with ``M = (s+2)N + 1`` (no wrap-around for
    parallelepipeds of dimension s+1), where Gowers norms increase with the
    order, and returns ``||1_[N]||_{U^{s+1}(Z_M)} / ||1_[N]||_{U^2(Z_M)}``.
    """
    M = (s + 2) * N + 1
    ind = np.zeros(M)
    ind[:N] = 1.0
    return gowers.norm_cyclic(ind, s).norm_value / gowers.norm_cyclic(ind, 1).norm_value


def _quadruple_sum(f: np.ndarray) -> complex:
    """``sum_{n,h,h'} f(n) conj f(n+h') conj f(n+h) f(n+h+h')`` over Z, f stored on [0, N)."""
    N = f.size
    pad = np.zeros(4 * N, dtype=complex)
    pad[N : 2 * N] = f
    n = np.arange(N)[:, None, None] + N
    h = np.arange(-(N - 1), N)[None, :, None]
    hp = np.arange(-(N - 1), N)[None, None, :]
    terms = f[:, None, None] * np.conj(pad[n + hp]) * np.conj(pad[n + h]) * pad[n + h + hp]
    return complex(pairwise_sum(terms))


def smallN_chain(
    system: LinearSystem,
    functions: Sequence[Series],
    region: LatticeRegion,
    c: int,
    N: int,
    s: int,
    j: int | None = None,
) -> ChainReport:
    """Evaluate the chain bounding ``|E_K prod f_i(psi_i + c)|`` by ``C N^{1/4} ||f_j||_{U^{s+1}[N]}``.

    Functions live on [N] = {1..N}. ``j`` defaults to the index of the
    smallest ``U^{s+1}[N]`` norm, ties to the smallest index.
    """
    norms = [gowers.norm_interval(f, 1, N, s) for f in functions]
    if j is None:
        j = int(np.argmin([r.norm_value for r in norms]))
    fj = functions[j].rewindow(1, N)
    avg = multilinear_average(system, functions, region, c)
    K = avg.region_size

    mat = np.array(system.rows[j], dtype=np.int64)
    pts = np.concatenate(list(iter_point_chunks(region, 16)))
    vals = pts @ mat + c
    sq = np.abs(functions[j].at(vals)) ** 2
    mean_sq_K = float(pairwise_sum(sq)) / K
    inside = vals[(vals >= 1) & (vals <= N)]
    max_fibre = int(np.bincount(inside - 1, minlength=N).max()) if inside.size else 0
    C_b = max_fibre * N / K
    f = fj.values
    mean_sq = float(np.mean(np.abs(f) ** 2))

    ac = np.array([np.sum(f[: N - h] * np.conj(f[h:])) if h >= 0 else np.sum(f[-h:] * np.conj(f[: N + h])) for h in range(-(N - 1), N)])
    corr_sum = float(pairwise_sum(np.abs(ac / N) ** 2))
    quad = _quadruple_sum(f)
    u2 = gowers.norm_interval(fj, 1, N, 1)
    config2 = gowers.interval_config_count(N, 2)
    C_mono = monotonicity_constant(N, s)
    u_s1 = norms[j].norm_value
    C_total = math.sqrt(C_b) * (config2 / N**3) ** 0.25 * C_mono

    links = [
        ChainLink("a_cauchy_schwarz", abs(avg.value), math.sqrt(mean_sq_K), "inequality"),
        ChainLink("b_fibre_count", mean_sq_K, C_b * mean_sq, "inequality"),
        ChainLink("c_h0_term", mean_sq**2, corr_sum, "inequality"),
        ChainLink("d_expand", corr_sum, quad.real / N**2, "identity"),
        ChainLink("d_identity", quad.real, config2 * u2.norm_value**4, "identity"),
        ChainLink("monotonicity", u2.norm_value, C_mono * u_s1, "inequality"),
        ChainLink("e_final", abs(avg.value), C_total * N**0.25 * u_s1, "inequality"),
    ]
    constants = {
        "C_b": C_b,
        "max_fibre": max_fibre,
        "config_count_U2": config2,
        "config_count_over_N3": config2 / N**3,
        "C_mono": C_mono,
        "C_total": C_total,
        "quad_imag": quad.imag,
        "norms": [r.norm_value for r in norms],
        "K_size": K,
    }
    return ChainReport(j, links, constants)


# ------------------------------------------------------------- von Neumann


@dataclass
class CyclicVNReport:
    value: complex
    norms: list[float]
    t: int
    N: int
    tol: float = 1e-9

    @property
    def bound(self) -> float:
        return min(self.norms)

    @property
    def holds(self) -> bool:
        return abs(self.value) <= self.bound + self.tol

    def to_json(self) -> dict:
        return {"t": self.t, "N": self.N, "abs_avg": abs(self.value), "norms": self.norms, "bound": self.bound, "holds": self.holds}


def cyclic_ap_average(functions: Sequence, N: int | None = None) -> CyclicVNReport:
    """``E_{x, d in Z_N} prod_i f_i(x + (i-1)d)`` against ``min_i ||f_i||_{U^{t-1}(Z_N)}``.

    Requires ``t >= 3`` and ``gcd(N, (t-1)!) = 1`` (so the common
    differences ``1, ..., t-1`` are invertible mod N).
    """
    arrs = [np.asarray(f.values if isinstance(f, Series) else f, dtype=complex) for f in functions]
    t = len(arrs)
    N = arrs[0].size if N is None else N
    if t < 3:
        raise ValueError("need t >= 3 functions")
    if any(a.size != N for a in arrs):
        raise ValueError("all functions must have length N")
    if math.gcd(N, math.factorial(t - 1)) != 1:
        raise ValueError(f"N={N} must be coprime to (t-1)! = {math.factorial(t - 1)}")
    if any(np.max(np.abs(a)) > 1 + 1e-12 for a in arrs):
        raise ValueError("functions must be 1-bounded")
    x = np.arange(N)[:, None]
    d = np.arange(N)[None, :]
    prod = np.ones((N, N), dtype=complex)
    for i, a in enumerate(arrs):
        prod *= a[(x + i * d) % N]
    value = complex(pairwise_sum(prod)) / N**2
    norms = [gowers.norm_cyclic(a, t - 2).norm_value for a in arrs]
    return CyclicVNReport(value, norms, t, N)


def interval_vn_check(system: LinearSystem, functions: Sequence[Series], N: int) -> dict:
    """``|E_K prod f_i(psi_i x)|`` and ``min_i ||f_i||_{U^{s+1}[-N, N]}`` at the CS complexity s.

    A complexity of 0 is measured with the ``U^2`` norm (the smallest order
    the norm engine supports), and recorded as such. The largest coefficient
    is recorded alongside; nothing is asserted about it.
    """
    K = preimage_region(system, N)
    avg = multilinear_average(system, functions, K)
    s = cs_complexity(system)
    s_eff = max(s, 1)
    norms = [gowers.norm_interval(f, -N, N, s_eff).norm_value for f in functions]
    m = min(norms)
    return {
        "abs_avg": abs(avg.value),
        "min_norm": m,
        "norms": norms,
        "cs_complexity": s,
        "order": s_eff + 1,
        "ratio": abs(avg.value) / m if m > 0 else math.inf,
        "K_size": avg.region_size,
        "coeff_bound": max(abs(v) for row in system.rows for v in row),
    }


def monotone_envelope(norms: Sequence[float], avgs: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Smallest nondecreasing step function ``g`` with ``avg <= g(norm)`` at every sample."""
    order = np.argsort(np.asarray(norms), kind="stable")
    x = np.asarray(norms, dtype=float)[order]
    y = np.maximum.accumulate(np.asarray(avgs, dtype=float)[order])
    return x, y


def envelope_at(x_env: np.ndarray, y_env: np.ndarray, x: float) -> float:
    k = int(np.searchsorted(x_env, x, side="right")) - 1
    return float(y_env[k]) if k >= 0 else 0.0
