"""Gowers uniformity norms over Z, on subsets of Z, and on cyclic groups.

The central object is the unnormalised parallelepiped sum

    S_{s+1}(f) = sum over x in Z, h in Z^{s+1} of prod_w C^{|w|} f(x + w.h)

for finitely supported ``f``. Three independent routes compute it:

``pp_sum_brute``
    literal enumeration of every (x, h) whose axis vertices lie in the
    window, all 2^{s+1} vertices multiplied out. Small inputs only.
``pp_sum_oracle``
    enumerates (x, h_1..h_s) through multiplicative derivatives
    ``D_h g(x) = g(x) conj(g(x + h))`` and closes the last direction exactly
    with ``sum_{x, h'} g(x) conj(g(x + h')) = |sum_x g(x)|^2``. No FFT.
``pp_sum_fast``
    ``S_{k+1}(f) = sum_h S_k(D_h f)`` down to ``S_2(f) = sum_h |ac_f(h)|^2``,
    with the autocorrelation from a zero-padded FFT.

Norms on a finite ``A`` are ``(S(f 1_A) / S(1_A)) ** (1 / 2^{s+1})``; the
root is only taken when a report is built.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

import numpy as np

from ._reduce import pairwise_sum
from .series import Progression, Series, e

BRUTE_GUARD = 10**8
ORACLE_GUARD = 10**9
FAST_GUARD = 10**9
REL_TOL = 1e-9
ABS_TOL = 1e-9


def _next_pow2(n: int) -> int:
    return 1 << max(0, (int(n) - 1).bit_length())


def close(a: float, b: float, rel: float = REL_TOL, abs_: float = ABS_TOL) -> bool:
    """Tolerance policy: relative on magnitudes >= 1, absolute below."""
    scale = max(abs(a), abs(b))
    return abs(a - b) <= (rel * scale if scale >= 1 else abs_)


@dataclass(frozen=True)
class ParallelepipedSum:
    order: int
    value: complex
    config_count: int
    method: str = ""

    def __post_init__(self):
        v = complex(self.value)
        if abs(v.imag) > 1e-9 * (1 + abs(v)) or v.real < -1e-9 * max(1.0, abs(v)):
            raise ArithmeticError(f"parallelepiped sum {v} is not real nonnegative")

    @property
    def real(self) -> float:
        return max(complex(self.value).real, 0.0)


@dataclass(frozen=True)
class NormReport:
    norm_value: float
    order: int
    domain: str
    method: str
    numerator: float
    denominator: float
    tolerances: dict = field(default_factory=lambda: {"rel": REL_TOL, "abs": ABS_TOL})

    def to_json(self) -> dict:
        return {
            "norm_value": self.norm_value,
            "order": self.order,
            "domain": self.domain,
            "method": self.method,
            "numerator": self.numerator,
            "denominator": self.denominator,
            "tolerances": dict(self.tolerances),
        }


# ------------------------------------------------------------------ helpers


def _mderiv(g: np.ndarray, h: int) -> np.ndarray:
    """``x -> g(x) conj(g(x + h))`` restricted to where both factors are stored."""
    m = g.size
    if h >= 0:
        return g[: m - h] * np.conj(g[h:])
    return g[-h:] * np.conj(g[: m + h])


def _mderiv_rows(g: np.ndarray, hs: np.ndarray) -> np.ndarray:
    """Rows ``D_h g`` for each ``h`` in ``hs``, on the window of ``g`` (zero where x+h is outside)."""
    m = g.size
    padded = np.zeros(3 * m - 2, dtype=g.dtype)
    padded[m - 1 : 2 * m - 1] = g
    idx = (m - 1) + np.arange(m)[None, :] + hs[:, None]
    return g[None, :] * np.conj(padded[idx])


def _support_values(f: Series) -> np.ndarray:
    return np.asarray(f.values, dtype=np.complex128)


@lru_cache(maxsize=None)
def interval_config_count(m: int, order: int) -> int:
    """Exact ``S_order(1_{[m]})``: ``S_1 = m^2``, ``S_{k+1}(m) = sum_{|h| < m} S_k(m - |h|)``."""
    if m <= 0:
        return 0
    if order == 1:
        return m * m
    return interval_config_count(m, order - 1) + 2 * sum(
        interval_config_count(m - h, order - 1) for h in range(1, m)
    )


# ------------------------------------------------------------------ brute force


def pp_sum_brute(f: Series, s: int) -> ParallelepipedSum:
    """Literal definition: every vertex of every parallelepiped multiplied out."""
    if s < 1:
        raise ValueError("s must be >= 1")
    g = _support_values(f)
    n = g.size
    if n ** (s + 2) > BRUTE_GUARD:
        raise OverflowError(f"brute force needs {n}^{s + 2} configurations (guard {BRUTE_GUARD})")
    if n == 0:
        return ParallelepipedSum(s + 1, 0j, 0, "brute")
    k = s + 1
    axes = np.meshgrid(*([np.arange(n)] * (k + 1)), indexing="ij")
    x = axes[0].reshape(-1)
    hs = [a.reshape(-1) - x for a in axes[1:]]
    prod = np.ones(x.size, dtype=complex)
    inside = np.ones(x.size, dtype=bool)
    for w in range(1 << k):
        pos = x.copy()
        for j in range(k):
            if w >> j & 1:
                pos = pos + hs[j]
        ok = (pos >= 0) & (pos < n)
        inside &= ok
        val = np.where(ok, g[np.clip(pos, 0, n - 1)], 0)
        prod *= np.conj(val) if bin(w).count("1") % 2 else val
    return ParallelepipedSum(k, complex(pairwise_sum(prod)), int(inside.sum()), "brute")


# ------------------------------------------------------------------ oracle


def _oracle(g: np.ndarray, depth: int):
    if g.size == 0:
        return 0.0
    if depth == 0:
        return float(abs(g.sum()) ** 2)
    if depth == 1:
        inner = _mderiv_rows(g, np.arange(-(g.size - 1), g.size)).sum(axis=1)
        return float(pairwise_sum((inner * np.conj(inner)).real))
    m = g.size
    parts = [_oracle(_mderiv(g, h), depth - 1) for h in range(-(m - 1), m)]
    return float(pairwise_sum(np.array(parts)))


def _oracle_int(u: np.ndarray, depth: int) -> int:
    if u.size == 0:
        return 0
    if depth == 0:
        return int(u.sum()) ** 2
    m = u.size
    return sum(_oracle_int(_mderiv(u, h), depth - 1) for h in range(-(m - 1), m))


def pp_sum_oracle(f: Series, s: int) -> ParallelepipedSum:
    """Enumerate (x, h_1..h_s), closing the last direction as ``|sum_x D g(x)|^2``."""
    if s < 1:
        raise ValueError("s must be >= 1")
    g = _support_values(f)
    n = g.size
    if n ** (s + 1) > ORACLE_GUARD:
        raise OverflowError(f"oracle needs ~{n}^{s + 1} terms (guard {ORACLE_GUARD})")
    value = _oracle(g, s)
    ones = np.ones(n, dtype=np.int64)
    count = _oracle_int(ones, s) if n ** (s + 1) <= 10**6 else interval_config_count(n, s + 1)
    return ParallelepipedSum(s + 1, complex(value), count, "oracle")


# ------------------------------------------------------------------ fast path


def _s2_rows(rows: np.ndarray) -> np.ndarray:
    """``sum_h |ac(h)|^2`` for each row, ac by zero-padded FFT.

    With ``F = fft(f, L)`` and ``L >= 2m`` the inverse transform of
    ``conj(F) * F`` is the linear autocorrelation ``sum_x conj(f(x)) f(x + h)``
    at lag ``h`` (index ``h mod L``); numpy's ``ifft`` carries the 1/L factor.
    """
    m = rows.shape[1]
    L = _next_pow2(2 * m)
    F = np.fft.fft(rows, L, axis=1)
    ac = np.fft.ifft(np.conj(F) * F, axis=1)
    return (ac * np.conj(ac)).real.sum(axis=1)


def _fast(g: np.ndarray, order: int, batch_rows: int = 1024) -> float:
    if g.size == 0:
        return 0.0
    if order == 2:
        return float(_s2_rows(g[None, :])[0])
    if order == 3:
        m = g.size
        parts = []
        for lo in range(-(m - 1), m, batch_rows):
            hs = np.arange(lo, min(lo + batch_rows, m))
            rows = _mderiv_rows(g, hs)
            keep = np.any(rows != 0, axis=1)
            if keep.any():
                parts.append(_s2_rows(rows[keep]))
        return float(pairwise_sum(np.concatenate(parts))) if parts else 0.0
    m = g.size
    parts = []
    for h in range(-(m - 1), m):
        d = _mderiv(g, h)
        if d.any():
            parts.append(_fast(d, order - 1, batch_rows))
    return float(pairwise_sum(np.array(parts))) if parts else 0.0


def pp_sum_fast(f: Series, s: int) -> ParallelepipedSum:
    if s < 1:
        raise ValueError("s must be >= 1")
    g = _support_values(f)
    n = g.size
    if n**s > FAST_GUARD:
        raise OverflowError(f"fast path needs ~{n}^{s} FFT rows (guard {FAST_GUARD})")
    value = _fast(g, s + 1)
    return ParallelepipedSum(s + 1, complex(value), interval_config_count(n, s + 1), "fast")


PP_METHODS = {"brute": pp_sum_brute, "oracle": pp_sum_oracle, "fast": pp_sum_fast}


def pp_sum(f: Series, s: int, method: str = "fast") -> ParallelepipedSum:
    try:
        fn = PP_METHODS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}") from None
    return fn(f, s)


# ------------------------------------------------------------------ norms


def _as_indicator(A) -> tuple[Series, str]:
    if isinstance(A, Progression):
        if A.length == 0:
            raise ValueError("A must be nonempty")
        return A.indicator(), f"prog:{A.start},{A.step},{A.length}"
    pts = sorted({int(p) for p in A})
    if not pts:
        raise ValueError("A must be nonempty")
    return Series.indicator(pts), f"set:{len(pts)} points in [{pts[0]},{pts[-1]}]"


def norm_subset(f: Series, A, s: int, method: str = "fast") -> NormReport:
    """``||f||_{U^{s+1}(A)} = (S(f 1_A) / S(1_A)) ** (1 / 2^{s+1})`` computed over Z."""
    ind, desc = _as_indicator(A)
    g = f.rewindow(*ind.window) * ind
    num = pp_sum(g, s, method).real
    den = pp_sum(ind, s, method).real
    if den <= 0:
        raise ArithmeticError("S(1_A) vanished for nonempty A")
    return NormReport((num / den) ** (1.0 / 2 ** (s + 1)), s + 1, desc, method, num, den)


def norm_interval(f: Series, lo: int, hi: int, s: int, method: str = "fast") -> NormReport:
    rep = norm_subset(f, Progression.interval(lo, hi), s, method)
    return NormReport(rep.norm_value, rep.order, f"interval:{lo}..{hi}", method, rep.numerator, rep.denominator)


def _cyc_s2_rows(rows: np.ndarray) -> np.ndarray:
    F = np.fft.fft(rows, axis=1)
    ac = np.fft.ifft(np.conj(F) * F, axis=1)
    return (ac * np.conj(ac)).real.sum(axis=1)


def _cyc(g: np.ndarray, order: int) -> float:
    N = g.size
    if order == 2:
        return float(_cyc_s2_rows(g[None, :])[0])
    if order == 3:
        idx = (np.arange(N)[None, :] + np.arange(N)[:, None]) % N
        rows = g[None, :] * np.conj(g[idx])
        return float(pairwise_sum(_cyc_s2_rows(rows)))
    parts = [_cyc(g * np.conj(np.roll(g, -h)), order - 1) for h in range(N)]
    return float(pairwise_sum(np.array(parts)))


def cyclic_sum(values, s: int) -> float:
    """Unnormalised ``sum_{x, h in Z_N^{s+1}} prod_w C^{|w|} f(x + w.h)`` on Z_N."""
    g = np.asarray(values, dtype=complex)
    if g.size < 1:
        raise ValueError("N must be >= 1")
    if s < 1:
        raise ValueError("s must be >= 1")
    return _cyc(g, s + 1)


def norm_cyclic(f: Series | np.ndarray, s: int) -> NormReport:
    """Gowers ``U^{s+1}(Z_N)`` norm of the length-N window of ``f`` (index 0 = window start)."""
    vals = f.values if isinstance(f, Series) else np.asarray(f, dtype=complex)
    N = vals.size
    total = max(cyclic_sum(vals, s), 0.0)
    den = float(N) ** (s + 2)
    return NormReport((total / den) ** (1.0 / 2 ** (s + 1)), s + 1, f"cyclic:{N}", "fast", total, den)


def norm_cyclic_brute(values, s: int) -> float:
    """Literal cyclic definition; test oracle for small N."""
    g = np.asarray(values, dtype=complex)
    N = g.size
    k = s + 1
    if N ** (k + 1) > BRUTE_GUARD:
        raise OverflowError("cyclic brute force too large")
    axes = np.meshgrid(*([np.arange(N)] * (k + 1)), indexing="ij")
    x = axes[0].reshape(-1)
    hs = [a.reshape(-1) for a in axes[1:]]
    prod = np.ones(x.size, dtype=complex)
    for w in range(1 << k):
        pos = x.copy()
        for j in range(k):
            if w >> j & 1:
                pos = pos + hs[j]
        val = g[pos % N]
        prod *= np.conj(val) if bin(w).count("1") % 2 else val
    total = max(pairwise_sum(prod).real, 0.0)
    return (total / N ** (k + 1)) ** (1.0 / 2**k)


# --------------------------------------------------- de la Vallee Poussin smoothing


def dlvp_radii(eps: float, N: int) -> tuple[float, float]:
    """Plateau half-width ``eps N / 2`` and outer half-width ``(1 + 1/sqrt N) eps N / 2``."""
    inner = eps * N / 2
    return inner, (1 + 1 / math.sqrt(N)) * inner


def dlvp_kernel(eps: float, N: int) -> Series:
    """Trapezoid: 1 on ``|x| <= eps N/2``, 0 beyond ``(1 + 1/sqrt N) eps N/2``, linear between."""
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    if eps * N < 4:
        raise ValueError("degenerate plateau: need eps * N >= 4")
    inner, outer = dlvp_radii(eps, N)
    R = math.floor(outer)
    x = np.abs(np.arange(-R, R + 1, dtype=float))
    vals = np.clip((outer - x) / (outer - inner), 0.0, 1.0)
    vals[x <= inner] = 1.0
    return Series(-R, vals, f"dlvp(eps={eps},N={N})")


def dilated_smoother(eps: float, N: int, q: int, c: int) -> Series:
    """``chi(x) = chi_0((x - c) / q)`` on ``x = c (mod q)``, zero otherwise."""
    if q < 1:
        raise ValueError("q must be >= 1")
    k0 = dlvp_kernel(eps, N)
    R = -k0.support_start
    out = np.zeros(2 * q * R + 1)
    out[::q] = k0.values.real
    return Series(c - q * R, out, f"dlvp(eps={eps},N={N};q={q},c={c})")


def subprogression(eps: float, N: int, q: int, c: int) -> Progression:
    """``P = q I_eps + c`` with ``I_eps`` the integers in ``[-eps N/2, eps N/2]``."""
    r = math.floor(eps * N / 2)
    return Progression(c - q * r, q, 2 * r + 1)


def fourier_l1(f: Series, M: int | None = None) -> float:
    """``sum_xi |f^(xi)|`` with ``f^(xi) = (1/M) sum_x f(x) e(-x xi / M)`` on ``Z_M``.

    The default ``M`` is the next power of two at least four times the
    window length, so the embedding has no wrap-around.
    """
    if M is None:
        M = _next_pow2(4 * len(f))
    if M < len(f):
        raise ValueError("embedding group smaller than the support")
    buf = np.zeros(M, dtype=complex)
    buf[f.indices % M] = f.values
    return float(np.abs(np.fft.fft(buf)).sum() / M)


def dlvp_fourier_l1(eps: float, N: int) -> float:
    inner, outer = dlvp_radii(eps, N)
    return fourier_l1(dlvp_kernel(eps, N), _next_pow2(math.ceil(4 * 2 * outer)))


def linear_phase(theta: float, window: tuple[int, int]) -> Series:
    n = np.arange(window[0], window[1] + 1)
    return Series(window[0], e(np.mod(theta * n, 1.0)), f"e({theta}n)")


def min_norm(functions: Iterable[Series], lo: int, hi: int, s: int, method: str = "fast") -> tuple[float, int]:
    """Smallest ``U^{s+1}[lo, hi]`` norm among ``functions`` and its first index."""
    vals = [norm_interval(f, lo, hi, s, method).norm_value for f in functions]
    j = int(np.argmin(vals))
    return vals[j], j
