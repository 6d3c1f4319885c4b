"""Finitely supported complex functions on the integers.

A :class:`Series` stores values on a contiguous window ``[start, stop]``
and is zero elsewhere. Generators produce the deterministic test corpus
(random, polynomial-phase and bracket-phase functions); ``dilate_embed``
is the rescaling ``f -> f~`` with ``f~(a_i m + aN) = f(m)``.

Random kinds draw from numpy's PCG64 bit generator seeded with the spec's
64-bit seed (``numpy.random.Generator(numpy.random.PCG64(seed))``), so a
corpus is reproducible from its specs alone.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

BOUND_TOL = 1e-12


class SeriesFormatError(ValueError):
    pass


def e(x):
    """``exp(2 pi i x)``."""
    return np.exp(2j * np.pi * np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class Series:
    support_start: int
    values: np.ndarray
    label: str = ""
    one_bounded: bool = True

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.complex128).reshape(-1)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "support_start", int(self.support_start))
        if not np.all(np.isfinite(vals)):
            raise ValueError("series values must be finite")
        if self.one_bounded and vals.size and np.max(np.abs(vals)) > 1 + BOUND_TOL:
            raise ValueError(
                f"series declared 1-bounded but max |value| = {np.max(np.abs(vals)):.17g}"
            )

    # construction -----------------------------------------------------------
    @classmethod
    def constant(cls, lo: int, hi: int, value: complex = 1.0, label: str = "") -> "Series":
        return cls(lo, np.full(hi - lo + 1, value, dtype=complex), label or f"const[{lo},{hi}]")

    @classmethod
    def indicator(cls, points: Iterable[int], label: str = "") -> "Series":
        pts = np.unique(np.fromiter((int(p) for p in points), dtype=np.int64))
        if pts.size == 0:
            return cls(0, np.zeros(0), label or "indicator(empty)")
        vals = np.zeros(int(pts[-1] - pts[0]) + 1)
        vals[pts - pts[0]] = 1.0
        return cls(int(pts[0]), vals, label or "indicator")

    # window -----------------------------------------------------------------
    def __len__(self) -> int:
        return self.values.size

    @property
    def support_stop(self) -> int:
        """Last index of the stored window (inclusive)."""
        return self.support_start + self.values.size - 1

    @property
    def window(self) -> tuple[int, int]:
        return self.support_start, self.support_stop

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.support_start, self.support_start + self.values.size)

    def at(self, n):
        """Values at integer positions ``n`` (array or scalar), zero off the window."""
        n = np.asarray(n, dtype=np.int64)
        idx = n - self.support_start
        ok = (idx >= 0) & (idx < self.values.size)
        out = np.zeros(n.shape, dtype=np.complex128)
        out[ok] = self.values[idx[ok]]
        return out if out.ndim else complex(out)

    def rewindow(self, lo: int, hi: int) -> "Series":
        """Same function stored on ``[lo, hi]``; values outside it are dropped."""
        return Series(lo, self.at(np.arange(lo, hi + 1)), self.label, self.one_bounded)

    def trimmed(self) -> "Series":
        nz = np.flatnonzero(self.values)
        if nz.size == 0:
            return Series(self.support_start, np.zeros(0), self.label, self.one_bounded)
        return Series(
            self.support_start + int(nz[0]),
            self.values[nz[0] : nz[-1] + 1],
            self.label,
            self.one_bounded,
        )

    def __mul__(self, other: "Series") -> "Series":
        lo = max(self.support_start, other.support_start)
        hi = min(self.support_stop, other.support_stop)
        if hi < lo:
            return Series(lo, np.zeros(0), f"{self.label}*{other.label}")
        n = np.arange(lo, hi + 1)
        return Series(
            lo,
            self.at(n) * other.at(n),
            f"{self.label}*{other.label}",
            self.one_bounded and other.one_bounded,
        )

    def conj(self) -> "Series":
        return Series(self.support_start, self.values.conj(), f"conj({self.label})", self.one_bounded)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Series):
            return NotImplemented
        return self.support_start == other.support_start and np.array_equal(
            self.values, other.values
        )

    def __repr__(self) -> str:
        return f"Series({self.label!r}, window={self.window}, len={len(self)})"


@dataclass(frozen=True)
class Progression:
    """``{start + step * j : 0 <= j < length}`` with ``step >= 1``."""

    start: int
    step: int
    length: int

    def __post_init__(self):
        if self.step < 1:
            raise ValueError("progression step must be >= 1 (normalise negative steps first)")
        if self.length < 0:
            raise ValueError("negative length")

    @classmethod
    def normalised(cls, start: int, step: int, length: int) -> "Progression":
        if step == 0:
            raise ValueError("zero step")
        if step < 0:
            start, step = start + step * (length - 1), -step
        return cls(start, step, length)

    @classmethod
    def interval(cls, lo: int, hi: int) -> "Progression":
        return cls(lo, 1, hi - lo + 1)

    @property
    def last(self) -> int:
        return self.start + self.step * (self.length - 1)

    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.length, dtype=np.int64)

    def __len__(self) -> int:
        return self.length

    def __contains__(self, n: int) -> bool:
        d = n - self.start
        return d >= 0 and d % self.step == 0 and d // self.step < self.length

    def indicator(self) -> Series:
        return Series.indicator(self.points(), label=f"1_{{{self.start}+{self.step}*[0,{self.length})}}")


# ------------------------------------------------------------------ generators

GENERATOR_KINDS = (
    "constant",
    "random_unimodular",
    "random_pm1",
    "polynomial_phase",
    "bracket_phase",
    "indicator",
)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_json(cls, data: dict | str) -> "GeneratorSpec":
        if isinstance(data, str):
            data = json.loads(data)
        if "kind" not in data:
            raise ValueError("generator spec needs a 'kind'")
        return cls(data["kind"], dict(data.get("params", {})), int(data.get("seed", 0)))


def _frac_mul(alpha: float, m: Sequence[int]) -> np.ndarray:
    """Fractional part of ``alpha * m`` for integer ``m``, exact for the float ``alpha``."""
    fa = Fraction(alpha)
    p, q = fa.numerator, fa.denominator
    return np.array([((p * int(v)) % q) / q for v in m], dtype=float)


def _phase_poly(alphas: Sequence[float], n: np.ndarray) -> np.ndarray:
    phase = np.zeros(n.shape, dtype=float)
    ints = [int(v) for v in n]
    for d, alpha in enumerate(alphas, start=1):
        if alpha:
            phase += _frac_mul(alpha, [v**d for v in ints])
    return phase


def generate(spec: GeneratorSpec, window: tuple[int, int]) -> Series:
    """Deterministic 1-bounded series on the inclusive window ``(lo, hi)``.

    Kinds and params:
      constant          value (real, or [re, im]); default 1
      random_unimodular e(U) with U uniform on [0, 1)
      random_pm1        uniform signs
      polynomial_phase  alpha = [a_1, ..., a_d]: e(a_1 n + ... + a_d n^d)
      bracket_phase     alpha, beta: e(alpha * n * floor(beta * n))
      indicator         start, stop (inclusive), or progression = [start, step, length]
    """
    lo, hi = int(window[0]), int(window[1])
    if hi < lo:
        raise ValueError(f"empty window {window}")
    n = np.arange(lo, hi + 1, dtype=np.int64)
    p = spec.params
    label = f"{spec.kind}{json.dumps(p, sort_keys=True)}@seed={spec.seed}"
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    if spec.kind == "constant":
        v = p.get("value", 1.0)
        v = complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)
        vals = np.full(n.size, v)
    elif spec.kind == "random_unimodular":
        vals = e(rng.random(n.size))
    elif spec.kind == "random_pm1":
        vals = (2 * rng.integers(0, 2, n.size) - 1).astype(complex)
    elif spec.kind == "polynomial_phase":
        vals = e(_phase_poly([float(a) for a in p.get("alpha", [])], n))
    elif spec.kind == "bracket_phase":
        alpha, beta = float(p["alpha"]), Fraction(float(p["beta"]))
        m = [int(v) * math.floor(beta * int(v)) for v in n]
        vals = e(_frac_mul(alpha, m))
    elif spec.kind == "indicator":
        if "progression" in p:
            prog = Progression.normalised(*[int(x) for x in p["progression"]])
            vals = np.isin(n, prog.points()).astype(complex)
        else:
            vals = ((n >= int(p["start"])) & (n <= int(p["stop"]))).astype(complex)
    else:
        raise ValueError(f"unknown generator kind {spec.kind!r}; expected one of {GENERATOR_KINDS}")
    return Series(lo, vals, label)


# ----------------------------------------------------------------- transforms


def dilate_embed(f: Series, a_i: int, a: int, N: int) -> Series:
    """``f~(x) = f((x - aN) / a_i)`` on ``[0, 2aN]``, zero off ``a_i[-N, N] + aN``.

    ``f`` must vanish outside ``[-N, N]``. The window includes 0 because the
    image ``a_i[-N, N] + aN`` reaches 0 when ``|a_i| = a``.
    """
    if a_i == 0:
        raise ValueError("a_i must be nonzero")
    if abs(a_i) > a:
        raise ValueError("need |a_i| <= a")
    if len(f) and (f.support_start < -N or f.support_stop > N):
        outside = np.concatenate(
            [f.values[: max(0, -N - f.support_start)], f.values[max(0, N - f.support_start + 1) :]]
        )
        if np.any(outside != 0):
            raise ValueError("f must be supported in [-N, N]")
    m = np.arange(-N, N + 1)
    out = np.zeros(2 * a * N + 1, dtype=complex)
    out[a_i * m + a * N] = f.at(m)
    return Series(0, out, f"dilate({f.label};a_i={a_i},a={a},N={N})", f.one_bounded)


def modulate(f: Series, theta: float) -> Series:
    """``n -> e(theta n) f(n)`` on the same window."""
    phase = np.mod(theta * f.indices.astype(float), 1.0)
    return Series(f.support_start, f.values * e(phase), f"e({theta}n)*{f.label}", f.one_bounded)


# ------------------------------------------------------------------------ I/O


def write_series(series: Series, path: str | Path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "re", "im"])
            for n, v in zip(series.indices, series.values):
                w.writerow([int(n), repr(float(v.real)), repr(float(v.imag))])
    elif fmt == "json":
        data = {
            "support_start": series.support_start,
            "values": [[float(v.real), float(v.imag)] for v in series.values],
            "label": series.label,
            "one_bounded": series.one_bounded,
        }
        path.write_text(json.dumps(data))
    else:
        raise ValueError(f"unknown series format {fmt!r}")


def _parse_float(s: str, where: str) -> float:
    try:
        x = float(s)
    except ValueError:
        raise SeriesFormatError(f"{where}: not a number: {s!r}") from None
    if not math.isfinite(x):
        raise SeriesFormatError(f"{where}: non-finite value {s!r}")
    return x


def read_series(path: str | Path, fmt: str | None = None, one_bounded: bool = True) -> Series:
    """Read a CSV (rows ``n, re, im``) or JSON series.

    CSV indices must be strictly increasing; gaps are zero-filled.
    """
    path = Path(path)
    fmt = fmt or path.suffix.lstrip(".").lower()
    if fmt == "csv":
        ns: list[int] = []
        vs: list[complex] = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or row[0].startswith("#"):
                    continue
                if lineno == 1 and row[0].strip() == "n":
                    continue
                if len(row) != 3:
                    raise SeriesFormatError(f"line {lineno}: expected 3 fields, got {len(row)}")
                try:
                    n = int(row[0])
                except ValueError:
                    raise SeriesFormatError(f"line {lineno}: bad index {row[0]!r}") from None
                if ns and n <= ns[-1]:
                    raise SeriesFormatError(f"line {lineno}: indices must increase")
                ns.append(n)
                vs.append(complex(_parse_float(row[1], f"line {lineno}"), _parse_float(row[2], f"line {lineno}")))
        if not ns:
            raise SeriesFormatError(f"{path}: empty series")
        vals = np.zeros(ns[-1] - ns[0] + 1, dtype=complex)
        vals[np.array(ns) - ns[0]] = vs
        start, label = ns[0], path.stem
    elif fmt == "json":
        try:
            data = json.loads(path.read_text())
            start = int(data["support_start"])
            raw = data["values"]
            vals = np.array(
                [complex(_parse_float(str(re), "json"), _parse_float(str(im), "json")) for re, im in raw],
                dtype=complex,
            )
        except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
            if isinstance(exc, SeriesFormatError):
                raise
            raise SeriesFormatError(f"{path}: malformed series JSON: {exc}") from exc
        if vals.size == 0:
            raise SeriesFormatError(f"{path}: empty series")
        label = data.get("label", path.stem)
    else:
        raise ValueError(f"unknown series format {fmt!r}")
    if one_bounded and np.max(np.abs(vals)) > 1 + BOUND_TOL:
        raise SeriesFormatError(f"{path}: value exceeds 1 in modulus under the 1-bounded policy")
    return Series(start, vals, label, one_bounded)
