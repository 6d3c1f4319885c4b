"""Systems of integer linear forms and their exact algebra.

A system is ``t`` integer forms on ``Z^D``. The objects computed here:

* power spans: the subspace of ``Q^t`` spanned by ``(psi_1(x)^k, ..., psi_t(x)^k)``
  over all integer points ``x``;
* the flag condition (power span of degree ``k`` contained in that of degree
  ``l`` whenever ``k < l``), checked up to a degree bound;
* the independence degree (least ``s`` with ``psi_i^{s+1}`` linearly independent);
* Cauchy-Schwarz complexity;
* flagification: nonzero integer rescalings ``a_i`` making ``(a_i psi_i)``
  translation invariant.

Everything is exact (Python integers and Fractions).
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from math import comb, factorial, gcd, lcm, prod
from pathlib import Path
from typing import Iterator, Sequence

from ._exact import in_row_space, rank, rref

#: Hard cap for the subset dynamic program in :func:`cs_complexity` (3^t work).
CS_COMPLEXITY_MAX_T = 12


@dataclass(frozen=True)
class LinearForm:
    coeffs: tuple[int, ...]

    def __post_init__(self):
        coeffs = tuple(int(c) for c in self.coeffs)
        object.__setattr__(self, "coeffs", coeffs)
        if len(coeffs) < 1:
            raise ValueError("a linear form needs D >= 1 coefficients")
        if not any(coeffs):
            raise ValueError("linear forms must be nonzero")

    @property
    def D(self) -> int:
        return len(self.coeffs)

    def __call__(self, point: Sequence[int]) -> int:
        return evaluate(self, point)

    def scaled(self, a: int) -> "LinearForm":
        return LinearForm(tuple(a * c for c in self.coeffs))

    def __str__(self) -> str:
        names = _var_names(self.D)
        terms = []
        for c, v in zip(self.coeffs, names):
            if c == 0:
                continue
            sign = "-" if c < 0 else "+"
            mag = "" if abs(c) == 1 else str(abs(c))
            terms.append(f"{sign} {mag}{v}")
        s = " ".join(terms)
        return s[2:] if s.startswith("+ ") else "-" + s[2:]


def _var_names(D: int) -> list[str]:
    if D <= 4:
        return ["x", "y", "z", "w"][:D]
    return [f"x{j + 1}" for j in range(D)]


@dataclass(frozen=True)
class LinearSystem:
    forms: tuple[LinearForm, ...]

    def __post_init__(self):
        forms = tuple(f if isinstance(f, LinearForm) else LinearForm(tuple(f)) for f in self.forms)
        object.__setattr__(self, "forms", forms)
        if not forms:
            raise ValueError("a system needs t >= 1 forms")
        if len({f.D for f in forms}) != 1:
            raise ValueError("all forms must share the same dimension D")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "LinearSystem":
        return cls(tuple(LinearForm(tuple(r)) for r in rows))

    @classmethod
    def arithmetic_progression(cls, k: int) -> "LinearSystem":
        """The k-term progression system ``(x, x+y, ..., x+(k-1)y)``."""
        if k < 1:
            raise ValueError("k must be positive")
        return cls.from_rows([(1, j) for j in range(k)])

    @property
    def t(self) -> int:
        return len(self.forms)

    @property
    def D(self) -> int:
        return self.forms[0].D

    @property
    def rows(self) -> list[tuple[int, ...]]:
        return [f.coeffs for f in self.forms]

    def __call__(self, point: Sequence[int]) -> tuple[int, ...]:
        return tuple(evaluate(f, point) for f in self.forms)

    def __iter__(self) -> Iterator[LinearForm]:
        return iter(self.forms)

    def __len__(self) -> int:
        return self.t

    def __getitem__(self, i: int) -> LinearForm:
        return self.forms[i]

    def rescaled(self, a: Sequence[int]) -> "LinearSystem":
        if len(a) != self.t:
            raise ValueError("need one scalar per form")
        return LinearSystem(tuple(f.scaled(ai) for f, ai in zip(self.forms, a)))

    def to_json(self) -> dict:
        return {"D": self.D, "forms": [list(r) for r in self.rows]}

    @classmethod
    def from_json(cls, data: dict) -> "LinearSystem":
        try:
            D = int(data["D"])
            rows = [[int(c) for c in r] for r in data["forms"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ValueError(f"malformed system spec: {exc}") from exc
        if any(len(r) != D for r in rows):
            raise ValueError("every form must have D coefficients")
        return cls.from_rows(rows)

    def __str__(self) -> str:
        return "(" + ", ".join(str(f) for f in self.forms) + ")"


def load_system(path: str | Path) -> LinearSystem:
    with open(path) as fh:
        return LinearSystem.from_json(json.load(fh))


def evaluate(form: LinearForm, point: Sequence[int]) -> int:
    if len(point) != form.D:
        raise ValueError(f"point has length {len(point)}, form expects D={form.D}")
    return sum(c * int(x) for c, x in zip(form.coeffs, point))


# ---------------------------------------------------------------- power spans


@dataclass(frozen=True)
class PowerSpan:
    degree: int
    basis: tuple[tuple[Fraction, ...], ...]

    @property
    def dim(self) -> int:
        return len(self.basis)

    def contains(self, vec: Sequence[int | Fraction]) -> bool:
        return in_row_space(vec, self.basis)


def monomial_exponents(D: int, k: int) -> list[tuple[int, ...]]:
    """Exponent vectors of the degree-k monomials in D variables, C(D+k-1, k) of them."""
    out = []
    for combo in itertools.combinations_with_replacement(range(D), k):
        alpha = [0] * D
        for j in combo:
            alpha[j] += 1
        out.append(tuple(alpha))
    return out


def power_coefficients(form: LinearForm, k: int) -> list[int]:
    """Coefficients of ``form^k`` in the degree-k monomial basis (multinomial theorem)."""
    fk = factorial(k)
    row = []
    for alpha in monomial_exponents(form.D, k):
        multinom = fk // prod(factorial(a) for a in alpha)
        row.append(multinom * prod(c**a for c, a in zip(form.coeffs, alpha)))
    return row


def power_matrix(system: LinearSystem, k: int) -> list[list[int]]:
    """t x C(D+k-1, k) integer matrix whose i-th row expands psi_i^k."""
    return [power_coefficients(f, k) for f in system.forms]


def power_span(system: LinearSystem, k: int) -> PowerSpan:
    if k < 1:
        raise ValueError("degree k must be >= 1")
    mat = power_matrix(system, k)
    # column space of the t x M matrix = row space of its transpose, inside Q^t
    cols = [list(col) for col in zip(*mat)]
    assert len(cols) == comb(system.D + k - 1, k)
    return PowerSpan(k, tuple(rref(cols)))


def cancelling_weights(system: LinearSystem, k: int) -> list[tuple[int, ...]]:
    """Integer basis of ``{c : sum_i c_i psi_i^k = 0}``, each vector primitive.

    These are the weights for which the phases ``e(c_i alpha psi_i(x)^k)``
    multiply to 1 identically.
    """
    # the kernel of the transpose: rows of the RREF are indexed by monomials
    red = rref(zip(*power_matrix(system, k)))
    pivots = [next(j for j, v in enumerate(row) if v != 0) for row in red]
    out = []
    for free in (j for j in range(system.t) if j not in pivots):
        vec = [Fraction(0)] * system.t
        vec[free] = Fraction(1)
        for row, p in zip(red, pivots):
            vec[p] = -row[free]
        den = lcm(*(v.denominator for v in vec))
        ints = [int(v * den) for v in vec]
        g = gcd(*ints)
        out.append(tuple(v // g for v in ints))
    return out


# -------------------------------------------------------------- flag condition


@dataclass(frozen=True)
class FlagReport:
    kmax: int
    containment: dict[tuple[int, int], bool]
    dims: dict[int, int]
    first_violation: tuple[int, int] | None = None

    @property
    def is_flag_up_to_kmax(self) -> bool:
        return all(self.containment.values())

    def __bool__(self) -> bool:
        return self.is_flag_up_to_kmax

    def to_json(self) -> dict:
        return {
            "kmax": self.kmax,
            "is_flag_up_to_kmax": self.is_flag_up_to_kmax,
            "first_violation": list(self.first_violation) if self.first_violation else None,
            "dims": {str(k): d for k, d in self.dims.items()},
            "containment": [
                {"k": k, "l": l, "contained": v} for (k, l), v in sorted(self.containment.items())
            ],
        }


def default_kmax(system: LinearSystem) -> int:
    s = independence_degree(system, max(system.t, 1))
    return max((s + 1) if s is not None else 0, 2 * system.t, 2)


def is_flag(system: LinearSystem, kmax: int | None = None) -> FlagReport:
    """Check ``span_k <= span_l`` for all ``1 <= k < l <= kmax`` exactly."""
    if kmax is None:
        kmax = default_kmax(system)
    if kmax < 2:
        raise ValueError("kmax must be >= 2")
    spans = {k: power_span(system, k) for k in range(1, kmax + 1)}
    ranks = {k: sp.dim for k, sp in spans.items()}
    containment: dict[tuple[int, int], bool] = {}
    first = None
    for k in range(1, kmax + 1):
        for l in range(k + 1, kmax + 1):
            lo, hi = spans[k].basis, spans[l].basis
            ok = (rank(list(hi) + list(lo)) == ranks[l]) if lo else True
            containment[(k, l)] = ok
            if not ok and first is None:
                first = (k, l)
    return FlagReport(kmax, containment, ranks, first)


def independence_degree(system: LinearSystem, smax: int | None = None) -> int | None:
    """Least ``s >= 1`` with ``psi_1^{s+1}, ..., psi_t^{s+1}`` linearly independent.

    Returns None when no ``s <= smax`` qualifies. Pairwise non-proportional
    forms always qualify by ``s = t - 2`` (for t >= 3), so ``smax = t`` is the
    default.
    """
    if smax is None:
        smax = max(system.t, 1)
    if smax < 1:
        raise ValueError("smax must be >= 1")
    for s in range(1, smax + 1):
        if rank(power_matrix(system, s + 1)) == system.t:
            return s
    return None


def is_translation_invariant(system: LinearSystem) -> bool:
    """True iff (1, ..., 1) lies in the degree-1 power span (the image of the system)."""
    return power_span(system, 1).contains([1] * system.t)


# ---------------------------------------------------- Cauchy-Schwarz complexity


def _min_partition(n: int, allowed: list[bool]) -> int:
    full = (1 << n) - 1
    inf = n + 1
    dp = [inf] * (1 << n)
    dp[0] = 0
    for mask in range(1, full + 1):
        low = mask & -mask
        rest = mask ^ low
        best = inf
        sub = rest
        while True:
            cls = sub | low
            if allowed[cls]:
                cand = dp[mask ^ cls] + 1
                if cand < best:
                    best = cand
            if sub == 0:
                break
            sub = (sub - 1) & rest
        dp[mask] = best
    return dp[full]


def cs_complexity(system: LinearSystem) -> int:
    """Cauchy-Schwarz complexity.

    The least ``s`` such that for every ``i`` the other forms split into at most
    ``s + 1`` classes, none of whose spans contains ``psi_i``.
    """
    t = system.t
    if t < 2:
        raise ValueError("Cauchy-Schwarz complexity needs t >= 2")
    if t > CS_COMPLEXITY_MAX_T:
        raise NotImplementedError(f"cs_complexity supports t <= {CS_COMPLEXITY_MAX_T}, got {t}")
    rows = system.rows
    worst = 0
    for i in range(t):
        others = [rows[j] for j in range(t) if j != i]
        n = len(others)
        allowed = [True] * (1 << n)
        for mask in range(1, 1 << n):
            cls = [others[b] for b in range(n) if mask >> b & 1]
            allowed[mask] = not in_row_space(rows[i], cls)
        for b in range(n):
            if not allowed[1 << b]:
                raise ValueError(
                    f"form {i} is proportional to another form; no finite complexity"
                )
        worst = max(worst, _min_partition(n, allowed))
    return worst - 1


# --------------------------------------------------------------- flagification


@dataclass(frozen=True)
class Flagification:
    witness_point: tuple[int, ...]
    b: tuple[int, ...]
    a: tuple[int, ...]
    rescaled: LinearSystem
    common_value: int

    @property
    def amax(self) -> int:
        return max(abs(x) for x in self.a)

    def to_json(self) -> dict:
        return {
            "witness_point": list(self.witness_point),
            "b": list(self.b),
            "a": list(self.a),
            "common_value": self.common_value,
            "rescaled": self.rescaled.to_json(),
        }


def _coord_key(v: int) -> tuple[int, bool]:
    return (abs(v), v < 0)


def witness_candidates(D: int, bound: int) -> Iterator[tuple[int, ...]]:
    """Nonzero integer points ordered by sup-norm, then lexicographically.

    Within a coordinate the order is 0, 1, -1, 2, -2, ...
    """
    for r in range(1, bound + 1):
        shell = [
            p for p in itertools.product(range(-r, r + 1), repeat=D) if max(abs(v) for v in p) == r
        ]
        shell.sort(key=lambda p: tuple(_coord_key(v) for v in p))
        yield from shell


def flagify_from_witness(system: LinearSystem, x0: Sequence[int]) -> Flagification:
    """Rescale ``system`` using the witness point ``x0`` (all ``psi_i(x0) != 0``)."""
    b = system(x0)
    if any(bi == 0 for bi in b):
        raise ValueError(f"witness {tuple(x0)} has a zero coordinate in its image {b}")
    a = [prod(b[j] for j in range(len(b)) if j != i) for i in range(len(b))]
    g = reduce(gcd, (abs(x) for x in a))
    a = tuple(x // g for x in a)
    products = {ai * bi for ai, bi in zip(a, b)}
    if len(products) != 1:
        raise AssertionError("a_i * b_i not constant; construction violated")
    rescaled = system.rescaled(a)
    if not is_translation_invariant(rescaled):
        raise AssertionError("rescaled system is not translation invariant")
    return Flagification(tuple(int(v) for v in x0), b, a, rescaled, products.pop())


def flagify(system: LinearSystem, search_bound: int | None = None) -> Flagification:
    """Find a witness ``x0`` with every ``psi_i(x0) != 0`` and rescale by ``a_i = prod_{j != i} b_j``.

    ``a`` is divided by the gcd of its entries (signs kept). The default
    search bound is ``t * max|coeff|``; a witness always exists within it
    because at most ``t`` kernel hyperplanes must be avoided.
    """
    if search_bound is None:
        search_bound = system.t * max(abs(c) for r in system.rows for c in r)
    if search_bound < 1:
        raise ValueError("search_bound must be positive")
    for x0 in witness_candidates(system.D, search_bound):
        if all(v != 0 for v in system(x0)):
            return flagify_from_witness(system, x0)
    raise LookupError(f"no witness with sup-norm <= {search_bound}; raise the search bound")


# ---------------------------------------------------------------- reporting


def analyze(system: LinearSystem, kmax: int | None = None, smax: int | None = None) -> dict:
    """Everything the analysis report needs, as plain JSON types."""
    flag = is_flag(system, kmax)
    s = independence_degree(system, smax)
    try:
        csc: int | None = cs_complexity(system) if system.t >= 2 else None
        csc_error = None
    except (ValueError, NotImplementedError) as exc:
        csc, csc_error = None, str(exc)
    try:
        fl = flagify(system).to_json()
    except LookupError as exc:
        fl = {"error": str(exc)}
    out = {
        "system": system.to_json(),
        "pretty": str(system),
        "t": system.t,
        "D": system.D,
        "translation_invariant": is_translation_invariant(system),
        "independence_degree": s,
        "cs_complexity": csc,
        "flag": flag.to_json(),
        "flagification": fl,
    }
    if csc_error:
        out["cs_complexity_error"] = csc_error
    return out



#: First non-flag system found by ``scripts/search_nonflag.py``:
#: (y, x, x - y, x + y), independence degree 2, degree-1 span not inside degree-2 span.
NON_FLAG_EXAMPLE = LinearSystem.from_rows([(0, 1), (1, 0), (1, -1), (1, 1)])
NON_FLAG_VIOLATION = (1, 2)
