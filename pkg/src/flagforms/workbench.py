"""Experiment orchestration: suites of seeded cases, JSON reports, CSV plot data.

A suite turns an ``ExperimentSpec`` into a list of independent cases plus a
finalizer that may add corpus-level checks (fitted constants, percentile
thresholds). ``run_suite`` executes the cases (optionally in a thread pool),
assembles the report in case order and attaches plot tables.

Case records hold no timestamps, so rerunning a spec reproduces them byte
for byte; wall times live in a separate field of the report.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import __version__, averages, gowers, regions
from .linear_systems import (
    NON_FLAG_EXAMPLE,
    NON_FLAG_VIOLATION,
    LinearForm,
    LinearSystem,
    cancelling_weights,
    flagify,
    independence_degree,
    is_flag,
    is_translation_invariant,
)
from .series import GeneratorSpec, Progression, Series, dilate_embed, e, generate, modulate

DEFAULT_SEED = 20240611


class SpecError(ValueError):
    """Invalid experiment specification (maps to exit code 2)."""


# ------------------------------------------------------------------- records


@dataclass
class Check:
    """One asserted relation ``lhs <relation> rhs`` with its tolerance and source.

    ``relation`` is ``"<="``, ``"=="`` (tolerance policy of ``gowers.close``)
    or ``"exact"`` (plain equality of JSON values). ``source`` says where the
    right-hand side comes from: ``oracle``, ``exact``, ``theorem``,
    ``fitted`` or ``percentile``.
    """

    name: str
    lhs: Any
    rhs: Any
    relation: str
    tol: float
    source: str

    @property
    def passed(self) -> bool:
        if self.relation == "exact":
            return self.lhs == self.rhs
        if self.relation == "==":
            return gowers.close(float(self.lhs), float(self.rhs), rel=self.tol, abs_=self.tol)
        if self.relation == "<=":
            return float(self.lhs) <= float(self.rhs) + self.tol * max(1.0, abs(float(self.rhs)))
        if self.relation == "<":
            return float(self.lhs) < float(self.rhs)
        raise ValueError(f"unknown relation {self.relation!r}")

    def to_json(self) -> dict:
        out = asdict(self)
        out["passed"] = self.passed
        return out


@dataclass
class CaseRecord:
    name: str
    inputs: dict
    values: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    def failing(self) -> list[str]:
        if self.error is not None:
            return [f"error: {self.error}"]
        return [c.name for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "inputs": self.inputs,
            "values": self.values,
            "checks": [c.to_json() for c in self.checks],
            "error": self.error,
        }


@dataclass
class Case:
    name: str
    inputs: dict
    run: Callable[[], tuple[dict, list[Check]]]


@dataclass
class ExperimentSpec:
    suite: str
    systems: list[dict] = field(default_factory=list)
    generators: list[dict] = field(default_factory=list)
    sizes: list[int] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    tolerance: float | None = None
    output_dir: str | None = None
    jobs: int = 1

    def validate(self) -> "ExperimentSpec":
        if self.suite not in SUITES:
            raise SpecError(f"unknown suite {self.suite!r}; known: {', '.join(SUITES)}")
        if any(int(n) < 1 for n in self.sizes):
            raise SpecError("sizes must be positive")
        if self.tolerance is not None and not self.tolerance > 0:
            raise SpecError("tolerance must be positive")
        if self.jobs < 1:
            raise SpecError("jobs must be >= 1")
        for g in self.generators:
            GeneratorSpec.from_json(g)
        for s in self.systems:
            LinearSystem.from_json(s)
        return self

    def with_overrides(self, **kw) -> "ExperimentSpec":
        """Copy with every non-None keyword replacing the stored value."""
        data = asdict(self)
        data.update({k: v for k, v in kw.items() if v is not None})
        return ExperimentSpec(**data)

    def digest(self) -> str:
        data = asdict(self)
        data.pop("output_dir")
        data.pop("jobs")
        return hashlib.sha256(json.dumps(data, sort_keys=True).encode()).hexdigest()

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict | str) -> "ExperimentSpec":
        if isinstance(data, str):
            data = json.loads(data)
        if not isinstance(data, dict) or "suite" not in data:
            raise SpecError("experiment spec must be an object with a 'suite' key")
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise SpecError(f"unknown spec keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentSpec":
        try:
            return cls.from_json(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise SpecError(f"{path}: {exc}") from exc


@dataclass
class Report:
    suite: str
    inputs_digest: str
    cases: list[CaseRecord]
    wall_times: list[float]
    code_version: str = __version__
    spec: dict = field(default_factory=dict)
    plots: dict[str, dict] = field(default_factory=dict)
    runtime_limit: float | None = None
    total_time: float = 0.0

    @property
    def runtime_ok(self) -> bool:
        return self.runtime_limit is None or self.total_time <= self.runtime_limit

    @property
    def passed(self) -> bool:
        return self.runtime_ok and all(c.passed for c in self.cases)

    def failing_cases(self) -> list[str]:
        out = [c.name for c in self.cases if not c.passed]
        if not self.runtime_ok:
            out.append(f"runtime {self.total_time:.1f}s > {self.runtime_limit}s")
        return out

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        n_ok = sum(c.passed for c in self.cases)
        line = f"{status} {self.suite}: {n_ok}/{len(self.cases)} cases, {self.total_time:.1f}s"
        if not self.passed:
            line += " | failing: " + "; ".join(self.failing_cases()[:5])
        return line

    def to_json(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "inputs_digest": self.inputs_digest,
            "code_version": self.code_version,
            "spec": self.spec,
            "runtime": {"limit": self.runtime_limit, "total": self.total_time, "passed": self.runtime_ok},
            "wall_times": self.wall_times,
            "cases": [c.to_json() for c in self.cases],
        }

    def write(self, out_dir: str | Path) -> list[Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / f"{self.suite}.json"
        path.write_text(json.dumps(self.to_json(), indent=2, default=_json_default) + "\n")
        return [path] + emit_plotdata(self, out_dir)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


# ------------------------------------------------------------------ plot data


def emit_plotdata(report: Report, out_dir: str | Path) -> list[Path]:
    """One CSV per plot table: ``# columns:`` comment, header row, data rows."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, table in report.plots.items():
        path = out_dir / f"{report.suite}-{name}.csv"
        write_plot_table(path, table["columns"], table["rows"], table.get("description", ""))
        paths.append(path)
    return paths


def write_plot_table(path: str | Path, columns: Sequence[str], rows: Sequence[Sequence], description: str = "") -> None:
    with open(path, "w", newline="") as fh:
        if description:
            fh.write(f"# {description}\n")
        fh.write(f"# columns: {','.join(columns)}\n")
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, schema has {len(columns)}")
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_plotdata(path: str | Path) -> tuple[list[str], list[list]]:
    """Inverse of ``write_plot_table``: numeric fields come back as float."""
    documented = None
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# columns:"):
            documented = line[len("# columns:") :].strip().split(",")
        elif not line.startswith("#"):
            body.append(line)
    reader = csv.reader(body)
    header = next(reader, None)
    if header is None or documented is None or header != documented:
        raise ValueError(f"{path}: header does not match the documented columns")
    rows = []
    for rec in reader:
        if len(rec) != len(header):
            raise ValueError(f"{path}: row with {len(rec)} fields, expected {len(header)}")
        rows.append([_maybe_float(v) for v in rec])
    return header, rows


def _maybe_float(v: str):
    try:
        return float(v)
    except ValueError:
        return v


# ---------------------------------------------------------------- utilities


def case_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent PCG64 stream per (seed, case keys)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *keys])))


def random_bounded(rng: np.random.Generator, lo: int, hi: int, kind: str = "disk") -> Series:
    """Random 1-bounded series on ``[lo, hi]``: ``disk``, ``unimodular`` or ``pm1`` values."""
    n = hi - lo + 1
    if kind == "disk":
        vals = rng.random(n) * e(rng.random(n))
    elif kind == "unimodular":
        vals = e(rng.random(n))
    elif kind == "pm1":
        vals = (2 * rng.integers(0, 2, n) - 1).astype(complex)
    else:
        raise ValueError(kind)
    return Series(lo, vals, f"random_{kind}[{lo},{hi}]")


def _tol(spec: ExperimentSpec, default: float) -> float:
    return spec.tolerance if spec.tolerance is not None else default


def _param(spec: ExperimentSpec, key: str, default):
    return spec.params.get(key, default)


def _sizes(spec: ExperimentSpec, default: Sequence[int]) -> list[int]:
    return [int(n) for n in spec.sizes] if spec.sizes else list(default)


def _systems(spec: ExperimentSpec, default: Sequence[LinearSystem]) -> list[LinearSystem]:
    return [LinearSystem.from_json(s) for s in spec.systems] if spec.systems else list(default)


def _nonincreasing(name: str, values: Sequence[float], tol: float, source: str) -> list[Check]:
    return [Check(f"{name}[{k + 1}]<={name}[{k}]", values[k + 1], values[k], "<=", tol, source) for k in range(len(values) - 1)]


def _decreasing(name: str, values: Sequence[float], source: str) -> list[Check]:
    return [Check(f"{name}[{k + 1}]<{name}[{k}]", values[k + 1], values[k], "<", 0.0, source) for k in range(len(values) - 1)]


# -------------------------------------------------------------------- suites

Finalizer = Callable[[ExperimentSpec, list[CaseRecord]], tuple[list[CaseRecord], dict]]


@dataclass(frozen=True)
class Suite:
    build: Callable[[ExperimentSpec], list[Case]]
    finalize: Finalizer | None = None
    runtime_limit: float | None = None
    description: str = ""


def _norm_equivalence(spec: ExperimentSpec) -> list[Case]:
    tol = _tol(spec, gowers.REL_TOL)
    count = int(_param(spec, "count", 50))
    corrupt = _param(spec, "corrupt_oracle", None)
    cases = []
    for N in _sizes(spec, [16, 32, 64]):
        for s in _param(spec, "orders", [1, 2, 3]):

            def run(N=N, s=s):
                rng = case_rng(spec.seed, N, s)
                checks, fast_vals = [], []
                for k in range(count):
                    f = random_bounded(rng, 1, N)
                    fast = gowers.pp_sum_fast(f, s).real
                    oracle = gowers.pp_sum_oracle(f, s).real
                    if corrupt is not None and int(corrupt) == k:
                        oracle += 1.0
                    fast_vals.append(fast)
                    checks.append(Check(f"series{k}", fast, oracle, "==", tol, "oracle"))
                return {"fast_sums": fast_vals}, checks

            cases.append(Case(f"N={N},s={s}", {"N": N, "s": s, "count": count}, run))
    return cases


def _linear_phase(spec: ExperimentSpec) -> list[Case]:
    tol = _tol(spec, 1e-9)
    N = _sizes(spec, [64])[0]
    n_f, n_theta = int(_param(spec, "functions", 10)), int(_param(spec, "thetas", 20))
    cases = []
    for s in _param(spec, "orders", [1, 2]):
        for k in range(n_f):

            def run(s=s, k=k):
                rng = case_rng(spec.seed, s, k)
                f = random_bounded(rng, 1, N)
                base = gowers.norm_interval(f, 1, N, s).norm_value
                checks = []
                for j, theta in enumerate(rng.random(n_theta)):
                    mod = gowers.norm_interval(modulate(f, float(theta)), 1, N, s).norm_value
                    checks.append(Check(f"theta{j}", abs(mod - base), 0.0, "<=", tol, "theorem"))
                return {"norm": base}, checks

            cases.append(Case(f"s={s},f{k}", {"N": N, "s": s, "function": k}, run))
    return cases


def _freiman(spec: ExperimentSpec) -> list[Case]:
    tol = _tol(spec, 1e-9)
    N = _sizes(spec, [32])[0]
    scalars = [int(v) for v in _param(spec, "scalars", [1, 2, 3, -2])]
    a = max(abs(v) for v in scalars)
    n_f = int(_param(spec, "functions", 5))
    cases = []
    for s in _param(spec, "orders", [1, 2]):
        for ai in scalars:

            def run(s=s, ai=ai):
                rng = case_rng(spec.seed, s, ai % 97)
                checks, vals = [], []
                for k in range(n_f):
                    f = random_bounded(rng, -N, N)
                    tilde = dilate_embed(f, ai, a, N)
                    image = Progression.normalised(-ai * N + a * N, ai, 2 * N + 1)
                    lhs = gowers.norm_subset(tilde, image, s).norm_value
                    rhs = gowers.norm_interval(f, -N, N, s).norm_value
                    vals.append(rhs)
                    checks.append(Check(f"f{k}", lhs, rhs, "==", tol, "exact"))
                return {"norms": vals}, checks

            cases.append(Case(f"s={s},a_i={ai}", {"N": N, "s": s, "a_i": ai, "a": a}, run))
    return cases


SUBSTITUTION_SYSTEMS = [
    LinearSystem.arithmetic_progression(3),
    LinearSystem.arithmetic_progression(4),
    LinearSystem.from_rows([(1,), (-1,)]),
    LinearSystem.from_rows([(1,), (2,)]),
    NON_FLAG_EXAMPLE,
    LinearSystem.from_rows([(1, 0), (0, 1), (1, 1)]),
    LinearSystem.from_rows([(1, 0), (0, 1), (1, 2), (2, 1)]),
    LinearSystem.from_rows([(1, 1), (1, -1), (2, 1)]),
    LinearSystem.from_rows([(2, 1), (1, -3), (1, 1)]),
    LinearSystem.from_rows([(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)]),
]


def _substitution(spec: ExperimentSpec) -> list[Case]:
    tol = _tol(spec, averages.IDENTITY_TOL)
    cases = []
    for idx, system in enumerate(_systems(spec, SUBSTITUTION_SYSTEMS)):
        for N in _sizes(spec, [16, 32]):
            def run(system=system, N=N, idx=idx):
                rng = case_rng(spec.seed, idx, N)
                fs = [random_bounded(rng, -N, N, "unimodular") for _ in range(system.t)]
                rep = averages.reduction_pipeline(system, fs, N, check=False)
                tr = rep.trace
                checks = [
                    Check("substitution_identity", tr["identity_gap"], 0.0, "<=", tol, "exact"),
                    Check("box_vs_K", abs(rep.value), tr["C_box_over_K"] * math.hypot(*tr["avg_K"]) + tr["boundary_term"], "<=", tol, "theorem"),
                ]
                values = {k: tr[k] for k in ("K_size", "box_size", "a", "identity_gap", "boundary_term", "C_box_over_K")}
                values["translation_invariant"] = is_translation_invariant(system)
                return values, checks

            cases.append(Case(f"{system}@N={N}", {"system": system.to_json(), "N": N}, run))
    return cases


def _random_unimodular_matrix(rng: np.random.Generator, D: int) -> np.ndarray:
    U = np.eye(D, dtype=np.int64)
    for _ in range(2 * D):
        i, j = rng.choice(D, 2, replace=False) if D > 1 else (0, 0)
        if i != j:
            E = np.eye(D, dtype=np.int64)
            E[i, j] = int(rng.integers(-1, 2))
            U = U @ E
    return U


def random_translation_invariant(rng: np.random.Generator) -> LinearSystem:
    """Rows ``(1, r)`` with small random ``r``, then a unimodular change of variables."""
    D = int(rng.integers(2, 4))
    t = int(rng.integers(3, 6))
    rows = np.concatenate([np.ones((t, 1), dtype=np.int64), rng.integers(-3, 4, (t, D - 1))], axis=1)
    rows = rows @ _random_unimodular_matrix(rng, D)
    return LinearSystem.from_rows([tuple(int(v) for v in r) for r in rows])


def random_system(rng: np.random.Generator, tmax: int = 5, Dmax: int = 3, cmax: int = 3) -> LinearSystem:
    t = int(rng.integers(1, tmax + 1))
    D = int(rng.integers(1, Dmax + 1))
    rows = []
    while len(rows) < t:
        r = tuple(int(v) for v in rng.integers(-cmax, cmax + 1, D))
        if any(r):
            rows.append(r)
    return LinearSystem.from_rows(rows)


def _flag_algebra(spec: ExperimentSpec) -> list[Case]:
    cases = []
    for k in (3, 4, 5):

        def run(k=k):
            system = LinearSystem.arithmetic_progression(k)
            rep = is_flag(system, 6)
            return {"dims": rep.to_json()["dims"]}, [
                Check("flag_up_to_6", rep.is_flag_up_to_kmax, True, "exact", 0.0, "exact"),
                Check("independence_degree", independence_degree(system), k - 2, "exact", 0.0, "exact"),
            ]

        cases.append(Case(f"{k}-AP", {"k": k}, run))
    count = int(_param(spec, "count", 100))

    def run_random():
        rng = case_rng(spec.seed, 5)
        checks, systems = [], []
        for j in range(count):
            system = random_translation_invariant(rng)
            systems.append(system.to_json())
            checks.append(Check(f"system{j}:translation_invariant", is_translation_invariant(system), True, "exact", 0.0, "exact"))
            checks.append(Check(f"system{j}:flag_up_to_5", is_flag(system, 5).is_flag_up_to_kmax, True, "exact", 0.0, "exact"))
        return {"systems": systems}, checks

    cases.append(Case("random-translation-invariant", {"count": count}, run_random))

    def run_nonflag():
        reports = [is_flag(NON_FLAG_EXAMPLE) for _ in range(3)]
        viol = [list(r.first_violation) if r.first_violation else None for r in reports]
        return {"violations": viol, "independence_degree": independence_degree(NON_FLAG_EXAMPLE)}, [
            Check(f"run{j}:violation", v, list(NON_FLAG_VIOLATION), "exact", 0.0, "exact") for j, v in enumerate(viol)
        ]

    cases.append(Case("non-flag-example", {"system": NON_FLAG_EXAMPLE.to_json()}, run_nonflag))
    return cases


def _flagify_suite(spec: ExperimentSpec) -> list[Case]:
    count = int(_param(spec, "count", 100))
    cases = []
    for j in range(count):

        def run(j=j):
            system = random_system(case_rng(spec.seed, 6, j))
            fl = flagify(system)
            expected_rows = [tuple(ai * c for c in row) for ai, row in zip(fl.a, system.rows)]
            d0, d1 = independence_degree(system), independence_degree(fl.rescaled)
            checks = [
                Check("a_nonzero", all(ai != 0 for ai in fl.a), True, "exact", 0.0, "exact"),
                Check("rescaled_rows", [list(r) for r in fl.rescaled.rows], [list(r) for r in expected_rows], "exact", 0.0, "exact"),
                Check("translation_invariant", is_translation_invariant(fl.rescaled), True, "exact", 0.0, "exact"),
            ]
            if d0 is not None:
                checks.append(Check("independence_degree", d1, d0, "exact", 0.0, "exact"))
            return {"system": system.to_json(), "flagification": fl.to_json(), "independence_degree": d0}, checks

        cases.append(Case(f"system{j}", {"index": j}, run))
    return cases


def _smalln(spec: ExperimentSpec) -> list[Case]:
    tol = _tol(spec, averages.CHAIN_TOL)
    N = _sizes(spec, [32])[0]
    count = int(_param(spec, "count", 25))
    kinds = ["disk", "unimodular", "pm1"]
    cases = []
    for k in (3, 4):
        for j in range(count):

            def run(k=k, j=j):
                rng = case_rng(spec.seed, 7, k, j)
                system = LinearSystem.arithmetic_progression(k)
                fs = [random_bounded(rng, 1, N, kinds[(j + i) % 3]) for i in range(k)]
                if j % 5 == 4:
                    # a structured member: linear phase on one slot
                    fs[0] = gowers.linear_phase(float(rng.random()), (1, N))
                c = N // 2 + int(rng.integers(-3, 4))
                K = regions.preimage_region(system, N, target=(1, N), shift=c)
                rep = averages.smallN_chain(system, fs, K, c, N, k - 2)
                checks = [
                    Check(l.name, l.lhs, l.rhs, "==" if l.kind == "identity" else "<=", tol, "oracle" if l.kind == "identity" else "theorem")
                    for l in rep.links
                ]
                return {"j": rep.j, "shift": c, "constants": rep.constants}, checks

            cases.append(Case(f"{k}-AP#{j}", {"k": k, "N": N, "instance": j}, run))
    return cases


PACKING_SHAPES = {
    "3-AP": LinearSystem.arithmetic_progression(3),
    "4-AP": LinearSystem.arithmetic_progression(4),
    "box": None,
}
_BOX_FORMS = LinearSystem.from_rows([(1, 0), (0, 1), (1, 1)])


def _packing(spec: ExperimentSpec) -> list[Case]:
    cases = []
    for shape, system in PACKING_SHAPES.items():
        for N in _sizes(spec, [32, 64, 128]):
            for q in _param(spec, "qs", [1, 2, 3]):
                for eps in _param(spec, "eps", [0.25, 0.125, 0.0625]):

                    def run(shape=shape, system=system, N=N, q=q, eps=eps):
                        region = regions.LatticeRegion.box(2, N) if system is None else regions.preimage_region(system, N)
                        forms = (system or _BOX_FORMS).forms
                        part = regions.pack_cubes(region, q, eps, N)
                        pts = regions.points(region)
                        pieces = [c.points() for c in part.cells] + [part.boundary.reshape(-1, region.D)]
                        union = np.concatenate(pieces) if pieces else np.zeros((0, region.D), dtype=np.int64)
                        exact = union.shape[0] == pts.shape[0] and np.array_equal(_lexsorted(union), _lexsorted(pts))
                        D = region.D
                        S = int(part.boundary.shape[0])
                        inc = max(regions.max_incidence(part, f, 0)[0] for f in forms)
                        values = {
                            "region_size": int(pts.shape[0]),
                            "cells": len(part.cells),
                            "boundary": S,
                            "boundary_ratio": S / (q * eps * N**D),
                            "max_incidence": inc,
                            "incidence_ratio": inc * eps ** (D - 1),
                            "face_bound": region.face_bound,
                        }
                        return values, [Check("partition_exact", bool(exact), True, "exact", 0.0, "exact")]

                    cases.append(Case(f"{shape},N={N},q={q},eps={eps}", {"shape": shape, "N": N, "q": q, "eps": eps}, run))
    return cases


def _lexsorted(a: np.ndarray) -> np.ndarray:
    return a[np.lexsort(a.T[::-1])]


def _packing_finalize(spec: ExperimentSpec, records: list[CaseRecord]) -> tuple[list[CaseRecord], dict]:
    sizes = sorted({r.inputs["N"] for r in records})
    extra, rows = [], []
    for shape in PACKING_SHAPES:
        for key in ("boundary_ratio", "incidence_ratio"):
            per_N = []
            for N in sizes:
                vals = [r.values[key] for r in records if r.inputs["shape"] == shape and r.inputs["N"] == N and r.error is None]
                per_N.append(max(vals) if vals else math.nan)
            checks = _nonincreasing(key, per_N, 1e-12, "fitted")
            extra.append(CaseRecord(f"{shape}:{key}-constant", {"shape": shape, "sizes": sizes}, {"fitted_at_smallest_N": per_N[0], "per_N_max": per_N}, checks))
    for r in records:
        if r.error is None:
            rows.append([r.inputs["shape"], r.inputs["N"], r.inputs["q"], r.inputs["eps"], r.values["boundary"], r.values["boundary_ratio"], r.values["max_incidence"], r.values["incidence_ratio"]])
    plots = {"constants": {"columns": ["shape", "N", "q", "eps", "boundary", "boundary_ratio", "max_incidence", "incidence_ratio"], "rows": rows,
                           "description": "boundary_ratio = |S|/(q eps N^D); incidence_ratio = max incidence * eps^(D-1)"}}
    return extra, plots


def _loop_ap_average(fs: Sequence[np.ndarray], N: int) -> complex:
    """Plain double loop over (x, d) in Z_N^2; ground truth for the vectorised average."""
    total = 0j
    for x in range(N):
        for d in range(N):
            p = 1 + 0j
            for i, f in enumerate(fs):
                p *= complex(f[(x + i * d) % N])
            total += p
    return total / (N * N)


def _vn_cyclic(spec: ExperimentSpec) -> list[Case]:
    N = _sizes(spec, [31])[0]
    tol = _tol(spec, 1e-9)
    plan = [(3, int(_param(spec, "triples", 100))), (4, int(_param(spec, "quadruples", 25)))]
    cases = []
    for t, count in plan:
        for j in range(count):

            def run(t=t, j=j):
                rng = case_rng(spec.seed, 9, t, j)
                kind = ["disk", "unimodular", "pm1"][j % 3]
                fs = [random_bounded(rng, 0, N - 1, kind).values for _ in range(t)]
                rep = averages.cyclic_ap_average(fs, N)
                brute = _loop_ap_average(fs, N)
                checks = [
                    Check("average_vs_loops", abs(rep.value - brute), 0.0, "<=", tol, "oracle"),
                    Check("norm_vs_definition", rep.bound, min(gowers.norm_cyclic_brute(f, t - 2) for f in fs), "==", tol, "oracle"),
                    Check("von_neumann", abs(brute), rep.bound, "<=", tol, "theorem"),
                ]
                return rep.to_json(), checks

            cases.append(Case(f"t={t}#{j}", {"t": t, "N": N, "instance": j}, run))
    return cases


def _vn_cyclic_plots(spec: ExperimentSpec, records: list[CaseRecord]):
    rows = [[r.inputs["t"], r.values["bound"], r.values["abs_avg"]] for r in records if r.error is None]
    return [], {"scatter": {"columns": ["t", "min_norm", "abs_avg"], "rows": rows}}


def _vn_interval(spec: ExperimentSpec) -> list[Case]:
    N = _sizes(spec, [64])[0]
    count = int(_param(spec, "count", 40))
    cases = []
    for system_idx, system in enumerate(_systems(spec, [LinearSystem.arithmetic_progression(3), LinearSystem.arithmetic_progression(4)])):
        for j in range(count):

            def run(system=system, j=j, system_idx=system_idx):
                rng = case_rng(spec.seed, 10, system_idx, j)
                fs = _demo_functions(system, rng, j, N)[1]
                rep = averages.interval_vn_check(system, fs, N)
                return rep, []

            cases.append(Case(f"{system}#{j}", {"system": system.to_json(), "N": N, "instance": j}, run))
    return cases


def _vn_interval_finalize(spec: ExperimentSpec, records: list[CaseRecord]):
    ok = [r for r in records if r.error is None]
    x_env, y_env = averages.monotone_envelope([r.values["min_norm"] for r in ok], [r.values["abs_avg"] for r in ok])
    checks = [Check(f"{r.name}:below_envelope", r.values["abs_avg"], averages.envelope_at(x_env, y_env, r.values["min_norm"]), "<=", 0.0, "fitted") for r in ok]
    extra = [CaseRecord("envelope", {"points": len(ok)}, {"x": x_env.tolist(), "g": y_env.tolist()}, checks)]
    rows = [[len(r.inputs["system"]["forms"]), r.values["min_norm"], r.values["abs_avg"]] for r in ok]
    plots = {
        "scatter": {"columns": ["t", "min_norm", "abs_avg"], "rows": rows},
        "envelope": {"columns": ["min_norm", "g"], "rows": [[float(a), float(b)] for a, b in zip(x_env, y_env)]},
    }
    return extra, plots


# ------------------------------------------------------------ norm versus average demo

DEMO_SYSTEMS = {"4-AP": LinearSystem.arithmetic_progression(4), "non-flag": NON_FLAG_EXAMPLE}
DEMO_ALPHAS = [math.sqrt(2), math.sqrt(3), (1 + math.sqrt(5)) / 2, math.pi / 7, math.e / 10, math.sqrt(7) / 3, math.log(3), 1 / math.sqrt(11)]
DEMO_FAMILIES = (
    ["quadratic"] * 8 + ["linear"] * 4 + ["constant"] * 2 + ["same-quadratic"] * 2
    + ["random-pm1"] * 4 + ["random-unimodular"] * 4 + ["mixed"] * 2
)


def _demo_functions(system: LinearSystem, rng: np.random.Generator, j: int, N: int) -> tuple[str, list[Series]]:
    """Member ``j`` of the demo corpus for ``system`` on ``[-N, N]``.

    Families: quadratic phases ``e(c_i alpha n^2)`` whose weights cancel
    on the system (product identically 1), linear phases likewise, constants,
    one quadratic phase shared by every slot, fully random, and mixed (one
    random slot among cancelling quadratic phases).
    """
    family = DEMO_FAMILIES[j % len(DEMO_FAMILIES)]
    window = (-N, N)
    t = system.t
    quad = cancelling_weights(system, 2)
    lin = cancelling_weights(system, 1)
    if family in ("quadratic", "mixed"):
        alpha = DEMO_ALPHAS[j % len(DEMO_ALPHAS)]
        c = quad[0] if quad else (1,) * t
        fs = [generate(GeneratorSpec("polynomial_phase", {"alpha": [0.0, ci * alpha]}), window) for ci in c]
        if family == "mixed":
            slot = int(rng.integers(t))
            fs[slot] = random_bounded(rng, -N, N, "pm1")
    elif family == "linear":
        theta = float(rng.random())
        c = lin[j % len(lin)] if lin else (1,) * t
        fs = [generate(GeneratorSpec("polynomial_phase", {"alpha": [ci * theta]}), window) for ci in c]
    elif family == "constant":
        beta = float(rng.random()) if j % 2 else 0.0
        fs = [generate(GeneratorSpec("constant", {"value": [math.cos(2 * math.pi * beta), math.sin(2 * math.pi * beta)]}), window) for _ in range(t)]
    elif family == "same-quadratic":
        alpha = DEMO_ALPHAS[j % len(DEMO_ALPHAS)]
        fs = [generate(GeneratorSpec("polynomial_phase", {"alpha": [0.0, alpha]}), window)] * t
    elif family == "random-pm1":
        fs = [random_bounded(rng, -N, N, "pm1") for _ in range(t)]
    else:
        fs = [random_bounded(rng, -N, N, "unimodular") for _ in range(t)]
    return family, fs


def _norm_average(spec: ExperimentSpec) -> list[Case]:
    sizes = _sizes(spec, [256])
    if max(sizes) > 512:
        raise SpecError("theorem-1 demo sizes must be <= 512")
    per_system = int(_param(spec, "per_system", len(DEMO_FAMILIES)))
    cases = []
    for N in sizes:
        for name, system in DEMO_SYSTEMS.items():
            s = independence_degree(system)
            for j in range(per_system):

                def run(name=name, system=system, s=s, j=j, N=N):
                    rng = case_rng(spec.seed, 11, N, sorted(DEMO_SYSTEMS).index(name), j)
                    family, fs = _demo_functions(system, rng, j, N)
                    if is_translation_invariant(system):
                        avg = averages.multilinear_average(system, fs, regions.preimage_region(system, N)).value
                    else:
                        avg = averages.reduction_pipeline(system, fs, N).value
                    u_s1 = [gowers.norm_interval(f, -N, N, s).norm_value for f in fs]
                    u2 = [gowers.norm_interval(f, -N, N, 1).norm_value for f in fs]
                    values = {"family": family, "s": s, "abs_avg": abs(avg), "min_u_s1": min(u_s1), "min_u2": min(u2), "max_u2": max(u2), "u_s1": u_s1, "u2": u2}
                    return values, []

                cases.append(Case(f"{name}#{j}@N={N}", {"system": name, "N": N, "instance": j}, run))
    return cases


def _norm_average_finalize(spec: ExperimentSpec, records: list[CaseRecord]):
    ok = [r for r in records if r.error is None]
    norms = np.array([r.values["min_u_s1"] for r in ok])
    avgs = np.array([r.values["abs_avg"] for r in ok])
    min_u2 = np.array([r.values["min_u2"] for r in ok])
    p10 = float(np.percentile(norms, 10))
    p10_u2 = float(np.percentile(min_u2, 10))
    median_avg = float(np.median(avgs))
    low = [r for r in ok if r.values["min_u_s1"] < p10]
    checks = [Check(f"{r.name}:avg_below_median", r.values["abs_avg"], median_avg, "<", 0.0, "percentile") for r in low]
    for r in (r for r in ok if r.values["family"] == "quadratic"):
        checks.append(Check(f"{r.name}:avg_at_least_median", median_avg, r.values["abs_avg"], "<=", 1e-12, "percentile"))
        checks.append(Check(f"{r.name}:u2_below_u_s1", r.values["max_u2"], r.values["min_u_s1"], "<", 0.0, "exact"))
    # the same ordering rule stated with U^2 must fail: U^2 does not control the average
    low_u2 = [r for r in ok if r.values["min_u2"] < p10_u2]
    worst_low_u2 = max((r.values["abs_avg"] for r in low_u2), default=0.0)
    checks.append(Check("u2_ordering_fails", median_avg, worst_low_u2, "<=", 1e-12, "percentile"))
    summary = CaseRecord(
        "corpus-ordering",
        {"cases": len(ok)},
        {
            "p10_min_u_s1": p10,
            "p10_min_u2": p10_u2,
            "median_abs_avg": median_avg,
            "low_norm_cases": [r.name for r in low],
            "low_u2_cases": [r.name for r in low_u2],
        },
        checks,
    )
    rows = [[r.inputs["system"], r.inputs["N"], r.values["family"], r.values["s"], r.values["min_u_s1"], r.values["min_u2"], r.values["max_u2"], r.values["abs_avg"]] for r in ok]
    plots = {"scatter": {"columns": ["system", "N", "family", "s", "min_u_s1", "min_u2", "max_u2", "abs_avg"], "rows": rows,
                         "description": "min_u_s1 = min_i ||f_i||_{U^{s+1}[-N,N]}; abs_avg = |average over the box|"}}
    return [summary], plots


# --------------------------------------------------- de la Vallee Poussin suite


def _dlvp(spec: ExperimentSpec) -> list[Case]:
    sizes = _sizes(spec, [2**k for k in range(8, 15)])
    eps_list = _param(spec, "eps", [0.25, 0.125])
    ratio_sizes = [int(n) for n in _param(spec, "ratio_sizes", [2**8, 2**9, 2**10, 2**11])]
    cases = []
    for eps in eps_list:

        def run_l1(eps=eps):
            vals = [gowers.dlvp_fourier_l1(eps, N) for N in sizes]
            return {"sizes": sizes, "fourier_l1": vals}, _nonincreasing("fourier_l1", vals, 1e-12, "theorem")

        cases.append(Case(f"fourier_l1,eps={eps}", {"eps": eps, "sizes": sizes}, run_l1))
        for q in (1, 2, 3):

            def run_supp(eps=eps, q=q):
                fracs = []
                for N in sizes:
                    c = N // 2
                    chi = gowers.dilated_smoother(eps, N, q, c)
                    P = gowers.subprogression(eps, N, q, c)
                    ind = P.indicator()
                    lo, hi = min(chi.support_start, ind.support_start), max(chi.support_stop, ind.support_stop)
                    diff = ind.rewindow(lo, hi).values - chi.rewindow(lo, hi).values
                    fracs.append(int(np.count_nonzero(np.abs(diff) > 0)) / N)
                return {"sizes": sizes, "support_fraction": fracs}, _decreasing("support_fraction", fracs, "theorem")

            cases.append(Case(f"support,eps={eps},q={q}", {"eps": eps, "q": q, "sizes": sizes}, run_supp))
    eps0 = float(_param(spec, "ratio_eps", 0.25))
    for N in ratio_sizes:
        for s in (1, 2):

            def run_ratio(N=N, s=s):
                ratios = []
                for j, (kind, params) in enumerate(_DLVP_CORPUS):
                    f = generate(GeneratorSpec(kind, params, seed=spec.seed + j), (1, N))
                    base = gowers.norm_interval(f, 1, N, s).norm_value
                    for q in (1, 2, 3):
                        P = gowers.subprogression(eps0, N, q, N // 2)
                        ratios.append(gowers.norm_subset(f, P, s).norm_value / (base + 1 / math.sqrt(N)))
                return {"ratios": ratios, "max_ratio": max(ratios)}, []

            cases.append(Case(f"ratio,N={N},s={s}", {"N": N, "s": s, "eps": eps0}, run_ratio))
    return cases


_DLVP_CORPUS = (
    [("random_pm1", {})] * 3
    + [("random_unimodular", {})] * 3
    + [("polynomial_phase", {"alpha": [0.0, math.sqrt(2)]}), ("polynomial_phase", {"alpha": [math.sqrt(3)]}), ("constant", {})]
)


def _dlvp_finalize(spec: ExperimentSpec, records: list[CaseRecord]):
    extra, rows = [], []
    ratio_recs = [r for r in records if r.name.startswith("ratio") and r.error is None]
    for s in (1, 2):
        recs = sorted((r for r in ratio_recs if r.inputs["s"] == s), key=lambda r: r.inputs["N"])
        if not recs:
            continue
        C = recs[0].values["max_ratio"]
        checks = [Check(f"N={r.inputs['N']}", r.values["max_ratio"], C, "<=", 1e-12, "fitted") for r in recs[1:]]
        extra.append(CaseRecord(f"ratio-constant,s={s}", {"s": s, "fitted_at": recs[0].inputs["N"]}, {"C": C, "per_N": [r.values["max_ratio"] for r in recs]}, checks))
        rows += [[s, r.inputs["N"], r.values["max_ratio"]] for r in recs]
    l1_rows = []
    for r in records:
        if r.name.startswith("fourier_l1") and r.error is None:
            l1_rows += [[r.inputs["eps"], N, v] for N, v in zip(r.values["sizes"], r.values["fourier_l1"])]
    plots = {
        "fourier_l1": {"columns": ["eps", "N", "fourier_l1"], "rows": l1_rows},
        "ratio": {"columns": ["s", "N", "max_ratio"], "rows": rows},
    }
    return extra, plots


# --------------------------------------------------------------- registry

SUITES: dict[str, Suite] = {
    "norm-equivalence": Suite(_norm_equivalence, runtime_limit=120.0, description="fast vs oracle parallelepiped sums"),
    "linear-phase": Suite(_linear_phase, description="U^{s+1}[N] invariance under e(theta n)"),
    "freiman": Suite(_freiman, description="norm of f~ on a_i[-N,N]+aN equals norm of f on [-N,N]"),
    "substitution": Suite(_substitution, description="substitution identity of the flagification reduction"),
    "flag-algebra": Suite(_flag_algebra, runtime_limit=60.0, description="flag condition and independence degree"),
    "flagify": Suite(_flagify_suite, description="flagification of random systems"),
    "smallN": Suite(_smalln, description="Cauchy-Schwarz chain at small N"),
    "packing": Suite(_packing, _packing_finalize, description="cube packing exactness and constants"),
    "vn-cyclic": Suite(_vn_cyclic, _vn_cyclic_plots, runtime_limit=90.0, description="von Neumann inequality on Z_N"),
    "norm-vs-average": Suite(_norm_average, _norm_average_finalize, runtime_limit=600.0, description="norm vs average demo"),
    "dlvp": Suite(_dlvp, _dlvp_finalize, description="de la Vallee Poussin smoothing"),
    "vn-interval": Suite(_vn_interval, _vn_interval_finalize, description="average vs min norm scatter on intervals"),
}
SUITE_ALIASES = {"emain": "substitution", "emain-identity": "substitution", "smalln": "smallN"}
ACCEPTANCE_SUITES = [
    "norm-equivalence", "linear-phase", "freiman", "substitution", "flag-algebra", "flagify",
    "smallN", "packing", "vn-cyclic", "norm-vs-average", "dlvp",
]


def resolve_suite(name: str) -> str:
    name = SUITE_ALIASES.get(name, name)
    if name not in SUITES:
        raise SpecError(f"unknown suite {name!r}; known: {', '.join(SUITES)}")
    return name


def _execute(case: Case) -> tuple[CaseRecord, float]:
    t0 = time.perf_counter()
    try:
        values, checks = case.run()
        rec = CaseRecord(case.name, case.inputs, values, checks)
    except (ArithmeticError, ValueError, LookupError, AssertionError) as exc:
        rec = CaseRecord(case.name, case.inputs, error=f"{type(exc).__name__}: {exc}")
    return rec, time.perf_counter() - t0


def run_suite(spec: ExperimentSpec, out_dir: str | Path | None = None) -> Report:
    """Run every case of ``spec.suite``; write the report when ``out_dir`` is given."""
    spec = spec.with_overrides(suite=resolve_suite(spec.suite)).validate()
    suite = SUITES[spec.suite]
    t0 = time.perf_counter()
    cases = suite.build(spec)
    if spec.jobs > 1:
        with ThreadPoolExecutor(spec.jobs) as pool:
            results = list(pool.map(_execute, cases))
    else:
        results = [_execute(c) for c in cases]
    records = [r for r, _ in results]
    times = [dt for _, dt in results]
    plots: dict = {}
    if suite.finalize is not None:
        extra, plots = suite.finalize(spec, records)
        records += extra
        times += [0.0] * len(extra)
    report = Report(
        suite=spec.suite,
        inputs_digest=spec.digest(),
        cases=records,
        wall_times=times,
        spec={k: v for k, v in spec.to_json().items() if k not in ("output_dir", "jobs")},
        plots=plots,
        runtime_limit=suite.runtime_limit,
        total_time=time.perf_counter() - t0,
    )
    target = out_dir if out_dir is not None else spec.output_dir
    if target is not None:
        report.write(target)
    return report


def norm_average_demo(sizes: Sequence[int] = (256,), seed: int = DEFAULT_SEED, jobs: int = 1, out_dir: str | Path | None = None) -> Report:
    """Norm-versus-average corpus for the 4-AP and the shipped non-flag system."""
    return run_suite(ExperimentSpec("norm-vs-average", sizes=list(sizes), seed=seed, jobs=jobs), out_dir)
