"""``workbench`` command line.

Exit codes: 0 when every assertion passes, 1 when any fails, 2 for usage
or specification errors. The output directory defaults to
``$FLAGFORMS_OUTPUT_DIR`` or ``./workbench-out``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import averages, gowers, regions
from .linear_systems import LinearForm, LinearSystem, analyze
from .series import GeneratorSpec, Progression, Series, SeriesFormatError, generate, read_series
from .workbench import ACCEPTANCE_SUITES, DEFAULT_SEED, ExperimentSpec, SpecError, resolve_suite, run_suite, norm_average_demo

OUTPUT_ENV = "FLAGFORMS_OUTPUT_DIR"


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, default=lambda o: [o.real, o.imag] if isinstance(o, complex) else str(o)))


def _load_json_arg(arg: str):
    """Inline JSON if it looks like JSON, otherwise a path to a JSON file."""
    text = arg if arg.lstrip().startswith(("{", "[")) else Path(arg).read_text()
    return json.loads(text)


def _system(arg: str) -> LinearSystem:
    return LinearSystem.from_json(_load_json_arg(arg))


def _series(arg: str, window: tuple[int, int]) -> Series:
    """A series file (CSV/JSON) or an inline generator spec evaluated on ``window``."""
    if arg.lstrip().startswith("{"):
        return generate(GeneratorSpec.from_json(arg), window)
    return read_series(arg)


def _domain(text: str):
    kind, _, rest = text.partition(":")
    try:
        if kind == "cyclic":
            return "cyclic", int(rest)
        if kind == "interval":
            lo, hi = rest.split("..")
            return "interval", (int(lo), int(hi))
        if kind == "prog":
            start, step, length = (int(v) for v in rest.split(","))
            return "prog", Progression.normalised(start, step, length)
    except ValueError as exc:
        raise UsageError(f"bad domain {text!r}: {exc}") from exc
    raise UsageError(f"bad domain {text!r}; use cyclic:N, interval:a..b or prog:start,step,len")


def cmd_analyze(args) -> int:
    _emit(analyze(_system(args.system), args.kmax, args.smax))
    return 0


def cmd_norm(args) -> int:
    kind, dom = _domain(args.domain)
    if kind == "cyclic":
        f = _series(args.series, (0, dom - 1))
        if f.support_start != 0 or len(f) != dom:
            f = f.rewindow(0, dom - 1)
        rep = gowers.norm_cyclic(f, args.order)
    elif kind == "interval":
        rep = gowers.norm_interval(_series(args.series, dom), dom[0], dom[1], args.order, args.method)
    else:
        f = _series(args.series, (dom.start, dom.last))
        rep = gowers.norm_subset(f, dom, args.order, args.method)
    _emit(rep.to_json())
    return 0


def cmd_average(args) -> int:
    system = _system(args.system)
    N = args.N
    named = {}
    for item in args.series:
        name, sep, spec = item.partition("=")
        if not sep:
            raise UsageError(f"--series expects name=spec, got {item!r}")
        named[name] = _series(spec, (-N, N))
    keys = sorted(named, key=lambda k: (len(k), k))
    if len(keys) != system.t:
        raise UsageError(f"system has {system.t} forms but {len(keys)} series were given")
    fs = [named[k] for k in keys]
    if args.region == "box":
        region = regions.LatticeRegion.box(system.D, N)
    else:
        region = regions.preimage_region(system, N, shift=args.shift)
    rep = averages.multilinear_average(system, fs, region, args.shift, args.jobs or 1)
    rep.norms = [
        {"function": k, "order": args.order + 1, "value": gowers.norm_interval(f, -N, N, args.order).norm_value}
        for k, f in zip(keys, fs)
    ]
    _emit(rep.to_json())
    return 0


def cmd_pack(args) -> int:
    if args.region:
        region = regions.load_region(args.region)
    elif args.system:
        region = regions.preimage_region(_system(args.system), args.N)
    else:
        raise UsageError("pack needs --region or --system")
    part = regions.pack_cubes(region, args.q, args.eps, args.N)
    out = part.to_json(include_boundary=args.boundary)
    if args.form:
        form = LinearForm(tuple(int(v) for v in args.form.split(",")))
        m, n = regions.max_incidence(part, form, args.c)
        out["max_incidence"] = {"form": str(form), "c": args.c, "value": m, "at": n}
    _emit(out)
    return 0


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUTPUT_ENV) or "workbench-out")


def cmd_verify(args) -> int:
    base = ExperimentSpec.load(args.spec) if args.spec else None
    if args.all:
        names = list(ACCEPTANCE_SUITES)
    elif args.suites:
        names = [resolve_suite(n) for n in args.suites]
    elif base is not None:
        names = [base.suite]
    else:
        raise UsageError("verify needs suite names, --all or --spec")
    out = _out_dir(args)
    ok = True
    summary = []
    for name in names:
        spec = base.with_overrides(suite=name) if base is not None and base.suite == name else ExperimentSpec(name)
        spec = spec.with_overrides(seed=args.seed, jobs=args.jobs, tolerance=args.tolerance)
        report = run_suite(spec, out)
        ok &= report.passed
        print(report.summary_line(), flush=True)
        summary.append({"suite": name, "passed": report.passed, "failing": report.failing_cases()})
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return 0 if ok else 1


def cmd_demo(args) -> int:
    report = norm_average_demo(args.N, args.seed if args.seed is not None else DEFAULT_SEED, args.jobs or 1, _out_dir(args))
    print(report.summary_line())
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="base seed for every random draw")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="worker threads")
    common.add_argument("--tolerance", type=float, default=argparse.SUPPRESS, help="override suite tolerances")

    p = argparse.ArgumentParser(prog="workbench", description=__doc__.splitlines()[0], parents=[common])
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="flag/complexity analysis of a system")
    a.add_argument("--system", required=True, help="system JSON file or inline JSON")
    a.add_argument("--kmax", type=int)
    a.add_argument("--smax", type=int)
    a.set_defaults(func=cmd_analyze)

    n = sub.add_parser("norm", parents=[common], help="Gowers norm of a series")
    n.add_argument("--series", required=True, help="series file or inline generator JSON")
    n.add_argument("--domain", required=True, help="cyclic:N | interval:a..b | prog:start,step,len")
    n.add_argument("--order", type=int, required=True, help="s, for the U^{s+1} norm")
    n.add_argument("--method", choices=["oracle", "fast", "brute"], default="fast")
    n.set_defaults(func=cmd_norm)

    v = sub.add_parser("average", parents=[common], help="multilinear average over a lattice region")
    v.add_argument("--system", required=True)
    v.add_argument("--series", action="append", required=True, metavar="NAME=SPEC", help="one per form, ordered by name")
    v.add_argument("--N", type=int, required=True)
    v.add_argument("--region", choices=["auto-preimage", "box"], default="auto-preimage")
    v.add_argument("--shift", type=int, default=0)
    v.add_argument("--order", type=int, default=1, help="s for the reported U^{s+1} norms")
    v.set_defaults(func=cmd_average)

    k = sub.add_parser("pack", parents=[common], help="cube packing of a region")
    k.add_argument("--region", help="region JSON file")
    k.add_argument("--system", help="pack the preimage region of this system")
    k.add_argument("--N", type=int)
    k.add_argument("--q", type=int, default=1)
    k.add_argument("--eps", type=float, required=True)
    k.add_argument("--form", help="comma-separated coefficients for an incidence count")
    k.add_argument("--c", type=int, default=0)
    k.add_argument("--boundary", action="store_true", help="include boundary points in the output")
    k.set_defaults(func=cmd_pack)

    r = sub.add_parser("verify", parents=[common], help="run verification suites")
    r.add_argument("suites", nargs="*")
    r.add_argument("--all", action="store_true", help="the full acceptance suite")
    r.add_argument("--spec", help="experiment spec JSON")
    r.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./workbench-out)")
    r.set_defaults(func=cmd_verify)

    d = sub.add_parser("demo", parents=[common], help="norm-versus-average demo corpus")
    d.add_argument("--N", type=int, nargs="+", default=[256])
    d.add_argument("--out")
    d.set_defaults(func=cmd_demo)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for key in ("seed", "jobs", "tolerance"):
        if not hasattr(args, key):
            setattr(args, key, None)
    if args.command in ("pack",) and args.N is None and args.system:
        parser.error("--N is required with --system")
    try:
        return args.func(args)
    except (UsageError, SpecError, SeriesFormatError, ValueError, LookupError, OSError, json.JSONDecodeError) as exc:
        print(f"workbench: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
