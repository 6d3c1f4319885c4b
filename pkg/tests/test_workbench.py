import json

import numpy as np
import pytest

from flagforms.cli import main
from flagforms.linear_systems import NON_FLAG_EXAMPLE, LinearSystem
from flagforms.workbench import (
    ACCEPTANCE_SUITES,
    SUITES,
    Check,
    CaseRecord,
    ExperimentSpec,
    Report,
    SpecError,
    case_rng,
    random_bounded,
    read_plotdata,
    resolve_suite,
    run_suite,
    write_plot_table,
)

SMALL_NORM = {"count": 3, "orders": [1, 2]}


def records_json(report):
    return json.dumps([c.to_json() for c in report.cases], sort_keys=True)


# ------------------------------------------------------------ records


@pytest.mark.parametrize(
    "relation, lhs, rhs, ok",
    [("<=", 1.0, 1.0, True), ("<=", 1.1, 1.0, False), ("==", 1.0, 1.0 + 1e-12, True), ("==", 1.0, 1.1, False),
     ("exact", [1, 2], [1, 2], True), ("exact", 1, 2, False), ("<", 0.1, 0.2, True), ("<", 0.2, 0.2, False)],
)
def test_check_relations(relation, lhs, rhs, ok):
    assert Check("c", lhs, rhs, relation, 1e-9, "exact").passed is ok


def test_unknown_relation():
    with pytest.raises(ValueError):
        Check("c", 1, 1, "~", 0, "exact").passed


def test_case_record_errors_fail():
    rec = CaseRecord("x", {}, error="ValueError: boom")
    assert not rec.passed and rec.failing() == ["error: ValueError: boom"]


def test_runtime_limit_fails_report():
    rep = Report("s", "d", [CaseRecord("x", {})], [0.0], runtime_limit=1.0, total_time=2.0)
    assert not rep.passed
    assert "runtime" in rep.failing_cases()[0]
    assert rep.summary_line().startswith("FAIL s")


# ------------------------------------------------------------ specs


def test_spec_round_trip(tmp_path):
    spec = ExperimentSpec("freiman", sizes=[8], params={"orders": [1]}, seed=5, tolerance=1e-8)
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec.to_json()))
    assert ExperimentSpec.load(path) == spec
    assert spec.digest() == spec.with_overrides(jobs=4, output_dir="elsewhere").digest()
    assert spec.digest() != spec.with_overrides(seed=6).digest()


@pytest.mark.parametrize(
    "data",
    [{"suite": "nope"}, {"suite": "freiman", "sizes": [0]}, {"suite": "freiman", "tolerance": -1},
     {"suite": "freiman", "jobs": 0}, {"suite": "freiman", "generators": [{"seed": 1}]},
     {"suite": "freiman", "systems": [{"forms": [[1]]}]}],
)
def test_invalid_specs(data):
    with pytest.raises((SpecError, ValueError)):
        ExperimentSpec.from_json(data).validate()


def test_spec_parse_errors(tmp_path):
    with pytest.raises(SpecError):
        ExperimentSpec.from_json({"sizes": [1]})
    with pytest.raises(SpecError):
        ExperimentSpec.from_json({"suite": "freiman", "colour": 1})
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(SpecError):
        ExperimentSpec.load(bad)


def test_suite_aliases():
    assert resolve_suite("emain-identity") == "substitution"
    assert resolve_suite("emain") == "substitution"
    assert resolve_suite("smalln") == "smallN"
    with pytest.raises(SpecError):
        resolve_suite("everything")
    assert set(ACCEPTANCE_SUITES) <= set(SUITES)


# ------------------------------------------------------------ randomness


def test_case_rng_is_keyed():
    a = case_rng(1, 2, 3).random(4)
    assert np.array_equal(a, case_rng(1, 2, 3).random(4))
    assert not np.array_equal(a, case_rng(1, 3, 2).random(4))


@pytest.mark.parametrize("kind", ["disk", "unimodular", "pm1"])
def test_random_bounded(kind):
    f = random_bounded(case_rng(0), -5, 5, kind)
    assert f.window == (-5, 5)
    assert np.max(np.abs(f.values)) <= 1 + 1e-12


def test_random_bounded_unknown_kind():
    with pytest.raises(ValueError):
        random_bounded(case_rng(0), 0, 3, "gaussian")


# ------------------------------------------------------------ suites


def test_corrupted_oracle_is_detected():
    spec = ExperimentSpec("norm-equivalence", sizes=[16], params={**SMALL_NORM, "corrupt_oracle": 1})
    rep = run_suite(spec)
    assert not rep.passed
    assert all("series1" in c.failing() for c in rep.cases)
    assert run_suite(spec.with_overrides(params=SMALL_NORM)).passed


@pytest.mark.parametrize(
    "spec",
    [
        ExperimentSpec("norm-equivalence", sizes=[16], params=SMALL_NORM),
        ExperimentSpec("freiman", sizes=[8]),
        ExperimentSpec("substitution", sizes=[8]),
        ExperimentSpec("vn-cyclic", params={"triples": 4, "quadruples": 2}),
    ],
    ids=lambda s: s.suite,
)
def test_thread_count_gives_identical_records(spec):
    one = run_suite(spec.with_overrides(jobs=1))
    four = run_suite(spec.with_overrides(jobs=4))
    assert records_json(one) == records_json(four)
    assert one.inputs_digest == four.inputs_digest


def test_rerun_is_byte_identical(tmp_path):
    spec = ExperimentSpec("freiman", sizes=[8])
    a, b = run_suite(spec, tmp_path / "a"), run_suite(spec, tmp_path / "b")
    assert records_json(a) == records_json(b)
    ja = json.loads((tmp_path / "a" / "freiman.json").read_text())
    jb = json.loads((tmp_path / "b" / "freiman.json").read_text())
    assert ja["cases"] == jb["cases"]


def test_seed_changes_random_cases():
    spec = ExperimentSpec("norm-equivalence", sizes=[16], params=SMALL_NORM)
    assert records_json(run_suite(spec)) != records_json(run_suite(spec.with_overrides(seed=1)))


def test_tolerance_override_reaches_checks():
    rep = run_suite(ExperimentSpec("freiman", sizes=[8], tolerance=1e-6))
    assert {c.tol for r in rep.cases for c in r.checks} == {1e-6}


def test_flag_algebra_reports_shipped_violation():
    rep = run_suite(ExperimentSpec("flag-algebra", params={"count": 5}))
    assert rep.passed
    text = records_json(rep)
    assert json.dumps(NON_FLAG_EXAMPLE.to_json()["forms"])[1:-1].replace(" ", "") in text.replace(" ", "")


def test_checks_carry_sources():
    rep = run_suite(ExperimentSpec("vn-cyclic", params={"triples": 3, "quadruples": 1}))
    sources = {c.source for r in rep.cases for c in r.checks}
    assert sources <= {"oracle", "exact", "theorem", "fitted", "percentile"}
    assert "theorem" in sources


# ------------------------------------------------------------ plot data


def test_plot_round_trip(tmp_path):
    path = tmp_path / "t.csv"
    rows = [[0.1, 1e-17, "a"], [2.0, 3.0, "b"]]
    write_plot_table(path, ["x", "y", "label"], rows, "scatter of things")
    header, got = read_plotdata(path)
    assert header == ["x", "y", "label"]
    assert got == rows


def test_empty_plot_is_header_only(tmp_path):
    path = tmp_path / "e.csv"
    write_plot_table(path, ["x", "y"], [])
    assert path.read_text().splitlines() == ["# columns: x,y", "x,y"]
    assert read_plotdata(path) == (["x", "y"], [])


def test_plot_schema_enforced(tmp_path):
    with pytest.raises(ValueError):
        write_plot_table(tmp_path / "bad.csv", ["x", "y"], [[1.0]])
    path = tmp_path / "mismatch.csv"
    path.write_text("# columns: x,y\nx,z\n1,2\n")
    with pytest.raises(ValueError):
        read_plotdata(path)


def test_suite_writes_readable_plots(tmp_path):
    rep = run_suite(ExperimentSpec("vn-cyclic", params={"triples": 3, "quadruples": 1}), tmp_path)
    assert rep.plots
    for name, table in rep.plots.items():
        header, rows = read_plotdata(tmp_path / f"vn-cyclic-{name}.csv")
        assert header == list(table["columns"])
        assert len(rows) == len(table["rows"])


# ------------------------------------------------------------ CLI


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_analyze(capsys):
    code, out, _ = run_cli(capsys, "analyze", "--system", json.dumps(NON_FLAG_EXAMPLE.to_json()))
    assert code == 0
    assert json.loads(out)["flag"]["is_flag_up_to_kmax"] is False


def test_cli_analyze_from_file(tmp_path, capsys):
    path = tmp_path / "ap.json"
    path.write_text(json.dumps(LinearSystem.arithmetic_progression(4).to_json()))
    code, out, _ = run_cli(capsys, "analyze", "--system", str(path))
    assert code == 0 and json.loads(out)["translation_invariant"] is True


@pytest.mark.parametrize("domain", ["cyclic:16", "interval:1..16", "prog:1,2,8"])
def test_cli_norm_domains(capsys, domain):
    gen = json.dumps({"kind": "constant"})
    code, out, _ = run_cli(capsys, "norm", "--series", gen, "--domain", domain, "--order", "1")
    assert code == 0
    assert abs(json.loads(out)["norm_value"] - 1) < 1e-9


def test_cli_norm_methods_agree(capsys):
    gen = json.dumps({"kind": "random_unimodular", "seed": 3})
    vals = []
    for method in ("oracle", "fast", "brute"):
        code, out, _ = run_cli(capsys, "norm", "--series", gen, "--domain", "interval:1..12", "--order", "1", "--method", method)
        assert code == 0
        vals.append(json.loads(out)["norm_value"])
    assert max(vals) - min(vals) < 1e-9


def test_cli_average(capsys):
    sys_json = json.dumps(LinearSystem.arithmetic_progression(3).to_json())
    one = json.dumps({"kind": "constant"})
    code, out, _ = run_cli(
        capsys, "--jobs", "2", "average", "--system", sys_json, "--N", "8",
        "--series", f"f1={one}", "--series", f"f2={one}", "--series", f"f3={one}",
    )
    assert code == 0
    rep = json.loads(out)
    assert rep["value"] == [1.0, 0.0] and len(rep["norms"]) == 3


def test_cli_pack(capsys):
    sys_json = json.dumps(LinearSystem.arithmetic_progression(3).to_json())
    code, out, _ = run_cli(capsys, "pack", "--system", sys_json, "--N", "16", "--eps", "0.25", "--form", "1,2")
    assert code == 0
    rep = json.loads(out)
    assert rep["params"]["L"] == 4 and rep["max_incidence"]["value"] >= 1
    assert "boundary" not in rep


def test_cli_verify_pass_and_fail(tmp_path, capsys):
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"suite": "norm-equivalence", "sizes": [16], "params": SMALL_NORM}))
    code, out, _ = run_cli(capsys, "verify", "--spec", str(good), "--out", str(tmp_path / "o1"))
    assert code == 0 and out.startswith("PASS norm-equivalence")
    assert json.loads((tmp_path / "o1" / "summary.json").read_text())[0]["passed"] is True

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"suite": "norm-equivalence", "sizes": [16], "params": {**SMALL_NORM, "corrupt_oracle": 0}}))
    code, out, _ = run_cli(capsys, "verify", "--spec", str(bad), "--out", str(tmp_path / "o2"))
    assert code == 1 and out.startswith("FAIL norm-equivalence")


def test_cli_global_flags_either_side(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("FLAGFORMS_OUTPUT_DIR", str(tmp_path / "env"))
    code, _, _ = run_cli(capsys, "--seed", "3", "verify", "freiman", "--jobs", "2")
    assert code == 0
    rep = json.loads((tmp_path / "env" / "freiman.json").read_text())
    assert rep["spec"]["seed"] == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["verify"],
        ["verify", "no-such-suite"],
        ["norm", "--series", "{\"kind\": \"constant\"}", "--domain", "torus:5", "--order", "1"],
        ["analyze", "--system", "{\"D\": 2, \"forms\": [[1]]}"],
        ["analyze", "--system", "/no/such/file.json"],
        ["average", "--system", "{\"D\": 1, \"forms\": [[1], [2]]}", "--N", "4", "--series", "f={\"kind\": \"constant\"}"],
        ["average", "--system", "{\"D\": 1, \"forms\": [[1]]}", "--N", "4", "--series", "nosep"],
        ["pack", "--eps", "0.5"],
        ["verify", "--spec", "{"],
    ],
)
def test_cli_usage_errors_exit_2(capsys, argv):
    code, _, err = run_cli(capsys, *argv)
    assert code == 2
    assert err.startswith("workbench: error:")


def test_cli_argparse_errors_exit_2(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["norm", "--domain", "cyclic:4"])
    assert exc.value.code == 2


def test_cli_bad_series_file_exit_2(tmp_path, capsys):
    path = tmp_path / "f.csv"
    path.write_text("n,re,im\n0,5,0\n")
    code, _, err = run_cli(capsys, "norm", "--series", str(path), "--domain", "interval:0..3", "--order", "1")
    assert code == 2 and "workbench: error" in err
