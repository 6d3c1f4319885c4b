import cmath
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flagforms.series import (
    GENERATOR_KINDS,
    GeneratorSpec,
    Progression,
    Series,
    SeriesFormatError,
    dilate_embed,
    e,
    generate,
    modulate,
    read_series,
    write_series,
)

finite_values = st.lists(
    st.tuples(st.floats(-1, 1), st.floats(-1, 1)).map(lambda p: complex(*p) / math.sqrt(2)), min_size=1, max_size=30
)


def test_series_is_zero_outside_window():
    f = Series(3, [1, 0.5j])
    assert f.at(3) == 1 and f.at(4) == 0.5j
    assert f.at(2) == 0 and f.at(5) == 0
    assert list(f.at(np.array([2, 3, 4, 5]))) == [0, 1, 0.5j, 0]


def test_one_bounded_policy():
    with pytest.raises(ValueError):
        Series(0, [1.5])
    assert Series(0, [1.5], one_bounded=False).at(0) == 1.5
    with pytest.raises(ValueError):
        Series(0, [float("nan")], one_bounded=False)


def test_values_are_read_only():
    f = Series(0, [1, 2j / 3])
    with pytest.raises(ValueError):
        f.values[0] = 0


def test_rewindow_and_trim():
    f = Series(-1, [0, 1, 0, 1j, 0])
    assert f.trimmed().window == (0, 2)
    g = f.rewindow(-3, 4)
    assert g.window == (-3, 4) and g.at(2) == 1j and g.at(-3) == 0


def test_pointwise_product_on_common_window():
    f, g = Series(0, [1, 1, 1]), Series(1, [0.5, -1, 1])
    h = f * g
    assert h.window == (1, 2)
    assert list(h.values) == [0.5, -1]


def test_progression_normalises_negative_step():
    p = Progression.normalised(10, -3, 4)
    assert list(p.points()) == [1, 4, 7, 10]
    assert 7 in p and 8 not in p and 13 not in p
    with pytest.raises(ValueError):
        Progression(0, 0, 3)


# ------------------------------------------------------------ generators


def test_constant_generator_is_interval_indicator():
    f = generate(GeneratorSpec("constant"), (1, 8))
    assert f == Series.indicator(range(1, 9))


def test_quadratic_phase_value():
    f = generate(GeneratorSpec("polynomial_phase", {"alpha": [0, 0.5]}), (0, 3))
    assert cmath.isclose(f.at(1), -1, abs_tol=1e-15)
    assert cmath.isclose(f.at(2), 1, abs_tol=1e-15)


def test_polynomial_phase_is_exact_mod_one():
    # n^2 * 0.5 has integer part up to 5e11 yet the phase is still exact
    f = generate(GeneratorSpec("polynomial_phase", {"alpha": [0, 0.5]}), (10**6 - 1, 10**6 + 1))
    assert np.allclose(f.values, [-1, 1, -1], atol=1e-15)


def test_random_generators_are_deterministic():
    spec = GeneratorSpec("random_pm1", seed=7)
    a, b = generate(spec, (1, 64)), generate(spec, (1, 64))
    assert np.array_equal(a.values, b.values)
    assert set(np.unique(a.values.real)) <= {-1.0, 1.0}
    assert not np.array_equal(a.values, generate(GeneratorSpec("random_pm1", seed=8), (1, 64)).values)


def test_indicator_generator():
    f = generate(GeneratorSpec("indicator", {"progression": [2, 3, 4]}), (0, 20))
    assert list(np.flatnonzero(f.values)) == [2, 5, 8, 11]


def test_unknown_kind():
    with pytest.raises(ValueError):
        generate(GeneratorSpec("nilsequence"), (0, 3))


def test_empty_window():
    with pytest.raises(ValueError):
        generate(GeneratorSpec("constant"), (3, 2))


KIND_PARAMS = {
    "constant": {"value": [0.6, 0.8]},
    "random_unimodular": {},
    "random_pm1": {},
    "polynomial_phase": {"alpha": [0.1, 2**0.5, 3**0.5]},
    "bracket_phase": {"alpha": 2**0.5, "beta": 3**0.5},
    "indicator": {"start": 0, "stop": 5},
}


@pytest.mark.parametrize("kind", GENERATOR_KINDS)
@given(seed=st.integers(0, 2**32), lo=st.integers(-50, 50))
def test_generators_are_one_bounded(kind, seed, lo):
    f = generate(GeneratorSpec(kind, KIND_PARAMS[kind], seed), (lo, lo + 40))
    assert len(f) == 41
    assert np.max(np.abs(f.values)) <= 1 + 1e-12


def test_generator_spec_json_round_trip():
    spec = GeneratorSpec("bracket_phase", {"alpha": 0.3, "beta": 0.7}, 11)
    assert GeneratorSpec.from_json(spec.to_json()) == spec
    with pytest.raises(ValueError):
        GeneratorSpec.from_json({"seed": 1})


# ------------------------------------------------------------ transforms


def test_dilate_unit_scalar_is_a_shift():
    N = 6
    f = generate(GeneratorSpec("random_unimodular", seed=1), (-N, N))
    g = dilate_embed(f, 1, 1, N)
    for x in range(0, 2 * N + 1):
        assert g.at(x) == f.at(x - N)


def test_dilate_indicator_by_two():
    N = 8
    g = dilate_embed(Series.constant(-N, N), 2, 2, N)
    assert g.window == (0, 4 * N)
    # on [1, 4N] the support is exactly the even points
    assert {x for x in range(1, 4 * N + 1) if g.at(x) != 0} == {x for x in range(1, 4 * N + 1) if x % 2 == 0}
    # 0 is the image of -N, kept in the window
    assert g.at(0) == 1


@given(
    st.integers(1, 12),
    st.sampled_from([1, 2, 3, -1, -2, -3]),
    st.integers(0, 2),
    st.integers(0, 2**31),
)
def test_dilate_substitution_and_injectivity(N, ai, extra, seed):
    a = abs(ai) + extra
    f = generate(GeneratorSpec("random_unimodular", seed=seed), (-N, N))
    g = dilate_embed(f, ai, a, N)
    m = np.arange(-N, N + 1)
    assert np.array_equal(g.at(ai * m + a * N), f.values)
    assert np.count_nonzero(g.values) == 2 * N + 1
    assert sorted(g.values[g.values != 0], key=lambda z: (z.real, z.imag)) == sorted(f.values, key=lambda z: (z.real, z.imag))


def test_dilate_errors():
    f = Series.constant(-3, 3)
    with pytest.raises(ValueError):
        dilate_embed(f, 0, 1, 3)
    with pytest.raises(ValueError):
        dilate_embed(f, 3, 2, 3)
    with pytest.raises(ValueError):
        dilate_embed(Series.constant(-4, 4), 1, 1, 3)


def test_modulate_examples():
    f = generate(GeneratorSpec("random_unimodular", seed=2), (0, 9))
    assert modulate(f, 0.0) == f
    half = modulate(Series.constant(0, 5), 0.5)
    assert np.allclose(half.values, [1, -1, 1, -1, 1, -1])


def test_e_is_the_standard_character():
    assert cmath.isclose(e(0.25), 1j, abs_tol=1e-15)


# ------------------------------------------------------------ I/O


@pytest.mark.parametrize("fmt", ["csv", "json"])
@given(vals=finite_values, start=st.integers(-100, 100))
def test_round_trip(tmp_path_factory, fmt, vals, start):
    path = tmp_path_factory.mktemp("s") / f"f.{fmt}"
    f = Series(start, vals)
    write_series(f, path)
    assert read_series(path) == f


def test_csv_gaps_are_zero(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("n,re,im\n2,1,0\n5,0,1\n")
    f = read_series(p)
    assert f.window == (2, 5) and list(f.values) == [1, 0, 0, 1j]


@pytest.mark.parametrize(
    "body",
    [
        "n,re,im\n1,2.0,0\n",  # exceeds 1
        "n,re,im\n1,nan,0\n",
        "n,re,im\n1,inf,0\n",
        "n,re,im\n1,0.5\n",
        "n,re,im\nx,0,0\n",
        "n,re,im\n2,0,0\n1,0,0\n",
        "",
        "n,re,im\n",
    ],
)
def test_malformed_csv(tmp_path, body):
    p = tmp_path / "bad.csv"
    p.write_text(body)
    with pytest.raises(SeriesFormatError):
        read_series(p)


@pytest.mark.parametrize("body", ['{"values": [[1, 0]]}', '{"support_start": 0, "values": []}', "{", '{"support_start": 0, "values": [[2, 0]]}'])
def test_malformed_json(tmp_path, body):
    p = tmp_path / "bad.json"
    p.write_text(body)
    with pytest.raises(SeriesFormatError):
        read_series(p)


def test_unbounded_file_allowed_when_policy_off(tmp_path):
    p = tmp_path / "big.csv"
    p.write_text("n,re,im\n0,3,0\n")
    assert read_series(p, one_bounded=False).at(0) == 3
