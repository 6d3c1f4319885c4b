import json
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from flagforms._exact import in_row_space, rank, rref
from flagforms.linear_systems import (
    NON_FLAG_EXAMPLE,
    NON_FLAG_VIOLATION,
    LinearForm,
    LinearSystem,
    analyze,
    cancelling_weights,
    cs_complexity,
    evaluate,
    flagify,
    flagify_from_witness,
    independence_degree,
    is_flag,
    is_translation_invariant,
    load_system,
    power_matrix,
    power_span,
    witness_candidates,
)
from oracles import frac_rank

AP3 = LinearSystem.arithmetic_progression(3)
AP4 = LinearSystem.arithmetic_progression(4)


def rows_strategy(max_t=5, max_D=3, cmax=3):
    return st.integers(1, max_D).flatmap(
        lambda D: st.lists(
            st.tuples(*[st.integers(-cmax, cmax)] * D).filter(any), min_size=1, max_size=max_t
        )
    )


systems = rows_strategy().map(LinearSystem.from_rows)


@st.composite
def translation_invariant_systems(draw):
    D = draw(st.integers(2, 3))
    t = draw(st.integers(2, 5))
    tails = [draw(st.tuples(*[st.integers(-3, 3)] * (D - 1))) for _ in range(t)]
    # (1, ..., 1) is the image of e_1; mix coordinates with a shear to hide it
    shear = draw(st.integers(-2, 2))
    rows = []
    for tail in tails:
        r = [1, *tail]
        r[1] += shear * r[0]
        rows.append(tuple(r))
    return LinearSystem.from_rows(rows)


# ------------------------------------------------------------ exact algebra


@given(st.lists(st.lists(st.integers(-5, 5), min_size=4, max_size=4), min_size=1, max_size=6))
def test_rank_matches_rational_elimination(rows):
    assert rank(rows) == frac_rank(rows)


@given(st.lists(st.lists(st.integers(-4, 4), min_size=3, max_size=3), min_size=1, max_size=5))
def test_rref_spans_the_same_space(rows):
    red = rref(rows)
    assert len(red) == frac_rank(rows)
    assert all(in_row_space(r, red) for r in rows)
    assert all(in_row_space(r, rows) for r in red)


def test_rank_accepts_fractions():
    assert rank([[Fraction(1, 2), Fraction(1, 3)], [3, 2]]) == 1


# ------------------------------------------------------------ forms and systems


@pytest.mark.parametrize(
    "coeffs, point, value", [((1, 2), (3, 4), 11), ((-1,), (5,), -5), ((1, -2), (2, 1), 0)]
)
def test_evaluate(coeffs, point, value):
    assert evaluate(LinearForm(coeffs), point) == value


def test_evaluate_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(LinearForm((1, 2)), (1,))


def test_zero_form_rejected():
    with pytest.raises(ValueError):
        LinearForm((0, 0))


def test_mixed_dimensions_rejected():
    with pytest.raises(ValueError):
        LinearSystem.from_rows([(1,), (1, 2)])


def test_pretty_printing():
    assert str(LinearSystem.from_rows([(1, 2), (-1, 0), (0, -3)])) == "(x + 2y, -x, -3y)"


def test_json_round_trip(tmp_path):
    path = tmp_path / "sys.json"
    path.write_text(json.dumps(NON_FLAG_EXAMPLE.to_json()))
    assert load_system(path) == NON_FLAG_EXAMPLE


def test_malformed_json_rejected():
    with pytest.raises(ValueError):
        LinearSystem.from_json({"D": 2, "forms": [[1, 2, 3]]})
    with pytest.raises(ValueError):
        LinearSystem.from_json({"forms": [[1]]})


# ------------------------------------------------------------ power spans


def test_power_span_degree_one():
    span = power_span(LinearSystem.from_rows([(1, 0), (0, 1), (1, 1)]), 1)
    assert span.dim == 2
    assert span.contains([1, 0, 1]) and span.contains([0, 1, 1])
    assert not span.contains([1, 0, 0])


def test_power_span_degree_two_is_everything():
    assert power_span(LinearSystem.from_rows([(1, 0), (0, 1), (1, 1)]), 2).dim == 3


@pytest.mark.parametrize("k", [1, 2, 5])
def test_single_form_span(k):
    assert power_span(LinearSystem.from_rows([(1,)]), k).dim == 1


def test_power_matrix_uses_multinomials():
    # (x + 2y)^2 = x^2 + 4xy + 4y^2
    assert power_matrix(LinearSystem.from_rows([(1, 2)]), 2) == [[1, 4, 4]]


@given(systems, st.integers(1, 4), st.lists(st.tuples(*[st.integers(-6, 6)] * 3), min_size=1, max_size=5))
def test_power_vectors_lie_in_span(system, k, pts):
    span = power_span(system, k)
    for p in pts:
        x = p[: system.D]
        assert span.contains([system.forms[i](x) ** k for i in range(system.t)])


# ------------------------------------------------------------ flag condition


def test_four_term_progressions_are_flag():
    rep = is_flag(AP4, 6)
    assert rep.is_flag_up_to_kmax and rep.first_violation is None
    assert set(rep.containment) == {(k, l) for k in range(1, 7) for l in range(k + 1, 7)}


def test_shipped_non_flag_system():
    rep = is_flag(NON_FLAG_EXAMPLE)
    assert not rep
    assert rep.first_violation == NON_FLAG_VIOLATION
    assert independence_degree(NON_FLAG_EXAMPLE) == 2


@given(translation_invariant_systems())
def test_translation_invariant_implies_flag(system):
    assert is_translation_invariant(system)
    assert is_flag(system, 5).is_flag_up_to_kmax


@given(rows_strategy(max_t=4, max_D=2))
def test_first_violation_persists_as_kmax_grows(rows):
    system = LinearSystem.from_rows(rows)
    first = None
    for kmax in range(2, 7):
        rep = is_flag(system, kmax)
        if first is not None:
            assert rep.first_violation == first
        first = rep.first_violation if first is None else first


def test_kmax_below_two_rejected():
    with pytest.raises(ValueError):
        is_flag(AP3, 1)


# ------------------------------------------------------------ complexities


def test_independence_degree_examples():
    assert independence_degree(LinearSystem.from_rows([(1, 0), (0, 1), (1, 1)])) == 1
    for k in range(3, 7):
        assert independence_degree(LinearSystem.arithmetic_progression(k)) == k - 2
    for smax in range(1, 6):
        assert independence_degree(LinearSystem.from_rows([(1,), (1,)]), smax) is None


def test_cs_complexity_examples():
    assert cs_complexity(AP3) == 1
    assert cs_complexity(AP4) == 2
    assert cs_complexity(LinearSystem.from_rows([(1, 0), (0, 1)])) == 0


def test_cs_complexity_errors():
    with pytest.raises(ValueError):
        cs_complexity(LinearSystem.from_rows([(1, 1), (2, 2), (1, 0)]))
    with pytest.raises(NotImplementedError):
        cs_complexity(LinearSystem.arithmetic_progression(13))


def test_translation_invariance_examples():
    assert is_translation_invariant(AP4)
    assert not is_translation_invariant(LinearSystem.from_rows([(1,), (-1,)]))


# ------------------------------------------------------------ flagification


def test_flagify_worked_example_from_given_witness():
    fl = flagify_from_witness(LinearSystem.from_rows([(1, 0), (0, 1), (1, -1)]), (1, 2))
    assert fl.b == (1, 2, -1)
    assert fl.a == (-2, -1, 2)
    assert {ai * bi for ai, bi in zip(fl.a, fl.b)} == {-2}
    assert is_translation_invariant(fl.rescaled)


def test_flagify_search_picks_smallest_witness():
    fl = flagify(LinearSystem.from_rows([(1, 0), (0, 1), (1, -1)]))
    assert fl.witness_point == (1, -1)
    assert fl.a == (-2, 2, -1)


def test_flagify_translation_invariant_gives_ones():
    fl = flagify(AP4)
    assert fl.a == (1, 1, 1, 1)
    assert fl.rescaled == AP4


def test_flagify_antidiagonal():
    fl = flagify(LinearSystem.from_rows([(1,), (-1,)]))
    assert fl.b == (1, -1)
    assert fl.a == (-1, 1)
    assert fl.rescaled == LinearSystem.from_rows([(-1,), (-1,)])


def test_flagify_bound_too_small():
    with pytest.raises(LookupError):
        flagify(LinearSystem.from_rows([(1, 0), (0, 1), (1, 1), (1, -1)]), search_bound=1)


def test_bad_witness_rejected():
    with pytest.raises(ValueError):
        flagify_from_witness(AP3, (0, 1))


def test_witness_order():
    assert list(witness_candidates(2, 1)) == [(0, 1), (0, -1), (1, 0), (1, 1), (1, -1), (-1, 0), (-1, 1), (-1, -1)]


@given(systems)
def test_flagify_postconditions(system):
    fl = flagify(system)
    assert all(ai != 0 for ai in fl.a) and all(bi != 0 for bi in fl.b)
    assert is_translation_invariant(fl.rescaled)
    assert fl.rescaled.rows == [tuple(ai * c for c in r) for ai, r in zip(fl.a, system.rows)]
    s = independence_degree(system)
    if s is not None:
        assert rank(power_matrix(fl.rescaled, s + 1)) == system.t
        assert independence_degree(fl.rescaled) == s


# ------------------------------------------------------------ helpers


@given(systems, st.integers(1, 3))
def test_cancelling_weights_cancel(system, k):
    mat = power_matrix(system, k)
    basis = cancelling_weights(system, k)
    assert len(basis) == system.t - rank(mat)
    for c in basis:
        assert any(c)
        assert all(sum(ci * row[m] for ci, row in zip(c, mat)) == 0 for m in range(len(mat[0])))


def test_analyze_report_is_json():
    rep = analyze(NON_FLAG_EXAMPLE)
    json.dumps(rep)
    assert rep["flag"]["first_violation"] == list(NON_FLAG_VIOLATION)
    assert rep["translation_invariant"] is False
