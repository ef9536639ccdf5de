import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eprsim.analysis import analyze, correlations
from eprsim.presets import (
    PRESETS,
    constraints_from_correlations,
    classical_uniform,
    get_preset,
    golden_preset_json,
    pr_box,
    tsirelson,
    validate_constraints,
)
from eprsim.sampling import ConstraintTable, load_constraints, save_constraints
from oracle import TSIRELSON

# reference PR-box constraint arrays, indexed [x][y][a, b]
REFERENCE_PR_BOX = [[np.array([[0.5, 0], [0., 0.5]]),
                     np.array([[0.5, 0], [0., 0.5]])],
                    [np.array([[0.5, 0], [0., 0.5]]),
                     np.array([[0, 0.5], [0.5, 0.]])]]


def test_pr_box_matches_reference_arrays():
    p = pr_box().p
    for x in (0, 1):
        for y in (0, 1):
            assert np.array_equal(p[x, y], REFERENCE_PR_BOX[x][y])


def test_pr_box_analysis():
    r = analyze(pr_box().analytic_distribution())
    assert r.max_s == 4.0
    assert r.nosignalling_residuals == (0.0,) * 4


def test_uniform():
    table = classical_uniform()
    assert np.all(table.p == 0.25)
    r = analyze(table.analytic_distribution())
    assert r.max_s == 0.0
    assert r.nosignalling_residuals == (0.0,) * 4


def test_tsirelson():
    table = tsirelson()
    hi, lo = (1 + 1 / math.sqrt(2)) / 4, (1 - 1 / math.sqrt(2)) / 4
    assert set(np.round(table.flat(), 15)) == {round(hi, 15), round(lo, 15)}
    assert hi == pytest.approx(0.4268, abs=1e-4) and lo == pytest.approx(0.0732, abs=1e-4)
    r = analyze(table.analytic_distribution())
    assert abs(r.max_s - TSIRELSON) <= 1e-12
    assert max(r.nosignalling_residuals) <= 1e-15


correlation_vectors = st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 4)


@given(correlation_vectors)
@settings(max_examples=1000)
def test_correlation_round_trip(e):
    table = constraints_from_correlations(e)
    assert np.allclose(correlations(table.analytic_distribution()), e, rtol=0, atol=1e-12)
    report = validate_constraints(table)
    assert report.valid and not report.signalling
    assert np.allclose(table.context_sums(), 1.0, rtol=0, atol=1e-12)


@pytest.mark.parametrize("bad", [(1.1, 0, 0, 0), (0, 0, 0, -1.5), (float("nan"), 0, 0, 0)])
def test_out_of_range_correlations(bad):
    with pytest.raises(ValueError):
        constraints_from_correlations(bad)


def test_all_presets_valid():
    for name in PRESETS:
        assert validate_constraints(get_preset(name)).valid


def test_unknown_preset():
    with pytest.raises(ValueError, match="unknown preset"):
        get_preset("nope")


def test_bad_context_sum():
    p = np.full((2, 2, 2, 2), 0.25)
    p[1, 0, 0, 0] = 0.15  # context 10 now sums to 0.9
    report = validate_constraints(ConstraintTable(p))
    assert not report.valid
    assert "x=1 y=0" in report.problems[0]


def test_out_of_range_entry():
    p = np.full((2, 2, 2, 2), 0.25)
    p[0, 0] = [[1.25, -0.25], [0, 0]]
    report = validate_constraints(ConstraintTable(p))
    assert not report.in_range and not report.valid


def test_signalling_table_flagged_but_valid():
    p = np.full((2, 2, 2, 2), 0.25)
    p[0, 0] = [[0.5, 0.5], [0, 0]]
    report = validate_constraints(ConstraintTable(p))
    assert report.valid
    assert report.signalling
    assert report.residuals[0] == 0.5


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_golden_files(name):
    assert golden_preset_json(name) == get_preset(name).to_json()


def test_pr_box_bit_exact_round_trip(tmp_path):
    path = save_constraints(pr_box(), tmp_path / "pr.json")
    back = load_constraints(path)
    assert back.p.tobytes() == pr_box().p.tobytes()
    assert back.expected_correlations == (1.0, 1.0, 1.0, -1.0)
    assert path.read_text() == golden_preset_json("pr-box")
