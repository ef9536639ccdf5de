import csv
import io
import math

import numpy as np
import pytest

from eprsim.harness import (
    BENCH_COLUMNS,
    SWEEP_COLUMNS,
    loglog_slope,
    run_bench,
    run_sweep,
    strip_timing,
)
from eprsim.presets import pr_box
from eprsim.sampling import ConstraintTable, Method, SamplerConfig


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_sweep_schema_and_order():
    res = run_sweep(pr_box(), [500, 2000], 3, SamplerConfig(1, seed=10), methods=list(Method))
    data = rows(res.to_csv())
    assert list(data[0]) == list(SWEEP_COLUMNS)
    keys = [(int(r["n"]), int(r["seed"])) for r in data]
    assert keys == sorted(keys)
    assert len(data) == 2 * 3 * 2
    assert all(int(r["elapsed_ns"]) > 0 for r in data)
    assert {r["seed"] for r in data} == {"10", "11", "12"}
    assert all(r["status"] == "ok" for r in data)


def test_single_n_one_row_per_seed():
    res = run_sweep(pr_box(), [1000], 4, SamplerConfig(1))
    data = rows(res.to_csv())
    assert [int(r["seed"]) for r in data] == [0, 1, 2, 3]
    assert set(res.medians()["rejection"]) == {1000}


def test_sweep_error_column():
    res = run_sweep(pr_box(), [1000], 2, SamplerConfig(1))
    for r in res.rows:
        assert r.error == pytest.approx(abs(r.max_s - 4.0))


def test_sweep_records_failures_per_row():
    sparse = np.zeros((2, 2, 2, 2))
    sparse[0, 0, 0, 0] = 1e-7
    res = run_sweep(ConstraintTable(sparse), [10], 2, SamplerConfig(1, max_proposal_ratio=2))
    assert len(res.rows) == 2
    assert all(r.status.startswith("error:") and math.isnan(r.max_s) for r in res.rows)
    assert res.summary()["failed_rows"] == 2


def test_sweep_needs_ascending_ns():
    with pytest.raises(ValueError):
        run_sweep(pr_box(), [1000, 100], 1, SamplerConfig(1))
    with pytest.raises(ValueError):
        run_sweep(pr_box(), [], 1, SamplerConfig(1))


def test_trend_summary():
    res = run_sweep(pr_box(), [1000, 100_000], 5, SamplerConfig(1))
    assert res.trend_ok(strict=True) == {"rejection": True}
    spread = res.spreads()["rejection"]
    assert spread[1000] > spread[100_000]


def test_bench_schema():
    res = run_bench(pr_box(), [1000, 4000], 2, SamplerConfig(1), methods=list(Method))
    data = rows(res.to_csv())
    assert list(data[0]) == list(BENCH_COLUMNS)
    assert len(data) == 2 * 2 * 2
    assert {r["method"] for r in data} == {"rejection", "metropolis"}
    summary = res.summary()
    assert set(summary["loglog_slope"]) == {"rejection", "metropolis"}
    assert all(v >= 0 for d in summary["coefficient_of_variation"].values() for v in d.values())


def test_loglog_slope():
    assert loglog_slope([10, 100, 1000], [3, 30, 300]) == pytest.approx(1.0)
    assert loglog_slope([10, 100], [5, 500]) == pytest.approx(2.0)


def test_strip_timing():
    text = "n,elapsed_ns,seed\n1,123,0\n2,456,1\n"
    assert strip_timing(text) == "n,elapsed_ns,seed\n1,,0\n2,,1\n"
    assert strip_timing("n\n") == "n\n"
