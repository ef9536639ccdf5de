"""Acceptance gate.  Each test prints one PASS/FAIL line, repeated in the
terminal summary; run with ``pytest tests/test_acceptance.py -s`` to see them inline.

Tolerances are the stated ones.  A criterion that cannot be met is left
failing rather than loosened.
"""
import statistics
import time

import numpy as np
import pytest

from eprsim.analysis import analyze
from eprsim.cli import main
from eprsim.harness import run_bench, run_sweep, strip_timing, timed_simulation
from eprsim.presets import classical_uniform, pr_box, tsirelson
from eprsim.sampling import ConstraintTable, Method, SamplerConfig, Tally, normalize
from eprsim.scenario import (
    bell_scenario,
    edges_containing,
    foulis_randall_product,
    make_local_scenario,
    validate_scenario,
)
from oracle import TSIRELSON, analytic_weights, brute_force_report, random_table

SEEDS = range(20)
N = 50_000


@pytest.fixture(scope="module")
def pr_runs():
    runs = []
    for seed in SEEDS:
        t0 = time.perf_counter()
        run = timed_simulation(pr_box(), SamplerConfig(N, seed=seed))
        runs.append((run, time.perf_counter() - t0))
    return runs


def test_c1_structure(verdict):
    local = make_local_scenario()
    t0 = time.perf_counter()
    s = foulis_randall_product(local, local)
    elapsed = time.perf_counter() - t0
    stats = validate_scenario(s)
    ok = (
        stats.ok
        and stats.n_vertices == 16
        and stats.n_edges == 12
        and set(stats.edge_cardinalities) == {4}
        and set(stats.edges_per_vertex) == {3}
        and elapsed < 1e-3
    )
    verdict("C1 structure: 16 vertices, 12 edges of 4, 3 edges per vertex, < 1 ms", ok,
            f"{elapsed * 1e3:.3f} ms")
    assert ok


def test_c2_worked_example(verdict):
    counts = np.zeros(16, dtype=np.int64)
    counts[0] = 10
    edge_counts = np.ones(12, dtype=np.int64)
    e = edges_containing(bell_scenario(), 0)
    edge_counts[e] = [15, 15, 10]  # sums to 40
    w = float(normalize(Tally(counts, edge_counts, 10, 10)).p[0])
    ok = w == 0.75
    verdict("C2 worked example: count 10 over edge total 40 -> 0.75", ok, f"weight {w!r}")
    assert ok


def test_c3_pr_box_violation(verdict, pr_runs):
    good = 0
    slowest = 0.0
    values = []
    for run, secs in pr_runs:
        r = run.report
        values.append(r.max_s)
        slowest = max(slowest, secs)
        if 3.8 <= r.max_s <= 4.0 and not r.corrected_tests[0]:
            good += 1
    ok = good >= 0.95 * len(pr_runs) and slowest < 10
    verdict("C3 PR box N=50000: max_s in [3.8, 4.0] and (1,1,1,-1) violated in >= 95% of 20 seeds", ok,
            f"{good}/20, max_s {min(values):.5f}..{max(values):.5f}, slowest run {slowest:.3f} s")
    assert ok


def test_c4a_nosignalling_residuals(verdict, pr_runs):
    worst = max(run.report.residual_max for run, _ in pr_runs)
    ok = worst <= 0.02
    verdict("C4a no-signalling residuals <= 0.02 on the C3 runs", ok, f"max residual {worst:.5f}")
    assert ok


def test_c4b_hyperedge_sums(verdict, pr_runs):
    worst = max(run.distribution.edge_sum_deviation() for run, _ in pr_runs)
    ok = worst <= 1e-9
    verdict("C4b every hyperedge weight sum equals 1 +- 1e-9 on the C3 runs", ok,
            f"max |edge sum - 1| = {worst:.3e}")
    assert ok


def test_c5_classical_control(verdict):
    clean = 0
    worst = 0.0
    for seed in SEEDS:
        r = timed_simulation(classical_uniform(), SamplerConfig(N, seed=seed)).report
        worst = max(worst, r.max_s)
        if r.max_s <= 2 and all(r.corrected_tests):
            clean += 1
    ok = clean == len(SEEDS)
    verdict("C5 classical N=50000: all |S| <= 2 and no corrected violation, 20/20 seeds", ok,
            f"{clean}/20, largest |S| {worst:.4f}")
    assert ok


def test_c6_tsirelson(verdict):
    values = [timed_simulation(tsirelson(), SamplerConfig(10**5, seed=s)).report.max_s for s in range(5)]
    med = statistics.median(values)
    ok = abs(med - TSIRELSON) <= 0.08
    verdict("C6 Tsirelson N=1e5: median max_s within 2*sqrt(2) +- 0.08 over 5 seeds", ok,
            f"median {med:.5f}, target {TSIRELSON:.5f}")
    assert ok


def test_c7_convergence_trend(verdict):
    ns = [10**3, 10**4, 10**5]
    res = run_sweep(pr_box(), ns, 5, SamplerConfig(1))
    med = res.medians()["rejection"]
    spread = res.spreads()["rejection"]
    errs = [med[n] for n in ns]
    decreasing = errs[0] > errs[1] > errs[2]
    noisier = spread[10**3] > spread[10**5]
    ok = decreasing and noisier
    verdict("C7 sweep pr-box N in {1e3,1e4,1e5}, 5 seeds: median |max_s - 4| strictly decreasing, "
            "noise at 1e3 > noise at 1e5", ok,
            "median errors " + ", ".join(f"{e:.2e}" for e in errs)
            + f"; spread {spread[10**3]:.2e} vs {spread[10**5]:.2e}")
    assert ok


def test_c8_linear_growth(verdict):
    res = run_bench(pr_box(), [10**4, 10**5, 10**6], 3, SamplerConfig(1, method=Method.REJECTION))
    slope = res.slopes()["rejection"]
    ok = 0.8 <= slope <= 1.3
    verdict("C8 bench rejection N in {1e4,1e5,1e6}: log-log slope in [0.8, 1.3]", ok, f"slope {slope:.3f}")
    assert ok


def test_c9_oracle_equivalence(verdict):
    rng = np.random.default_rng(20240601)
    worst = 0.0
    flags_ok = True
    for _ in range(1000):
        table = ConstraintTable(random_table(rng))
        got = analyze(table.analytic_distribution())
        ref = brute_force_report(analytic_weights(table.p))
        diffs = [abs(a - b) for a, b in zip(got.correlations, ref["correlations"])]
        diffs += [abs(a - b) for a, b in zip(got.s_values, ref["s_values"])]
        diffs += [abs(a - b) for a, b in zip(got.nosignalling_residuals, ref["nosignalling_residuals"])]
        diffs += [abs(got.delta - ref["delta"]), abs(got.max_s - ref["max_s"])]
        worst = max(worst, max(diffs))
        flags_ok &= got.violated == ref["violated"] and got.corrected_tests == ref["corrected_tests"]
    ok = worst <= 1e-12 and flags_ok
    verdict("C9 1000 random tables: analyze() matches brute-force equations to 1e-12", ok,
            f"max abs difference {worst:.2e}")
    assert ok


def test_c10_determinism(verdict, tmp_path):
    names = ("distribution.json", "report.json", "distribution.csv", "report.txt", "distribution.svg")
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}"
        for method in ("rejection", "metropolis"):
            code = main(["simulate", "--preset", "pr-box", "-N", "20000", "--seed", "42", "--workers", "1",
                         "--method", method, "--format", "json,csv,svg,text", "--out", str(out / method)])
            assert code == 0
        assert main(["sweep", "--preset", "pr-box", "--ns", "1000,5000", "--repeats", "2",
                     "--method", "both", "--out", str(out / "sweep")]) == 0
        outs.append(out)
    a, b = outs
    same = all(
        (a / m / n).read_bytes() == (b / m / n).read_bytes()
        for m in ("rejection", "metropolis") for n in names
    )
    same &= (a / "sweep" / "sweep.svg").read_bytes() == (b / "sweep" / "sweep.svg").read_bytes()
    sweep_a = (a / "sweep" / "sweep.csv").read_text()
    sweep_b = (b / "sweep" / "sweep.csv").read_text()
    same &= strip_timing(sweep_a) == strip_timing(sweep_b)
    verdict("C10 identical config + seed + 1 worker: byte-identical distribution, report, CSV, SVG", same,
            "sweep CSV compared with elapsed_ns blanked")
    assert same
