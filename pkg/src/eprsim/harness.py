"""Accuracy sweeps and timing benchmarks over the number of accepted samples.

The timed region is sample + normalize + analyze; process start-up, table
construction and file IO are outside it.
"""
from __future__ import annotations

import csv
import io
import math
import statistics
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, replace

import numpy as np

from eprsim.analysis import ChshReport, analyze
from eprsim.sampling import ConstraintTable, GlobalDistribution, SamplerConfig, Tally, normalize, sample
from eprsim.scenario import bell_scenario

SWEEP_COLUMNS = (
    "n", "seed", "method", "max_s", "error", "delta", "residual_max",
    "elapsed_ns", "accepted", "proposed", "status",
)
BENCH_COLUMNS = ("n", "method", "repeat", "seed", "elapsed_ns", "accepted", "proposed")

# timing columns are excluded from byte-determinism comparisons
TIMING_COLUMNS = ("elapsed_ns",)


@dataclass(frozen=True)
class TimedRun:
    tally: Tally
    distribution: GlobalDistribution
    report: ChshReport
    elapsed_ns: int


def timed_simulation(table: ConstraintTable, cfg: SamplerConfig) -> TimedRun:
    scenario = bell_scenario()
    t0 = time.perf_counter_ns()
    tally = sample(table, cfg, scenario)
    dist = normalize(tally, scenario)
    report = analyze(dist)
    elapsed = time.perf_counter_ns() - t0
    return TimedRun(tally, dist, report, max(elapsed, 1))


@dataclass(frozen=True)
class SweepRow:
    n: int
    seed: int
    method: str
    max_s: float
    error: float
    delta: float
    residual_max: float
    elapsed_ns: int
    accepted: int
    proposed: int
    status: str = "ok"


@dataclass
class SweepResult:
    rows: list[SweepRow]
    target_max_s: float

    def medians(self) -> dict[str, dict[int, float]]:
        """Median CHSH error per method and N, over successful rows."""
        groups = defaultdict(list)
        for r in self.rows:
            if r.status == "ok":
                groups[(r.method, r.n)].append(r.error)
        out = defaultdict(dict)
        for (method, n), errs in sorted(groups.items()):
            out[method][n] = statistics.median(errs)
        return dict(out)

    def spreads(self) -> dict[str, dict[int, float]]:
        """Max minus min CHSH value per method and N; a crude noise measure."""
        groups = defaultdict(list)
        for r in self.rows:
            if r.status == "ok":
                groups[(r.method, r.n)].append(r.max_s)
        out = defaultdict(dict)
        for (method, n), vals in sorted(groups.items()):
            out[method][n] = max(vals) - min(vals)
        return dict(out)

    def trend_ok(self, strict: bool = False) -> dict[str, bool]:
        """Whether median error does not increase (decreases, if ``strict``) with N."""
        verdict = {}
        for method, by_n in self.medians().items():
            errs = [by_n[n] for n in sorted(by_n)]
            pairs = list(zip(errs, errs[1:]))
            verdict[method] = all(b < a if strict else b <= a for a, b in pairs)
        return verdict

    def to_csv(self) -> str:
        return _rows_csv(SWEEP_COLUMNS, (asdict(r) for r in self.rows))

    def summary(self) -> dict:
        return {
            "target_max_s": self.target_max_s,
            "median_error": {m: {str(n): v for n, v in d.items()} for m, d in self.medians().items()},
            "spread": {m: {str(n): v for n, v in d.items()} for m, d in self.spreads().items()},
            "median_error_non_increasing": self.trend_ok(),
            "failed_rows": sum(r.status != "ok" for r in self.rows),
        }


def _rows_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def _check_ns(ns) -> list[int]:
    ns = [int(n) for n in ns]
    if not ns:
        raise ValueError("at least one N is required")
    if any(n < 1 for n in ns):
        raise ValueError("every N must be >= 1")
    return ns


def run_sweep(table: ConstraintTable, ns, repeats: int, base: SamplerConfig,
              methods=None) -> SweepResult:
    """``repeats`` seeds (``base.seed``, ``base.seed + 1``, ...) per N per method.

    A failing run becomes a row with status ``error: ...`` and NaN statistics.
    """
    ns = _check_ns(ns)
    if ns != sorted(ns):
        raise ValueError("sweep N values must be ascending")
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    methods = list(methods or [base.method])
    target = analyze(table.analytic_distribution()).max_s
    rows = []
    for n in ns:
        for r in range(repeats):
            seed = int(base.seed) + r
            for method in methods:
                cfg = replace(base, target_accepted=n, seed=seed, method=method)
                rows.append(_sweep_row(table, cfg, target))
    rows.sort(key=lambda r: (r.n, r.seed, r.method))
    return SweepResult(rows, target)


def _sweep_row(table, cfg: SamplerConfig, target: float) -> SweepRow:
    t0 = time.perf_counter_ns()
    try:
        run = timed_simulation(table, cfg)
    except Exception as exc:  # noqa: BLE001 - reported per row
        nan = math.nan
        return SweepRow(cfg.target_accepted, cfg.seed, cfg.method.value, nan, nan, nan, nan,
                        max(time.perf_counter_ns() - t0, 1), 0, 0, f"error: {exc}")
    rep = run.report
    return SweepRow(
        n=cfg.target_accepted, seed=cfg.seed, method=cfg.method.value,
        max_s=rep.max_s, error=abs(rep.max_s - target), delta=rep.delta,
        residual_max=rep.residual_max, elapsed_ns=run.elapsed_ns,
        accepted=run.tally.accepted, proposed=run.tally.proposed,
    )


@dataclass(frozen=True)
class BenchRow:
    n: int
    method: str
    repeat: int
    seed: int
    elapsed_ns: int
    accepted: int
    proposed: int


@dataclass
class BenchResult:
    rows: list[BenchRow]

    def median_times(self) -> dict[str, dict[int, float]]:
        groups = defaultdict(list)
        for r in self.rows:
            groups[(r.method, r.n)].append(r.elapsed_ns)
        out = defaultdict(dict)
        for (method, n), ts in sorted(groups.items()):
            out[method][n] = statistics.median(ts)
        return dict(out)

    def variation(self) -> dict[str, dict[int, float]]:
        """Coefficient of variation of the repeated timings (0 for a single repeat)."""
        groups = defaultdict(list)
        for r in self.rows:
            groups[(r.method, r.n)].append(r.elapsed_ns)
        out = defaultdict(dict)
        for (method, n), ts in sorted(groups.items()):
            out[method][n] = statistics.pstdev(ts) / statistics.mean(ts) if len(ts) > 1 else 0.0
        return dict(out)

    def slopes(self) -> dict[str, float]:
        return {
            method: loglog_slope(list(by_n), list(by_n.values()))
            for method, by_n in self.median_times().items()
            if len(by_n) >= 2
        }

    def to_csv(self) -> str:
        return _rows_csv(BENCH_COLUMNS, (asdict(r) for r in self.rows))

    def summary(self, max_slope: float = 1.3) -> dict:
        slopes = self.slopes()
        return {
            "median_elapsed_ns": {m: {str(n): v for n, v in d.items()} for m, d in self.median_times().items()},
            "coefficient_of_variation": {m: {str(n): v for n, v in d.items()} for m, d in self.variation().items()},
            "loglog_slope": slopes,
            "max_slope": max_slope,
            "growth_ok": {m: s <= max_slope for m, s in slopes.items()},
        }


def loglog_slope(ns, times) -> float:
    """Least-squares slope of log(time) against log(N)."""
    x = np.log(np.asarray(ns, dtype=np.float64))
    y = np.log(np.asarray(times, dtype=np.float64))
    return float(np.polyfit(x, y, 1)[0])


def run_bench(table: ConstraintTable, ns, repeats: int, base: SamplerConfig,
              methods=None, warmup: bool = True) -> BenchResult:
    ns = _check_ns(ns)
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    methods = list(methods or [base.method])
    if warmup:
        for method in methods:
            timed_simulation(table, replace(base, target_accepted=min(ns), method=method))
    rows = []
    for n in ns:
        for method in methods:
            for r in range(repeats):
                cfg = replace(base, target_accepted=n, method=method, seed=int(base.seed) + r)
                run = timed_simulation(table, cfg)
                rows.append(BenchRow(n, cfg.method.value, r, cfg.seed, run.elapsed_ns,
                                     run.tally.accepted, run.tally.proposed))
    return BenchResult(rows)


def strip_timing(csv_text: str) -> str:
    """CSV text with timing columns blanked, for determinism comparisons."""
    rows = list(csv.DictReader(io.StringIO(csv_text)))
    if not rows:
        return csv_text
    cols = list(rows[0])
    for row in rows:
        for c in TIMING_COLUMNS:
            if c in row:
                row[c] = ""
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()

