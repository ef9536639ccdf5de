"""Command-line front end: ``eprsim {simulate,sweep,bench,verify,render}``.

Exit codes: 0 success, 2 invalid configuration, 3 sampling failure,
4 verification failure (including failed sweep/bench checks with ``--check``).
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from eprsim.chart import ChartError, render_chart_file
from eprsim.harness import run_bench, run_sweep, timed_simulation
from eprsim.outputs import (
    FormatError,
    distribution_csv,
    distribution_document,
    distribution_svg,
    dumps,
    report_document,
    report_text,
    verify_file,
)
from eprsim.presets import PRESETS, get_preset, validate_constraints
from eprsim.sampling import ConstraintTable, Method, SamplerConfig, SamplingError, load_constraints

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SAMPLING = 3
EXIT_VERIFY = 4

OUT_ENV = "EPRSIM_OUT"
FORMATS = ("json", "csv", "svg", "text")

log = logging.getLogger("eprsim")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    preset: str | None
    constraints_path: Path | None
    sampler: SamplerConfig
    out_dir: Path
    formats: tuple[str, ...]

    def __post_init__(self):
        if (self.preset is None) == (self.constraints_path is None):
            raise ConfigError("give exactly one of --preset or --constraints")
        bad = set(self.formats) - set(FORMATS)
        if bad:
            raise ConfigError(f"unknown format(s): {', '.join(sorted(bad))}")

    @property
    def source(self) -> str:
        return f"preset:{self.preset}" if self.preset else f"file:{self.constraints_path}"

    def load_table(self) -> ConstraintTable:
        try:
            table = get_preset(self.preset) if self.preset else load_constraints(self.constraints_path)
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot load constraints: {exc}") from exc
        check = validate_constraints(table)
        if not check.valid:
            raise ConfigError(f"invalid constraint table: {check.problems[0]}")
        if check.signalling:
            log.warning("constraint table is signalling (max residual %.3g)", max(check.residuals))
        return table

    def meta(self) -> dict:
        return {"source": self.source, "sampler": self.sampler.to_dict()}


def _int_list(text: str) -> list[int]:
    try:
        return [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _formats(text: str) -> tuple[str, ...]:
    out = tuple(dict.fromkeys(v.strip() for v in text.split(",") if v.strip()))
    bad = set(out) - set(FORMATS)
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {', '.join(sorted(bad))}; choose from {', '.join(FORMATS)}")
    return out


def _add_run_options(p: argparse.ArgumentParser, iterations: bool = True, formats: str = "json,text"):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=sorted(PRESETS), help="built-in constraint table")
    src.add_argument("--constraints", type=Path, help="constraint table JSON file")
    if iterations:
        p.add_argument("--iterations", "-N", type=int, default=50_000, help="accepted samples (default 50000)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--method", choices=[m.value for m in Method] + ["both"], default="rejection")
    p.add_argument("--batch-size", type=int, default=10_000, help="metropolis batch size")
    p.add_argument("--burn-in", type=int, default=0, help="metropolis steps discarded before tallying")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=None,
                   help=f"output directory (default ${OUT_ENV} or ./eprsim-out)")
    p.add_argument("--format", type=_formats, default=_formats(formats),
                   help=f"comma-separated subset of {','.join(FORMATS)} (default {formats})")


def _methods(args) -> list[Method]:
    return list(Method) if args.method == "both" else [Method(args.method)]


def _run_config(args, n: int | None) -> RunConfig:
    if args.preset is None and args.constraints is None:
        raise ConfigError("give exactly one of --preset or --constraints")
    out = args.out or Path(os.environ.get(OUT_ENV) or "eprsim-out")
    try:
        sampler = SamplerConfig(
            target_accepted=n,
            seed=args.seed,
            method=_methods(args)[0],
            batch_size=args.batch_size,
            workers=args.workers,
            burn_in=args.burn_in,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(args.preset, args.constraints, sampler, out, tuple(args.format))


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    log.info("wrote %s", path)
    return path


def cmd_simulate(args) -> int:
    if args.method == "both":
        raise ConfigError("simulate runs one method; pick rejection or metropolis")
    cfg = _run_config(args, args.iterations)
    table = cfg.load_table()
    run = timed_simulation(table, cfg.sampler)
    dist, report, meta = run.distribution, run.report, cfg.meta()
    out = cfg.out_dir
    if "json" in cfg.formats:
        _write(out / "distribution.json", dumps(distribution_document(dist, run.tally, meta)))
        _write(out / "report.json", dumps(report_document(dist, report, meta)))
    if "csv" in cfg.formats:
        _write(out / "distribution.csv", distribution_csv(dist, run.tally))
    if "text" in cfg.formats:
        _write(out / "report.txt", report_text(dist, report))
    if "svg" in cfg.formats:
        _write(out / "distribution.svg", distribution_svg(dist, report))
    print(report.to_text(), end="")
    print(f"accepted {run.tally.accepted} of {run.tally.proposed} proposals")
    return EXIT_OK


def _print_medians(title, table: dict):
    print(title)
    for method, by_n in table.items():
        cells = "  ".join(f"N={n}: {v:.4g}" for n, v in by_n.items())
        print(f"  {method:<11}{cells}")


def cmd_sweep(args) -> int:
    if not args.ns:
        raise ConfigError("--ns needs at least one value")
    cfg = _run_config(args, min(args.ns))
    table = cfg.load_table()
    try:
        result = run_sweep(table, args.ns, args.repeats, cfg.sampler, methods=_methods(args))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    summary = result.summary()
    if "csv" in cfg.formats or "svg" in cfg.formats:
        _write(cfg.out_dir / "sweep.csv", result.to_csv())
    if "json" in cfg.formats:
        _write(cfg.out_dir / "sweep_summary.json", json.dumps(summary, indent=2) + "\n")
    if "svg" in cfg.formats:
        _write(cfg.out_dir / "sweep.svg", render_chart_file(cfg.out_dir / "sweep.csv"))
    _print_medians(f"median |max_s - {result.target_max_s:.6g}|", result.medians())
    ok = all(summary["median_error_non_increasing"].values())
    print(f"median error non-increasing in N: {'PASS' if ok else 'FAIL'}")
    if summary["failed_rows"]:
        print(f"{summary['failed_rows']} run(s) failed; see the status column")
    return EXIT_VERIFY if args.check and (not ok or summary["failed_rows"]) else EXIT_OK


def cmd_bench(args) -> int:
    if not args.ns:
        raise ConfigError("--ns needs at least one value")
    cfg = _run_config(args, min(args.ns))
    table = cfg.load_table()
    try:
        result = run_bench(table, args.ns, args.repeats, cfg.sampler, methods=_methods(args))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    summary = result.summary(args.max_slope)
    if "csv" in cfg.formats or "svg" in cfg.formats:
        _write(cfg.out_dir / "bench.csv", result.to_csv())
    if "json" in cfg.formats:
        _write(cfg.out_dir / "bench_summary.json", json.dumps(summary, indent=2) + "\n")
    if "svg" in cfg.formats:
        _write(cfg.out_dir / "bench.svg", render_chart_file(cfg.out_dir / "bench.csv"))
    _print_medians("median seconds", {m: {n: t / 1e9 for n, t in d.items()} for m, d in result.median_times().items()})
    ok = True
    for method, slope in summary["loglog_slope"].items():
        good = summary["growth_ok"][method]
        ok &= good
        print(f"  {method:<11}log-log slope {slope:.3f} ({'PASS' if good else 'FAIL'} <= {args.max_slope})")
    return EXIT_VERIFY if args.check and not ok else EXIT_OK


def cmd_verify(args) -> int:
    failures = []
    for path in args.paths:
        try:
            problems = verify_file(path)
        except (OSError, FormatError, ValueError, KeyError) as exc:
            problems = [f"parse: {exc}"]
        if problems:
            print(f"FAIL {path}: {problems[0]}")
            failures.append(path)
        else:
            print(f"ok   {path}")
    return EXIT_VERIFY if failures else EXIT_OK


def cmd_render(args) -> int:
    try:
        svg = render_chart_file(args.csv)
    except (OSError, ChartError) as exc:
        raise ConfigError(f"cannot render {args.csv}: {exc}") from exc
    if args.output:
        _write(args.output, svg)
    else:
        sys.stdout.write(svg)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eprsim", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample, normalize and test one configuration")
    _add_run_options(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="CHSH accuracy over several N and seeds")
    _add_run_options(p, iterations=False, formats="csv,json,svg")
    p.add_argument("--ns", type=_int_list, default=[1_000, 10_000, 100_000])
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--check", action="store_true", help="exit 4 if the error trend check fails")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="wall-clock timing over several N")
    _add_run_options(p, iterations=False, formats="csv,json,svg")
    p.add_argument("--ns", type=_int_list, default=[10_000, 100_000, 1_000_000])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--max-slope", type=float, default=1.3)
    p.add_argument("--check", action="store_true", help="exit 4 if the growth check fails")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("verify", help="re-derive stored weights and CHSH values")
    p.add_argument("paths", nargs="+", type=Path)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("render", help="SVG chart from a sweep or bench CSV")
    p.add_argument("csv", type=Path)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"eprsim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SamplingError as exc:
        print(f"eprsim: sampling failed: {exc}", file=sys.stderr)
        return EXIT_SAMPLING


if __name__ == "__main__":
    sys.exit(main())
