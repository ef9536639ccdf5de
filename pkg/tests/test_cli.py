import json
import re

import numpy as np
import pytest

from eprsim.analysis import analyze
from eprsim.cli import EXIT_CONFIG, EXIT_OK, EXIT_SAMPLING, EXIT_VERIFY, main
from eprsim.outputs import (
    distribution_document,
    dumps,
    load_output,
    report_document,
    verify_file,
)
from eprsim.presets import classical_uniform, pr_box
from eprsim.sampling import ConstraintTable, save_constraints

SIMULATE_FILES = ("distribution.json", "report.json", "distribution.csv", "report.txt", "distribution.svg")


@pytest.fixture
def outdir(tmp_path):
    return tmp_path / "out"


def simulate(outdir, *extra):
    return main(["simulate", "--preset", "pr-box", "-N", "20000", "--seed", "4",
                 "--format", "json,csv,svg,text", "--out", str(outdir), *extra])


def test_simulate_writes_every_format(outdir, capsys):
    assert simulate(outdir) == EXIT_OK
    for name in SIMULATE_FILES:
        assert (outdir / name).is_file()
    out = capsys.readouterr().out
    assert "max_s" in out and "accepted 20000 of" in out


def test_verify_round_trips_every_file(outdir, capsys):
    simulate(outdir)
    paths = [str(outdir / n) for n in SIMULATE_FILES]
    assert main(["verify", *paths]) == EXIT_OK
    assert capsys.readouterr().out.count("ok ") == len(paths)


@pytest.mark.parametrize("name", SIMULATE_FILES)
def test_every_file_carries_the_weights(outdir, name):
    simulate(outdir)
    ref = json.loads((outdir / "distribution.json").read_text())["weights"]
    assert load_output(outdir / name)["weights"] == ref


def test_corrupted_weight_fails(outdir, capsys):
    simulate(outdir)
    path = outdir / "report.json"
    doc = json.loads(path.read_text())
    doc["weights"][3] += 0.01
    path.write_text(dumps(doc))
    assert main(["verify", str(path)]) == EXIT_VERIFY
    assert "FAIL" in capsys.readouterr().out


def test_corrupted_csv_count_fails(outdir):
    simulate(outdir)
    path = outdir / "distribution.csv"
    lines = path.read_text().splitlines()
    cells = lines[1].split(",")
    cells[6] = str(int(cells[6]) + 7)
    lines[1] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n")
    assert verify_file(path)[0].startswith("normalization")


def test_corrupted_text_report_fails(outdir):
    simulate(outdir)
    path = outdir / "report.txt"
    text = re.sub(r"^max_s\s+\S+$", "max_s  3.5", path.read_text(), flags=re.M)
    path.write_text(text)
    assert verify_file(path) == ["report: max_s differs from the recomputed value"]


@pytest.mark.parametrize("table", [pr_box(), classical_uniform()])
def test_stored_exact_distributions_verify(tmp_path, table):
    d = table.analytic_distribution()
    path = tmp_path / "exact.json"
    path.write_text(dumps(report_document(d, analyze(d))))
    assert main(["verify", str(path)]) == EXIT_OK
    path.write_text(dumps(distribution_document(d)))
    assert main(["verify", str(path)]) == EXIT_OK


def test_verify_unparseable(tmp_path):
    bad = tmp_path / "x.json"
    bad.write_text("{")
    assert main(["verify", str(bad)]) == EXIT_VERIFY
    assert main(["verify", str(tmp_path / "missing.json")]) == EXIT_VERIFY


def test_env_default_out_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("EPRSIM_OUT", str(tmp_path / "envdir"))
    assert main(["simulate", "--preset", "classical", "-N", "2000"]) == EXIT_OK
    assert (tmp_path / "envdir" / "report.json").is_file()


def test_constraints_file(tmp_path, outdir):
    path = save_constraints(pr_box(), tmp_path / "t.json")
    assert main(["simulate", "--constraints", str(path), "-N", "2000", "--out", str(outdir)]) == EXIT_OK
    doc = json.loads((outdir / "report.json").read_text())
    assert doc["meta"]["source"].startswith("file:")


@pytest.mark.parametrize(
    "argv",
    [
        ["simulate", "-N", "100"],  # no source
        ["simulate", "--preset", "pr-box", "-N", "0"],
        ["simulate", "--preset", "pr-box", "--method", "both"],
        ["simulate", "--preset", "pr-box", "--workers", "0"],
        ["simulate", "--constraints", "/nonexistent.json"],
        ["sweep", "--preset", "pr-box", "--ns", ""],
        ["sweep", "--preset", "pr-box", "--ns", "100,10"],
        ["bench", "--preset", "pr-box", "--ns", ""],
        ["render", "/nonexistent.csv"],
    ],
)
def test_config_errors(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] != "render" else argv) == EXIT_CONFIG


def test_invalid_table_file(tmp_path):
    path = tmp_path / "bad.json"
    save_constraints(ConstraintTable([[[[0.2, 0.2], [0.2, 0.2]]] * 2] * 2), path)
    assert main(["simulate", "--constraints", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_all_zero_table_is_config_error(tmp_path):
    # fails validation before the sampler can report it
    path = tmp_path / "z.json"
    save_constraints(ConstraintTable([[[[0.0, 0.0], [0.0, 0.0]]] * 2] * 2), path)
    assert main(["simulate", "--constraints", str(path), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_starved_edge_exit(tmp_path, capsys):
    # A=1 forced in context 00 and A=0 in context 01 leaves edge 4 empty
    p = np.full((2, 2, 2, 2), 0.25)
    p[0, 0] = [[0, 0], [1, 0]]
    p[0, 1] = [[1, 0], [0, 0]]
    path = tmp_path / "t.json"
    save_constraints(ConstraintTable(p), path)
    assert main(["simulate", "--constraints", str(path), "-N", "500", "--out", str(tmp_path)]) == EXIT_SAMPLING
    assert "edge 4" in capsys.readouterr().err


def test_sweep_and_render(tmp_path, capsys):
    out = tmp_path / "s"
    code = main(["sweep", "--preset", "pr-box", "--ns", "1000,100000", "--repeats", "5",
                 "--out", str(out), "--check"])
    assert code == EXIT_OK
    assert "PASS" in capsys.readouterr().out
    for name in ("sweep.csv", "sweep_summary.json", "sweep.svg"):
        assert (out / name).is_file()
    assert main(["render", str(out / "sweep.csv"), "-o", str(tmp_path / "c.svg")]) == EXIT_OK
    assert (tmp_path / "c.svg").read_text() == (out / "sweep.svg").read_text()


def test_bench(tmp_path):
    out = tmp_path / "b"
    code = main(["bench", "--preset", "classical", "--ns", "1000,10000", "--repeats", "1",
                 "--method", "both", "--out", str(out)])
    assert code == EXIT_OK
    summary = json.loads((out / "bench_summary.json").read_text())
    assert set(summary["loglog_slope"]) == {"rejection", "metropolis"}
