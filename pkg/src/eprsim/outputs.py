"""On-disk formats written by ``eprsim simulate`` and the checks behind ``eprsim verify``.

Every simulate output carries the 16 weights.  ``verify`` re-derives what it
can from each file: the weights from stored counts (re-normalized) and the
CHSH report from the weights, comparing at 1e-9.
"""
from __future__ import annotations

import csv
import io
import json
import re
from html import unescape
from pathlib import Path

import numpy as np

from eprsim.analysis import SIGN_PATTERNS, ChshReport, CorrelationVector, analyze, compare_reports
from eprsim.chart import render_distribution
from eprsim.sampling import GlobalDistribution, StarvedEdgeError, Tally, normalize
from eprsim.scenario import JointVertex, bell_scenario, vertex_label

DISTRIBUTION_FORMAT = "eprsim.distribution/1"
REPORT_FORMAT = "eprsim.report/1"
VERIFY_TOLERANCE = 1e-9
CSV_COLUMNS = ("index", "label", "a", "b", "x", "y", "count", "weight")


class FormatError(ValueError):
    pass


def distribution_document(dist: GlobalDistribution, tally: Tally | None = None, meta: dict | None = None) -> dict:
    doc = {"format": DISTRIBUTION_FORMAT}
    if meta:
        doc["meta"] = meta
    doc["weights"] = dist.tolist()
    if tally is not None:
        doc["tally"] = tally.to_dict()
    return doc


def report_document(dist: GlobalDistribution, report: ChshReport, meta: dict | None = None) -> dict:
    doc = {"format": REPORT_FORMAT}
    if meta:
        doc["meta"] = meta
    doc["weights"] = dist.tolist()
    doc["report"] = report.to_dict()
    return doc


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2) + "\n"


def distribution_csv(dist: GlobalDistribution, tally: Tally | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for k in range(16):
        v = JointVertex.from_index(k)
        count = "" if tally is None else int(tally.vertex_counts[k])
        w.writerow([k, str(v), v.a, v.b, v.x, v.y, count, repr(float(dist.p[k]))])
    return buf.getvalue()


def report_text(dist: GlobalDistribution, report: ChshReport) -> str:
    lines = ["Global distribution", "-" * 60]
    for k in range(16):
        lines.append(f"p{k + 1:02d}  {vertex_label(k)}  {float(dist.p[k])!r:>24}")
    lines.append("")
    return "\n".join(lines) + "\n" + report.to_text()


def distribution_svg(dist: GlobalDistribution, report: ChshReport) -> str:
    return render_distribution(dist.p, report_document(dist, report))


# --------------------------------------------------------------------------
# reading back


_NUM = r"(-?(?:\d+(?:\.\d*)?|\.\d+)(?:e[-+]?\d+)?|nan|inf|-inf)"


def _parse_text(text: str) -> dict:
    weights = [None] * 16
    corr, s, viol, tests, resid = {}, [], [], [], {}
    doc = {}
    for line in text.splitlines():
        line = line.strip()
        if m := re.fullmatch(r"p(\d\d)\s+\d\d\|\d\d\s+" + _NUM, line):
            k = int(m.group(1)) - 1
            if not 0 <= k < 16:
                raise FormatError(f"bad weight line {line!r}")
            weights[k] = float(m.group(2))
        elif m := re.fullmatch(r"<A(\d)B(\d)>\s+" + _NUM, line):
            corr[f"e{m.group(1)}{m.group(2)}"] = float(m.group(3))
        elif m := re.fullmatch(r"([+-]{4})\s+" + _NUM + r"\s+(yes|no)\s+(holds|VIOLATED)", line):
            s.append(float(m.group(2)))
            viol.append(m.group(3) == "yes")
            tests.append(m.group(4) == "holds")
        elif m := re.fullmatch(r"(max_s|delta)\s+" + _NUM, line):
            doc[m.group(1)] = float(m.group(2))
        elif m := re.fullmatch(r"residual_(\d)\s+" + _NUM, line):
            resid[int(m.group(1))] = float(m.group(2))
    if any(w is None for w in weights):
        raise FormatError("text report lacks some of the 16 weights")
    out = {"weights": weights}
    if corr or s:
        if len(corr) != 4 or len(s) != len(SIGN_PATTERNS) or len(resid) != 4 or len(doc) != 2:
            raise FormatError("text report is incomplete")
        out["report"] = {
            "correlations": [corr[f] for f in CorrelationVector._fields],
            "s_values": s,
            "violated": viol,
            "max_s": doc["max_s"],
            "delta": doc["delta"],
            "corrected_tests": tests,
            "nosignalling_residuals": [resid[i] for i in sorted(resid)],
        }
    return out


def _parse_csv(text: str) -> dict:
    rows = list(csv.DictReader(io.StringIO(text)))
    if not rows or set(CSV_COLUMNS) - set(rows[0]):
        raise FormatError(f"distribution CSV needs columns {', '.join(CSV_COLUMNS)}")
    if len(rows) != 16:
        raise FormatError(f"distribution CSV has {len(rows)} rows, expected 16")
    weights = [None] * 16
    counts = [None] * 16
    for row in rows:
        k = int(row["index"])
        if not 0 <= k < 16:
            raise FormatError(f"vertex index {k} out of range")
        weights[k] = float(row["weight"])
        counts[k] = int(row["count"]) if row["count"] != "" else None
    out = {"weights": weights}
    if all(c is not None for c in counts):
        out["counts"] = counts
    return out


def _parse_svg(text: str) -> dict:
    m = re.search(r"<desc>(.*?)</desc>", text, re.S)
    if not m:
        raise FormatError("SVG carries no embedded data")
    return json.loads(unescape(m.group(1)))


def load_output(path) -> dict:
    """Parse any simulate output into ``{"weights": [...], "tally"|"counts"|"report": ...}``."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    suffix = path.suffix.lower()
    try:
        if suffix == ".json":
            doc = json.loads(text)
            if doc.get("format") not in (DISTRIBUTION_FORMAT, REPORT_FORMAT):
                raise FormatError(f"unknown document format {doc.get('format')!r}")
            return doc
        if suffix == ".csv":
            return _parse_csv(text)
        if suffix == ".txt":
            return _parse_text(text)
        if suffix == ".svg":
            return _parse_svg(text)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{path.name}: {exc}") from exc
    raise FormatError(f"don't know how to read {path.name}")


def verify_document(doc: dict, tol: float = VERIFY_TOLERANCE) -> list[str]:
    """Failed checks, in order; empty when every stored quantity re-derives."""
    weights = doc.get("weights")
    if not isinstance(weights, list) or len(weights) != 16:
        return ["weights: expected a list of 16 numbers"]
    try:
        p = np.array([float(w) for w in weights])
    except (TypeError, ValueError):
        return ["weights: non-numeric entry"]
    if not np.all(np.isfinite(p)) or (p < 0).any():
        return ["weights: entries must be finite and non-negative"]

    failures = []
    tally = None
    if "tally" in doc:
        tally = Tally.from_dict(doc["tally"])
        problems = tally.check()
        if problems:
            failures.append(f"tally: {problems[0]}")
            tally = None
    elif "counts" in doc:
        tally = Tally.from_vertex_counts(doc["counts"])
    if tally is not None:
        try:
            fresh = normalize(tally, bell_scenario()).p
        except StarvedEdgeError as exc:
            failures.append(f"normalization: {exc}")
        else:
            bad = np.flatnonzero(np.abs(fresh - p) > tol)
            if bad.size:
                failures.append(f"normalization: weight p{bad[0] + 1:02d} does not match the stored counts")

    if "report" in doc:
        stored = ChshReport.from_dict(doc["report"])
        mismatched = compare_reports(stored, analyze(p), tol)
        if mismatched:
            failures.append(f"report: {mismatched[0]} differs from the recomputed value")
    return failures


def verify_file(path, tol: float = VERIFY_TOLERANCE) -> list[str]:
    return verify_document(load_output(path), tol)

