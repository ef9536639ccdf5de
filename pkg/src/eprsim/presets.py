"""Canonical constraint tables built from target correlations.

All presets have unbiased single-party marginals:
``p[x][y][a][b] = (1 + (-1)^(a xor b) * e_xy) / 4``.

The Tsirelson table is a standard quantum-boundary construction reaching
``2 * sqrt(2)``; it is not a published experimental table.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources
from typing import Callable, NamedTuple

import numpy as np

from eprsim.analysis import no_signalling_residuals
from eprsim.sampling import SUM_TOLERANCE, ConstraintTable


class TargetCorrelations(NamedTuple):
    e00: float
    e01: float
    e10: float
    e11: float


def constraints_from_correlations(t, name: str | None = None) -> ConstraintTable:
    e = TargetCorrelations(*(float(v) for v in t))
    for label, v in e._asdict().items():
        if not (math.isfinite(v) and -1.0 <= v <= 1.0):
            raise ValueError(f"correlation {label} = {v} is outside [-1, 1]")
    p = np.empty((2, 2, 2, 2))
    for x in (0, 1):
        for y in (0, 1):
            exy = e[2 * x + y]
            for a in (0, 1):
                for b in (0, 1):
                    sign = 1.0 if a == b else -1.0
                    p[x, y, a, b] = (1.0 + sign * exy) / 4.0
    return ConstraintTable(p, expected_correlations=tuple(e), name=name)


def pr_box() -> ConstraintTable:
    return constraints_from_correlations((1, 1, 1, -1), name="pr-box")


def classical_uniform() -> ConstraintTable:
    return constraints_from_correlations((0, 0, 0, 0), name="classical")


def tsirelson() -> ConstraintTable:
    r = 1 / math.sqrt(2)
    return constraints_from_correlations((r, r, r, -r), name="tsirelson")


PRESETS: dict[str, Callable[[], ConstraintTable]] = {
    "pr-box": pr_box,
    "classical": classical_uniform,
    "tsirelson": tsirelson,
}


def get_preset(name: str) -> ConstraintTable:
    try:
        return PRESETS[name]()
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None


def golden_preset_json(name: str) -> str:
    """The preset file shipped with the package."""
    return resources.files("eprsim").joinpath("data", "presets", f"{name}.json").read_text("utf-8")


@dataclass(frozen=True)
class ConstraintReport:
    in_range: bool
    context_sums: tuple[float, ...]
    residuals: tuple[float, ...]
    problems: tuple[str, ...]

    @property
    def valid(self) -> bool:
        return not self.problems

    @property
    def signalling(self) -> bool:
        return max(self.residuals) > SUM_TOLERANCE


def validate_constraints(c: ConstraintTable) -> ConstraintReport:
    """Range and per-context normalization checks plus the no-signalling
    residuals of the table read as a distribution.  Signalling alone does not
    make a table invalid."""
    flat = c.flat()
    problems = []
    in_range = bool(np.all(np.isfinite(flat)) and np.all((flat >= 0) & (flat <= 1)))
    if not in_range:
        problems.append("entries outside [0, 1]")
    sums = c.context_sums()
    for x in (0, 1):
        for y in (0, 1):
            if abs(sums[x, y] - 1.0) > SUM_TOLERANCE:
                problems.append(f"context x={x} y={y} sums to {sums[x, y]!r}, not 1")
    return ConstraintReport(
        in_range=in_range,
        context_sums=tuple(float(v) for v in sums.reshape(4)),
        residuals=no_signalling_residuals(flat),
        problems=tuple(problems),
    )
