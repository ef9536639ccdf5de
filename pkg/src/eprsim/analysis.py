"""Correlations, no-signalling residuals and CHSH tests on a global distribution.

Indices below are 0-based positions in the 16-entry distribution, so ``p[0]``
is the outcome ``00|00`` and ``p[15]`` is ``11|11``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

CLASSICAL_BOUND = 2.0

SIGN_PATTERNS = (
    (1, 1, 1, -1),
    (1, 1, -1, 1),
    (1, -1, 1, 1),
    (-1, 1, 1, 1),
)

# (same, same, differ, differ) outcome positions for contexts 00, 01, 10, 11
_CORRELATION_TERMS = ((0, 3, 1, 2), (4, 7, 5, 6), (8, 11, 9, 10), (12, 15, 13, 14))

# pairs of A-marginal / B-marginal positions compared across contexts
_NOSIGNAL_PAIRS = (
    ((0, 1), (4, 5)),
    ((8, 9), (12, 13)),
    ((0, 2), (8, 10)),
    ((4, 6), (12, 14)),
)


def _weights(d) -> np.ndarray:
    p = np.asarray(d, dtype=np.float64)
    if p.shape != (16,):
        raise ValueError(f"expected 16 weights, got shape {p.shape}")
    return p


class CorrelationVector(NamedTuple):
    e00: float
    e01: float
    e10: float
    e11: float


def _f1(p, i, j) -> float:
    return abs(2 * (p[i] + p[j]) - 1)


def _f2(p, i, j, k, l) -> float:
    return (p[i] + p[j]) - (p[k] + p[l])


def correlations(d) -> CorrelationVector:
    """<A_x B_y> = P(a = b | xy) - P(a != b | xy) for each context."""
    p = _weights(d)
    return CorrelationVector(*(float(_f2(p, *t)) for t in _CORRELATION_TERMS))


def chsh_values(c) -> tuple[tuple[float, ...], tuple[bool, ...]]:
    """Signed CHSH sums for each sign pattern and whether ``|S| > 2``."""
    e = tuple(float(v) for v in c)
    s = tuple(sum(sign * v for sign, v in zip(pattern, e)) for pattern in SIGN_PATTERNS)
    return s, tuple(abs(v) > CLASSICAL_BOUND for v in s)


def signalling_delta(d) -> float:
    """Marginal-discrepancy correction that widens the CHSH bound to ``2(1 + delta)``.

    Compared quantities are ``|2 P(outcome 0) - 1|`` for each party across the
    other party's settings.  Can be negative.
    """
    p = _weights(d)
    return float(0.5 * (
        (_f1(p, 0, 1) - _f1(p, 4, 5)) + (_f1(p, 8, 9) - _f1(p, 12, 13))
        + (_f1(p, 0, 2) - _f1(p, 4, 6)) + (_f1(p, 8, 10) - _f1(p, 12, 14))
    ))


def chsh_corrected_tests(d) -> tuple[bool, ...]:
    """True where ``2(1 + delta) >= |S|``, i.e. the inequality holds."""
    p = _weights(d)
    delta = signalling_delta(p)
    terms = [_f2(p, *t) for t in _CORRELATION_TERMS]
    return tuple(
        bool(2 * (1 + delta) >= abs(sum(v * f for v, f in zip(pattern, terms))))
        for pattern in SIGN_PATTERNS
    )


def no_signalling_residuals(d) -> tuple[float, ...]:
    p = _weights(d)
    return tuple(
        float(abs((p[i] + p[j]) - (p[k] + p[l]))) for (i, j), (k, l) in _NOSIGNAL_PAIRS
    )


@dataclass(frozen=True)
class ChshReport:
    correlations: CorrelationVector
    s_values: tuple[float, ...]
    violated: tuple[bool, ...]
    max_s: float
    delta: float
    corrected_tests: tuple[bool, ...]
    nosignalling_residuals: tuple[float, ...]

    # field order of the serialized document
    FIELDS = (
        "correlations",
        "s_values",
        "violated",
        "max_s",
        "delta",
        "corrected_tests",
        "nosignalling_residuals",
    )

    @property
    def n_violations(self) -> int:
        return sum(self.violated)

    @property
    def n_corrected_violations(self) -> int:
        return sum(not t for t in self.corrected_tests)

    @property
    def residual_max(self) -> float:
        return max(self.nosignalling_residuals)

    def to_dict(self) -> dict:
        return {
            "correlations": dict(self.correlations._asdict()),
            "s_values": list(self.s_values),
            "violated": list(self.violated),
            "max_s": self.max_s,
            "delta": self.delta,
            "corrected_tests": list(self.corrected_tests),
            "nosignalling_residuals": list(self.nosignalling_residuals),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ChshReport":
        corr = doc["correlations"]
        if isinstance(corr, dict):
            corr = [corr[k] for k in CorrelationVector._fields]
        return cls(
            correlations=CorrelationVector(*(float(v) for v in corr)),
            s_values=tuple(float(v) for v in doc["s_values"]),
            violated=tuple(bool(v) for v in doc["violated"]),
            max_s=float(doc["max_s"]),
            delta=float(doc["delta"]),
            corrected_tests=tuple(bool(v) for v in doc["corrected_tests"]),
            nosignalling_residuals=tuple(float(v) for v in doc["nosignalling_residuals"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_text(self) -> str:
        lines = ["CHSH report", "-" * 60]
        for name, v in self.correlations._asdict().items():
            lines.append(f"{'<A' + name[1] + 'B' + name[2] + '>':<12}{v!r:>24}")
        lines.append("")
        lines.append(f"{'pattern':<16}{'S':>24}{'|S|>2':>8}{'corrected':>12}")
        for pattern, s, viol, ok in zip(SIGN_PATTERNS, self.s_values, self.violated, self.corrected_tests):
            sig = "".join("+" if v > 0 else "-" for v in pattern)
            lines.append(f"{sig:<16}{s!r:>24}{'yes' if viol else 'no':>8}{'holds' if ok else 'VIOLATED':>12}")
        lines.append("")
        lines.append(f"{'max_s':<16}{self.max_s!r:>24}")
        lines.append(f"{'delta':<16}{self.delta!r:>24}")
        for i, r in enumerate(self.nosignalling_residuals, 1):
            lines.append(f"{'residual_' + str(i):<16}{r!r:>24}")
        return "\n".join(lines) + "\n"


def analyze(d) -> ChshReport:
    p = _weights(d)
    corr = correlations(p)
    s, violated = chsh_values(corr)
    return ChshReport(
        correlations=corr,
        s_values=s,
        violated=violated,
        max_s=max(abs(v) for v in s),
        delta=signalling_delta(p),
        corrected_tests=chsh_corrected_tests(p),
        nosignalling_residuals=no_signalling_residuals(p),
    )


def compare_reports(stored: ChshReport, fresh: ChshReport, tol: float = 1e-9) -> list[str]:
    """Names of fields where ``stored`` and ``fresh`` disagree beyond ``tol``."""
    bad = []
    a, b = stored.to_dict(), fresh.to_dict()
    for name in ChshReport.FIELDS:
        x, y = a[name], b[name]
        if isinstance(x, dict):
            x, y = list(x.values()), list(y.values())
        if not isinstance(x, list):
            x, y = [x], [y]
        for i, (u, v) in enumerate(zip(x, y)):
            if isinstance(u, bool) or isinstance(v, bool):
                same = bool(u) == bool(v)
            else:
                same = abs(float(u) - float(v)) <= tol
            if not same:
                bad.append(f"{name}[{i}]" if len(x) > 1 else name)
    return bad
