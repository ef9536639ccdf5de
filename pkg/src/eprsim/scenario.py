"""Contextuality scenarios and their Foulis-Randall composition.

A scenario is a hypergraph: vertices are measurement outcomes, hyperedges are
the full outcome sets of measurement contexts.  Vertices are plain integer ids.

Local (single-party) vertex ids are ``2 * setting + outcome``.  Joint vertex
ids of the two-party Bell scenario are ``8x + 4y + 2a + b``.
"""
from __future__ import annotations

import functools
import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

CONTEXT = "context"
NOSIGNAL = "nosignal"
EDGE_KINDS = (CONTEXT, NOSIGNAL)


class ScenarioError(ValueError):
    """Raised for scenarios the composition cannot handle."""


def _check_bit(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value not in (0, 1):
        raise ValueError(f"{name} must be 0 or 1, got {value!r}")
    return value


class Outcome(NamedTuple):
    """Single-party outcome ``local_outcome|setting``."""

    local_outcome: int
    setting: int

    @property
    def id(self) -> int:
        return 2 * self.setting + self.local_outcome

    @classmethod
    def from_id(cls, vid: int) -> "Outcome":
        if not 0 <= vid < 4:
            raise ValueError(f"local vertex id out of range: {vid}")
        return cls(vid % 2, vid // 2)

    def __str__(self) -> str:
        return f"{self.local_outcome}|{self.setting}"


def vertex_index(a: int, b: int, x: int, y: int) -> int:
    """Position of outcome ``ab|xy`` in the 16-entry global distribution."""
    for name, v in (("a", a), ("b", b), ("x", x), ("y", y)):
        _check_bit(name, v)
    return 8 * x + 4 * y + 2 * a + b


class JointVertex(NamedTuple):
    a: int
    b: int
    x: int
    y: int

    @property
    def index(self) -> int:
        return vertex_index(self.a, self.b, self.x, self.y)

    @classmethod
    def from_index(cls, index: int) -> "JointVertex":
        if isinstance(index, bool) or not 0 <= index < 16:
            raise ValueError(f"joint vertex index out of range: {index!r}")
        return cls((index >> 1) & 1, index & 1, (index >> 3) & 1, (index >> 2) & 1)

    def __str__(self) -> str:
        return f"{self.a}{self.b}|{self.x}{self.y}"


def vertex_label(index: int) -> str:
    return str(JointVertex.from_index(index))


@dataclass(frozen=True)
class Scenario:
    """Hypergraph on vertices ``0 .. vertex_count - 1``.

    Construction does not enforce well-formedness; use :func:`validate_scenario`
    to inspect a scenario built from untrusted input.
    """

    vertex_count: int
    edges: tuple[tuple[int, ...], ...]
    kinds: tuple[str, ...] = field(default=())

    def __post_init__(self):
        edges = tuple(tuple(int(v) for v in e) for e in self.edges)
        kinds = tuple(self.kinds) or (CONTEXT,) * len(edges)
        if len(kinds) != len(edges):
            raise ValueError("one kind annotation is needed per edge")
        for k in kinds:
            if k not in EDGE_KINDS:
                raise ValueError(f"unknown edge kind {k!r}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "kinds", kinds)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def context_edges(self) -> list[int]:
        return [i for i, k in enumerate(self.kinds) if k == CONTEXT]

    def to_dict(self) -> dict:
        return {
            "vertex_count": self.vertex_count,
            "edges": [list(e) for e in self.edges],
            "kinds": list(self.kinds),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        return cls(int(doc["vertex_count"]), doc["edges"], tuple(doc.get("kinds", ())))


@dataclass(frozen=True)
class ScenarioStats:
    n_vertices: int
    n_edges: int
    edge_cardinalities: tuple[int, ...]
    edges_per_vertex: tuple[int, ...]
    violations: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


def make_local_scenario() -> Scenario:
    """Single party with two binary measurements: edges {0|0, 1|0} and {0|1, 1|1}."""
    edges = tuple(
        tuple(Outcome(o, s).id for o in (0, 1)) for s in (0, 1)
    )
    return Scenario(4, edges)


def edges_containing(s: Scenario, v: int) -> list[int]:
    if not 0 <= v < s.vertex_count:
        raise ValueError(f"vertex {v} out of range for {s.vertex_count} vertices")
    return [i for i, e in enumerate(s.edges) if v in e]


def validate_scenario(s: Scenario) -> ScenarioStats:
    violations = []
    per_vertex = [0] * max(s.vertex_count, 0)
    for i, e in enumerate(s.edges):
        if not e:
            violations.append(f"edge {i} is empty")
        if len(set(e)) != len(e):
            violations.append(f"edge {i} contains a duplicate vertex")
        for v in e:
            if 0 <= v < s.vertex_count:
                per_vertex[v] += 1
            else:
                violations.append(f"edge {i} references dangling vertex {v}")
    return ScenarioStats(
        n_vertices=s.vertex_count,
        n_edges=s.n_edges,
        edge_cardinalities=tuple(len(e) for e in s.edges),
        edges_per_vertex=tuple(per_vertex),
        violations=tuple(violations),
    )


def _binary_contexts(s: Scenario, party: str) -> list[list[Outcome]]:
    """Contexts of a binary local scenario, ordered by setting then outcome."""
    stats = validate_scenario(s)
    if not stats.ok:
        raise ScenarioError(f"scenario {party} is malformed: {stats.violations[0]}")
    if s.vertex_count != 4 or s.n_edges != 2:
        raise ScenarioError(
            f"scenario {party}: only two binary measurements per party are supported "
            f"(got {s.vertex_count} vertices, {s.n_edges} edges)"
        )
    contexts = {}
    for e in s.edges:
        outcomes = [Outcome.from_id(v) for v in e]
        settings = {o.setting for o in outcomes}
        if len(settings) != 1 or len(outcomes) != 2:
            raise ScenarioError(
                f"scenario {party}: edge {list(e)} is not the outcome set of one measurement"
            )
        contexts[settings.pop()] = sorted(outcomes)
    if sorted(contexts) != [0, 1]:
        raise ScenarioError(f"scenario {party}: both settings need their own edge")
    return [contexts[0], contexts[1]]


def _joint(va: Outcome, vb: Outcome) -> int:
    return vertex_index(va.local_outcome, vb.local_outcome, va.setting, vb.setting)


def foulis_randall_product(sa: Scenario, sb: Scenario) -> Scenario:
    """Compose two binary local scenarios into the 16-vertex Bell scenario.

    The edge set is the union of the A-to-B and B-to-A families: for a source
    edge ``e`` and a map ``f`` from its vertices to target edges, the edge
    ``U_{v in e} {v} x f(v)``.  Constant maps yield the four measurement
    contexts, which are emitted first (x-major, then y).  The eight remaining
    edges follow in the order: A-to-B then B-to-A, by source edge, by map.
    """
    ctx_a = _binary_contexts(sa, "A")
    ctx_b = _binary_contexts(sb, "B")

    edges: list[tuple[int, ...]] = []
    kinds: list[str] = []
    seen: set[frozenset[int]] = set()

    def add(vertices: Iterable[int], kind: str):
        edge = tuple(sorted(vertices))
        key = frozenset(edge)
        if key not in seen:
            seen.add(key)
            edges.append(edge)
            kinds.append(kind)

    for ea in ctx_a:
        for eb in ctx_b:
            add((_joint(va, vb) for va in ea for vb in eb), CONTEXT)

    families = (
        (ctx_a, ctx_b, lambda src, dst: _joint(src, dst)),
        (ctx_b, ctx_a, lambda src, dst: _joint(dst, src)),
    )
    for sources, targets, join in families:
        for edge in sources:
            for choice in itertools.product(range(len(targets)), repeat=len(edge)):
                if len(set(choice)) == 1:
                    continue  # constant maps reproduce the context edges
                add(
                    (join(v, w) for v, t in zip(edge, choice) for w in targets[t]),
                    NOSIGNAL,
                )

    return Scenario(sa.vertex_count * sb.vertex_count, tuple(edges), tuple(kinds))


@functools.lru_cache(maxsize=None)
def bell_scenario() -> Scenario:
    """The composite two-party scenario used throughout the simulator."""
    local = make_local_scenario()
    return foulis_randall_product(local, local)


def incidence(s: Scenario) -> "list[list[int]]":
    """Edge-by-vertex 0/1 membership rows."""
    rows = []
    for e in s.edges:
        row = [0] * s.vertex_count
        for v in e:
            row[v] = 1
        rows.append(row)
    return rows


def describe_edge(s: Scenario, i: int) -> str:
    labels = ", ".join(vertex_label(v) if s.vertex_count == 16 else str(v) for v in s.edges[i])
    return f"edge {i} ({s.kinds[i]}: {{{labels}}})"


def is_bell_scenario(s: Scenario) -> bool:
    return s.vertex_count == 16 and validate_scenario(s).ok and s.n_edges > 0
