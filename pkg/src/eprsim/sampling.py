"""Monte Carlo sampling of the Bell scenario under input-correlation constraints.

Every run is driven by numpy's PCG64 bit generator.  A run with seed ``s`` and
one worker uses ``PCG64(SeedSequence(s))``; with ``w > 1`` workers, worker ``i``
uses the ``i``-th child of ``SeedSequence(s).spawn(w)`` and receives
``N // w`` (+1 for the first ``N % w`` workers) of the accepted-sample target.

Proposals are consumed from the generator strictly in order, five doubles per
proposal for the rejection sampler (A, B, X, Y, C), so the block size used to
vectorise the draw never changes the result.
"""
from __future__ import annotations

import enum
import functools
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from eprsim.scenario import (
    Scenario,
    bell_scenario,
    describe_edge,
    incidence,
    validate_scenario,
)

log = logging.getLogger(__name__)

TABLE_FORMAT = "eprsim.constraints/1"
SUM_TOLERANCE = 1e-9
_MIN_BLOCK = 4096
_MAX_BLOCK = 1 << 20


class SamplingError(RuntimeError):
    """Sampling could not reach its accepted-sample target."""


class StarvedEdgeError(SamplingError):
    """Normalization hit a hyperedge that never received a sample."""


class Method(str, enum.Enum):
    REJECTION = "rejection"
    METROPOLIS = "metropolis"


# --------------------------------------------------------------------------
# constraint tables


@dataclass(frozen=True, eq=False)
class ConstraintTable:
    """Acceptance probabilities ``p[x][y][a][b]`` for outcome ``ab`` in context ``xy``.

    Construction only checks the shape.  Range and normalization are reported by
    :func:`eprsim.presets.validate_constraints` and enforced by the samplers.
    """

    p: np.ndarray
    expected_correlations: tuple[float, ...] | None = None
    name: str | None = None

    def __post_init__(self):
        arr = np.array(self.p, dtype=np.float64)
        if arr.shape != (2, 2, 2, 2):
            raise ValueError(f"constraint table must have shape (2, 2, 2, 2), got {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)
        if self.expected_correlations is not None:
            object.__setattr__(
                self, "expected_correlations", tuple(float(e) for e in self.expected_correlations)
            )

    def __eq__(self, other):
        if not isinstance(other, ConstraintTable):
            return NotImplemented
        return np.array_equal(self.p, other.p)

    def __hash__(self):
        return hash(self.p.tobytes())

    def flat(self) -> np.ndarray:
        """Entries in vertex-index order (``8x + 4y + 2a + b``)."""
        return self.p.reshape(16)

    def context_sums(self) -> np.ndarray:
        return self.p.sum(axis=(2, 3))

    def matrix(self) -> np.ndarray:
        """4x4 layout: row ``2x + a``, column ``2y + b``."""
        return self.p.transpose(0, 2, 1, 3).reshape(4, 4)

    @classmethod
    def from_matrix(cls, m, **kw) -> "ConstraintTable":
        arr = np.array(m, dtype=np.float64)
        if arr.shape != (4, 4):
            raise ValueError(f"constraint matrix must be 4x4, got {arr.shape}")
        return cls(arr.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3), **kw)

    def analytic_distribution(self) -> "GlobalDistribution":
        """The distribution the samplers converge to for a no-signalling table."""
        return GlobalDistribution(self.flat().copy())

    def to_dict(self) -> dict:
        doc = {"format": TABLE_FORMAT}
        if self.name:
            doc["name"] = self.name
        doc["layout"] = "rows 2x+a, columns 2y+b"
        doc["matrix"] = [[float(v) for v in row] for row in self.matrix()]
        if self.expected_correlations is not None:
            doc["expected_correlations"] = list(self.expected_correlations)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> "ConstraintTable":
        fmt = doc.get("format", TABLE_FORMAT)
        if fmt != TABLE_FORMAT:
            raise ValueError(f"unsupported constraint table format {fmt!r}")
        if "matrix" not in doc:
            raise ValueError("constraint table document has no 'matrix'")
        exp = doc.get("expected_correlations")
        if exp is not None and len(exp) != 4:
            raise ValueError("expected_correlations must list 4 values")
        return cls.from_matrix(doc["matrix"], expected_correlations=exp, name=doc.get("name"))


def load_constraints(path) -> ConstraintTable:
    with open(path, encoding="utf-8") as fh:
        return ConstraintTable.from_dict(json.load(fh))


def save_constraints(table: ConstraintTable, path) -> Path:
    path = Path(path)
    path.write_text(table.to_json(), encoding="utf-8")
    return path


# --------------------------------------------------------------------------
# tallies and distributions


@dataclass(frozen=True, eq=False)
class Tally:
    vertex_counts: np.ndarray
    edge_counts: np.ndarray
    accepted: int
    proposed: int

    def __post_init__(self):
        vc = np.array(self.vertex_counts, dtype=np.int64)
        ec = np.array(self.edge_counts, dtype=np.int64)
        vc.setflags(write=False)
        ec.setflags(write=False)
        object.__setattr__(self, "vertex_counts", vc)
        object.__setattr__(self, "edge_counts", ec)
        object.__setattr__(self, "accepted", int(self.accepted))
        object.__setattr__(self, "proposed", int(self.proposed))

    def __eq__(self, other):
        if not isinstance(other, Tally):
            return NotImplemented
        return (
            np.array_equal(self.vertex_counts, other.vertex_counts)
            and np.array_equal(self.edge_counts, other.edge_counts)
            and self.accepted == other.accepted
            and self.proposed == other.proposed
        )

    @classmethod
    def empty(cls, scenario: Scenario | None = None) -> "Tally":
        scenario = scenario or bell_scenario()
        return cls(np.zeros(scenario.vertex_count), np.zeros(scenario.n_edges), 0, 0)

    @classmethod
    def from_vertex_counts(cls, counts, scenario: Scenario | None = None, proposed=None) -> "Tally":
        """Tally whose edge counts are accumulated from ``counts``."""
        scenario = scenario or bell_scenario()
        counts = np.asarray(counts, dtype=np.int64)
        if counts.shape != (scenario.vertex_count,):
            raise ValueError(f"expected {scenario.vertex_count} vertex counts, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("vertex counts must be non-negative")
        accepted = int(counts.sum())
        return cls(counts, _incidence(scenario) @ counts, accepted,
                   accepted if proposed is None else proposed)

    def check(self, scenario: Scenario | None = None) -> list[str]:
        """Bookkeeping violations, empty when the tally is consistent."""
        scenario = scenario or bell_scenario()
        problems = []
        if self.accepted != int(self.vertex_counts.sum()):
            problems.append("accepted != sum of vertex counts")
        expected = _incidence(scenario) @ self.vertex_counts
        for i in np.flatnonzero(expected != self.edge_counts):
            problems.append(f"edge {i} count does not match its member vertices")
        if self.proposed < self.accepted:
            problems.append("proposed < accepted")
        if (self.vertex_counts < 0).any():
            problems.append("negative vertex count")
        return problems

    def to_dict(self) -> dict:
        return {
            "vertex_counts": [int(v) for v in self.vertex_counts],
            "edge_counts": [int(v) for v in self.edge_counts],
            "accepted": self.accepted,
            "proposed": self.proposed,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tally":
        return cls(doc["vertex_counts"], doc["edge_counts"], doc["accepted"], doc["proposed"])


def merge_tallies(t1: Tally, t2: Tally) -> Tally:
    if t1.vertex_counts.shape != t2.vertex_counts.shape or t1.edge_counts.shape != t2.edge_counts.shape:
        raise ValueError("tallies refer to different scenarios")
    return Tally(
        t1.vertex_counts + t2.vertex_counts,
        t1.edge_counts + t2.edge_counts,
        t1.accepted + t2.accepted,
        t1.proposed + t2.proposed,
    )


@dataclass(frozen=True, eq=False)
class GlobalDistribution:
    """Sixteen weights; position ``k`` holds ``p_{k+1}`` of the outcome grid."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.array(self.p, dtype=np.float64)
        if arr.shape != (16,):
            raise ValueError(f"a global distribution has 16 entries, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)

    def __eq__(self, other):
        if not isinstance(other, GlobalDistribution):
            return NotImplemented
        return np.array_equal(self.p, other.p)

    def __array__(self, dtype=None, copy=None):
        return self.p if dtype is None else self.p.astype(dtype)

    def __getitem__(self, k):
        return self.p[k]

    def __len__(self):
        return 16

    def edge_sums(self, scenario: Scenario | None = None) -> np.ndarray:
        return _incidence(scenario or bell_scenario()).astype(np.float64) @ self.p

    def edge_sum_deviation(self, scenario: Scenario | None = None) -> float:
        """Largest ``|sum over edge - 1|``; the tolerance to which edges are normalized."""
        return float(np.max(np.abs(self.edge_sums(scenario) - 1.0)))

    def tolist(self) -> list[float]:
        return [float(v) for v in self.p]


def normalize(t: Tally, scenario: Scenario | None = None) -> GlobalDistribution:
    """Weight of each vertex: its count over the summed counts of its edges,
    times the number of edges it belongs to (3 in the Bell scenario)."""
    scenario = scenario or bell_scenario()
    inc = _incidence(scenario)
    starved = np.flatnonzero(t.edge_counts == 0)
    if starved.size:
        names = "; ".join(describe_edge(scenario, int(i)) for i in starved)
        raise StarvedEdgeError(f"no accepted samples on {names}")
    edge_totals = inc.T @ t.edge_counts
    membership = inc.sum(axis=0)
    return GlobalDistribution(membership * t.vertex_counts / edge_totals)


@functools.lru_cache(maxsize=8)
def _incidence(scenario: Scenario) -> np.ndarray:
    arr = np.array(incidence(scenario), dtype=np.int64).reshape(scenario.n_edges, scenario.vertex_count)
    arr.setflags(write=False)
    return arr


# --------------------------------------------------------------------------
# random draws


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator for an integer seed or a ``SeedSequence``."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(_check_seed(seed))
    return np.random.Generator(np.random.PCG64(seed))


def worker_seeds(seed: int, workers: int) -> list[np.random.SeedSequence]:
    root = np.random.SeedSequence(_check_seed(seed))
    if workers == 1:
        return [root]
    return root.spawn(workers)


def _check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise TypeError(f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must fit in 64 unsigned bits, got {seed}")
    return int(seed)


def sample_bernoulli(rng: np.random.Generator, bias: float) -> int:
    if not 0.0 <= bias <= 1.0:
        raise ValueError(f"bias must lie in [0, 1], got {bias}")
    return int(rng.random() < bias)


def sample_uniform(rng: np.random.Generator) -> float:
    return float(rng.random())


# --------------------------------------------------------------------------
# samplers


@dataclass(frozen=True)
class SamplerConfig:
    target_accepted: int
    seed: int = 0
    method: Method = Method.REJECTION
    batch_size: int = 10_000
    workers: int = 1
    burn_in: int = 0
    # give up once proposals exceed this many per requested acceptance
    max_proposal_ratio: float = 1e4

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if int(self.target_accepted) < 1:
            raise ValueError("target_accepted must be >= 1")
        if int(self.batch_size) < 1:
            raise ValueError("batch_size must be >= 1")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")
        if int(self.burn_in) < 0:
            raise ValueError("burn_in must be >= 0")
        if not self.max_proposal_ratio >= 1:
            raise ValueError("max_proposal_ratio must be >= 1")
        _check_seed(self.seed)

    def to_dict(self) -> dict:
        return {
            "target_accepted": int(self.target_accepted),
            "seed": int(self.seed),
            "method": self.method.value,
            "batch_size": int(self.batch_size),
            "workers": int(self.workers),
            "burn_in": int(self.burn_in),
        }


def _acceptance_vector(table: ConstraintTable) -> np.ndarray:
    flat = table.flat()
    if not np.all(np.isfinite(flat)) or (flat < 0).any() or (flat > 1).any():
        raise ValueError("constraint entries must lie in [0, 1]")
    if not (flat > 0).any():
        raise SamplingError("every constraint entry is 0: no proposal can ever be accepted")
    return flat


def _check_scenario(scenario: Scenario) -> Scenario:
    if scenario.vertex_count != 16 or not validate_scenario(scenario).ok:
        raise ValueError("sampling needs a well-formed 16-vertex Bell scenario")
    return scenario


class _Collector:
    """Accumulates accepted vertex indices until the target is met."""

    def __init__(self, target: int, cap: float):
        self.target = target
        self.cap = cap
        self.counts = np.zeros(16, dtype=np.int64)
        self.accepted = 0
        self.proposed = 0

    @property
    def done(self) -> bool:
        return self.accepted >= self.target

    def feed(self, idx: np.ndarray, accept: np.ndarray):
        hits = np.flatnonzero(accept)
        need = self.target - self.accepted
        if hits.size >= need:
            hits = hits[:need]
            self.proposed += int(hits[-1]) + 1
        else:
            self.proposed += idx.size
        self.counts += np.bincount(idx[hits], minlength=16)
        self.accepted += hits.size
        if not self.done and self.proposed > self.cap * self.target:
            raise SamplingError(
                f"no convergence: {self.proposed} proposals for {self.accepted}/{self.target} "
                f"accepted samples exceeds the cap of {self.cap:g} proposals per sample"
            )


def _rejection_stream(flat, n, rng, cap) -> tuple[np.ndarray, int]:
    col = _Collector(n, cap)
    rate = float(flat.mean())
    while not col.done:
        want = (col.target - col.accepted) / rate * 1.05 + 64
        block = int(min(max(want, _MIN_BLOCK), _MAX_BLOCK))
        u = rng.random((block, 5))
        a, b, x, y = (u[:, :4] < 0.5).T
        idx = 8 * x + 4 * y + 2 * a + b
        col.feed(idx, u[:, 4] < flat[idx])
    return col.counts, col.proposed


def _metropolis_stream(flat, n, rng, cap, batch_size, burn_in) -> tuple[np.ndarray, int]:
    # Chain over (A, B, X, Y, C) with a uniform target.  Each step proposes
    # flipping one uniformly chosen bit and redraws C; the proposal is
    # symmetric and the target flat, so the Hastings ratio is 1 and every
    # move is taken.  Bits after step t are the start state XOR the parity
    # of flips so far, which lets a batch be generated without a Python loop.
    state = (rng.random(4) < 0.5).astype(np.int64)
    col = _Collector(n, cap)
    weights = np.array([2, 1, 8, 4], dtype=np.int64)  # a, b, x, y -> vertex index

    def advance(steps):
        nonlocal state
        which = rng.integers(0, 4, size=steps)
        c = rng.random(steps)
        flips = np.zeros((steps, 4), dtype=np.int64)
        flips[np.arange(steps), which] = 1
        bits = (state + np.cumsum(flips, axis=0)) & 1
        state = bits[-1].copy()
        return bits @ weights, c

    remaining = burn_in
    while remaining > 0:
        step = min(remaining, batch_size)
        advance(step)
        remaining -= step

    while not col.done:
        idx, c = advance(batch_size)
        col.feed(idx, c < flat[idx])
    return col.counts, col.proposed


def _run_worker(flat, n, seed_seq, cfg: SamplerConfig):
    rng = make_rng(seed_seq)
    if cfg.method is Method.REJECTION:
        return _rejection_stream(flat, n, rng, cfg.max_proposal_ratio)
    return _metropolis_stream(flat, n, rng, cfg.max_proposal_ratio, int(cfg.batch_size), int(cfg.burn_in))


def split_target(n: int, workers: int) -> list[int]:
    base, extra = divmod(n, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def run_worker(table: ConstraintTable, n: int, seed_seq, cfg: SamplerConfig,
               scenario: Scenario | None = None) -> Tally:
    """One worker's stream: ``n`` accepted samples from the generator seeded by ``seed_seq``."""
    scenario = _check_scenario(scenario or bell_scenario())
    flat = _acceptance_vector(table)
    if n == 0:
        return Tally.empty(scenario)
    counts, proposed = _run_worker(flat, n, seed_seq, cfg)
    return Tally.from_vertex_counts(counts, scenario, proposed=proposed)


def _run(table: ConstraintTable, cfg: SamplerConfig, scenario: Scenario | None) -> Tally:
    scenario = _check_scenario(scenario or bell_scenario())
    _acceptance_vector(table)
    workers = int(cfg.workers)
    seeds = worker_seeds(cfg.seed, workers)
    shares = split_target(int(cfg.target_accepted), workers)
    if workers == 1:
        return run_worker(table, shares[0], seeds[0], cfg, scenario)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(lambda args: run_worker(table, *args, cfg, scenario), zip(shares, seeds)))
    return functools.reduce(merge_tallies, parts)


def rejection_sample_run(c: ConstraintTable, cfg: SamplerConfig, scenario: Scenario | None = None) -> Tally:
    """Draw A, B, X, Y ~ Bernoulli(1/2) and C ~ U[0, 1); keep the proposal iff
    ``C < c[x][y][a][b]``.  Stops at exactly ``cfg.target_accepted`` acceptances."""
    if cfg.method is not Method.REJECTION:
        raise ValueError("rejection_sample_run needs method='rejection'")
    return _run(c, cfg, scenario)


def metropolis_batch_run(c: ConstraintTable, cfg: SamplerConfig, scenario: Scenario | None = None) -> Tally:
    """Generate ``cfg.batch_size`` chain states at a time, keep those passing the
    constraint test, and truncate the last batch at the target."""
    if cfg.method is not Method.METROPOLIS:
        raise ValueError("metropolis_batch_run needs method='metropolis'")
    return _run(c, cfg, scenario)


def sample(c: ConstraintTable, cfg: SamplerConfig, scenario: Scenario | None = None) -> Tally:
    return _run(c, cfg, scenario)


def simulate(c: ConstraintTable, cfg: SamplerConfig, scenario: Scenario | None = None):
    """Sample and normalize; returns ``(tally, distribution)``."""
    scenario = scenario or bell_scenario()
    t = sample(c, cfg, scenario)
    log.debug("sampled %d/%d proposals accepted", t.accepted, t.proposed)
    return t, normalize(t, scenario)


def expected_tally(table: ConstraintTable, scale: int) -> Tally:
    """Noise-free tally: ``scale * c[x][y][a][b]`` counts per vertex.

    ``scale`` must make every count an integer; use it as the large-N limit of
    the samplers (each context is proposed equally often).
    """
    counts = np.asarray(table.flat()) * scale
    rounded = np.rint(counts)
    if not np.allclose(counts, rounded, rtol=0, atol=1e-9):
        raise ValueError("scale does not give integer counts for this table")
    return Tally.from_vertex_counts(rounded.astype(np.int64))

