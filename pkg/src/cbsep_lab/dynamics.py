"""Graphical construction of CBSEP, CSEP and g-CBSEP on a finite graph.

Clock ids: ``c < m`` is the unordered edge ``G.edges[c]`` (rate ``p/(2-p)``);
``c = m + j`` is the oriented edge ``G.oriented_edges[j]`` (rate ``(1-p)/(2-p)``).
When the edge carries a particle, an arrival sets it to ``(1, 1)`` (unordered)
or ``(1, 0)`` on ``(u, v)`` (oriented); otherwise nothing happens.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from scipy.stats import beta

from .graph import Graph

__all__ = [
    "GraphicalTimeline",
    "StreamingTimeline",
    "build_timeline",
    "stream_timeline",
    "Trajectory",
    "UpdatedSet",
    "evolve_cbsep",
    "evolve_csep",
    "evolve_gcbsep",
    "CouplingResult",
    "grand_coupling",
    "csep_inclusion_violations",
    "WalkPath",
    "embedded_walk",
    "CoverSurvival",
    "sigma_cov_estimate",
    "HittingTime",
    "hitting_time_N1",
    "empirical_move_rates",
    "clock_rates",
]


class TimelineTieError(RuntimeError):
    """Two arrivals coincide after the allowed number of re-draws."""


def clock_rates(G: Graph, p: float) -> np.ndarray:
    return np.concatenate([np.full(G.m, p / (2 - p)), np.full(2 * G.m, (1 - p) / (2 - p))])


def _check_p(p):
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")


def _endpoints(G: Graph) -> list[tuple[int, int]]:
    return list(G.edges) + list(G.oriented_edges)


# ------------------------------------------------------------ timelines


@dataclass(frozen=True, eq=False)
class GraphicalTimeline:
    """Materialised Poisson arrivals on ``[0, horizon]`` for every clock.

    ``arrivals[c]`` is the sorted arrival array of clock ``c``. Clock ``c`` draws
    from its own stream ``SeedSequence(seed, spawn_key=(c, attempt))``, so adding
    clocks never changes the others.
    """

    graph: Graph
    p: float
    horizon: float
    seed: int
    arrivals: tuple[np.ndarray, ...]

    @property
    def n_clocks(self) -> int:
        return len(self.arrivals)

    @property
    def edge_arrivals(self) -> tuple[np.ndarray, ...]:
        return self.arrivals[: self.graph.m]

    @property
    def oriented_arrivals(self) -> tuple[np.ndarray, ...]:
        return self.arrivals[self.graph.m:]

    def counts(self) -> np.ndarray:
        return np.array([len(a) for a in self.arrivals])

    def rate_zscores(self) -> np.ndarray:
        """``(count - rate*horizon)/sqrt(rate*horizon)`` per clock."""
        lam = clock_rates(self.graph, self.p) * self.horizon
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(lam > 0, (self.counts() - lam) / np.sqrt(lam), 0.0)

    def merged(self) -> tuple[np.ndarray, np.ndarray]:
        """All arrivals in time order as ``(times, clocks)``."""
        if self.n_clocks == 0:
            return np.zeros(0), np.zeros(0, dtype=np.int64)
        times = np.concatenate(self.arrivals)
        clocks = np.repeat(np.arange(self.n_clocks), self.counts())
        order = np.argsort(times, kind="stable")
        return times[order], clocks[order]

    def events(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        yield self.merged()


def _draw_clock(seed, c, attempt, rate, horizon):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(c, attempt)))
    k = rng.poisson(rate * horizon)
    return np.sort(rng.uniform(0.0, horizon, size=k))


def build_timeline(G: Graph, p: float, horizon: float, seed: int, max_redraws: int = 16) -> GraphicalTimeline:
    _check_p(p)
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    rates = clock_rates(G, p)
    attempts = np.zeros(len(rates), dtype=int)
    arrivals = [_draw_clock(seed, c, 0, r, horizon) for c, r in enumerate(rates)]
    for _ in range(max_redraws + 1):
        times = np.concatenate(arrivals) if arrivals else np.zeros(0)
        uniq, counts = np.unique(times, return_counts=True)
        dup = set(uniq[counts > 1].tolist())
        if not dup:
            return GraphicalTimeline(G, p, float(horizon), seed, tuple(arrivals))
        for c, a in enumerate(arrivals):
            if dup.intersection(a.tolist()):
                attempts[c] += 1
                arrivals[c] = _draw_clock(seed, c, int(attempts[c]), rates[c], horizon)
    raise TimelineTieError("could not remove coinciding arrivals")


@dataclass(frozen=True, eq=False)
class StreamingTimeline:
    """Arrivals generated on the fly from merged exponential gaps.

    The superposition of all clocks has total rate ``|E|``; each arrival picks
    its clock with probability proportional to the clock's rate. Equal in law
    to :class:`GraphicalTimeline` without storing anything.
    """

    graph: Graph
    p: float
    horizon: float
    rng: np.random.Generator
    chunk: int = 4096

    def events(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        m = self.graph.m
        if m == 0:
            return
        q = self.p / (2 - self.p)
        t = 0.0
        while t <= self.horizon:
            gaps = self.rng.exponential(1.0 / m, size=self.chunk)
            while not np.all(gaps > 0):
                bad = gaps <= 0
                gaps[bad] = self.rng.exponential(1.0 / m, size=int(bad.sum()))
            times = t + np.cumsum(gaps)
            unordered = self.rng.random(self.chunk) < q
            clocks = np.where(unordered, self.rng.integers(m, size=self.chunk),
                              m + self.rng.integers(2 * m, size=self.chunk))
            keep = times <= self.horizon
            yield times[keep], clocks[keep]
            t = float(times[-1])


def stream_timeline(G: Graph, p: float, horizon: float, rng, chunk: int = 4096) -> StreamingTimeline:
    """``chunk`` is the number of gaps drawn at once; keep it small for short runs."""
    _check_p(p)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return StreamingTimeline(G, p, float(horizon), rng, chunk)


# ------------------------------------------------------------ trajectories


@dataclass(frozen=True, eq=False)
class UpdatedSet:
    """Vertices touched by a successful update; ``first_update[x] = inf`` if never."""

    first_update: np.ndarray

    def at(self, t: float) -> np.ndarray:
        return np.flatnonzero(self.first_update <= t)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Initial state plus every successful update ``(time, clock, sites, new local state)``."""

    initial: np.ndarray
    times: np.ndarray
    clocks: np.ndarray
    sites: np.ndarray   # (k, 2)
    states: np.ndarray  # (k, 2)
    horizon: float
    updated: UpdatedSet | None = None

    def at(self, t: float) -> np.ndarray:
        w = self.initial.copy()
        k = int(np.searchsorted(self.times, t, side="right"))
        for (a, b), (ra, rb) in zip(self.sites[:k], self.states[:k]):
            w[a], w[b] = ra, rb
        return w

    @property
    def final(self) -> np.ndarray:
        return self.at(self.horizon)

    def configurations(self) -> Iterator[tuple[float, np.ndarray]]:
        """``(time, configuration)`` after each update, starting with ``(0, initial)``."""
        w = self.initial.copy()
        yield 0.0, w.copy()
        for t, (a, b), (ra, rb) in zip(self.times, self.sites, self.states):
            w[a], w[b] = ra, rb
            yield float(t), w.copy()

    def particle_counts(self, checkpoints, occupied=(1,)) -> np.ndarray:
        occ = np.asarray(sorted(occupied))
        return np.array([np.isin(self.at(t), occ).sum() for t in checkpoints])


def _as_binary(omega0, n) -> list[int]:
    w = [int(x) for x in np.asarray(omega0).ravel()]
    if len(w) != n:
        raise ValueError(f"configuration has {len(w)} sites, graph has {n}")
    if any(x not in (0, 1) for x in w):
        raise ValueError("binary configuration expected")
    if not any(w):
        raise ValueError("configuration must contain at least one particle")
    return w


def _finish(initial, rec, horizon, first=None):
    times = np.array([r[0] for r in rec], dtype=float)
    clocks = np.array([r[1] for r in rec], dtype=np.int64)
    sites = np.array([(r[2], r[3]) for r in rec], dtype=np.int64).reshape(-1, 2)
    states = np.array([(r[4], r[5]) for r in rec], dtype=np.int64).reshape(-1, 2)
    upd = UpdatedSet(np.asarray(first, dtype=float)) if first is not None else None
    return Trajectory(np.asarray(initial, dtype=np.int64), times, clocks, sites, states, horizon, upd)


def _evolve_binary(omega0, timeline, branching: bool) -> Trajectory:
    G = timeline.graph
    w = _as_binary(omega0, G.n)
    initial = list(w)
    ends = _endpoints(G)
    m = G.m
    rec = []
    for times, clocks in timeline.events():
        for t, c in zip(times.tolist(), clocks.tolist()):
            a, b = ends[c]
            if not (w[a] or w[b]):
                continue
            if c < m:
                if not branching:
                    continue
                w[a] = w[b] = 1
                rec.append((t, c, a, b, 1, 1))
            else:
                w[a], w[b] = 1, 0
                rec.append((t, c, a, b, 1, 0))
    return _finish(initial, rec, timeline.horizon)


def evolve_cbsep(omega0, timeline) -> Trajectory:
    return _evolve_binary(omega0, timeline, branching=True)


def evolve_csep(omega0, timeline) -> Trajectory:
    """Coalescing walks: the oriented clocks only."""
    return _evolve_binary(omega0, timeline, branching=False)


class _LazyUniforms:
    """Uniform pairs ``X[c][r]`` for the ``r``-th arrival of clock ``c``, drawn on demand."""

    def __init__(self, seed2: int, block: int = 64):
        self.seed2 = seed2
        self.block = block
        self._rng: dict[int, np.random.Generator] = {}
        self._buf: dict[int, list] = {}

    def __call__(self, c: int, r: int) -> tuple[float, float]:
        buf = self._buf.setdefault(c, [])
        while len(buf) <= r:
            rng = self._rng.get(c)
            if rng is None:
                rng = self._rng[c] = np.random.default_rng(np.random.SeedSequence(self.seed2, spawn_key=(c,)))
            buf.extend(map(tuple, rng.random((self.block, 2)).tolist()))
        return buf[r]


def _conditional_sampler(rho, states):
    states = sorted(states)
    w = np.asarray([rho[a] for a in states], dtype=float)
    cdf = np.cumsum(w / w.sum()).tolist()
    cdf[-1] = 1.0

    def draw(u):
        return states[bisect.bisect_right(cdf, u)]
    return draw


def evolve_gcbsep(omega0, timeline, rho, occupied, seed2: int) -> Trajectory:
    """g-CBSEP on the same clocks: a successful unordered arrival redraws both ends
    from ``rho( . | S_1)``; an oriented ``(u, v)`` arrival redraws ``u`` from
    ``rho( . | S_1)`` and ``v`` from ``rho( . | S_0)``. The uniforms driving the
    redraws are indexed by ``(clock, arrival number)``, so runs from different
    starts share them. Unordered edges are labelled ``(min, max)``.
    """
    G = timeline.graph
    rho = np.asarray(rho, dtype=float)
    s = len(rho)
    occ = frozenset(int(a) for a in occupied)
    if not occ or occ >= set(range(s)):
        raise ValueError("occupied must be a non-empty proper subset of the alphabet")
    w = [int(x) for x in np.asarray(omega0).ravel()]
    if len(w) != G.n or any(not 0 <= x < s for x in w):
        raise ValueError("configuration does not match graph and alphabet")
    if not any(x in occ for x in w):
        raise ValueError("projection of the configuration is empty")
    draw1 = _conditional_sampler(rho, occ)
    draw0 = _conditional_sampler(rho, set(range(s)) - occ)
    X = _LazyUniforms(seed2)
    ends = _endpoints(G)
    m = G.m
    initial = list(w)
    first = [math.inf] * G.n
    rank = [0] * len(ends)
    rec = []
    for times, clocks in timeline.events():
        for t, c in zip(times.tolist(), clocks.tolist()):
            r = rank[c]
            rank[c] += 1
            a, b = ends[c]
            if not (w[a] in occ or w[b] in occ):
                continue
            ua, ub = X(c, r)
            if c < m:
                w[a], w[b] = draw1(ua), draw1(ub)
            else:
                w[a], w[b] = draw1(ua), draw0(ub)
            if first[a] == math.inf:
                first[a] = t
            if first[b] == math.inf:
                first[b] = t
            rec.append((t, c, a, b, w[a], w[b]))
    return _finish(initial, rec, timeline.horizon, first)


# ------------------------------------------------------------ couplings


@dataclass(frozen=True, eq=False)
class CouplingResult:
    trajectories: list[Trajectory]
    coalescence_time: float  # inf if the copies never all agree within the horizon
    order_violations: int


def _lockstep(starts, timeline, branching: Sequence[bool], pairs):
    """Run several binary copies on one timeline.

    Returns per-copy update records, the coalescence time and the number of
    (event, pair, site) triples where ``copy[lo] <= copy[hi]`` fails.
    """
    G = timeline.graph
    W = [_as_binary(s, G.n) for s in starts]
    k = len(W)
    ends = _endpoints(G)
    m = G.m
    recs = [[] for _ in range(k)]
    disagree = sum(1 for x in range(G.n) if len({w[x] for w in W}) > 1)
    coalesced = 0.0 if disagree == 0 else math.inf
    violations = 0
    for times, clocks in timeline.events():
        for t, c in zip(times.tolist(), clocks.tolist()):
            a, b = ends[c]
            before = (len({w[a] for w in W}) > 1) + (len({w[b] for w in W}) > 1)
            touched = False
            for i, w in enumerate(W):
                if not (w[a] or w[b]):
                    continue
                if c < m:
                    if not branching[i]:
                        continue
                    w[a] = w[b] = 1
                    recs[i].append((t, c, a, b, 1, 1))
                else:
                    w[a], w[b] = 1, 0
                    recs[i].append((t, c, a, b, 1, 0))
                touched = True
            if not touched:
                continue
            disagree += (len({w[a] for w in W}) > 1) + (len({w[b] for w in W}) > 1) - before
            if disagree == 0 and coalesced == math.inf:
                coalesced = t
            elif disagree > 0:
                coalesced = math.inf
            for lo, hi in pairs:
                violations += (W[lo][a] > W[hi][a]) + (W[lo][b] > W[hi][b])
    trajs = [_finish(s, r, timeline.horizon) for s, r in zip(starts, recs)]
    return trajs, coalesced, violations


def grand_coupling(starts, timeline) -> CouplingResult:
    """Run CBSEP from every start on one timeline.

    Order is checked at every event for each initially ordered pair
    ``starts[i] <= starts[j]`` (sitewise).
    """
    arr = [np.asarray(s) for s in starts]
    pairs = [(i, j) for i in range(len(arr)) for j in range(len(arr))
             if i != j and np.all(arr[i] <= arr[j])]
    trajs, tc, viol = _lockstep(starts, timeline, [True] * len(starts), pairs)
    return CouplingResult(trajs, tc, viol)


def csep_inclusion_violations(omega0, timeline) -> int:
    """Events at which CSEP from ``omega0`` is not contained in CBSEP from ``omega0``."""
    _, _, viol = _lockstep([omega0, omega0], timeline, [True, False], [(1, 0)])
    return viol


# ------------------------------------------------------------ embedded walk


@dataclass(frozen=True, eq=False)
class WalkPath:
    start: int
    times: np.ndarray
    positions: np.ndarray  # positions[i] holds from times[i] on; times[0] = 0

    def at(self, t: float) -> int:
        return int(self.positions[np.searchsorted(self.times, t, side="right") - 1])

    def cover_time(self, n: int) -> float:
        """First time every vertex ``0..n-1`` has been visited (``inf`` if never)."""
        seen = set()
        for t, x in zip(self.times.tolist(), self.positions.tolist()):
            seen.add(x)
            if len(seen) == n:
                return t
        return math.inf


def embedded_walk(omega0, v: int, timeline, check: bool = True) -> WalkPath:
    """Walk that jumps from ``W`` to ``u`` at each oriented ``(u, W)`` arrival.

    Such an arrival always succeeds (``W`` is occupied) and leaves ``u``
    occupied, so ``W_t`` stays on a particle; with ``check`` this is asserted
    against the CBSEP run on the same timeline.
    """
    G = timeline.graph
    w = _as_binary(omega0, G.n)
    if not w[v]:
        raise ValueError(f"vertex {v} is not occupied")
    ends = _endpoints(G)
    m = G.m
    W = v
    times, pos = [0.0], [v]
    for ts, cs in timeline.events():
        for t, c in zip(ts.tolist(), cs.tolist()):
            a, b = ends[c]
            if check and (w[a] or w[b]):
                if c < m:
                    w[a] = w[b] = 1
                else:
                    w[a], w[b] = 1, 0
            if c >= m and b == W:
                W = a
                times.append(t)
                pos.append(W)
            if check and not w[W]:
                raise AssertionError(f"walk left the occupied set at t={t}")
    return WalkPath(v, np.array(times), np.array(pos))


# ------------------------------------------------------------ cover and hitting times


@dataclass(frozen=True, eq=False)
class CoverSurvival:
    """Per-start survival ``P_v(cover > t)`` with Clopper-Pearson bands."""

    t_grid: np.ndarray
    survival: np.ndarray  # (n, len(t_grid))
    lower: np.ndarray
    upper: np.ndarray
    samples: int
    censored: np.ndarray  # runs per start still uncovered at the horizon

    @property
    def max_survival(self) -> np.ndarray:
        return self.survival.max(axis=0)

    @property
    def max_upper(self) -> np.ndarray:
        return self.upper.max(axis=0)


def clopper_pearson(k, n, level=0.99):
    k = np.asarray(k, dtype=float)
    a = 0.5 * (1 - level)
    with np.errstate(invalid="ignore"):
        lo = np.where(k > 0, beta.ppf(a, k, n - k + 1), 0.0)
        hi = np.where(k < n, beta.ppf(1 - a, k + 1, n - k), 1.0)
    return lo, hi


def _walk_cover_times(G: Graph, start: int, rate: float, samples: int, horizon: float, rng) -> np.ndarray:
    nbrs = [list(a) for a in G.adjacency]
    out = np.empty(samples)
    for i in range(samples):
        seen = {start}
        x, t = start, 0.0
        while len(seen) < G.n and t <= horizon:
            t += rng.exponential(1.0 / (rate * len(nbrs[x])))
            x = nbrs[x][int(rng.integers(len(nbrs[x])))]
            seen.add(x)
        out[i] = t if len(seen) == G.n and t <= horizon else math.inf
    return out


def sigma_cov_estimate(G: Graph, p: float, samples: int, seed: int, t_grid=None,
                       horizon: float = math.inf, level: float = 0.99) -> CoverSurvival:
    """Monte Carlo cover-time survival of the embedded walk, one curve per start.

    The walk jumps across each incident edge at rate ``(1-p)/(2-p)``, which is its
    law under the graphical construction; it is sampled directly. Runs not
    covered by ``horizon`` are censored (counted as surviving).
    """
    _check_p(p)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rate = (1 - p) / (2 - p)
    rng = np.random.default_rng(seed)
    if G.n == 1:
        T = np.zeros((1, samples))
    else:
        T = np.stack([_walk_cover_times(G, v, rate, samples, horizon, rng) for v in range(G.n)])
    if t_grid is None:
        finite = T[np.isfinite(T)]
        top = float(finite.max()) if finite.size else 1.0
        t_grid = np.linspace(0.0, top, 101)
    t_grid = np.asarray(t_grid, dtype=float)
    k = (T[:, :, None] > t_grid[None, None, :]).sum(axis=1)
    lo, hi = clopper_pearson(k, samples, level)
    return CoverSurvival(t_grid, k / samples, lo, hi, samples, np.isinf(T).sum(axis=1))


@dataclass(frozen=True)
class HittingTime:
    time: float
    censored: bool


def hitting_time_N1(omega0, timeline) -> HittingTime:
    """First time CBSEP has exactly one particle; ``censored`` if not within the horizon."""
    G = timeline.graph
    w = _as_binary(omega0, G.n)
    N = sum(w)
    if N == 1:
        return HittingTime(0.0, False)
    ends = _endpoints(G)
    m = G.m
    for times, clocks in timeline.events():
        for t, c in zip(times.tolist(), clocks.tolist()):
            a, b = ends[c]
            if not (w[a] or w[b]):
                continue
            if c < m:
                N += (1 - w[a]) + (1 - w[b])
                w[a] = w[b] = 1
            else:
                N += (1 - w[a]) - w[b]
                w[a], w[b] = 1, 0
            if N == 1:
                return HittingTime(t, False)
    return HittingTime(timeline.horizon, True)


# ------------------------------------------------------------ empirical rates


@dataclass(frozen=True)
class MoveRates:
    move: float
    branch: float
    coalesce: float
    counts: dict = field(default_factory=dict)
    events: int = 0

    def nominal(self, p: float) -> dict:
        return {"move": (1 - p) / (2 - p), "branch": p / (2 - p), "coalesce": 2 * (1 - p) / (2 - p)}


def empirical_move_rates(G: Graph, p: float, horizon: float, seed: int, omega0=None) -> MoveRates:
    """Per-edge rates of moves, branchings and coalescences estimated from one long run.

    Moves and branchings are normalised by the time-integrated number of edges
    with exactly one particle; coalescences by that of doubly occupied edges.
    """
    tl = stream_timeline(G, p, horizon, seed)
    w = [1] * G.n if omega0 is None else _as_binary(omega0, G.n)
    ends = _endpoints(G)
    m = G.m
    incident = [[] for _ in range(G.n)]
    for i, (u, v) in enumerate(G.edges):
        incident[u].append(i)
        incident[v].append(i)
    edge_uv = list(G.edges)

    def occ(i):
        u, v = edge_uv[i]
        return w[u] + w[v]

    n1 = sum(occ(i) == 1 for i in range(m))
    n2 = sum(occ(i) == 2 for i in range(m))
    exp1 = exp2 = 0.0
    t_prev = 0.0
    counts = {"move": 0, "branch": 0, "coalesce": 0}
    events = 0
    for times, clocks in tl.events():
        for t, c in zip(times.tolist(), clocks.tolist()):
            events += 1
            a, b = ends[c]
            if not (w[a] or w[b]):
                continue
            old = (w[a], w[b])
            new = (1, 1) if c < m else (1, 0)
            if new == old:
                continue
            exp1 += n1 * (t - t_prev)
            exp2 += n2 * (t - t_prev)
            t_prev = t
            if old == (1, 1):
                counts["coalesce"] += 1
            elif new == (1, 1):
                counts["branch"] += 1
            else:
                counts["move"] += 1
            touched = set(incident[a]) | set(incident[b])
            for i in touched:
                k = occ(i)
                n1 -= k == 1
                n2 -= k == 2
            w[a], w[b] = new
            for i in touched:
                k = occ(i)
                n1 += k == 1
                n2 += k == 2
    exp1 += n1 * (horizon - t_prev)
    exp2 += n2 * (horizon - t_prev)
    return MoveRates(counts["move"] / exp1, counts["branch"] / exp1,
                     counts["coalesce"] / exp2 if exp2 > 0 else math.nan, counts, events)
