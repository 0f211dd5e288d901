"""Unit-conductance electrical networks: resistances, current flows and commute times."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse.linalg as sla

from .graph import Graph, laplacian

__all__ = [
    "Flow",
    "ResistanceProfile",
    "effective_resistance",
    "optimal_flow",
    "flow_energy",
    "path_flow",
    "random_unit_flow",
    "resistance_profile",
    "commute_time_check",
    "CommuteCheck",
]

DENSE_FACTOR_LIMIT = 3000


@dataclass(frozen=True, eq=False)
class Flow:
    """Antisymmetric edge function; ``theta[2i]`` is the value on ``(u, v)`` of edge ``i = (u, v)``
    and ``theta[2i + 1] = -theta[2i]`` the value on ``(v, u)``."""

    graph: Graph
    theta: np.ndarray
    source: int
    sink: int

    @classmethod
    def from_edge_values(cls, G, values, source, sink):
        values = np.asarray(values, dtype=float)
        theta = np.empty(2 * G.m)
        theta[0::2] = values
        theta[1::2] = -values
        return cls(G, theta, source, sink)

    @property
    def edge_values(self) -> np.ndarray:
        return self.theta[0::2]

    def divergence(self) -> np.ndarray:
        """Net out-flow at every vertex."""
        u, v = self.graph.edge_arrays()
        div = np.zeros(self.graph.n)
        np.add.at(div, u, self.edge_values)
        np.add.at(div, v, -self.edge_values)
        return div

    def is_unit_flow(self, atol: float = 1e-10) -> bool:
        target = np.zeros(self.graph.n)
        if self.source != self.sink:
            target[self.source], target[self.sink] = 1.0, -1.0
        antisym = np.allclose(self.theta[0::2], -self.theta[1::2], atol=atol)
        return antisym and np.allclose(self.divergence(), target, atol=atol)


@dataclass(frozen=True, eq=False)
class ResistanceProfile:
    R: np.ndarray
    Rbar: np.ndarray
    Rbar_max: float


def flow_energy(f: Flow) -> float:
    return 0.5 * float(np.sum(f.theta**2))


def _grounded_potential(G: Graph, x: int, y: int) -> np.ndarray:
    """Potential with unit current in at ``x``, out at ``y``, grounded at ``y``."""
    keep = np.array([v for v in range(G.n) if v != y])
    L = laplacian(G, sparse=True)[keep][:, keep].tocsc()
    rhs = np.zeros(G.n - 1)
    rhs[np.searchsorted(keep, x)] = 1.0
    phi = np.zeros(G.n)
    if G.n - 1 <= DENSE_FACTOR_LIMIT:
        phi[keep] = la.cho_solve(la.cho_factor(L.toarray()), rhs)
    else:
        phi[keep] = sla.spsolve(L, rhs)
    return phi


def effective_resistance(G: Graph, x: int, y: int) -> float:
    if x == y:
        return 0.0
    return float(_grounded_potential(G, x, y)[x])


def optimal_flow(G: Graph, x: int, y: int) -> Flow:
    """Current flow (the energy minimiser among unit flows from ``x`` to ``y``)."""
    if x == y:
        return Flow(G, np.zeros(2 * G.m), x, y)
    phi = _grounded_potential(G, x, y)
    u, v = G.edge_arrays()
    return Flow.from_edge_values(G, phi[u] - phi[v], x, y)


def path_flow(G: Graph, x: int, y: int) -> Flow:
    """Unit flow along one shortest path."""
    index = {e: i for i, e in enumerate(G.edges)}
    vals = np.zeros(G.m)
    if x != y:
        walk = G.shortest_path(x, y)
        for a, b in zip(walk, walk[1:]):
            vals[index[(min(a, b), max(a, b))]] += 1.0 if a < b else -1.0
    return Flow.from_edge_values(G, vals, x, y)


def random_unit_flow(G: Graph, x: int, y: int, rng: np.random.Generator, scale: float = 1.0) -> Flow:
    """Optimal flow plus a random circulation; every unit flow has this form."""
    base = optimal_flow(G, x, y).edge_values
    w = rng.standard_normal(G.m) * scale
    u, v = G.edge_arrays()
    div = np.zeros(G.n)
    np.add.at(div, u, w)
    np.add.at(div, v, -w)
    phi = np.linalg.lstsq(laplacian(G), div, rcond=None)[0]
    circulation = w - (phi[u] - phi[v])
    return Flow.from_edge_values(G, base + circulation, x, y)


def resistance_profile(G: Graph) -> ResistanceProfile:
    """All pairwise resistances from one factorisation of the Laplacian grounded at vertex 0."""
    n = G.n
    if n == 1:
        return ResistanceProfile(np.zeros((1, 1)), np.zeros(1), 0.0)
    L = laplacian(G)[1:, 1:]
    green = np.zeros((n, n))
    green[1:, 1:] = la.cho_solve(la.cho_factor(L), np.eye(n - 1))
    d = np.diag(green)
    R = d[:, None] + d[None, :] - 2.0 * green
    R = 0.5 * (R + R.T)
    np.fill_diagonal(R, 0.0)
    Rbar = R.mean(axis=0)
    return ResistanceProfile(R, Rbar, float(Rbar.max()))


@dataclass(frozen=True)
class CommuteCheck:
    exact: float
    estimate: float
    stderr: float

    @property
    def z(self) -> float:
        return abs(self.estimate - self.exact) / self.stderr if self.stderr > 0 else 0.0


def commute_time_check(G: Graph, x: int, y: int, mc_samples: int, seed: int) -> CommuteCheck:
    """Exact ``2|E| R(x, y)`` against a Monte Carlo mean of the discrete-time walk's commute time."""
    if x == y:
        raise ValueError("commute time needs x != y")
    exact = 2.0 * G.m * effective_resistance(G, x, y)
    rng = np.random.default_rng(seed)
    adj = [np.asarray(a) for a in G.adjacency]
    samples = np.empty(mc_samples)
    for i in range(mc_samples):
        pos, steps = x, 0
        for target in (y, x):
            while pos != target:
                nbrs = adj[pos]
                pos = int(nbrs[rng.integers(len(nbrs))])
                steps += 1
        samples[i] = steps
    return CommuteCheck(exact, float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(mc_samples)))
