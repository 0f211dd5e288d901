"""Random-walk reference quantities: lazy mixing time, meeting time and cover time."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.stats import binom

from .graph import Graph

__all__ = [
    "WalkSpec",
    "lazy_transition_matrix",
    "lazy_mixing_time",
    "MeetingTime",
    "expected_meeting_time",
    "meeting_time_mc",
    "CoverQuantile",
    "cover_time_quantile",
    "cover_survival_exact",
    "cover_times_mc",
    "cover_quantile_exact",
]

LAZY_TV_THRESHOLD = 0.25
MIXING_CAP = 2000
MEETING_EXACT_CAP = 300
COVER_EXACT_CAP = 12


@dataclass(frozen=True)
class WalkSpec:
    """``discrete_lazy``: holds with probability 1/2, else a uniform neighbour.
    ``continuous_edge_rate1``: crosses each incident edge at rate one."""

    kind: str
    graph: Graph

    def __post_init__(self):
        if self.kind not in ("discrete_lazy", "continuous_edge_rate1"):
            raise ValueError(f"unknown walk kind {self.kind!r}")


def _adjacency(G: Graph) -> sp.csr_matrix:
    u, v = G.edge_arrays()
    A = sp.coo_matrix((np.ones(G.m), (u, v)), shape=(G.n, G.n))
    return (A + A.T).tocsr()


def lazy_transition_matrix(G: Graph) -> np.ndarray:
    A = _adjacency(G).toarray()
    deg = A.sum(axis=1)
    if np.any(deg == 0):
        return np.eye(G.n)
    return 0.5 * (np.eye(G.n) + A / deg[:, None])


def _max_tv(M, pi):
    return 0.5 * np.abs(M - pi[None, :]).sum(axis=1).max()


def lazy_mixing_time(G: Graph, threshold: float = LAZY_TV_THRESHOLD) -> int:
    """Smallest integer ``t`` with ``max_x TV(P^t(x, .), pi) <= threshold``, ``pi`` proportional to degree.

    ``max_x TV`` is non-increasing in ``t``, so ``t`` is located by binary lifting
    over the powers ``P^(2^j)``.
    """
    if G.n > MIXING_CAP:
        raise ValueError(f"lazy_mixing_time is capped at n <= {MIXING_CAP}")
    if G.n == 1:
        return 0
    P = lazy_transition_matrix(G)
    pi = G.degrees / G.degrees.sum()
    if _max_tv(np.eye(G.n), pi) <= threshold:
        return 0
    powers = [P]
    while _max_tv(powers[-1], pi) > threshold:
        if len(powers) > 62:
            raise RuntimeError("lazy walk does not mix")
        powers.append(powers[-1] @ powers[-1])
    # largest t with distance above threshold, built from the binary digits
    M, t = np.eye(G.n), 0
    for j in range(len(powers) - 1, -1, -1):
        cand = M @ powers[j]
        if _max_tv(cand, pi) > threshold:
            M, t = cand, t + (1 << j)
    return t + 1


@dataclass(frozen=True)
class MeetingTime:
    value: float
    method: str  # "exact" or "mc"
    stderr: float = 0.0


def _pair_generator(G: Graph):
    """Generator of two independent rate-one-per-edge walks, restricted to ``x != y``."""
    n = G.n
    A = _adjacency(G)
    I = sp.identity(n, format="csr")
    L = A - sp.diags(np.asarray(A.sum(axis=1)).ravel())
    Q = (sp.kron(L, I) + sp.kron(I, L)).tocsr()
    off = np.flatnonzero(np.arange(n * n) % (n + 1) != 0)
    return Q[off][:, off].tocsc(), off


def expected_meeting_time(G: Graph, mc_samples: int = 20000, seed: int = 0) -> MeetingTime:
    """Mean meeting time of two independent walks (rate one per edge) from independent
    uniform starts; coinciding starts count as zero."""
    n = G.n
    if n == 1:
        return MeetingTime(0.0, "exact")
    if n > MEETING_EXACT_CAP:
        return meeting_time_mc(G, mc_samples, seed)
    Q, _ = _pair_generator(G)
    A = (-Q).tocsr()
    rhs = np.ones(A.shape[0])
    # -Q is symmetric positive definite; a direct factorisation is far slower here
    h, info = sla.cg(A, rhs, rtol=1e-13, maxiter=100 * A.shape[0])
    if info != 0:
        h = sla.spsolve(A.tocsc(), rhs)
    return MeetingTime(float(h.sum()) / n**2, "exact")


def meeting_time_mc(G: Graph, samples: int, seed: int) -> MeetingTime:
    rng = np.random.default_rng(seed)
    nbrs = [list(a) for a in G.adjacency]
    deg = G.degrees
    out = np.empty(samples)
    for i in range(samples):
        x, y = int(rng.integers(G.n)), int(rng.integers(G.n))
        t = 0.0
        while x != y:
            dx, dy = deg[x], deg[y]
            t += rng.exponential(1.0 / (dx + dy))
            if rng.random() * (dx + dy) < dx:
                x = nbrs[x][int(rng.integers(dx))]
            else:
                y = nbrs[y][int(rng.integers(dy))]
        out[i] = t
    return MeetingTime(float(out.mean()), "mc", float(out.std(ddof=1) / math.sqrt(samples)))


# ------------------------------------------------------------ cover time


def cover_times_mc(G: Graph, start: int, samples: int, rng, kind: str = "discrete", rate: float = 1.0) -> np.ndarray:
    """Cover times of the simple random walk from ``start``.

    ``discrete``: number of steps of the non-lazy walk. ``continuous``: the walk
    crosses each incident edge at ``rate``.
    """
    if kind not in ("discrete", "continuous"):
        raise ValueError(f"unknown cover-time kind {kind!r}")
    nbrs = [list(a) for a in G.adjacency]
    out = np.empty(samples)
    for i in range(samples):
        seen = {start}
        x, t = start, 0.0
        while len(seen) < G.n:
            d = len(nbrs[x])
            t += 1.0 if kind == "discrete" else rng.exponential(1.0 / (rate * d))
            x = nbrs[x][int(rng.integers(d))]
            seen.add(x)
        out[i] = t
    return out


def _cover_chain(G: Graph):
    """Transient states ``(x, S)`` (``x`` in ``S``, ``S != V``) and the jump kernel between them."""
    n = G.n
    full = (1 << n) - 1
    states = [(x, S) for S in range(1, full) for x in range(n) if S >> x & 1]
    index = {s: i for i, s in enumerate(states)}
    rows, cols, vals = [], [], []
    for i, (x, S) in enumerate(states):
        d = len(G.adjacency[x])
        for y in G.adjacency[x]:
            j = index.get((y, S | (1 << y)))
            if j is not None:
                rows.append(i)
                cols.append(j)
                vals.append(1.0 / d)
    K = sp.csr_matrix((vals, (rows, cols)), shape=(len(states), len(states)))
    starts = np.array([index[(x, 1 << x)] for x in range(n)])
    return K, starts


def cover_survival_exact(G: Graph, t_grid, kind: str = "discrete", rate: float = 1.0) -> np.ndarray:
    """``P_x(cover > t)`` for every start ``x`` and ``t`` in ``t_grid``, shape ``(n, len(t_grid))``.

    Exact through the chain on (position, visited set). ``discrete`` expects
    integer times.
    """
    if G.n > COVER_EXACT_CAP:
        raise ValueError(f"exact cover survival is capped at n <= {COVER_EXACT_CAP}")
    t_grid = np.asarray(t_grid, dtype=float)
    if G.n == 1:
        return np.zeros((1, len(t_grid)))
    K, starts = _cover_chain(G)
    ones = np.ones(K.shape[0])
    out = np.empty((G.n, len(t_grid)))
    if kind == "discrete":
        steps = np.floor(t_grid + 1e-9).astype(int)
        h, cur = ones.copy(), 0
        for j in np.argsort(steps):
            while cur < steps[j]:
                h = K @ h
                cur += 1
            out[:, j] = h[starts]
        return out
    if kind != "continuous":
        raise ValueError(f"unknown cover-time kind {kind!r}")
    # jump rate rate*d_x out of (x, S), spread uniformly over neighbours by K
    exit_rate = _state_degrees(G) * rate
    Q = sp.diags(exit_rate) @ K - sp.diags(exit_rate)
    for j, t in enumerate(t_grid):
        out[:, j] = sla.expm_multiply(Q * t, ones)[starts] if t > 0 else 1.0
    return out


def cover_quantile_exact(G: Graph, max_steps: int = 10**6) -> int:
    """``inf{t : max_x P_x(cover > t) <= 1/e}`` for the discrete simple random walk, exactly."""
    if G.n == 1:
        return 0
    if G.n > COVER_EXACT_CAP:
        raise ValueError(f"exact cover quantile is capped at n <= {COVER_EXACT_CAP}")
    K, starts = _cover_chain(G)
    h = np.ones(K.shape[0])
    for t in range(max_steps + 1):
        if h[starts].max() <= 1.0 / math.e:
            return t
        h = K @ h
    raise RuntimeError("cover quantile not reached within max_steps")


def _state_degrees(G: Graph) -> np.ndarray:
    n = G.n
    full = (1 << n) - 1
    return np.array([len(G.adjacency[x]) for S in range(1, full) for x in range(n) if S >> x & 1], dtype=float)


@dataclass(frozen=True, eq=False)
class CoverQuantile:
    """``inf{t : max_x P_x(cover > t) <= 1/e}`` with per-start order-statistic bands."""

    value: float
    lower: float
    upper: float
    per_start: np.ndarray
    per_start_lower: np.ndarray
    per_start_upper: np.ndarray
    samples: int
    kind: str


def _quantile_with_band(sample: np.ndarray, level: float):
    """Estimate and distribution-free band for ``inf{t : P(X > t) <= 1/e}``."""
    s = np.sort(sample)
    N = len(s)
    q = 1.0 - 1.0 / math.e
    k = N - math.floor(N / math.e)  # smallest order statistic with tail fraction <= 1/e
    a = 0.5 * (1.0 - level)
    lo = int(binom.ppf(a, N, q))
    hi = int(binom.ppf(1.0 - a, N, q)) + 1
    return s[k - 1], s[max(lo, 1) - 1], s[min(hi, N) - 1]


def cover_time_quantile(G: Graph, samples: int, seed: int, kind: str = "discrete",
                        level: float = 0.99) -> CoverQuantile:
    """Monte Carlo estimate of the cover-time ``1/e``-quantile maximised over starts.

    ``kind="discrete"`` counts steps of the simple random walk; ``"continuous"``
    uses the rate-one-per-edge walk.
    """
    if samples < 100:
        raise ValueError("samples must be >= 100")
    if G.n == 1:
        z = np.zeros(1)
        return CoverQuantile(0.0, 0.0, 0.0, z, z, z, samples, kind)
    rng = np.random.default_rng(seed)
    est = np.array([_quantile_with_band(cover_times_mc(G, x, samples, rng, kind), level) for x in range(G.n)])
    return CoverQuantile(float(est[:, 0].max()), float(est[:, 1].max()), float(est[:, 2].max()),
                         est[:, 0], est[:, 1], est[:, 2], samples, kind)
