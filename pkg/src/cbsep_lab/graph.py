"""Finite simple connected graphs, standard families and Laplacians.

Vertices are ``0..n-1``. Each undirected edge is stored once as ``(u, v)``
with ``u < v``; oriented edges are derived from that list so that edge
``i`` owns the oriented edges ``2*i -> (u, v)`` and ``2*i + 1 -> (v, u)``.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Graph",
    "DegreeStats",
    "GraphError",
    "make_family",
    "cycle",
    "path",
    "complete",
    "torus",
    "hypercube",
    "bary_tree",
    "random_regular",
    "degree_stats",
    "laplacian",
    "parse_graph_spec",
    "read_edgelist",
    "write_edgelist",
]

RANDOM_REGULAR_MAX_TRIES = 10_000


class GraphError(ValueError):
    """Invalid graph parameters or a graph violating the simple/connected invariants."""


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]
    name: str = field(default="", compare=False)
    adjacency: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        canon = tuple(sorted((min(u, v), max(u, v)) for u, v in self.edges))
        object.__setattr__(self, "edges", canon)
        if self.n < 1:
            raise GraphError("graph needs at least one vertex")
        if len(set(canon)) != len(canon):
            raise GraphError("multi-edge")
        for u, v in canon:
            if u == v:
                raise GraphError(f"loop at {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise GraphError(f"edge {(u, v)} out of range")
        adj = [[] for _ in range(self.n)]
        for u, v in canon:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "adjacency", tuple(tuple(sorted(a)) for a in adj))
        if len(bfs_order(self.adjacency, 0)) != self.n:
            raise GraphError("graph is not connected")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def oriented_edges(self) -> tuple[tuple[int, int], ...]:
        out = []
        for u, v in self.edges:
            out.append((u, v))
            out.append((v, u))
        return tuple(out)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([len(a) for a in self.adjacency], dtype=np.int64)

    def edge_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.edges:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        e = np.asarray(self.edges, dtype=np.int64)
        return e[:, 0], e[:, 1]

    def distances_from(self, source: int) -> np.ndarray:
        dist = np.full(self.n, -1, dtype=np.int64)
        dist[source] = 0
        queue = deque([source])
        while queue:
            u = queue.popleft()
            for v in self.adjacency[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    queue.append(v)
        return dist

    def distance_matrix(self) -> np.ndarray:
        return np.stack([self.distances_from(x) for x in range(self.n)])

    def shortest_path(self, x: int, y: int) -> list[int]:
        prev = {x: None}
        queue = deque([x])
        while queue:
            u = queue.popleft()
            if u == y:
                break
            for v in self.adjacency[u]:
                if v not in prev:
                    prev[v] = u
                    queue.append(v)
        out = [y]
        while out[-1] != x:
            out.append(prev[out[-1]])
        return out[::-1]

    def without_edge(self, u: int, v: int) -> "Graph":
        e = (min(u, v), max(u, v))
        return Graph(self.n, tuple(x for x in self.edges if x != e), name=f"{self.name}-{e}")

    def with_edge(self, u: int, v: int) -> "Graph":
        return Graph(self.n, self.edges + ((u, v),), name=f"{self.name}+{(u, v)}")

    def __repr__(self):
        label = self.name or "Graph"
        return f"<{label} n={self.n} m={self.m}>"


def bfs_order(adjacency, source):
    seen = {source}
    order = [source]
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adjacency[u]:
            if v not in seen:
                seen.add(v)
                order.append(v)
                queue.append(v)
    return order


@dataclass(frozen=True)
class DegreeStats:
    d_min: Fraction
    d_avg: Fraction
    d_max: Fraction


def degree_stats(G: Graph) -> DegreeStats:
    deg = [len(a) for a in G.adjacency]
    return DegreeStats(Fraction(min(deg)), Fraction(2 * G.m, G.n), Fraction(max(deg)))


def laplacian(G: Graph, sparse: bool = False):
    """Combinatorial Laplacian ``D - A`` with unit conductances."""
    u, v = G.edge_arrays()
    rows = np.concatenate([u, v, np.arange(G.n)])
    cols = np.concatenate([v, u, np.arange(G.n)])
    vals = np.concatenate([-np.ones(2 * G.m), G.degrees.astype(float)])
    L = sp.csr_matrix((vals, (rows, cols)), shape=(G.n, G.n))
    return L if sparse else L.toarray()


# ---------------------------------------------------------------- families


def _check_int(name, value, lo):
    if int(value) != value or value < lo:
        raise GraphError(f"{name} must be an integer >= {lo}, got {value!r}")
    return int(value)


def path(n: int) -> Graph:
    n = _check_int("n", n, 1)
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)), name=f"path({n})")


def cycle(n: int) -> Graph:
    n = _check_int("n", n, 3)
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)), name=f"cycle({n})")


def complete(n: int) -> Graph:
    n = _check_int("n", n, 1)
    return Graph(n, tuple(itertools.combinations(range(n), 2)), name=f"complete({n})")


def torus(L: int, d: int) -> Graph:
    """Discrete torus Z_L^d with nearest-neighbour edges (L=2 collapses the double edges)."""
    L = _check_int("L", L, 1)
    d = _check_int("d", d, 1)
    n = L**d
    strides = [L**k for k in range(d)]
    edges = set()
    for idx in range(n):
        coords = [(idx // s) % L for s in strides]
        for k in range(d):
            nb = idx - coords[k] * strides[k] + ((coords[k] + 1) % L) * strides[k]
            if nb != idx:
                edges.add((min(idx, nb), max(idx, nb)))
    return Graph(n, tuple(edges), name=f"torus({L},{d})")


def hypercube(d: int) -> Graph:
    d = _check_int("d", d, 1)
    n = 1 << d
    edges = [(x, x ^ (1 << k)) for x in range(n) for k in range(d) if x < x ^ (1 << k)]
    return Graph(n, tuple(edges), name=f"hypercube({d})")


def bary_tree(b: int, depth: int) -> Graph:
    """Complete b-ary tree of the given depth, rooted at vertex 0 (breadth-first labels)."""
    b = _check_int("b", b, 1)
    depth = _check_int("depth", depth, 0)
    edges = []
    level = [0]
    nxt = 1
    for _ in range(depth):
        new_level = []
        for parent in level:
            for _ in range(b):
                edges.append((parent, nxt))
                new_level.append(nxt)
                nxt += 1
        level = new_level
    return Graph(nxt, tuple(edges), name=f"bary_tree({b},{depth})")


def random_regular(n: int, d: int, seed: int) -> Graph:
    """Uniform-ish random d-regular graph from the pairing model with rejection.

    Pairings with loops, multi-edges or more than one component are rejected;
    after ``RANDOM_REGULAR_MAX_TRIES`` failures a :class:`GraphError` is raised.
    """
    n = _check_int("n", n, 2)
    d = _check_int("d", d, 1)
    if d >= n:
        raise GraphError(f"need d < n for a simple d-regular graph (d={d}, n={n})")
    if (n * d) % 2:
        raise GraphError(f"n*d must be even (n={n}, d={d})")
    rng = np.random.default_rng(seed)
    points = np.repeat(np.arange(n), d)
    for _ in range(RANDOM_REGULAR_MAX_TRIES):
        perm = rng.permutation(points).reshape(-1, 2)
        u, v = perm[:, 0], perm[:, 1]
        if np.any(u == v):
            continue
        pairs = set(zip(np.minimum(u, v).tolist(), np.maximum(u, v).tolist()))
        if len(pairs) != len(perm):
            continue
        try:
            return Graph(n, tuple(pairs), name=f"random_regular({n},{d},{seed})")
        except GraphError:
            continue
    raise GraphError(f"no simple connected {d}-regular graph on {n} vertices after "
                     f"{RANDOM_REGULAR_MAX_TRIES} pairings")


_FAMILIES = {
    "cycle": cycle,
    "path": path,
    "complete": complete,
    "torus": torus,
    "hypercube": hypercube,
    "bary_tree": bary_tree,
    "tree": bary_tree,
    "random_regular": random_regular,
    "rrg": random_regular,
}


def make_family(family: str, *params) -> Graph:
    """Build a named family, e.g. ``make_family("torus", 4, 2)``."""
    try:
        builder = _FAMILIES[family]
    except KeyError:
        raise GraphError(f"unknown family {family!r}; known: {sorted(_FAMILIES)}") from None
    try:
        return builder(*params)
    except TypeError as exc:
        raise GraphError(f"bad parameters for {family}: {params}") from exc


def parse_graph_spec(spec: str) -> Graph:
    """Parse ``family:a,b,...`` (e.g. ``cycle:6``, ``torus:4,2``) or ``file:<path>``."""
    family, _, rest = spec.partition(":")
    family = family.strip()
    if family == "file":
        return read_edgelist(rest)
    params = [int(tok) for tok in rest.split(",") if tok.strip()]
    return make_family(family, *params)


# ---------------------------------------------------------------- edge lists


def write_edgelist(G: Graph, dest) -> str:
    text = "\n".join([f"{G.n} {G.m}"] + [f"{u} {v}" for u, v in G.edges]) + "\n"
    if dest is not None:
        Path(dest).write_text(text)
    return text


def read_edgelist(source) -> Graph:
    """Read the ``n m`` header followed by ``m`` lines ``u v``.

    ``source`` is a path, or the text itself when it contains a newline.
    """
    text = source if "\n" in str(source) else Path(source).read_text()
    lines = [ln.split() for ln in text.splitlines() if ln.strip()]
    n, m = int(lines[0][0]), int(lines[0][1])
    if len(lines) - 1 != m:
        raise GraphError(f"header announces {m} edges, found {len(lines) - 1}")
    edges = tuple((int(a), int(b)) for a, b in lines[1:])
    return Graph(n, edges, name=f"edgelist(n={n})")
