"""Sparse rate matrices for CBSEP, FA-1f and the generalised CBSEP."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..graph import Graph
from .states import (
    StateSpace,
    bernoulli_measure,
    enumerate_general_states,
    enumerate_states,
    product_measure,
)

__all__ = [
    "SparseGenerator",
    "cbsep_generator",
    "fa1f_generator",
    "csep_generator",
    "gcbsep_generator",
    "cbsep_rates",
    "lump",
    "projection_codes",
]


@dataclass(frozen=True, eq=False)
class SparseGenerator:
    """Rate matrix ``Q`` (rows sum to zero) with its reversible measure ``mu``."""

    Q: sp.csr_matrix
    mu: np.ndarray
    space: StateSpace
    label: str = ""

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @property
    def mu_star(self) -> float:
        return float(self.mu.min())

    def row_sum_residual(self) -> float:
        return float(np.abs(np.asarray(self.Q.sum(axis=1))).max())

    def detailed_balance_residual(self) -> float:
        flux = sp.diags(self.mu) @ self.Q
        diff = flux - flux.T
        return float(np.abs(diff.data).max()) if diff.nnz else 0.0

    def is_irreducible(self) -> bool:
        ncomp, _ = connected_components(self.Q, directed=True, connection="strong")
        return ncomp == 1

    def symmetrized(self) -> sp.csr_matrix:
        """``D^{1/2} Q D^{-1/2}``, symmetric for a reversible chain."""
        s = np.sqrt(self.mu)
        S = sp.diags(s) @ self.Q @ sp.diags(1.0 / s)
        return ((S + S.T) * 0.5).tocsr()

    def dense(self) -> np.ndarray:
        return self.Q.toarray()


def _check_p(p):
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if p > 0.5:
        warnings.warn(f"p={p} > 1/2; bounds are stated for p bounded away from 1", stacklevel=3)


def _assemble(space, rows, target_codes, rates, mu, label, drop_outside=False):
    rows = np.concatenate(rows) if rows else np.zeros(0, dtype=np.int64)
    rates = np.concatenate(rates) if rates else np.zeros(0)
    target_codes = np.concatenate(target_codes) if target_codes else np.zeros(0, dtype=np.int64)
    cols = space.index(target_codes, strict=not drop_outside)
    keep = (rates > 0) & (cols >= 0)
    rows, cols, rates = rows[keep], cols[keep], rates[keep]
    off = sp.csr_matrix((rates, (rows, cols)), shape=(space.dim, space.dim))
    diag = np.asarray(off.sum(axis=1)).ravel()
    Q = (off - sp.diags(diag)).tocsr()
    Q.sum_duplicates()
    Q.sort_indices()
    return SparseGenerator(Q=Q, mu=mu, space=space, label=label)


def cbsep_rates(p: float) -> dict:
    """Move, branch and per-side coalescence rates of one edge."""
    return {
        "move": (1 - p) / (2 - p),
        "branch": p / (2 - p),
        "coalesce_each": (1 - p) / (2 - p),
        "coalesce_total": 2 * (1 - p) / (2 - p),
    }


def cbsep_generator(G: Graph, p: float, space: StateSpace | None = None,
                    branching: bool = True) -> SparseGenerator:
    """CBSEP on ``Omega_+``: every non-empty edge resamples from ``pi_e( . | E_e)`` at rate one.

    With ``branching=False`` this is the coalescing walk system (CSEP), which is
    not reversible w.r.t. ``mu``; ``mu`` is still attached for convenience.
    """
    _check_p(p)
    space = space or enumerate_states(G, "omega_plus")
    codes = space.codes
    r = cbsep_rates(p)
    rows, targets, rates = [], [], []
    idx = np.arange(space.dim, dtype=np.int64)

    def add(mask, tgt, rate):
        rows.append(idx[mask])
        targets.append(tgt[mask])
        rates.append(np.full(int(mask.sum()), rate))

    for x, y in G.edges:
        bx = (codes >> x) & 1
        by = (codes >> y) & 1
        mx, my = np.int64(1 << x), np.int64(1 << y)
        only_x = (bx == 1) & (by == 0)
        only_y = (bx == 0) & (by == 1)
        both = (bx == 1) & (by == 1)
        add(only_x, codes ^ mx ^ my, r["move"])
        add(only_y, codes ^ mx ^ my, r["move"])
        if branching:
            add(only_x, codes | my, r["branch"])
            add(only_y, codes | mx, r["branch"])
        add(both, codes ^ mx, r["coalesce_each"])
        add(both, codes ^ my, r["coalesce_each"])
    label = "cbsep" if branching else "csep"
    return _assemble(space, rows, targets, rates, bernoulli_measure(space, p), label)


def csep_generator(G: Graph, p: float) -> SparseGenerator:
    return cbsep_generator(G, p, branching=False)


def fa1f_generator(G: Graph, p: float, space: StateSpace | None = None) -> SparseGenerator:
    """FA-1f: vertex ``x`` is resampled from Bernoulli(p) at rate one iff a neighbour is occupied."""
    _check_p(p)
    space = space or enumerate_states(G, "omega_plus")
    codes = space.codes
    idx = np.arange(space.dim, dtype=np.int64)
    rows, targets, rates = [], [], []
    for x in range(G.n):
        nb_mask = 0
        for y in G.adjacency[x]:
            nb_mask |= 1 << y
        facilitated = (codes & np.int64(nb_mask)) != 0
        bit = (codes >> x) & 1
        mx = np.int64(1 << x)
        fill = facilitated & (bit == 0)
        empty = facilitated & (bit == 1)
        rows += [idx[fill], idx[empty]]
        targets += [codes[fill] | mx, codes[empty] ^ mx]
        rates += [np.full(int(fill.sum()), p), np.full(int(empty.sum()), 1 - p)]
    return _assemble(space, rows, targets, rates, bernoulli_measure(space, p), "fa1f")


def gcbsep_generator(G: Graph, rho, occupied, space: StateSpace | None = None) -> SparseGenerator:
    """Generalised CBSEP over ``S = {0..len(rho)-1}`` with particle class ``occupied``.

    Each edge with a particle at either endpoint is resampled at rate one from
    ``rho (x) rho`` conditioned on that event.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho <= 0) or abs(rho.sum() - 1) > 1e-12:
        raise ValueError("rho must be a strictly positive probability vector")
    s = len(rho)
    occupied = frozenset(int(a) for a in occupied)
    space = space or enumerate_general_states(G, s, occupied, "omega_plus")
    p = float(rho[sorted(occupied)].sum())
    if not 0 < p < 1:
        raise ValueError("both partition classes need positive mass")
    lam = 1.0 - (1.0 - p) ** 2
    in_s1 = np.zeros(s, dtype=bool)
    in_s1[sorted(occupied)] = True
    digits = space.digits
    codes = space.codes
    idx = np.arange(space.dim, dtype=np.int64)
    rows, targets, rates = [], [], []
    for x, y in G.edges:
        a, b = digits[:, x], digits[:, y]
        active = in_s1[a] | in_s1[b]
        wx, wy = np.int64(s**x), np.int64(s**y)
        for a2 in range(s):
            for b2 in range(s):
                if not (in_s1[a2] or in_s1[b2]):
                    continue
                move = active & ((a != a2) | (b != b2))
                rows.append(idx[move])
                targets.append(codes[move] + (a2 - a[move]) * wx + (b2 - b[move]) * wy)
                rates.append(np.full(int(move.sum()), rho[a2] * rho[b2] / lam))
    return _assemble(space, rows, targets, rates, product_measure(space, rho), "gcbsep")


def projection_codes(space: StateSpace) -> np.ndarray:
    """Bitmask of occupied sites for every state of a general space."""
    occ = np.isin(space.digits, sorted(space.occupied)).astype(np.int64)
    return (occ << np.arange(space.n, dtype=np.int64)).sum(axis=1)


def lump(gen: SparseGenerator, labels: np.ndarray, target: StateSpace):
    """Lump ``gen`` through the map state -> ``labels`` (codes in ``target``).

    Returns ``(Q_lumped, spread)`` where ``Q_lumped[a, b]`` is the rate from a
    representative of class ``a`` into class ``b`` and ``spread`` is the largest
    difference of that rate across representatives (zero iff strongly lumpable).
    """
    cls = target.index(labels)
    C = sp.csr_matrix((np.ones(gen.dim), (np.arange(gen.dim), cls)), shape=(gen.dim, target.dim))
    into = (gen.Q @ C).toarray()
    lo = np.full((target.dim, target.dim), np.inf)
    hi = np.full((target.dim, target.dim), -np.inf)
    np.minimum.at(lo, cls, into)
    np.maximum.at(hi, cls, into)
    return hi, float(np.max(hi - lo))
