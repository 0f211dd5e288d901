"""Enumerated configuration spaces and their product reference measures.

Binary configurations are bitmasks (bit ``x`` is the occupation of vertex
``x``). Configurations over a general finite alphabet ``S = {0..s-1}`` are
mixed-radix integers whose base-``s`` digit ``x`` is the state of vertex ``x``.
Codes are kept sorted, so index lookup is a binary search.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

__all__ = [
    "SizeError",
    "StateSpace",
    "enumerate_states",
    "enumerate_general_states",
    "bernoulli_measure",
    "product_measure",
    "popcount",
    "MAX_BINARY_SITES",
    "MAX_GENERAL_STATES",
]

MAX_BINARY_SITES = 24
MAX_GENERAL_STATES = 10**6


class SizeError(ValueError):
    """State space would exceed the enumeration cap."""


def popcount(codes: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(codes, dtype=np.uint64)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class StateSpace:
    n: int
    radix: int
    codes: np.ndarray
    constraint: str
    occupied: frozenset = field(default=frozenset({1}))

    def __len__(self) -> int:
        return len(self.codes)

    @property
    def dim(self) -> int:
        return len(self.codes)

    def index(self, codes, strict: bool = True) -> np.ndarray:
        """Indices of ``codes``; with ``strict=False`` missing codes map to -1."""
        codes = np.asarray(codes, dtype=np.int64)
        idx = np.searchsorted(self.codes, codes)
        idx_c = np.minimum(idx, len(self.codes) - 1)
        found = self.codes[idx_c] == codes
        if strict and not np.all(found):
            missing = np.asarray(codes)[~found].ravel()[:5]
            raise KeyError(f"codes not in state space: {missing.tolist()}")
        return np.where(found, idx_c, -1)

    @cached_property
    def digits(self) -> np.ndarray:
        """``(dim, n)`` array of per-vertex states."""
        out = np.empty((self.dim, self.n), dtype=np.int64)
        rest = self.codes.copy()
        for x in range(self.n):
            out[:, x] = rest % self.radix
            rest //= self.radix
        return out

    @cached_property
    def particle_counts(self) -> np.ndarray:
        if self.radix == 2:
            return popcount(self.codes)
        return np.isin(self.digits, sorted(self.occupied)).sum(axis=1)

    def encode(self, config) -> int:
        config = np.asarray(config, dtype=np.int64)
        return int(np.sum(config * self.radix ** np.arange(self.n, dtype=np.int64)))

    def config(self, i: int) -> np.ndarray:
        return self.digits[i].copy()


def _resolve_n(G_or_n) -> int:
    return int(G_or_n) if np.isscalar(G_or_n) else int(G_or_n.n)


def enumerate_states(G_or_n, constraint: str = "omega_plus", k: int | None = None) -> StateSpace:
    """Binary configurations on ``n`` sites.

    ``constraint`` is one of ``"omega_plus"`` (at least one particle), ``"all"``,
    ``"N_at_least_2"`` or ``"fixed_N"`` (exactly ``k`` particles).
    """
    n = _resolve_n(G_or_n)
    if n > MAX_BINARY_SITES:
        raise SizeError(f"n={n} exceeds the enumeration cap of {MAX_BINARY_SITES} sites")
    codes = np.arange(1 << n, dtype=np.int64)
    N = popcount(codes)
    if constraint == "omega_plus":
        keep = N >= 1
    elif constraint == "all":
        keep = np.ones_like(N, dtype=bool)
    elif constraint == "N_at_least_2":
        keep = N >= 2
    elif constraint == "fixed_N":
        if k is None or not 0 <= k <= n:
            raise ValueError(f"fixed_N needs 0 <= k <= n, got k={k}")
        keep = N == k
        constraint = f"fixed_N({k})"
    else:
        raise ValueError(f"unknown constraint {constraint!r}")
    return StateSpace(n=n, radix=2, codes=codes[keep], constraint=constraint)


def enumerate_general_states(G_or_n, s: int, occupied, constraint: str = "omega_plus") -> StateSpace:
    """Configurations in ``S^V`` with ``S = {0..s-1}``; ``occupied`` is the particle class S_1."""
    n = _resolve_n(G_or_n)
    occupied = frozenset(int(a) for a in occupied)
    if not occupied or len(occupied) >= s or not occupied <= set(range(s)):
        raise ValueError("the particle class must be a non-empty proper subset of S")
    if s**n > MAX_GENERAL_STATES:
        raise SizeError(f"|S|^n = {s}^{n} exceeds the cap {MAX_GENERAL_STATES}")
    codes = np.arange(s**n, dtype=np.int64)
    space = StateSpace(n=n, radix=s, codes=codes, constraint="all", occupied=occupied)
    if constraint == "all":
        return space
    if constraint != "omega_plus":
        raise ValueError(f"unknown constraint {constraint!r}")
    keep = space.particle_counts >= 1
    return StateSpace(n=n, radix=s, codes=codes[keep], constraint=constraint, occupied=occupied)


def bernoulli_measure(space: StateSpace, p: float) -> np.ndarray:
    """Product Bernoulli(p) law conditioned on the enumerated set."""
    N = space.particle_counts
    logw = N * np.log(p) + (space.n - N) * np.log1p(-p)
    return np.exp(logw - logsumexp(logw))


def product_measure(space: StateSpace, rho) -> np.ndarray:
    """Product law ``rho^{(x)n}`` conditioned on the enumerated set."""
    logrho = np.log(np.asarray(rho, dtype=float))
    logw = logrho[space.digits].sum(axis=1)
    return np.exp(logw - logsumexp(logw))
