"""Quadratic (Dirichlet-type) forms on enumerated state spaces and their comparison."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from ..graph import Graph
from .generators import SparseGenerator, cbsep_generator, fa1f_generator
from .states import StateSpace, bernoulli_measure, enumerate_states

__all__ = [
    "QuadraticForm",
    "InfeasibleComparison",
    "dirichlet_form",
    "form_from_generator",
    "form_ratio_max",
    "FORM_KINDS",
]

FORM_KINDS = ("cbsep", "fa1f", "sep_G", "bl_Kn", "single_flip")


class InfeasibleComparison(ValueError):
    """The denominator form vanishes on a direction where the numerator does not."""


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """``f -> f^T M f`` for a symmetric positive semidefinite sparse ``M``."""

    matrix: sp.csr_matrix
    space: StateSpace
    kind: str = ""

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, f) -> float:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.dim,):
            raise ValueError(f"function has shape {f.shape}, form acts on dimension {self.dim}")
        return float(f @ (self.matrix @ f))

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def _form_from_kernel(K: sp.spmatrix, space, kind) -> QuadraticForm:
    """Form ``1/2 sum_{a,b} K[a,b] (f(b) - f(a))^2``."""
    K = sp.csr_matrix(K)
    Ks = (K + K.T) * 0.5
    deg = np.asarray(Ks.sum(axis=1)).ravel()
    M = (sp.diags(deg) - Ks).tocsr()
    M.sum_duplicates()
    return QuadraticForm(M, space, kind)


def form_from_generator(gen: SparseGenerator, kind: str = "") -> QuadraticForm:
    """``<f, -Q f>_mu`` of a reversible generator."""
    M = -(sp.diags(gen.mu) @ gen.Q)
    M = ((M + M.T) * 0.5).tocsr()
    return QuadraticForm(M, gen.space, kind or gen.label)


def _swap_kernel(space, mu, pairs, weight):
    codes = space.codes
    rows, cols, vals = [], [], []
    idx = np.arange(space.dim)
    for x, y in pairs:
        differ = ((codes >> x) & 1) != ((codes >> y) & 1)
        tgt = codes[differ] ^ np.int64((1 << x) | (1 << y))
        rows.append(idx[differ])
        cols.append(space.index(tgt))
        vals.append(weight * mu[differ])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(space.dim, space.dim))


def _single_flip_kernel(space, mu, n, p):
    codes = space.codes
    rows, cols, vals = [], [], []
    idx = np.arange(space.dim)
    for y in range(n):
        empty = ((codes >> y) & 1) == 0
        rows.append(idx[empty])
        cols.append(space.index(codes[empty] | np.int64(1 << y)))
        vals.append(2.0 * p * mu[empty])
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(space.dim, space.dim))


def dirichlet_form(kind: str, G: Graph, p: float, space: StateSpace | None = None) -> QuadraticForm:
    """Quadratic forms w.r.t. the conditioned Bernoulli measure of ``space``.

    ``cbsep``/``fa1f``
        Dirichlet forms of the two chains on ``Omega_+``.
    ``sep_G``
        ``1/2 sum_e mu((f(w^e) - f(w))^2)``, edge swaps of ``G``.
    ``bl_Kn``
        ``1/(2n) sum_{pairs} mu((f(w^e) - f(w))^2)``, swaps over all vertex pairs.
    ``single_flip``
        ``p sum_y mu((f(w^y) - f(w))^2 (1 - w_y))``.

    ``space`` defaults to ``Omega_+``; the swap forms also accept a
    fixed-particle-number sector.
    """
    if space is None:
        space = enumerate_states(G, "omega_plus")
    if space.radix != 2 or space.n != G.n:
        raise ValueError("form needs a binary state space on the vertices of G")
    if kind == "cbsep":
        return form_from_generator(cbsep_generator(G, p, space=space), "cbsep")
    if kind == "fa1f":
        return form_from_generator(fa1f_generator(G, p, space=space), "fa1f")
    mu = bernoulli_measure(space, p)
    if kind == "sep_G":
        return _form_from_kernel(_swap_kernel(space, mu, G.edges, 1.0), space, kind)
    if kind == "bl_Kn":
        pairs = itertools.combinations(range(G.n), 2)
        return _form_from_kernel(_swap_kernel(space, mu, pairs, 1.0 / G.n), space, kind)
    if kind == "single_flip":
        return _form_from_kernel(_single_flip_kernel(space, mu, G.n, p), space, kind)
    raise ValueError(f"unknown form kind {kind!r}; expected one of {FORM_KINDS}")


def form_ratio_max(A: QuadraticForm, B: QuadraticForm, rtol: float = 1e-10) -> float:
    """``sup A(f)/B(f)`` over ``f`` orthogonal to ``ker B`` (dense generalized eigenproblem).

    Raises :class:`InfeasibleComparison` unless ``ker B`` is contained in ``ker A``.
    """
    if A.dim != B.dim:
        raise ValueError(f"dimension mismatch: {A.dim} vs {B.dim}")
    a, b = A.dense(), B.dense()
    bvals, bvecs = la.eigh(b)
    scale = max(abs(bvals).max(), abs(la.eigvalsh(a)).max(), 1e-300)
    pos = bvals > rtol * scale
    kernel = bvecs[:, ~pos]
    if kernel.size and np.abs(a @ kernel).max() > 1e3 * rtol * scale:
        raise InfeasibleComparison("ker(B) is not contained in ker(A)")
    U = bvecs[:, pos] / np.sqrt(bvals[pos])
    reduced = U.T @ a @ U
    return float(la.eigvalsh((reduced + reduced.T) * 0.5)[-1])
