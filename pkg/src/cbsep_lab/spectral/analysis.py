"""Relaxation, log-Sobolev, semigroup and mixing computations for reversible generators."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla
from scipy.optimize import minimize
from scipy.stats import poisson

from .._entropy import excess_xlogx
from ..graph import Graph
from .generators import SparseGenerator, cbsep_generator
from .forms import form_from_generator
from .states import enumerate_states, bernoulli_measure

__all__ = [
    "EigensolverError",
    "spectral_gap",
    "relaxation_time",
    "entropy",
    "variance",
    "LogSobolevResult",
    "logsob_constant",
    "logsob_ratio",
    "semigroup",
    "Propagator",
    "mixing_times",
    "MixingTimes",
    "entropy_decomposition",
    "RestrictedChain",
    "restricted_gap_and_hitting",
    "DENSE_LIMIT",
]

DENSE_LIMIT = 2500
TV_THRESHOLD = 1.0 / (2.0 * math.e)
L2_THRESHOLD = 1.0 / math.e


class EigensolverError(RuntimeError):
    """Iterative eigensolver failed to converge."""


def _lowest_nonground(S: sp.csr_matrix, ground: np.ndarray | None, tol=1e-12) -> float:
    """Smallest eigenvalue of ``-S`` on the orthogonal complement of ``ground``."""
    dim = S.shape[0]
    if dim <= DENSE_LIMIT:
        A = -S.toarray()
        if ground is not None:
            A = A + 10.0 * (abs(A).sum(axis=1).max() + 1.0) * np.outer(ground, ground)
        return float(la.eigvalsh(A, subset_by_index=[0, 0])[0])
    shift = 10.0 * (abs(S).sum(axis=1).max() + 1.0)

    def matvec(v):
        out = -(S @ v)
        if ground is not None:
            out = out + shift * ground * (ground @ v)
        return out

    op = sla.LinearOperator((dim, dim), matvec=matvec, dtype=float)
    v0 = np.random.default_rng(12345).standard_normal(dim)
    try:
        vals = sla.eigsh(op, k=1, which="SA", tol=tol, v0=v0, maxiter=50 * dim,
                         ncv=min(dim, 64), return_eigenvectors=False)
    except sla.ArpackNoConvergence as exc:
        raise EigensolverError(f"eigsh did not converge; partial eigenvalues {exc.eigenvalues}") from exc
    return float(vals[0])


def spectral_gap(gen: SparseGenerator) -> float:
    """Smallest non-zero eigenvalue of ``-Q`` in ``L^2(mu)``."""
    return _lowest_nonground(gen.symmetrized(), np.sqrt(gen.mu))


def relaxation_time(gen: SparseGenerator) -> float:
    return 1.0 / spectral_gap(gen)


def _second_eigvec(gen: SparseGenerator) -> tuple[float, np.ndarray]:
    S = gen.symmetrized()
    ground = np.sqrt(gen.mu)
    if gen.dim <= DENSE_LIMIT:
        A = -S.toarray() + 10.0 * (abs(S).sum(axis=1).max() + 1.0) * np.outer(ground, ground)
        w, v = la.eigh(A, subset_by_index=[0, 0])
        return float(w[0]), v[:, 0] / ground
    shift = 10.0 * (abs(S).sum(axis=1).max() + 1.0)
    op = sla.LinearOperator(S.shape, matvec=lambda v: -(S @ v) + shift * ground * (ground @ v),
                            dtype=float)
    v0 = np.random.default_rng(12345).standard_normal(gen.dim)
    w, v = sla.eigsh(op, k=1, which="SA", tol=1e-10, v0=v0, maxiter=50 * gen.dim)
    return float(w[0]), v[:, 0] / ground


def entropy(mu: np.ndarray, f) -> float:
    """``Ent_mu(f^2) = mu(f^2 log(f^2 / mu(f^2)))`` with ``0 log 0 = 0``."""
    f2 = np.asarray(f, dtype=float) ** 2
    m = float(mu @ f2)
    if m <= 0:
        return 0.0
    with np.errstate(divide="ignore"):
        z = np.log(f2 / m)
    return m * float(mu @ excess_xlogx(z))


def variance(mu: np.ndarray, f) -> float:
    f = np.asarray(f, dtype=float)
    mean = float(mu @ f)
    return float(mu @ (f - mean) ** 2)


# ------------------------------------------------------------ log-Sobolev


def logsob_ratio(form_matrix, mu, f) -> float:
    """``D(f) / Ent(f^2)``."""
    f = np.asarray(f, dtype=float)
    return float(f @ (form_matrix @ f)) / entropy(mu, f)


@dataclass(frozen=True)
class LogSobolevResult:
    witness: float
    bracket: tuple[float, float]
    gap: float
    mu_star: float
    best_f: np.ndarray
    restarts: int
    stagnated: bool

    @property
    def inverse_bracket(self) -> tuple[float, float]:
        """Bounds on the best log-Sobolev constant ``1/alpha``."""
        return 1.0 / self.bracket[1], 1.0 / self.bracket[0]


def _ratio_and_grad(u, M, mu):
    u = u - u.max()
    f = np.exp(u)
    # constants are in the kernel; centring keeps D accurate when f is nearly flat
    g = f - float(mu @ f)
    Mf = M @ g
    D = float(g @ Mf)
    f2 = f * f
    m = float(mu @ f2)
    with np.errstate(divide="ignore"):
        logratio = np.log(f2 / m)
    ent = m * float(mu @ excess_xlogx(logratio))
    # flatter f is rounding noise; the gap/2 candidate covers that limit
    if ent <= 1e-10 * m:
        return np.inf, np.zeros_like(u)
    r = D / ent
    with np.errstate(invalid="ignore"):
        weighted = np.where(f > 0, mu * f * logratio, 0.0)
    grad_f = (2.0 * Mf - r * 2.0 * weighted) / ent
    return r, grad_f * f


def logsob_constant(gen: SparseGenerator, restarts: int = 20, seed: int = 0,
                    maxiter: int = 3000) -> LogSobolevResult:
    """Upper bound on the log-Sobolev constant ``alpha`` with its two-sided bracket.

    ``alpha = inf_f D(f)/Ent(f^2)``; the witness is the smallest ratio found
    by L-BFGS over ``f = exp(u)`` from the second-eigenvector warm starts and
    ``restarts`` random starts. The limit ``gap/2`` of the ratio along
    ``1 + eps*psi`` (``eps -> 0``) is included as a candidate. The bracket is
    ``[gap/(2 + log(1/mu_*)), gap/2]``.
    """
    mu = gen.mu
    M = form_from_generator(gen).matrix
    gap, psi = _second_eigvec(gen)
    mu_star = float(mu.min())
    bracket = (gap / (2.0 + math.log(1.0 / mu_star)), gap / 2.0)

    starts = []
    psi_n = psi / np.abs(psi).max()
    for eps in (0.3, 0.7, 0.95):
        starts.append(np.log1p(eps * psi_n))
        starts.append(np.log1p(-eps * psi_n))
    rng = np.random.default_rng(seed)
    for k in range(restarts):
        scale = 0.5 + 3.0 * k / max(restarts - 1, 1)
        starts.append(rng.standard_normal(gen.dim) * scale)

    best, best_f = gap / 2.0, 1.0 + 1e-6 * psi_n
    stagnated = False
    for u0 in starts:
        res = minimize(_ratio_and_grad, u0, args=(M, mu), jac=True, method="L-BFGS-B",
                       options={"maxiter": maxiter, "gtol": 1e-12, "ftol": 1e-15})
        if not np.isfinite(res.fun):
            continue
        stagnated |= res.status == 1
        if res.fun < best:
            best, best_f = float(res.fun), np.exp(res.x - res.x.max())
    return LogSobolevResult(best, bracket, gap, mu_star, best_f, len(starts), stagnated)


# ------------------------------------------------------------ semigroup


def semigroup(gen: SparseGenerator, t: float, initial, tail: float = 1e-14) -> np.ndarray:
    """Law at time ``t`` from ``initial`` (a distribution, or rows of distributions).

    Uniformization: ``e^{tQ} = sum_k Poisson(k; L t) P^k`` with ``P = I + Q/L`` and
    ``L = 1.01 max |Q_ii|``, truncated where the Poisson tail drops below ``tail``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    nu = np.array(initial, dtype=float)
    if t == 0:
        return nu
    rate = 1.01 * float(np.abs(gen.Q.diagonal()).max())
    if rate == 0:
        return nu
    PT = (sp.identity(gen.dim, format="csr") + gen.Q / rate).T.tocsr()
    lam = rate * t
    k_lo = int(poisson.ppf(tail, lam)) if lam > 50 else 0
    k_hi = int(poisson.isf(tail, lam)) + 1
    ks = np.arange(k_lo, k_hi + 1)
    w = poisson.pmf(ks, lam)
    w /= w.sum()
    cur = nu.T.copy()
    for _ in range(k_lo):
        cur = PT @ cur
    out = w[0] * cur
    for wk in w[1:]:
        cur = PT @ cur
        out += wk * cur
    return out.T


class Propagator:
    """All-starts transition kernels ``P_t`` of a reversible generator.

    Dense spectral decomposition up to ``DENSE_LIMIT`` states, otherwise
    uniformization applied to blocks of point masses.
    """

    def __init__(self, gen: SparseGenerator, block: int = 256):
        self.gen = gen
        self.block = block
        self.mu = gen.mu
        self.spectral = gen.dim <= DENSE_LIMIT
        if self.spectral:
            w, V = la.eigh(-gen.symmetrized().toarray())
            self.evals = np.clip(w[1:], 0.0, None)
            self.V = V[:, 1:]
            self.sq = np.sqrt(gen.mu)

    def _blocks(self, t):
        dim = self.gen.dim
        for lo in range(0, dim, self.block):
            hi = min(dim, lo + self.block)
            if self.spectral:
                decay = self.V[lo:hi] * np.exp(-self.evals * t)
                dev = (decay @ self.V.T) * (self.sq[None, :] / self.sq[lo:hi, None])
            else:
                eye = np.zeros((hi - lo, dim))
                eye[np.arange(hi - lo), np.arange(lo, hi)] = 1.0
                dev = semigroup(self.gen, t, eye) - self.mu[None, :]
            yield lo, hi, dev

    def kernel(self, t: float) -> np.ndarray:
        out = np.empty((self.gen.dim, self.gen.dim))
        for lo, hi, dev in self._blocks(t):
            out[lo:hi] = dev + self.mu[None, :]
        return out

    def tv_distances(self, t: float) -> np.ndarray:
        out = np.empty(self.gen.dim)
        for lo, hi, dev in self._blocks(t):
            out[lo:hi] = 0.5 * np.abs(dev).sum(axis=1)
        return out

    def l2_distances(self, t: float) -> np.ndarray:
        """``||h_w^t - 1||_{L^2(mu)}`` for every start ``w``."""
        if self.spectral:
            phi2 = (self.V / self.sq[:, None]) ** 2
            return np.sqrt(np.maximum(phi2 @ np.exp(-2.0 * self.evals * t), 0.0))
        out = np.empty(self.gen.dim)
        for lo, hi, dev in self._blocks(t):
            out[lo:hi] = np.sqrt(((dev**2) / self.mu[None, :]).sum(axis=1))
        return out


def _first_crossing(dist, threshold, t_guess, rtol=1e-10):
    if dist(0.0) <= threshold:
        return 0.0
    hi = max(t_guess, 1e-3)
    while dist(hi) > threshold:
        hi *= 2.0
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if dist(mid) > threshold:
            lo = mid
        else:
            hi = mid
    return hi


@dataclass(frozen=True)
class MixingTimes:
    t_mix: float
    T2: float


def mixing_times(gen: SparseGenerator, propagator: Propagator | None = None,
                 tv_threshold: float = TV_THRESHOLD, l2_threshold: float = L2_THRESHOLD) -> MixingTimes:
    """Total-variation (threshold ``1/(2e)``) and L^2 (threshold ``1/e``) mixing times.

    Both maxima over starting states are non-increasing in ``t``; crossings are
    found by doubling and bisection.
    """
    if gen.dim > 10**4:
        raise ValueError(f"mixing_times is capped at 10^4 states (got {gen.dim})")
    prop = propagator or Propagator(gen)
    guess = relaxation_time(gen)
    t_mix = _first_crossing(lambda t: prop.tv_distances(t).max(), tv_threshold, guess)
    T2 = _first_crossing(lambda t: prop.l2_distances(t).max(), l2_threshold, guess)
    return MixingTimes(t_mix, T2)


# ------------------------------------------------------------ entropy by particle number


def entropy_decomposition(G: Graph, p: float, f) -> tuple[float, float]:
    """``(mu(Ent(f^2 | N)), Ent(mu(f^2 | N)))`` for ``f`` on ``Omega_+``."""
    space = enumerate_states(G, "omega_plus")
    mu = bernoulli_measure(space, p)
    f = np.asarray(f, dtype=float)
    N = space.particle_counts
    conditional = 0.0
    gamma = np.zeros(G.n + 1)
    cond_f2 = np.zeros(G.n + 1)
    for k in range(1, G.n + 1):
        sel = N == k
        gamma[k] = mu[sel].sum()
        mu_k = mu[sel] / gamma[k]
        conditional += gamma[k] * entropy(mu_k, f[sel])
        cond_f2[k] = float(mu_k @ f[sel] ** 2)
    projected = entropy(gamma[1:], np.sqrt(cond_f2[1:]))
    return conditional, projected


# ------------------------------------------------------------ killed chain on {N >= 2}


@dataclass(frozen=True)
class RestrictedChain:
    lambda0: float
    E_tau: float
    E_tau_from_two: float
    mu_two_given_at_least_two: float
    mu_at_least_two: float
    mu_one: float


def restricted_gap_and_hitting(G: Graph, p: float) -> RestrictedChain:
    """CBSEP killed on reaching ``{N = 1}``.

    ``lambda0`` is the bottom of the spectrum of ``-Q`` with Dirichlet
    condition on ``{N = 1}``; ``E_tau`` is the mean absorption time from
    ``mu( . | N >= 2)`` and ``E_tau_from_two`` from ``mu( . | N = 2)``.
    """
    if G.n > 20:
        raise ValueError("restricted_gap_and_hitting is capped at n <= 20")
    if G.n < 2:
        raise ValueError("need at least two vertices")
    gen = cbsep_generator(G, p)
    N = gen.space.particle_counts
    keep = np.flatnonzero(N >= 2)
    mu = gen.mu
    QR = gen.Q[keep][:, keep].tocsr()
    muR = mu[keep] / mu[keep].sum()
    s = np.sqrt(muR)
    SR = sp.diags(s) @ QR @ sp.diags(1.0 / s)
    SR = ((SR + SR.T) * 0.5).tocsr()
    lambda0 = _lowest_nonground(SR, None)
    rhs = np.ones(len(keep))
    if len(keep) <= DENSE_LIMIT:
        h = la.solve(-QR.toarray(), rhs)
    else:
        y, info = sla.cg(-SR, s * rhs, rtol=1e-13, maxiter=100 * len(keep))
        if info != 0:
            raise EigensolverError(f"cg did not converge (info={info})")
        h = y / s
    E_tau = float(muR @ h)
    two = N[keep] == 2
    mu_two = muR[two] / muR[two].sum()
    return RestrictedChain(
        lambda0=lambda0,
        E_tau=E_tau,
        E_tau_from_two=float(mu_two @ h[two]),
        mu_two_given_at_least_two=float(muR[two].sum()),
        mu_at_least_two=float(mu[keep].sum()),
        mu_one=float(mu[N == 1].sum()),
    )
