"""Law of the particle number and its birth-death chain on ``{1..n}``.

``gamma`` is Bin(n, p) conditioned to be positive. The chain has death rate
``k`` from ``k`` and birth rate ``(n-k) p/(1-p)``; it is reversible w.r.t.
``gamma``, with Dirichlet form ``sum_{k>=2} gamma(k) k (g(k) - g(k-1))^2``.
Everything is kept in log space so that ``n`` in the hundreds with small
``p`` stays finite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln, logsumexp

from ._entropy import excess_xlogx

__all__ = [
    "GammaMeasure",
    "gamma_measure",
    "bd_rates",
    "bd_dirichlet",
    "bd_entropy",
    "miclo_bound",
    "MicloBound",
    "bd_best_logsob",
    "BestLogSob",
    "ratio_growth_sequence",
]


@dataclass(frozen=True, eq=False)
class GammaMeasure:
    n: int
    p: float
    log_weights: np.ndarray  # index k-1 holds log gamma(k)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    def __getitem__(self, k: int) -> float:
        if not 1 <= k <= self.n:
            raise IndexError(k)
        return float(self.weights[k - 1])

    @cached_property
    def log_upper_tails(self) -> np.ndarray:
        """``log gamma(N >= j)`` at index ``j-1``."""
        return _log_tails(self.log_weights)

    @cached_property
    def log_lower_tails(self) -> np.ndarray:
        """``log gamma(N <= j)`` at index ``j-1``."""
        return _log_tails(self.log_weights[::-1])[::-1]


def _log_tails(logw: np.ndarray) -> np.ndarray:
    """Accurate log of the suffix sums of a normalised law, also when a tail is close to 1."""
    suffix = np.logaddexp.accumulate(logw[::-1])[::-1]
    prefix = np.concatenate([[-np.inf], np.logaddexp.accumulate(logw)[:-1]])
    out = suffix.copy()
    near_one = prefix < math.log(0.5)
    out[near_one] = np.log1p(-np.exp(prefix[near_one]))
    return out


def gamma_measure(n: int, p: float) -> GammaMeasure:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    k = np.arange(1, n + 1)
    logw = (gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)
            + k * math.log(p) + (n - k) * math.log1p(-p))
    return GammaMeasure(n, p, logw - logsumexp(logw))


def bd_rates(n: int, p: float) -> tuple[np.ndarray, np.ndarray]:
    """``(down, up)``: ``down[k-1] = c(k, k-1)``, ``up[k-1] = c(k, k+1)``."""
    k = np.arange(1, n + 1, dtype=float)
    down = np.where(k >= 2, k, 0.0)
    up = (n - k) * p / (1 - p)
    return down, up


def bd_dirichlet(gm: GammaMeasure, g) -> float:
    g = np.asarray(g, dtype=float)
    k = np.arange(2, gm.n + 1)
    return float(np.sum(gm.weights[1:] * k * np.diff(g) ** 2))


def bd_entropy(gm: GammaMeasure, g) -> float:
    """``Ent_gamma(g^2)`` with ``0 log 0 = 0``."""
    g2 = np.asarray(g, dtype=float) ** 2
    w = gm.weights
    m = float(w @ g2)
    if m <= 0:
        return 0.0
    pos = g2 > 0
    return float(np.sum(w[pos] * g2[pos] * np.log(g2[pos] / m)))


@dataclass(frozen=True)
class MicloBound:
    C_plus: float
    C_minus: float
    C_star: float
    i: int


def miclo_bound(n: int, p: float) -> MicloBound:
    """Hardy-type quantities ``C_+``, ``C_-`` around ``i = max(2, ceil(pn))``.

    ``C_+ = max_{j>i} (sum_{k=i+1}^{j} 1/(gamma(k) c(k,k-1))) gamma(N>=j) |log gamma(N>=j)|``
    ``C_- = max_{j<i} (sum_{k=j}^{i-1} 1/(gamma(k) c(k,k+1))) gamma(N<=j) |log gamma(N<=j)|``

    An empty index range contributes 0.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    gm = gamma_measure(n, p)
    m = math.ceil(p * n)
    i = max(2, m)
    down, up = bd_rates(n, p)
    logw = gm.log_weights

    c_plus = 0.0
    if i + 1 <= n:
        ks = np.arange(i + 1, n + 1)
        log_terms = -(logw[ks - 1] + np.log(down[ks - 1]))
        log_S = np.logaddexp.accumulate(log_terms)
        log_tail = gm.log_upper_tails[ks - 1]
        vals = np.exp(log_S + log_tail) * np.abs(log_tail)
        c_plus = float(vals.max())

    c_minus = 0.0
    if i - 1 >= 1:
        js = np.arange(1, i)
        log_terms = -(logw[js - 1] + np.log(up[js - 1]))
        log_S = np.logaddexp.accumulate(log_terms[::-1])[::-1]
        log_tail = gm.log_lower_tails[js - 1]
        vals = np.exp(log_S + log_tail) * np.abs(log_tail)
        c_minus = float(vals.max())
    return MicloBound(c_plus, c_minus, max(c_plus, c_minus), i)


def ratio_growth_sequence(n: int, p: float) -> np.ndarray:
    """``a_l = 1/((m+l) gamma(m+l))`` for ``l = 1..n-m`` with ``m = ceil(pn)``, in log form."""
    gm = gamma_measure(n, p)
    m = math.ceil(p * n)
    ks = np.arange(m + 1, n + 1)
    return -(np.log(ks) + gm.log_weights[ks - 1])


@dataclass(frozen=True)
class BestLogSob:
    """``best_g`` attains ``witness``, except in the near-constant limit where it only approximates it."""

    witness: float
    two_point: float
    linearized: float
    best_g: np.ndarray
    stagnated: bool


def _log_abs_diff_exp(x, y):
    """``log|e^x - e^y|`` (``-inf`` where equal)."""
    d = np.abs(x - y)
    with np.errstate(divide="ignore"):
        return np.maximum(x, y) + np.log(-np.expm1(-d))


def _relative_entropy_terms(z, logw, s):
    """Termwise ``w * excess_xlogx(z)`` with ``s = w e^z``, safe for large ``z``."""
    out = np.exp(logw) * excess_xlogx(np.minimum(z, 1.0))
    big = z >= 1.0
    out[big] = s[big] * (z[big] - 1.0) + np.exp(logw[big])
    return out


def _neg_ratio(v, logw, logk):
    """``-Ent(g^2)/D(g)`` for ``g = exp(v)``, evaluated in log space, with its gradient.

    ``Ent(g^2) = m * sum_k w_k phi(g_k^2/m)``: a sum of non-negative terms, so no
    cancellation when ``g`` departs from a constant only where ``w`` is tiny.
    """
    a = logw + 2.0 * v
    # centre at the dominant site so bulk entries of z are exactly -log1p(.), not rounding noise
    c = v[np.argmax(a)]
    u = v - c
    with np.errstate(over="ignore", invalid="ignore"):
        S = float(np.sum(np.exp(logw) * np.expm1(2.0 * u)))
    ell = math.log1p(S) if -0.5 < S < 1.0 else float(logsumexp(logw + 2.0 * u))
    L = 2.0 * c + ell
    s = np.exp(a - L)
    z = 2.0 * u - ell
    H = float(np.sum(_relative_entropy_terms(z, logw, s)))
    x, y = v[1:], v[:-1]
    b = logw[1:] + logk + 2.0 * _log_abs_diff_exp(x, y)
    if not np.isfinite(b).any():
        return 0.0, np.zeros_like(v)
    logD = logsumexp(b)
    sb = np.exp(b - logD)
    d = x - y
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        dx = np.where((d != 0) & (sb > 0), sb / -np.expm1(-d), 0.0)
        dy = np.where((d != 0) & (sb > 0), -sb / np.expm1(d), 0.0)
    dlogD = np.zeros_like(v)
    dlogD[1:] += 2.0 * dx
    dlogD[:-1] += 2.0 * dy
    scale = math.exp(min(L - logD, 700.0))
    r = scale * H
    grad = r * (2.0 * s - dlogD) + scale * 2.0 * s * (z - H)
    return -r, -grad


def _bd_gap(gm: GammaMeasure) -> tuple[float, np.ndarray]:
    """Spectral gap and second eigenfunction (scaled to max modulus 1) of the chain."""
    n = gm.n
    k = np.arange(1, n + 1, dtype=float)
    up_ratio = np.exp(gm.log_weights[1:] - gm.log_weights[:-1])  # gamma(k+1)/gamma(k)
    diag = np.zeros(n)
    diag[1:] += k[1:]
    diag[:-1] += k[1:] * up_ratio
    off = -k[1:] * np.sqrt(up_ratio)
    A = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    vals, vecs = np.linalg.eigh(A)
    with np.errstate(divide="ignore"):
        logabs = np.log(np.abs(vecs[:, 1])) - 0.5 * gm.log_weights
    psi = np.sign(vecs[:, 1]) * np.exp(logabs - logabs.max())
    return float(vals[1]), psi


def _indicator_candidates(gm: GammaMeasure) -> np.ndarray:
    """``Ent/D`` of ``1_{N >= j}`` and ``1_{N <= j-1}`` for ``j = 2..n``, in closed form.

    Both have ``Ent = t |log t|`` (``t`` the mass of the set) and ``D = j gamma(j)``.
    """
    j = np.arange(2, gm.n + 1)
    logw_j = gm.log_weights[j - 1]
    out = []
    for lt in (gm.log_upper_tails[j - 1], gm.log_lower_tails[j - 2]):
        with np.errstate(divide="ignore"):
            out.append(np.exp(lt + np.log(np.abs(lt)) - logw_j - np.log(j)))
    return np.stack(out, axis=1).ravel()


def bd_best_logsob(gm: GammaMeasure, restarts: int = 6, seed: int = 0) -> BestLogSob:
    """Largest ``Ent_gamma(g^2) / D_gamma(g)`` found over non-negative ``g``.

    A lower bound on the best log-Sobolev constant of the chain. Candidates:
    indicators of upper and lower level sets (``1_{k=1}`` among them), the
    near-constant limit ``2/gap``, and L-BFGS runs over ``g = exp(v)`` started
    from those and from random profiles.
    """
    n = gm.n
    if n > 500:
        raise ValueError("bd_best_logsob is capped at n <= 500")
    if n == 1:
        return BestLogSob(0.0, 0.0, 0.0, np.ones(1), False)
    ind = np.zeros(n)
    ind[0] = 1.0
    two_point = bd_entropy(gm, ind) / bd_dirichlet(gm, ind)
    gap, psi = _bd_gap(gm)
    linearized = 2.0 / gap
    indicators = _indicator_candidates(gm)

    best, best_g = two_point, ind
    if linearized > best:
        best, best_g = linearized, 1.0 + 1e-4 * psi
    j_best = int(np.argmax(indicators)) // 2 + 2
    if indicators.max() > best:
        upper = int(np.argmax(indicators)) % 2 == 0
        ks = np.arange(1, n + 1)
        best = float(indicators.max())
        best_g = (ks >= j_best if upper else ks < j_best).astype(float)
    logw = gm.log_weights
    logk = np.log(np.arange(2, n + 1, dtype=float))
    starts = [np.where(np.arange(1, n + 1) >= j_best, 0.0, -8.0),
              np.where(np.arange(1, n + 1) < j_best, 0.0, -8.0),
              np.where(ind > 0, 0.0, -8.0)]
    for eps in (0.5, 0.9, -0.5, -0.9):
        starts.append(np.log1p(eps * psi))
    rng = np.random.default_rng(seed)
    for k in range(restarts):
        starts.append(rng.standard_normal(n) * (0.5 + 3.0 * k / max(restarts - 1, 1)))
    stagnated = False
    for v0 in starts:
        res = minimize(_neg_ratio, v0, args=(logw, logk), jac=True, method="L-BFGS-B",
                       options={"maxiter": 2000, "gtol": 1e-10, "ftol": 1e-13})
        if not np.isfinite(res.fun):
            continue
        stagnated |= res.status == 1
        if -res.fun > best:
            best, best_g = float(-res.fun), np.exp(res.x - res.x.max())
    return BestLogSob(best, two_point, linearized, best_g, stagnated)
