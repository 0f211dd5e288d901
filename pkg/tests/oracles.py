"""Slow, independently coded reference computations used as test oracles.

Nothing here imports the package: states are tuples, generators are dense
matrices filled by explicit loops, and linear algebra is plain numpy.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def states_plus(n):
    """Non-empty binary tuples in the order of their bitmask code."""
    out = []
    for code in range(1, 2**n):
        out.append(tuple((code >> x) & 1 for x in range(n)))
    return out


def bernoulli(states, p):
    w = np.array([p ** sum(s) * (1 - p) ** (len(s) - sum(s)) for s in states])
    return w / w.sum()


def cbsep_dense(n, edges, p):
    """Every edge with a particle is redrawn from Bernoulli(p)^2 given not (0,0), at rate one."""
    S = states_plus(n)
    idx = {s: i for i, s in enumerate(S)}
    lam = 1 - (1 - p) ** 2
    pi = {0: 1 - p, 1: p}
    Q = np.zeros((len(S), len(S)))
    for s in S:
        for x, y in edges:
            if s[x] == 0 and s[y] == 0:
                continue
            for a, b in [(0, 1), (1, 0), (1, 1)]:
                t = list(s)
                t[x], t[y] = a, b
                t = tuple(t)
                if t != s:
                    Q[idx[s], idx[t]] += pi[a] * pi[b] / lam
    Q -= np.diag(Q.sum(axis=1))
    return Q, bernoulli(S, p), S


def fa1f_dense(n, edges, p):
    S = states_plus(n)
    idx = {s: i for i, s in enumerate(S)}
    nbrs = {x: set() for x in range(n)}
    for x, y in edges:
        nbrs[x].add(y)
        nbrs[y].add(x)
    Q = np.zeros((len(S), len(S)))
    for s in S:
        for x in range(n):
            if not any(s[y] for y in nbrs[x]):
                continue
            t = list(s)
            t[x] = 1 - s[x]
            Q[idx[s], idx[tuple(t)]] += p if s[x] == 0 else 1 - p
    Q -= np.diag(Q.sum(axis=1))
    return Q, bernoulli(S, p), S


def dense_gap(Q, mu):
    d = np.sqrt(mu)
    A = (d[:, None] * Q) / d[None, :]
    vals = np.sort(np.linalg.eigvalsh(-(A + A.T) / 2))
    return vals[1]


def dirichlet(Q, mu, f):
    f = np.asarray(f, dtype=float)
    return -float((mu * f) @ (Q @ f))


def entropy_sq(mu, f):
    f2 = np.asarray(f, dtype=float) ** 2
    m = float(mu @ f2)
    return sum(w * v * math.log(v / m) for w, v in zip(mu, f2) if v > 0)


def single_flip_sum(S, mu, p, f):
    """``p sum_y mu((f(w^y) - f(w))^2 (1 - w_y))`` by direct enumeration."""
    idx = {s: i for i, s in enumerate(S)}
    total = 0.0
    for s, w in zip(S, mu):
        for y in range(len(s)):
            if s[y] == 0:
                t = list(s)
                t[y] = 1
                total += p * w * (f[idx[tuple(t)]] - f[idx[s]]) ** 2
    return total


def generalized_max(A, B):
    """``sup f^T A f / f^T B f`` over the complement of ``ker B`` via pseudo-inverse square root."""
    w, V = np.linalg.eigh(B)
    keep = w > 1e-12 * w.max()
    U = V[:, keep] / np.sqrt(w[keep])
    return float(np.linalg.eigvalsh(U.T @ A @ U).max())


def laplacian(n, edges):
    L = np.zeros((n, n))
    for x, y in edges:
        L[x, x] += 1
        L[y, y] += 1
        L[x, y] -= 1
        L[y, x] -= 1
    return L


def resistance_pinv(n, edges, x, y):
    Lp = np.linalg.pinv(laplacian(n, edges))
    e = np.zeros(n)
    e[x], e[y] = 1, -1
    return float(e @ Lp @ e)


def lazy_tmix_iterate(n, edges, threshold=0.25):
    A = -laplacian(n, edges)
    deg = -np.diag(A).copy()
    np.fill_diagonal(A, 0)
    P = 0.5 * (np.eye(n) + A / deg[:, None])
    pi = deg / deg.sum()
    M = np.eye(n)
    t = 0
    while 0.5 * np.abs(M - pi).sum(axis=1).max() > threshold:
        M = M @ P
        t += 1
    return t


def meeting_dense(n, edges):
    """Mean meeting time of two rate-one-per-edge walks, uniform independent starts."""
    nbrs = {x: [] for x in range(n)}
    for x, y in edges:
        nbrs[x].append(y)
        nbrs[y].append(x)
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    idx = {q: i for i, q in enumerate(pairs)}
    M = np.zeros((len(pairs), len(pairs)))
    for (a, b), i in idx.items():
        for c in nbrs[a]:
            M[i, i] -= 1
            if c != b:
                M[i, idx[(c, b)]] += 1
        for c in nbrs[b]:
            M[i, i] -= 1
            if c != a:
                M[i, idx[(a, c)]] += 1
    h = np.linalg.solve(-M, np.ones(len(pairs)))
    return h.sum() / n**2


def killed_chain(n, edges, p):
    """Bottom of the spectrum and mean absorption time of CBSEP killed on ``N = 1``."""
    Q, mu, S = cbsep_dense(n, edges, p)
    keep = [i for i, s in enumerate(S) if sum(s) >= 2]
    QR = Q[np.ix_(keep, keep)]
    m = mu[keep] / mu[keep].sum()
    d = np.sqrt(m)
    A = (d[:, None] * QR) / d[None, :]
    lam0 = float(np.linalg.eigvalsh(-(A + A.T) / 2).min())
    h = np.linalg.solve(-QR, np.ones(len(keep)))
    return lam0, float(m @ h)


def gamma_mp(n, p, dps=50):
    import mpmath as mp

    mp.mp.dps = dps
    p = mp.mpf(p)
    w = [mp.binomial(n, k) * p**k * (1 - p) ** (n - k) for k in range(1, n + 1)]
    Z = mp.fsum(w)
    return [v / Z for v in w]


def miclo_mp(n, p, dps=50):
    """``C_+`` and ``C_-`` by direct extended-precision summation."""
    import mpmath as mp

    mp.mp.dps = dps
    g = gamma_mp(n, p, dps)
    P = mp.mpf(p)
    gam = lambda k: g[k - 1]  # noqa: E731
    i = max(2, math.ceil(p * n))
    cp = mp.mpf(0)
    for j in range(i + 1, n + 1):
        s = mp.fsum(1 / (gam(k) * k) for k in range(i + 1, j + 1))
        tail = mp.fsum(gam(k) for k in range(j, n + 1))
        cp = max(cp, s * tail * abs(mp.log(tail)))
    cm = mp.mpf(0)
    for j in range(1, i):
        s = mp.fsum(1 / (gam(k) * (n - k) * P / (1 - P)) for k in range(j, i))
        tail = mp.fsum(gam(k) for k in range(1, j + 1))
        cm = max(cm, s * tail * abs(mp.log(tail)))
    return float(cp), float(cm)


def product_states(n, s):
    return list(itertools.product(range(s), repeat=n))


def gcbsep_dense(n, edges, rho, occ):
    """g-CBSEP by the resampling rule; states are base-``s`` codes with digit ``x`` at vertex ``x``."""
    s = len(rho)
    occ = set(occ)
    S = []
    for code in range(s**n):
        digits = tuple((code // s**x) % s for x in range(n))
        if any(d in occ for d in digits):
            S.append(digits)
    idx = {t: i for i, t in enumerate(S)}
    q0 = sum(rho[a] for a in range(s) if a not in occ)
    lam = 1 - q0**2
    Q = np.zeros((len(S), len(S)))
    for st in S:
        for x, y in edges:
            if st[x] not in occ and st[y] not in occ:
                continue
            for a in range(s):
                for b in range(s):
                    if a not in occ and b not in occ:
                        continue
                    t = list(st)
                    t[x], t[y] = a, b
                    t = tuple(t)
                    if t != st:
                        Q[idx[st], idx[t]] += rho[a] * rho[b] / lam
    Q -= np.diag(Q.sum(axis=1))
    w = np.array([np.prod([rho[d] for d in st]) for st in S])
    return Q, w / w.sum(), S


def lump_dense(Q, S, occ):
    """Rates between projected binary states; asserts the rate is the same for every representative."""
    proj = [tuple(int(d in occ) for d in st) for st in S]
    classes = sorted(set(proj), key=lambda b: sum(v << x for x, v in enumerate(b)))
    cidx = {c: i for i, c in enumerate(classes)}
    out = np.full((len(classes), len(classes)), np.nan)
    for i, c in enumerate(proj):
        row = np.zeros(len(classes))
        for j, d in enumerate(proj):
            row[cidx[d]] += Q[i, j]
        a = cidx[c]
        if np.isnan(out[a, 0]):
            out[a] = row
        else:
            assert np.allclose(out[a], row, atol=1e-12), "not lumpable"
    return out


def cover_survival_paths(n, edges, start, steps):
    """``P_start(cover > steps)`` for the simple random walk by summing over every path."""
    nbrs = {x: [] for x in range(n)}
    for x, y in edges:
        nbrs[x].append(y)
        nbrs[y].append(x)
    # distribution over (position, visited set) pushed forward step by step
    dist = {(start, frozenset([start])): 1.0}
    for _ in range(steps):
        nxt = {}
        for (x, seen), w in dist.items():
            if len(seen) == n:
                nxt[(x, seen)] = nxt.get((x, seen), 0.0) + w
                continue
            for y in nbrs[x]:
                key = (y, seen | {y})
                nxt[key] = nxt.get(key, 0.0) + w / len(nbrs[x])
        dist = nxt
    return sum(w for (x, seen), w in dist.items() if len(seen) < n)
