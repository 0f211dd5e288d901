"""Inequality checks on exact instances, scaling fits and deterministic reports."""
from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.stats import linregress

from .dynamics import build_timeline, csep_inclusion_violations, evolve_cbsep, evolve_gcbsep, grand_coupling
from .electrical import resistance_profile
from .graph import Graph, degree_stats, make_family
from .rwstats import cover_quantile_exact, expected_meeting_time, lazy_mixing_time
from .spectral import (
    InfeasibleComparison,
    Propagator,
    SizeError,
    bernoulli_measure,
    cbsep_generator,
    dirichlet_form,
    entropy,
    entropy_decomposition,
    fa1f_generator,
    form_ratio_max,
    gcbsep_generator,
    logsob_constant,
    mixing_times,
    projection_codes,
    relaxation_time,
    restricted_gap_and_hitting,
    semigroup,
    variance,
)
from .spectral.analysis import _second_eigvec
from .spectral.states import enumerate_states

__all__ = [
    "ExperimentConfig",
    "CheckRecord",
    "VerificationReport",
    "instance_checks",
    "verify_suite",
    "claim52_check",
    "theorem3_check",
    "Theorem3Record",
    "scaling_fit",
    "ScalingFit",
    "fa_chain_check",
    "one_particle_witness",
    "level_increment_check",
    "example_rho",
    "load_snapshots",
    "compare_snapshots",
]

REL_TOL = 1e-9
THEOREM3_STATE_CAP = 700
CLAIM52_STATE_CAP = 10**4
EXACT_BINARY_CAP = 10  # n for the full check battery

ANCHORS = {
    "generator_identities": "reversibility: zero row sums and detailed balance",
    "poincare_logsob_sandwich": "2 t_rel <= 1/alpha <= (2 + log 1/mu_*) t_rel",
    "l2_mixing_sandwich": "1/(2 alpha) <= T2 <= (1/alpha)(1 + log log(1/mu_*)/4)",
    "tmix_below_T2": "t_mix <= T2",
    "entropy_decomposition": "Ent(f^2) = mu(Ent(f^2 | N)) + Ent(mu(f^2 | N))",
    "level_increments": "(g(k) - g(k-1))^2 <= 2/(n-k+1) sum_y mu((f - f(w^y))^2 (1 - w_y) | N = k-1)",
    "single_flip_vs_dirichlet": "p sum_x mu((f(w^x) - f(w))^2 (1 - w_x)) <= 4 n max_y Rbar_y D(f)",
    "one_particle_witness": "f = 1{N = 1}: Ent/D and Var/D in closed form",
    "killed_chain_hitting": "1/lambda_0 >= E_{mu(.|N>=2)}(tau)",
    "projection_lower_bound": "t_mix(CBSEP) <= t_mix(g-CBSEP)",
    "mixture_law": "law of g-CBSEP from nu^eta = CBSEP average of nu^eta'",
    "fa_form_comparison": "c^-1 D_FA <= D <= c d_max p^-1 D_FA",
    "fa_chain": "t_mix^FA <= T2^FA within the l2 sandwich of FA-1f",
    "rate_constants": "t_rel and 1/alpha against resistance, meeting and mixing scales",
    "pathwise_coupling": "shared clocks preserve order; CSEP inside CBSEP; projection of g-CBSEP is CBSEP",
}


# ------------------------------------------------------------ configuration


_C_OVER_N = re.compile(r"^\s*([0-9.eE+-]*)\s*/\s*n\s*$")


def eval_p_rule(rule, n: int) -> float:
    """``"0.3"`` is a constant; ``"c/n"`` (``"1/n"``, ``"2/n"``) scales with ``n``."""
    if isinstance(rule, (int, float)):
        p = float(rule)
    else:
        match = _C_OVER_N.match(str(rule))
        if match:
            c = float(match.group(1)) if match.group(1) else 1.0
            p = c / n
        else:
            p = float(rule)
    if not 0 < p < 1:
        raise ValueError(f"p-rule {rule!r} gives p={p} outside (0, 1) at n={n}")
    return p


@dataclass
class ExperimentConfig:
    """``family`` is ``name`` or ``name:a,b`` (extra parameters after the size)."""

    family: str
    sizes: list
    p_rule: list = field(default_factory=lambda: ["1/n"])
    model: str = "cbsep"
    seeds: list = field(default_factory=lambda: [0])
    replicas: int = 200
    out: str | None = None

    def __post_init__(self):
        if isinstance(self.p_rule, (str, int, float)):
            self.p_rule = [self.p_rule]
        if isinstance(self.seeds, int):
            self.seeds = [self.seeds]
        if self.model not in ("cbsep", "fa1f", "csep", "gcbsep"):
            raise ValueError(f"unknown model {self.model!r}")
        for n in self.sizes:
            for rule in self.p_rule:
                eval_p_rule(rule, self.graph(n).n)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - {"family", "sizes", "p_rule", "model", "seeds", "replicas", "out"}
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def graph(self, size: int) -> Graph:
        name, _, rest = self.family.partition(":")
        extra = [int(tok) for tok in rest.split(",") if tok.strip()]
        return make_family(name, size, *extra)

    def instances(self):
        for size in self.sizes:
            G = self.graph(size)
            for rule in self.p_rule:
                yield G, eval_p_rule(rule, G.n)


# ------------------------------------------------------------ report


def instance_key(G: Graph, p: float) -> str:
    return f"{G.name or 'graph'}|n={G.n}|p={p:.12g}"


def serialize_instance(G: Graph, p: float) -> dict:
    return {"graph": G.name, "n": G.n, "edges": [list(e) for e in G.edges], "p": p}


def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass
class CheckRecord:
    name: str
    anchor: str
    instance: str
    measured: dict
    passed: bool | None  # None: recorded only
    hard: bool = True
    tolerance: float | None = None
    fitted_constant: dict | None = None
    violating_instance: dict | None = None
    note: str = ""


@dataclass
class VerificationReport:
    records: list = field(default_factory=list)

    def add(self, rec: CheckRecord):
        self.records.append(rec)

    def extend(self, recs):
        self.records.extend(recs)

    @property
    def passed(self) -> bool:
        return all(r.passed is not False for r in self.records if r.hard)

    def failures(self) -> list:
        return [r for r in self.records if r.hard and r.passed is False]

    def to_json(self) -> str:
        body = {"passed": self.passed, "records": [_clean(asdict(r)) for r in self.records]}
        return json.dumps(body, indent=2, sort_keys=True)

    def write(self, path):
        Path(path).write_text(self.to_json() + "\n")


def _record(name, G, p, measured, passed, tol=REL_TOL, hard=True, fitted=None, note=""):
    return CheckRecord(name, ANCHORS[name], instance_key(G, p), measured, passed, hard, tol, fitted,
                       serialize_instance(G, p) if passed is False else None, note)


def _le(a, b, tol=REL_TOL):
    """``a <= b`` up to a relative slack ``tol``."""
    return a <= b + tol * abs(b)


# ------------------------------------------------------------ individual checks


def _generator_identities(G, p):
    out = {}
    ok = True
    gens = [cbsep_generator(G, p), fa1f_generator(G, p)]
    if 3**G.n <= 3**6:
        gens.append(gcbsep_generator(G, example_rho(p), {1}))
    for gen in gens:
        scale = float(abs(gen.Q.diagonal()).max())
        rs, db = gen.row_sum_residual(), gen.detailed_balance_residual()
        irr = gen.is_irreducible()
        out[gen.label] = {"row_sum_residual": rs, "detailed_balance_residual": db, "irreducible": irr}
        ok &= rs <= 1e-10 * max(scale, 1) and db <= 1e-10 and irr
    return _record("generator_identities", G, p, out, ok, tol=1e-10)


def one_particle_witness(G: Graph, p: float) -> dict:
    """``Ent/D`` and ``Var/D`` of ``1{N = 1}``, numerically and in closed form."""
    space = enumerate_states(G, "omega_plus")
    mu = bernoulli_measure(space, p)
    f = (space.particle_counts == 1).astype(float)
    D = dirichlet_form("cbsep", G, p, space)(f)
    n = G.n
    mu1 = n * p * (1 - p) ** (n - 1) / -math.expm1(n * math.log1p(-p))
    d_avg = float(degree_stats(G).d_avg)
    return {
        "ent_over_D": entropy(mu, f) / D,
        "var_over_D": variance(mu, f) / D,
        "ent_over_D_closed": -math.log(mu1) * (2 - p) / (p * d_avg),
        "var_over_D_closed": (1 - mu1) * (2 - p) / (p * d_avg),
        "mu_one": mu1,
    }


def level_increment_check(G: Graph, p: float, f) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the bound on consecutive root conditional second moments.

    With ``g(k) = mu(f^2 | N = k)^(1/2)``, returns ``lhs[k-2] = (g(k) - g(k-1))^2`` and
    ``rhs[k-2] = 2/(n-k+1) sum_y mu((f(w) - f(w^y))^2 (1 - w_y) | N = k-1)`` for ``k = 2..n``.
    """
    space = enumerate_states(G, "omega_plus")
    mu = bernoulli_measure(space, p)
    f = np.asarray(f, dtype=float)
    n = G.n
    N = space.particle_counts
    codes = space.codes
    flip = np.zeros(space.dim)
    for y in range(n):
        empty = np.flatnonzero((codes >> y) & 1 == 0)
        up = space.index(codes[empty] | (1 << y))
        flip[empty] += (f[empty] - f[up]) ** 2
    level_mass = np.bincount(N, weights=mu, minlength=n + 1)
    g = np.sqrt(np.bincount(N, weights=mu * f**2, minlength=n + 1)[1:] / level_mass[1:])
    per_level = np.bincount(N, weights=mu * flip, minlength=n + 1) / np.where(level_mass > 0, level_mass, 1.0)
    k = np.arange(2, n + 1)
    return np.diff(g) ** 2, 2.0 / (n - k + 1) * per_level[k - 1]


def _rel_err(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


def example_rho(p: float) -> np.ndarray:
    """Three-letter law with particle letter ``1`` of mass ``p`` and two equal hole letters."""
    return np.array([(1 - p) / 2, p, (1 - p) / 2])


@dataclass(frozen=True)
class Theorem3Record:
    tmix_cbsep: float
    tmix_gcbsep: float
    cover_quantile: float
    ratio: float  # tmix_g / (tmix + T_cov / d_min)


def theorem3_check(G: Graph, rho, occupied) -> Theorem3Record:
    rho = np.asarray(rho, dtype=float)
    occ = frozenset(occupied)
    p = float(rho[sorted(occ)].sum())
    gg = gcbsep_generator(G, rho, occ)
    if gg.dim > 10**4:
        raise SizeError(f"g-CBSEP has {gg.dim} states; mixing times are capped at 10^4")
    t = mixing_times(cbsep_generator(G, p)).t_mix
    tg = mixing_times(gg).t_mix
    tcov = float(cover_quantile_exact(G))
    d_min = float(degree_stats(G).d_min)
    return Theorem3Record(t, tg, tcov, tg / (t + tcov / d_min))


def _nu_matrix(gspace, cbspace, rho, occupied):
    """``N[eta, w] = nu^eta(w)``: ``rho`` conditioned on the occupation pattern ``eta``."""
    rho = np.asarray(rho, dtype=float)
    s = len(rho)
    in1 = np.isin(np.arange(s), sorted(occupied))
    p = rho[in1].sum()
    cond = np.where(in1, rho / p, rho / (1 - p))
    w = np.prod(cond[gspace.digits], axis=1)
    eta = cbspace.index(projection_codes(gspace))
    N = np.zeros((cbspace.dim, gspace.dim))
    N[eta, np.arange(gspace.dim)] = w
    return N


def claim52_check(G: Graph, rho, occupied, t_grid) -> float:
    """Largest entrywise gap between g-CBSEP started from ``nu^eta`` and the CBSEP mixture
    ``sum_eta' P_t(eta, eta') nu^eta'``, over all ``eta`` and ``t`` in ``t_grid``."""
    rho = np.asarray(rho, dtype=float)
    if len(rho) ** G.n > CLAIM52_STATE_CAP:
        raise SizeError(f"|S|^n = {len(rho) ** G.n} exceeds {CLAIM52_STATE_CAP}")
    occ = frozenset(occupied)
    p = float(rho[sorted(occ)].sum())
    gg = gcbsep_generator(G, rho, occ)
    gc = cbsep_generator(G, p)
    N = _nu_matrix(gg.space, gc.space, rho, occ)
    worst = 0.0
    for t in t_grid:
        lhs = semigroup(gg, t, N)
        rhs = semigroup(gc, t, np.eye(gc.dim)) @ N
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def fa_chain_check(G: Graph, p: float, cbsep_inverse_bracket=None) -> dict:
    """FA-1f: ``t_mix <= T2``, ``T2`` inside its l2 sandwich, and the ratio for the last link."""
    fa = fa1f_generator(G, p)
    ls = logsob_constant(fa)
    mt = mixing_times(fa)
    C_lo, C_hi = ls.inverse_bracket
    C_wit = 1.0 / ls.witness
    loglog = math.log(math.log(1.0 / ls.mu_star))
    out = {
        "tmix_FA": mt.t_mix,
        "T2_FA": mt.T2,
        "C_FA_witness": C_wit,
        "C_FA_upper": C_hi,
        "tmix_le_T2": _le(mt.t_mix, mt.T2),
        "T2_lower_ok": _le(0.5 * C_wit, mt.T2),
        "T2_upper_ok": _le(mt.T2, C_hi * (1 + 0.25 * loglog)),
        "T2_over_C_log_n": mt.T2 / (C_wit * math.log(G.n)) if G.n > 1 else math.nan,
    }
    if cbsep_inverse_bracket is not None:
        out["c_last_link"] = C_wit / (G.n * cbsep_inverse_bracket[1])
    return out


def _coupling_counts(G, p, replicas, seed, horizon=4.0):
    rng = np.random.default_rng(seed)
    order = csep = proj = 0
    rho = example_rho(p)
    for r in range(replicas):
        tl = build_timeline(G, p, horizon, seed=int(rng.integers(2**31)))
        lo = (rng.random(G.n) < 0.3).astype(int)
        lo[rng.integers(G.n)] = 1
        hi = np.maximum(lo, (rng.random(G.n) < 0.5).astype(int))
        order += grand_coupling([lo, hi], tl).order_violations
        csep += csep_inclusion_violations(lo, tl)
        g0 = np.where(lo == 1, 1, rng.choice([0, 2], size=G.n))
        tg = evolve_gcbsep(g0, tl, rho, {1}, seed2=r)
        tb = evolve_cbsep(lo, tl)
        same = (len(tg.times) == len(tb.times) and np.array_equal(tg.clocks, tb.clocks)
                and np.array_equal((tg.states == 1).astype(int), tb.states))
        proj += not same
    return {"runs": replicas, "order_violations": order, "csep_violations": csep, "projection_mismatches": proj}


def instance_checks(G: Graph, p: float, seed: int = 0, replicas: int = 0,
                    theorem3: bool = True, claim52: bool = True) -> list:
    """Every exact check on one ``(G, p)``; fitted constants are recorded, not asserted."""
    recs = [_generator_identities(G, p)]
    gen = cbsep_generator(G, p)
    prop = Propagator(gen)
    ls = logsob_constant(gen, seed=seed)
    mt = mixing_times(gen, prop)
    t_rel = 1.0 / ls.gap
    mu_star = ls.mu_star
    C_wit = 1.0 / ls.witness
    C_hi = (2.0 + math.log(1.0 / mu_star)) * t_rel

    # the ratio along 1 + eps*psi must approach gap/2
    M = dirichlet_form("cbsep", G, p, gen.space).matrix
    _, psi = _second_eigvec(gen)
    f = 1.0 + 1e-4 * psi / np.abs(psi).max()
    lin = float(f @ (M @ f)) / entropy(gen.mu, f) / (ls.gap / 2)
    ok = _le(2 * t_rel, C_wit) and _le(C_wit, C_hi)
    ok &= abs(lin - 1) < 1e-2
    recs.append(_record("poincare_logsob_sandwich", G, p,
                        {"t_rel": t_rel, "C_witness": C_wit, "C_upper": C_hi, "mu_star": mu_star,
                         "linearized_over_gap_half": lin, "stagnated": ls.stagnated}, ok))

    loglog = math.log(math.log(1.0 / mu_star)) if mu_star < 1 / math.e else 0.0
    T2_hi = C_hi * (1 + 0.25 * loglog)
    recs.append(_record("l2_mixing_sandwich", G, p,
                        {"T2": mt.T2, "lower": 0.5 * C_wit, "upper": T2_hi},
                        _le(0.5 * C_wit, mt.T2) and _le(mt.T2, T2_hi)))
    recs.append(_record("tmix_below_T2", G, p, {"t_mix": mt.t_mix, "T2": mt.T2}, _le(mt.t_mix, mt.T2)))

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(3):
        f = rng.random(gen.dim) + 0.05
        ent = entropy(gen.mu, f)
        cond, proj = entropy_decomposition(G, p, f)
        worst = max(worst, abs(ent - cond - proj) / max(1.0, ent))
    recs.append(_record("entropy_decomposition", G, p, {"max_rel_residual": worst}, worst <= 1e-12, tol=1e-12))

    if G.n >= 2:
        worst = -math.inf
        for _ in range(5):
            lhs, rhs = level_increment_check(G, p, rng.standard_normal(gen.dim))
            worst = max(worst, float(np.max(lhs - rhs * (1 + REL_TOL))))
        recs.append(_record("level_increments", G, p, {"max_excess": worst}, worst <= 0.0))

    rp = resistance_profile(G)
    bound = 4 * G.n * rp.Rbar_max
    try:
        ratio = form_ratio_max(dirichlet_form("single_flip", G, p, gen.space), dirichlet_form("cbsep", G, p, gen.space))
        recs.append(_record("single_flip_vs_dirichlet", G, p, {"ratio": ratio, "bound": bound},
                            _le(ratio, bound), fitted={"ratio_over_bound": ratio / bound}))
    except InfeasibleComparison as exc:
        recs.append(_record("single_flip_vs_dirichlet", G, p, {"error": str(exc)}, False))

    w = one_particle_witness(G, p)
    ok = (_rel_err(w["ent_over_D"], w["ent_over_D_closed"]) <= 1e-10
          and _rel_err(w["var_over_D"], w["var_over_D_closed"]) <= 1e-10
          and _le(w["var_over_D"], t_rel) and _le(w["ent_over_D"], C_hi))
    recs.append(_record("one_particle_witness", G, p, w, ok, tol=1e-10,
                        fitted={"C_witness_d_avg_over_n": C_wit * float(degree_stats(G).d_avg) / G.n}))

    if G.n >= 2:
        rc = restricted_gap_and_hitting(G, p)
        recs.append(_record("killed_chain_hitting", G, p,
                            {"inv_lambda0": 1 / rc.lambda0, "E_tau": rc.E_tau, "E_tau_from_two": rc.E_tau_from_two},
                            _le(rc.E_tau, 1 / rc.lambda0)))

    rho = example_rho(p)
    if theorem3 and G.n >= 2:
        n_states = 3**G.n - 2**G.n
        if n_states <= THEOREM3_STATE_CAP:
            rec = theorem3_check(G, rho, {1})
            recs.append(_record("projection_lower_bound", G, p, asdict(rec),
                                _le(rec.tmix_cbsep, rec.tmix_gcbsep, 1e-8), tol=1e-8,
                                fitted={"tmix_ratio": rec.ratio}))
        else:
            recs.append(_record("projection_lower_bound", G, p, {"states": n_states}, None,
                                note=f"skipped: {n_states} g-CBSEP states above cap {THEOREM3_STATE_CAP}"))
    if claim52 and 3**G.n <= CLAIM52_STATE_CAP and G.n <= 3:
        dev = claim52_check(G, rho, {1}, [0.0, 0.5, 1.0, 2.0])
        recs.append(_record("mixture_law", G, p, {"max_deviation": dev}, dev < 1e-10, tol=1e-10))

    try:
        c_lo = form_ratio_max(dirichlet_form("fa1f", G, p, gen.space), dirichlet_form("cbsep", G, p, gen.space))
        c_hi = form_ratio_max(dirichlet_form("cbsep", G, p, gen.space), dirichlet_form("fa1f", G, p, gen.space))
        d_max = float(degree_stats(G).d_max)
        recs.append(_record("fa_form_comparison", G, p, {"sup_DFA_over_D": c_lo, "sup_D_over_DFA": c_hi}, None,
                            hard=False, fitted={"c_lower": c_lo, "c_upper": c_hi * p / d_max}))
    except InfeasibleComparison as exc:
        recs.append(_record("fa_form_comparison", G, p, {"error": str(exc)}, None, hard=False))

    fa = fa_chain_check(G, p, ls.inverse_bracket)
    recs.append(_record("fa_chain", G, p, fa, fa["tmix_le_T2"] and fa["T2_lower_ok"] and fa["T2_upper_ok"],
                        fitted={"c_last_link": fa.get("c_last_link")}))

    ds = degree_stats(G)
    tmeet = expected_meeting_time(G).value
    tmix_rw = lazy_mixing_time(G) if G.n > 1 else 0
    d_avg, d_max, d_min = float(ds.d_avg), float(ds.d_max), float(ds.d_min)
    main_scale = max(d_avg * d_max**2 / d_min**2 * tmix_rw * math.log(G.n), rp.Rbar_max * G.n * abs(math.log(p)))
    recs.append(_record("rate_constants", G, p,
                        {"t_rel": t_rel, "C_witness": C_wit, "C_upper": C_hi, "T_meet": tmeet,
                         "tmix_rw": tmix_rw, "Rbar_max": rp.Rbar_max}, None, hard=False,
                        fitted={"t_rel_over_n_Rbar": t_rel / (G.n * rp.Rbar_max),
                                "C_witness_over_main_scale": C_wit / main_scale,
                                "t_rel_over_T_meet": t_rel / tmeet if tmeet > 0 else None}))

    if replicas > 0:
        counts = _coupling_counts(G, p, replicas, seed)
        ok = counts["order_violations"] == 0 and counts["csep_violations"] == 0 and counts["projection_mismatches"] == 0
        recs.append(_record("pathwise_coupling", G, p, counts, ok, tol=0.0))
    return recs


# ------------------------------------------------------------ snapshots

#: direction in which a fitted constant may not drift by more than a factor 2
SNAPSHOT_DIRECTIONS = {
    "ratio_over_bound": "up",
    "C_witness_d_avg_over_n": "down",
    "tmix_ratio": "up",
    "c_lower": "up",
    "c_upper": "up",
    "c_last_link": "up",
    "t_rel_over_n_Rbar": "up",
    "C_witness_over_main_scale": "up",
    "t_rel_over_T_meet": "down",
}


def report_constants(report: VerificationReport) -> dict:
    out = {}
    for r in report.records:
        for k, v in (r.fitted_constant or {}).items():
            if v is not None and math.isfinite(v):
                out[f"{r.name}|{k}|{r.instance}"] = float(v)
    return out


def load_snapshots(path=None) -> dict:
    if path is None:
        text = resources.files("cbsep_lab").joinpath("data/snapshots.json").read_text()
    else:
        text = Path(path).read_text()
    return json.loads(text)


def compare_snapshots(report: VerificationReport, snapshots: dict, factor: float = 2.0) -> list:
    """Keys whose constant drifted past ``factor`` in its unfavourable direction."""
    bad = []
    for key, value in report_constants(report).items():
        if key not in snapshots:
            continue
        ref = snapshots[key]
        # fitted constants are positive ratios; anything else is a defect
        if not (value > 0 and ref > 0):
            bad.append(key)
            continue
        direction = SNAPSHOT_DIRECTIONS.get(key.split("|")[1], "up")
        if direction == "up" and value > factor * ref:
            bad.append(key)
        if direction == "down" and value < ref / factor:
            bad.append(key)
    return bad


def verify_suite(config: ExperimentConfig, snapshots: dict | None = None) -> VerificationReport:
    report = VerificationReport()
    seed = int(config.seeds[0])
    for G, p in config.instances():
        if G.n > EXACT_BINARY_CAP:
            report.add(CheckRecord("generator_identities", ANCHORS["generator_identities"], instance_key(G, p),
                                   {}, None, note=f"skipped: n={G.n} above exact cap {EXACT_BINARY_CAP}"))
            continue
        report.extend(instance_checks(G, p, seed=seed, replicas=config.replicas))
    if snapshots:
        drifted = compare_snapshots(report, snapshots)
        report.add(CheckRecord("rate_constants", "fitted constants within 2x of their snapshot", "all",
                               {"drifted": drifted}, not drifted))
    return report


# ------------------------------------------------------------ scaling


@dataclass(frozen=True)
class ScalingFit:
    exponent: float
    stderr: float
    table: list  # rows (n, p, states, t_rel)


def scaling_fit(config: ExperimentConfig) -> ScalingFit:
    """Least-squares slope of ``log t_rel`` against ``log n`` over the configured sizes."""
    if len(config.sizes) < 4:
        raise ValueError("a scaling fit needs at least 4 sizes")
    build = {"cbsep": cbsep_generator, "fa1f": fa1f_generator}.get(config.model)
    if build is None:
        raise ValueError(f"scaling fits support cbsep and fa1f, not {config.model!r}")
    rule = config.p_rule[0]
    table = []
    for size in config.sizes:
        G = config.graph(size)
        if G.n > 20:
            raise SizeError(f"exact t_rel needs n <= 20 (got {G.n})")
        p = eval_p_rule(rule, G.n)
        gen = build(G, p)
        table.append((G.n, p, gen.dim, relaxation_time(gen)))
    x = np.log([row[0] for row in table])
    y = np.log([row[3] for row in table])
    fit = linregress(x, y)
    return ScalingFit(float(fit.slope), float(fit.stderr), table)
