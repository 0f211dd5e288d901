"""``cbsep-lab`` command line."""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import dynamics, rwstats
from .birthdeath import bd_best_logsob, gamma_measure, miclo_bound
from .electrical import effective_resistance, resistance_profile
from .graph import parse_graph_spec
from .spectral import (
    cbsep_generator,
    fa1f_generator,
    gcbsep_generator,
    logsob_constant,
    mixing_times,
)
from .verify import (
    ExperimentConfig,
    example_rho,
    load_snapshots,
    report_constants,
    scaling_fit,
    verify_suite,
)


def _dump(obj, stream=None):
    stream = stream or sys.stdout
    stream.write(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(type(x))


def cmd_verify(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    snapshots = None if args.no_snapshots else load_snapshots(args.snapshots)
    report = verify_suite(config, snapshots=snapshots)
    out = args.out or config.out
    if out:
        report.write(out)
    else:
        sys.stdout.write(report.to_json() + "\n")
    if args.write_snapshots:
        merged = {}
        if os.path.exists(args.write_snapshots):
            merged = load_snapshots(args.write_snapshots)
        merged.update(report_constants(report))
        with open(args.write_snapshots, "w") as fh:
            json.dump(merged, fh, indent=2, sort_keys=True)
            fh.write("\n")
    for rec in report.failures():
        print(f"FAIL {rec.name} [{rec.instance}]", file=sys.stderr)
    return 0 if report.passed else 1


def cmd_scaling(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    fit = scaling_fit(config)
    body = {"exponent": fit.exponent, "stderr": fit.stderr,
            "table": [{"n": n, "p": p, "states": d, "t_rel": t} for n, p, d, t in fit.table]}
    out = args.out or config.out
    if out:
        with open(out, "w") as fh:
            fh.write("# n p states t_rel\n")
            for row in fit.table:
                fh.write(" ".join(repr(v) for v in row) + "\n")
    _dump(body)
    return 0


def _generator(model, G, p):
    if model == "cbsep":
        return cbsep_generator(G, p)
    if model == "fa1f":
        return fa1f_generator(G, p)
    return gcbsep_generator(G, example_rho(p), {1})


def cmd_spectral(args) -> int:
    G = parse_graph_spec(args.graph)
    gen = _generator(args.model, G, args.p)
    ls = logsob_constant(gen, restarts=args.restarts)
    mt = mixing_times(gen)
    _dump({
        "n_states": gen.dim,
        "gap": ls.gap,
        "t_rel": 1.0 / ls.gap,
        "alpha_witness": ls.witness,
        "alpha_bracket": list(ls.bracket),
        "t_mix": mt.t_mix,
        "T2": mt.T2,
        "mu_star": ls.mu_star,
    })
    return 0


def cmd_simulate(args) -> int:
    G = parse_graph_spec(args.graph)
    rng = np.random.default_rng(args.seed)
    checkpoints = np.linspace(0.0, args.horizon, args.checkpoints + 1)
    rho = example_rho(args.p)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(["replica", "observable", "value"])
    for r in range(args.replicas):
        tl = dynamics.build_timeline(G, args.p, args.horizon, seed=int(rng.integers(2**31)))
        omega0 = np.ones(G.n, dtype=int)
        if args.model == "gcbsep":
            traj = dynamics.evolve_gcbsep(omega0, tl, rho, {1}, seed2=int(rng.integers(2**31)))
        elif args.model == "csep":
            traj = dynamics.evolve_csep(omega0, tl)
        else:
            traj = dynamics.evolve_cbsep(omega0, tl)
        for t, N in zip(checkpoints, traj.particle_counts(checkpoints)):
            writer.writerow([r, f"N({t:g})", int(N)])
        if args.model == "cbsep":
            hit = dynamics.hitting_time_N1(omega0, tl)
            writer.writerow([r, "hitting_time_censored" if hit.censored else "hitting_time", hit.time])
        walk = dynamics.embedded_walk(omega0, 0, tl, check=args.model == "cbsep")
        cov = walk.cover_time(G.n)
        writer.writerow([r, "cover_time" if math.isfinite(cov) else "cover_time_censored",
                         cov if math.isfinite(cov) else args.horizon])
    return 0


def cmd_resistance(args) -> int:
    G = parse_graph_spec(args.graph)
    writer = csv.writer(sys.stdout, lineterminator="\n")
    if args.profile:
        prof = resistance_profile(G)
        writer.writerow(["y", "Rbar"])
        for y, v in enumerate(prof.Rbar):
            writer.writerow([y, repr(float(v))])
        return 0
    writer.writerow(["x", "y", "R"])
    if args.x is not None and args.y is not None:
        writer.writerow([args.x, args.y, repr(effective_resistance(G, args.x, args.y))])
        return 0
    R = resistance_profile(G).R
    for x in range(G.n):
        for y in range(x + 1, G.n):
            writer.writerow([x, y, repr(float(R[x, y]))])
    return 0


def cmd_rwstats(args) -> int:
    G = parse_graph_spec(args.graph)
    if args.what == "tmix":
        body = {"value": rwstats.lazy_mixing_time(G, args.threshold), "method": "exact", "stderr": 0.0}
    elif args.what == "tmeet":
        mt = rwstats.expected_meeting_time(G, mc_samples=args.samples, seed=args.seed)
        body = {"value": mt.value, "method": mt.method, "stderr": mt.stderr}
    elif args.kind == "discrete" and G.n <= rwstats.COVER_EXACT_CAP:
        body = {"value": rwstats.cover_quantile_exact(G), "method": "exact", "stderr": 0.0}
    else:
        cq = rwstats.cover_time_quantile(G, args.samples, args.seed, kind=args.kind)
        # half-width of the 99% band over the normal quantile, as a standard-error proxy
        body = {"value": cq.value, "method": "mc", "stderr": (cq.upper - cq.lower) / (2 * 2.5758),
                "band": [cq.lower, cq.upper]}
    _dump(body)
    return 0


def cmd_birthdeath(args) -> int:
    mb = miclo_bound(args.n, args.p)
    best = bd_best_logsob(gamma_measure(args.n, args.p), restarts=args.restarts)
    _dump({
        "C_plus": mb.C_plus,
        "C_minus": mb.C_minus,
        "C_star": mb.C_star,
        "best_witness": best.witness,
        "ratio_to_log_inv_p": best.witness / math.log(1.0 / args.p),
        "stagnated": best.stagnated,
    })
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cbsep-lab", description="Exact and Monte Carlo analysis of CBSEP, g-CBSEP and FA-1f.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the inequality suite on a config")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--snapshots", help="snapshot file (default: bundled)")
    p.add_argument("--no-snapshots", action="store_true")
    p.add_argument("--write-snapshots", metavar="PATH", help="merge fitted constants into PATH")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scaling", help="fit the t_rel exponent over a size range")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scaling)

    p = sub.add_parser("spectral", help="gap, log-Sobolev bracket and mixing times")
    p.add_argument("--model", choices=["cbsep", "fa1f", "gcbsep"], default="cbsep")
    p.add_argument("--graph", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--restarts", type=int, default=20)
    p.set_defaults(func=cmd_spectral)

    p = sub.add_parser("simulate", help="graphical-construction runs, CSV output")
    p.add_argument("--model", choices=["cbsep", "gcbsep", "csep"], default="cbsep")
    p.add_argument("--graph", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--replicas", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--checkpoints", type=int, default=10)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("resistance", help="effective resistances, CSV output")
    p.add_argument("--graph", required=True)
    p.add_argument("--profile", action="store_true", help="print y,Rbar instead of pairs")
    p.add_argument("--x", type=int)
    p.add_argument("--y", type=int)
    p.set_defaults(func=cmd_resistance)

    p = sub.add_parser("rwstats", help="random-walk mixing, meeting and cover times")
    p.add_argument("--graph", required=True)
    p.add_argument("--what", choices=["tmix", "tmeet", "tcov"], required=True)
    p.add_argument("--threshold", type=float, default=rwstats.LAZY_TV_THRESHOLD)
    p.add_argument("--samples", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=["discrete", "continuous"], default="discrete")
    p.set_defaults(func=cmd_rwstats)

    p = sub.add_parser("birthdeath", help="C_+/C_- bound and best log-Sobolev witness")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--restarts", type=int, default=6)
    p.set_defaults(func=cmd_birthdeath)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
