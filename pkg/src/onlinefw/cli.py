"""Command line: ``onlinefw {run,compare,lmo-check,bounds-check}``.

Exit status 0 on success, 1 when a check or contract fails, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from . import checks
from .baselines import OgdConfig, ogd_run
from .cfbench import BenchConfig, format_summary, load_ratings, planted_records, run_cf_compare
from .core import SETTINGS, iterate_densify
from .costs import cost_metadata, mc_smoothed_value, smoothed_abs_value
from .errors import ContractViolation, OnlineFWError
from .harness import PATTERNS, StreamSpec, TraceCSVWriter, gen_stream
from .ofw import RunConfig, run_ofw
from .oracles import (
    Ball,
    Simplex,
    TraceNormBall,
    UniformMatroid,
    parse_flow_graph,
    random_flow_polytope,
)

DOMAIN_NAMES = ("simplex", "ball", "flow", "matroid", "trace")


class UsageError(Exception):
    pass


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="onlinefw", description="Online Frank-Wolfe toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="one learner on one domain, trace to CSV")
    run.add_argument("--domain", choices=DOMAIN_NAMES, default="simplex")
    run.add_argument("--setting", choices=SETTINGS, default="adversarial")
    run.add_argument("--algo", choices=("ofw", "ogd"), default="ofw")
    run.add_argument("--T", type=_positive_int, default=1000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--L", type=_positive_float, help="Lipschitz constant (gradient norm for linear streams)")
    run.add_argument("--D", type=_positive_float, help="diameter fed to the schedule")
    run.add_argument("--n", type=_positive_int, help="dimension (columns for the trace domain)")
    run.add_argument("--m", type=_positive_int, default=100, help="rows of the trace domain")
    run.add_argument("--radius", type=_positive_float, default=1.0)
    run.add_argument("--k", type=_positive_int, default=2, help="matroid rank")
    run.add_argument("--graph", help="flow graph file (header 'nodes m edges k s t')")
    run.add_argument("--tau", type=_positive_float)
    run.add_argument("--tol", type=_positive_float, default=1e-5)
    run.add_argument("--rank", type=_positive_int, default=5)
    run.add_argument("--pattern", choices=PATTERNS, default="alternating")
    run.add_argument("--ratings")
    run.add_argument("--mc-samples", type=int, default=0)
    run.add_argument("--out")

    cmp_ = sub.add_parser("compare", help="OFW vs OGD on online matrix completion")
    cmp_.add_argument("--ratings")
    cmp_.add_argument("--m", type=_positive_int)
    cmp_.add_argument("--n", type=_positive_int)
    cmp_.add_argument("--rank", type=_positive_int, default=5)
    cmp_.add_argument("--tau", type=_positive_float)
    cmp_.add_argument("--T", type=_positive_int, default=5000)
    cmp_.add_argument("--seed", type=int, default=0)
    cmp_.add_argument("--tol", type=_positive_float, default=1e-5)
    cmp_.add_argument("--algo", choices=("ofw", "ogd", "both"), default="both")
    cmp_.add_argument("--out")

    lmo = sub.add_parser("lmo-check", help="oracles against brute-force enumeration")
    lmo.add_argument("--trials", type=_positive_int, default=200)
    lmo.add_argument("--seed", type=int, default=0)

    bnd = sub.add_parser("bounds-check", help="gap, regret and surrogate guarantees")
    bnd.add_argument("--T", type=_positive_int, default=10_000)
    bnd.add_argument("--seed", type=int, default=0)
    return p


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _domain(args):
    n = args.n
    if args.domain == "simplex":
        return Simplex(n or 10)
    if args.domain == "ball":
        return Ball(n or 10, args.radius)
    if args.domain == "matroid":
        return UniformMatroid(n or 10, args.k)
    if args.domain == "flow":
        if args.graph:
            return parse_flow_graph(Path(args.graph).read_text())
        return random_flow_polytope(n or 8, seed=args.seed)
    m, n = args.m, n or 120
    if args.ratings:
        ratings = load_ratings(args.ratings, m=None, n=None)
        m, n = ratings.m, ratings.n
    if args.tau is None and args.ratings:
        raise UsageError("--tau is required with --ratings")
    tau = args.tau
    if tau is None:
        _, tau = planted_records(m, n, args.rank, T=1, seed=args.seed)
    return TraceNormBall(m, n, tau, tol=args.tol)


def _stream(args, domain):
    T, seed = args.T, args.seed
    if isinstance(domain, TraceNormBall):
        if args.setting != "stoch_smooth":
            raise UsageError("the trace domain runs the stoch_smooth setting only")
        if args.ratings:
            recs = load_ratings(args.ratings).records
            if len(recs) < T:
                raise UsageError(f"{len(recs)} ratings, --T is {T}")
            events = [r.event() for r in recs[:T]]
            return events, cost_metadata("matrix_entry", domain, events), None
        s = gen_stream(StreamSpec("matrix_entry", T=T, seed=seed, rank=args.rank), domain)
        return s.events, s.meta, None
    n = domain.dim
    if args.setting == "adversarial":
        s = gen_stream(StreamSpec("linear_adversarial", T=T, seed=seed, pattern=args.pattern,
                                  L=args.L or 1.0), domain)
        return s.events, s.meta, None
    if args.setting == "stoch_smooth":
        if isinstance(domain, Simplex):
            spec = StreamSpec("quadratic", T=T, seed=seed, support="dirichlet")
        elif isinstance(domain, Ball):
            spec = StreamSpec("quadratic", T=T, seed=seed, spread=domain.radius)
        else:
            spec = StreamSpec("quadratic", T=T, seed=seed, support="vertices")
    else:
        if isinstance(domain, Simplex):
            spec = StreamSpec("absolute", T=T, seed=seed, center=tuple(np.full(n, 1.0 / n)),
                              spread=0.5 / n)
        elif isinstance(domain, Ball):
            spec = StreamSpec("absolute", T=T, seed=seed, spread=0.5 * domain.radius / math.sqrt(n))
        else:
            raise UsageError("stoch_nonsmooth runs need --domain simplex or ball")
    s = gen_stream(spec, domain)
    meta = s.meta if args.L is None else dataclasses.replace(s.meta, L=args.L)
    return s.events, meta, s.expected


def cmd_run(args) -> int:
    domain = _domain(args)
    events, meta, expected = _stream(args, domain)
    sink = TraceCSVWriter(args.out) if args.out else None
    try:
        if args.algo == "ofw":
            trace = run_ofw(domain, events, args.setting,
                            RunConfig(T=args.T, seed=args.seed, mc_samples=args.mc_samples,
                                      meta=meta, expected=expected, sink=sink, D=args.D,
                                      cache_check_every=500 if domain.is_matrix else 0))
        else:
            cfg = OgdConfig.for_domain(domain, meta)
            if args.D is not None:
                cfg.D = args.D
            trace = ogd_run(domain, events, cfg, T=args.T,
                            run=RunConfig(expected=expected, sink=sink))
    finally:
        if sink is not None:
            sink.close()
    out = {
        "algo": args.algo, "domain": args.domain, "setting": args.setting, "T": len(trace),
        "mean_loss": float(trace.loss.mean()), "final_cum_regret": float(trace.cum_regret[-1]),
        "total_ns": trace.total_ns, "max_support": int(trace.support_size.max()),
    }
    if args.algo == "ofw" and args.mc_samples > 0 and args.setting == "stoch_nonsmooth":
        # cross-check the closed-form smoothing on the last round against sampling
        x = trace.info["final_iterate"]
        point = iterate_densify(x)
        delta = math.sqrt(domain.dim) * (args.D or domain.diameter) * len(trace) ** (-1.0 / 3.0)
        mc, se = mc_smoothed_value(events[-1], point, delta, args.mc_samples, seed=args.seed)
        out["mc_smoothed_value"] = mc
        out["mc_stderr"] = se
        out["closed_form_smoothed_value"] = smoothed_abs_value(point, events[-1].target, delta)
    if args.out:
        out["out"] = args.out
    print(format_summary(out))
    return 0


def cmd_compare(args) -> int:
    if args.ratings:
        ratings = load_ratings(args.ratings, args.m, args.n)
        if args.tau is None:
            raise UsageError("--tau is required with --ratings")
        records, m, n, tau = ratings.records, ratings.m, ratings.n, args.tau
        if len(records) < args.T:
            raise UsageError(f"{len(records)} ratings in file, --T is {args.T}")
    else:
        m, n = args.m or 100, args.n or 120
        records, planted_tau = planted_records(m, n, args.rank, args.T, args.seed)
        tau = args.tau or planted_tau
    cfg = BenchConfig(m=m, n=n, tau=tau, T=args.T, seed=args.seed, algorithms=args.algo,
                      tol=args.tol, out=args.out)
    result = run_cf_compare(cfg, records)
    print(format_summary(result.summary))
    return 0


def _report(results) -> int:
    for r in results:
        print(r.line())
    return 0 if checks.all_passed(results) else 1


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "compare":
            return cmd_compare(args)
        if args.command == "lmo-check":
            return _report(checks.lmo_checks(args.trials, args.seed))
        return _report(checks.bounds_checks(args.T, args.seed))
    except ContractViolation as exc:
        print(f"contract violated: {exc}", file=sys.stderr)
        return 1
    except (UsageError, OnlineFWError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2


def main():
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
