"""Command-line front end: simulate, detect, analyze, sweep, verify.

Exit codes for ``detect``: 0 the series is consistent with honest play, 2 at
least one test rejects, 1 usage or data errors. ``verify`` exits nonzero if
any acceptance criterion fails. Every command is deterministic given its
flags; the environment variable ``CSSP_LAB_SEED`` overrides ``--seed``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import acceptance, analytics
from .core import subsystem_seed
from .detection import (
    InsufficientSampleError,
    ScoreSeries,
    correlation_test,
    distribution_test,
    envelope_test,
)
from .protocol import (
    SimConfig,
    mark_reset_rounds,
    run_simulation,
    write_observer_csv,
    write_trace_jsonl,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_REJECT = 2


def _effective_seed(args) -> int:
    env = os.environ.get("CSSP_LAB_SEED")
    if env is not None:
        return int(env, 0)
    return args.seed


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", default="honest",
                   choices=("honest", "silent", "one-lookahead"))
    p.add_argument("--alpha", type=float, default=0.3,
                   help="adversary stake fraction")
    p.add_argument("--beta", type=float, default=1.0,
                   help="fraction of honest broadcasts heard before deciding")
    p.add_argument("--delta", type=float, default=0.0,
                   help="online-stake fluctuation half-width")
    p.add_argument("--rounds", type=int, default=100_000)
    p.add_argument("--burn-in", type=int, default=1000)
    p.add_argument("--ladder-depth", type=int, default=16)


def _sim_config(args, seed: int) -> SimConfig:
    return SimConfig(
        alpha=args.alpha,
        beta=args.beta,
        rounds=args.rounds,
        strategy=args.strategy,
        burn_in=args.burn_in,
        delta=args.delta,
        ladder_depth=args.ladder_depth,
        master_seed=seed,
    )


def cmd_simulate(args) -> int:
    config = _sim_config(args, _effective_seed(args))
    trace = run_simulation(config)
    mark_reset_rounds(trace)
    write_trace_jsonl(trace, args.out + ".jsonl")
    write_observer_csv(trace, args.out + ".csv")
    print(
        f"rounds={len(trace)} win_fraction={trace.win_fraction():.6f} "
        f"reset_fraction={trace.reset_fraction():.6f}"
    )
    print(f"wrote {args.out}.jsonl and {args.out}.csv")
    return EXIT_OK


def _load_series(path: str) -> ScoreSeries:
    if path.endswith(".jsonl"):
        return ScoreSeries.from_jsonl(path)
    return ScoreSeries.from_csv(path)


def cmd_detect(args) -> int:
    seed = _effective_seed(args)
    series = _load_series(args.input)
    reports = []
    if args.test in ("distribution", "all"):
        reports.append(
            distribution_test(series, args.significance, args.bootstrap, seed=seed)
        )
    if args.test in ("correlation", "all"):
        reports.append(
            correlation_test(series, args.significance, args.permutations, seed=seed)
        )
    if args.test in ("envelope", "all"):
        reports.append(envelope_test(series, args.delta, args.significance))
    rejected = any(r.rejected for r in reports)
    doc = {
        "verdict": "reject" if rejected else "consistent",
        "reports": [r.to_dict() for r in reports],
    }
    payload = json.dumps(doc, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    else:
        print(payload)
    return EXIT_REJECT if rejected else EXIT_OK


def cmd_analyze(args) -> int:
    alpha = args.alpha
    chain = analytics.markov_chain(alpha)
    dist = analytics.lookahead_mixture_distribution(alpha)
    rate, distance = analytics.best_exp_fit(dist)
    win = analytics.analytic_win_rate(alpha)
    grid = analytics.default_fit_grid()
    if args.out:
        analytics.export_cdf_table(dist, grid, args.out + "_mixture.csv")
    summary = {
        "alpha": alpha,
        "markov": {
            "p_cc": chain.p_cc,
            "p_ch": chain.p_ch,
            "p_hc": chain.p_hc,
            "p_hh": chain.p_hh,
            "s_c": chain.s_c,
            "s_h": chain.s_h,
        },
        "best_exponential_fit": {"rate": rate, "sup_distance": distance},
        "analytic_win_rate": win,
        "mixture_truncation_error": dist.truncation_error_bound,
    }
    payload = json.dumps(summary, indent=2)
    if args.out:
        with open(args.out + "_summary.json", "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
        print(f"wrote {args.out}_mixture.csv and {args.out}_summary.json")
    print(payload)
    return EXIT_OK


def cmd_sweep(args) -> int:
    seed = _effective_seed(args)
    alphas = [float(x) for x in args.alpha_list.split(",")]
    rounds_list = [int(x) for x in args.rounds_list.split(",")]
    jobs = [
        (i, alpha, rounds, rep)
        for i, (alpha, rounds, rep) in enumerate(
            (a, r, k)
            for a in alphas
            for r in rounds_list
            for k in range(args.replicates)
        )
    ]

    def run(job):
        index, alpha, rounds, rep = job
        cfg = SimConfig(
            alpha=alpha,
            beta=args.beta,
            rounds=rounds,
            strategy=args.strategy,
            burn_in=min(args.burn_in, max(rounds // 10, 1)),
            delta=args.delta,
            ladder_depth=args.ladder_depth,
            master_seed=subsystem_seed(seed, index),
        )
        trace = run_simulation(cfg)
        mark_reset_rounds(trace)
        return (
            alpha, rounds, rep,
            trace.win_fraction(),
            trace.win_fraction() - alpha,
            trace.reset_fraction(),
        )

    workers = max(1, min(args.workers, len(jobs)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(run, jobs))  # input order == parameter order

    lines = ["alpha,rounds,replicate,win_fraction,delta_profit,reset_fraction"]
    lines += [
        f"{a},{r},{rep},{wf!r},{dp!r},{rf!r}" for a, r, rep, wf, dp, rf in rows
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({len(rows)} rows)")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    scale = acceptance.QUICK if args.quick else acceptance.FULL
    seed = _effective_seed(args)
    failures = 0

    def report(res):
        nonlocal failures
        mark = "PASS" if res.passed else "FAIL"
        print(f"[{mark}] criterion {res.criterion:>3}  {res.title}: {res.details}",
              flush=True)
        failures += not res.passed

    print(f"acceptance suite, scale={scale.name}, master seed={seed}")
    acceptance.run_acceptance(
        scale=scale, master_seed=seed, tamper=args.tamper, report=report
    )
    print(f"{'FAILED' if failures else 'PASSED'}: {failures} criterion(s) failing")
    return EXIT_ERROR if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cssp-lab",
        description="Leader-election self-selection simulator, analytics, "
        "and manipulation detection",
    )
    parser.add_argument(
        "--seed", type=int, default=1,
        help="master seed (env CSSP_LAB_SEED overrides)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one simulation, write trace files")
    _add_sim_flags(p_sim)
    p_sim.add_argument("--out", required=True, help="output path prefix")
    p_sim.set_defaults(fn=cmd_simulate)

    p_det = sub.add_parser("detect", help="run detection tests on an observer file")
    p_det.add_argument("input", help="observer CSV (round,winning_score) or JSONL trace")
    p_det.add_argument("--test", default="all",
                       choices=("distribution", "correlation", "envelope", "all"))
    p_det.add_argument("--significance", type=float, default=0.01)
    p_det.add_argument("--bootstrap", type=int, default=1000)
    p_det.add_argument("--permutations", type=int, default=10_000)
    p_det.add_argument("--delta", type=float, default=0.0,
                       help="stake-fluctuation band for the envelope test")
    p_det.add_argument("--out", help="write the JSON report here instead of stdout")
    p_det.set_defaults(fn=cmd_detect)

    p_an = sub.add_parser("analyze", help="closed-form tables for one stake level")
    p_an.add_argument("--alpha", type=float, required=True)
    p_an.add_argument("--out", help="output path prefix for CSV/JSON tables")
    p_an.set_defaults(fn=cmd_analyze)

    p_sw = sub.add_parser("sweep", help="win/reset fractions over a parameter grid")
    p_sw.add_argument("--alpha-list", default="0.1,0.2,0.3")
    p_sw.add_argument("--rounds-list", default="100000")
    p_sw.add_argument("--replicates", type=int, default=3)
    p_sw.add_argument("--strategy", default="one-lookahead",
                      choices=("honest", "silent", "one-lookahead"))
    p_sw.add_argument("--beta", type=float, default=1.0)
    p_sw.add_argument("--delta", type=float, default=0.0)
    p_sw.add_argument("--burn-in", type=int, default=1000)
    p_sw.add_argument("--ladder-depth", type=int, default=16)
    p_sw.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p_sw.add_argument("--out", help="output CSV path (default stdout)")
    p_sw.set_defaults(fn=cmd_sweep)

    p_ver = sub.add_parser("verify", help="run the acceptance suite")
    p_ver.add_argument("--quick", action="store_true",
                       help="reduced-scale run for CI (documented sizes)")
    p_ver.add_argument("--tamper", action="store_true",
                       help="corrupt one input on purpose (harness sanity check)")
    p_ver.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except InsufficientSampleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
