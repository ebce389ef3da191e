"""``boxsearch`` command line.

Exit codes: 0 success, 1 a verification check failed, 2 usage error.
"""

from __future__ import annotations

import argparse
import contextlib
import logging
import os
import sys

from . import reports
from ._validation import IncompleteMatrixError, InvalidArgumentError, OrderViolationError
from .continuum import ContinuumParams, pareto_ratio_components
from .distributions import parse_prior_spec
from .estimators import exact_time
from .montecarlo import SimConfig, run
from .searchers import KINDS, SearcherSpec, trace
from .strategy_engine import build_L, cord_time

USAGE_ERRORS = (InvalidArgumentError, OrderViolationError, IncompleteMatrixError)


class UsageError(Exception):
    pass


def default_seed() -> int:
    raw = os.environ.get("BOXSEARCH_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise UsageError(f"BOXSEARCH_SEED must be an integer, got {raw!r}") from None


def _crash(text):
    try:
        agent, when = text.split(":")
        return int(agent), int(when)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected agent:time, got {text!r}") from None


@contextlib.contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="\n") as fh:
            yield fh


def _spec(alg, k, prior, b):
    if alg == "pareto" and b is None:
        b = prior.b
    return SearcherSpec(alg, k, b)


# ---------------------------------------------------------------------------
# commands


def cmd_lstar(args):
    prior = parse_prior_spec(args.prior)
    sch = build_L(prior, args.k)
    S = len(sch.alpha) - 1
    side = {
        "prior": prior.to_dict(),
        "k": args.k,
        "t": list(range(1, S + 1)),
        "alpha": [float(a) for a in sch.alpha[1:]],
        "ac": [int(a) for a in sch.active[1:]],
    }
    if args.dump:
        with open(args.dump, "w", newline="\n") as fh:
            reports.write_matrix_csv(sch.L.survival, fh, horizon=prior.M)
        json_path = args.schedule or os.path.splitext(args.dump)[0] + ".json"
        with open(json_path, "w", newline="\n") as fh:
            fh.write(reports.dumps(side) + "\n")
    else:
        reports.write_matrix_csv(sch.L.survival, sys.stdout, horizon=prior.M)
        if args.schedule:
            with open(args.schedule, "w", newline="\n") as fh:
                fh.write(reports.dumps(side) + "\n")
    return 0


def cmd_eval(args):
    prior = parse_prior_spec(args.prior)
    algs = list(KINDS) if "all" in args.alg else args.alg
    cord = cord_time(prior, args.k)
    rows = []
    for alg in algs:
        if alg == "pareto" and args.b is None and prior.b is None:
            if "all" in args.alg:
                continue
            raise UsageError("pareto needs --b when the prior is not pareto")
        lower, upper = exact_time(_spec(alg, args.k, prior, args.b), prior)
        rows.append({"strategy": alg, "lower": lower, "upper": upper,
                     "ratio_to_cord": 0.5 * (lower + upper) / cord})
    columns = ("strategy", "lower", "upper", "ratio_to_cord")
    with _output(args.out) as out:
        if args.format == "json":
            out.write(reports.dumps({"prior": prior.to_dict(), "k": args.k, "rows": rows}) + "\n")
        elif args.format == "csv":
            reports.write_table_csv(rows, columns, out)
        else:
            out.write(f"{'strategy':<20} {'lower':>14} {'upper':>14} {'ratio_to_cord':>14}\n")
            for r in rows:
                out.write(f"{r['strategy']:<20} {r['lower']:>14.6f} {r['upper']:>14.6f} "
                          f"{r['ratio_to_cord']:>14.6f}\n")
    return 0


def cmd_sim(args):
    prior = parse_prior_spec(args.prior)
    seed = default_seed() if args.seed is None else args.seed
    config = SimConfig(
        prior=prior, k=args.k, strategy=args.alg, trials=args.trials, seed=seed,
        crash_schedule=tuple(args.crash or ()), configured_k=args.configured_k,
        b=args.b, threads=args.threads,
    )
    outcome = run(config)
    with _output(args.out) as out:
        if args.format == "json":
            reports.write_sim_json(outcome.config, outcome.discovery_times,
                                   outcome.treasure_boxes, out)
        else:
            reports.write_sim_csv(outcome.config, outcome.discovery_times,
                                  outcome.treasure_boxes, out)
    print(f"mean {outcome.mean:.6f} +- {outcome.stderr:.6f} over {outcome.found.size} trials"
          f" ({outcome.censored} censored, {outcome.no_op_count} no-ops)", file=sys.stderr)
    return 0


def cmd_trace(args):
    prior = parse_prior_spec(args.prior)
    seed = default_seed() if args.seed is None else args.seed
    spec = _spec(args.alg, args.k, prior, args.b)
    steps = args.steps if args.steps is not None else prior.M
    seq = trace(spec, prior, steps, seed=seed, agent_id=args.agent, trial=args.trial)
    with _output(args.out) as out:
        for t, boxes in enumerate(seq.boxes, start=1):
            out.write(reports.dumps({"agent": seq.agent_id, "seed": seq.seed,
                                     "trial": seq.trial, "t": t, "boxes": list(boxes)}) + "\n")
    return 0


def cmd_theory(args):
    from .checks import pareto_ratio

    params = ContinuumParams(args.b, args.k)
    doc = pareto_ratio_components(params)
    if args.M is not None:
        if not (0 < args.b < 1):
            raise UsageError("the finite-M ratio needs 0 < b < 1")
        doc["M"] = args.M
        doc["measured_ratio"] = pareto_ratio(args.b, args.k, args.M)
        doc["relative_gap"] = abs(doc["measured_ratio"] - doc["limit"]) / doc["limit"]
    doc["b"] = args.b
    doc["k"] = args.k
    if args.format == "json":
        print(reports.dumps(doc))
    else:
        for key in ("b", "k", "sigma", "u_opt", "early_term", "late_term", "limit",
                    "M", "measured_ratio", "relative_gap"):
            if key in doc:
                print(f"{key}: {doc[key]}")
    return 0


def cmd_verify(args):
    from .checks import run_suite

    opts = {}
    if args.b is not None:
        opts["b"] = args.b
    if args.k is not None:
        opts["k"] = args.k
    if args.M is not None:
        opts["Ms"] = (max(10, args.M // 100), max(10, args.M // 10), args.M)
    if args.trials is not None:
        opts["trials"] = args.trials
    failed = 0
    for result in run_suite(args.suite, **opts):
        print(result.line(), flush=True)
        failed += not result.passed
    return 1 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="boxsearch",
                                     description="Non-coordinating multi-agent box search.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def prior_arg(p):
        p.add_argument("--prior", required=True,
                       help="uniform:M | pareto:b,M | file:path.json")

    p = sub.add_parser("lstar", help="optimal survival matrix L for a prior")
    prior_arg(p)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--dump", help="write L as CSV here (plus a .json schedule beside it)")
    p.add_argument("--schedule", help="path for the alpha / ac JSON")
    p.set_defaults(func=cmd_lstar)

    p = sub.add_parser("eval", help="exact expected times and ratios to the coordinated sweep")
    prior_arg(p)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--alg", action="append", required=True, choices=KINDS + ("all",))
    p.add_argument("--b", type=float)
    p.add_argument("--format", choices=("table", "csv", "json"), default="table")
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sim", help="Monte Carlo discovery times")
    prior_arg(p)
    p.add_argument("--alg", required=True, choices=KINDS)
    p.add_argument("-k", type=int, required=True, help="number of agents present")
    p.add_argument("--configured-k", type=int, help="k the strategy is built for (default -k)")
    p.add_argument("--b", type=float)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, help="default: $BOXSEARCH_SEED or 0")
    p.add_argument("--crash", type=_crash, action="append", metavar="AGENT:TIME")
    p.add_argument("--threads", type=int)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("trace", help="one agent's check sequence as JSON lines")
    prior_arg(p)
    p.add_argument("--alg", required=True, choices=KINDS)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--b", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int, help="default: M")
    p.add_argument("--agent", type=int, default=1)
    p.add_argument("--trial", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("theory", help="continuous Pareto analysis")
    tsub = p.add_subparsers(dest="topic", required=True)
    r = tsub.add_parser("ratio", help="limiting pareto / cord ratio")
    r.add_argument("--b", type=float, required=True)
    r.add_argument("-k", type=int, required=True)
    r.add_argument("--M", type=int, help="also report the exact ratio at this M")
    r.add_argument("--format", choices=("text", "json"), default="text")
    r.set_defaults(func=cmd_theory)

    p = sub.add_parser("verify", help="run named numerical checks")
    p.add_argument("suite", choices=("bounds", "optimality", "pareto", "gamma", "montecarlo", "all"))
    p.add_argument("--b", type=float)
    p.add_argument("-k", type=int)
    p.add_argument("--M", type=int)
    p.add_argument("--trials", type=int)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, *USAGE_ERRORS) as exc:
        parser.exit(2, f"boxsearch: error: {exc}\n")
    except OSError as exc:
        parser.exit(2, f"boxsearch: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
