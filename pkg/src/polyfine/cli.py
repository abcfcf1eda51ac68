"""Command-line entry point: ``polyfine {gen-instance,run,sweep,eval,slope}``."""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import ConfigError, InvalidModel, ParseError, PolyfineError, ShapeMismatch
from .experiment import ExperimentConfig, build_problem, fit_loglog_slope, run_single, sweep
from .mdp import dp_optimal, dp_policy_eval
from .serialization import (parse_mdp, parse_policy, read_text, rows_from_csv, rows_to_csv,
                            serialize_mdp, write_text)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_SOLVER = 0, 2, 3, 4


def _load_config(path) -> ExperimentConfig:
    try:
        text = read_text(path)
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentConfig.from_json(text)


def cmd_gen_instance(args) -> int:
    params = {"covered": dict(S=args.S, A=args.A, H=args.H, seed=args.seed),
              "partial": dict(S=args.S, A=args.A, H=args.H, h_star=args.h_star, gap=args.gap),
              "random": dict(S=args.S, A=args.A, H=args.H, seed=args.seed),
              "zero": dict(S=args.S, A=args.A, H=args.H, seed=args.seed),
              "hard": dict(S_bandit=args.S_bandit, H_bandit=args.H_bandit, A=args.A,
                           K=args.K, tau=args.tau, seed=args.seed)}[args.family]
    params = {k: v for k, v in params.items() if v is not None}
    cfg = ExperimentConfig("uniform-baseline", [0], [0], instance=args.family, instance_params=params)
    problem = build_problem(cfg)
    text = serialize_mdp(problem.mdp, problem.mu)
    if args.out:
        write_text(args.out, text)
    else:
        print(text)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    n = cfg.n_values[0] if args.n is None else args.n
    seed = cfg.seeds[0] if args.seed is None else args.seed
    row = run_single(cfg, n, seed).row
    csv_text = rows_to_csv([row])
    out = args.out or cfg.output
    if out:
        write_text(out, csv_text)
    print(csv_text, end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    rows = sweep(cfg, out_path=args.out)
    if not (args.out or cfg.output):
        print(rows_to_csv(rows), end="")
    return EXIT_OK


def cmd_eval(args) -> int:
    mdp = parse_mdp(read_text(args.mdp))
    policy = parse_policy(read_text(args.policy), mdp.dims)
    v1 = dp_policy_eval(mdp, policy).initial_value(mdp.initial_dist)
    v_star = dp_optimal(mdp)[0].initial_value(mdp.initial_dist)
    print(f"V_1 = {v1:.12g}")
    print(f"suboptimality = {v_star - v1:.12g}")
    return EXIT_OK


def cmd_slope(args) -> int:
    rows = rows_from_csv(read_text(args.csv))
    print(f"{fit_loglog_slope(rows, algo=args.algo):.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="polyfine", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-instance", help="write an instance (with its reference policy) as JSON")
    g.add_argument("--family", required=True, choices=["hard", "partial", "random", "covered", "zero"])
    g.add_argument("--S", type=int)
    g.add_argument("--A", type=int)
    g.add_argument("--H", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--h-star", dest="h_star", type=int)
    g.add_argument("--gap", type=float)
    g.add_argument("--S-bandit", dest="S_bandit", type=int)
    g.add_argument("--H-bandit", dest="H_bandit", type=int)
    g.add_argument("--K", type=int)
    g.add_argument("--tau", type=float)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen_instance)

    r = sub.add_parser("run", help="run one (algorithm, n, seed) cell")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--n", type=int)
    r.add_argument("--seed", type=int)
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run every (n, seed) cell and write the results CSV")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)

    e = sub.add_parser("eval", help="exact value and suboptimality of a policy")
    e.add_argument("--mdp", required=True)
    e.add_argument("--policy", required=True)
    e.set_defaults(func=cmd_eval)

    sl = sub.add_parser("slope", help="log-log slope of median suboptimality against n")
    sl.add_argument("--csv", required=True)
    sl.add_argument("--algo")
    sl.set_defaults(func=cmd_slope)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    np.seterr(all="ignore")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ParseError, InvalidModel, ShapeMismatch) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PolyfineError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
