"""Command line entry point: ``liouville-lab <subcommand>``."""
from __future__ import annotations

import argparse
import sys

from .config import ENV_VAR
from .experiment import LIOUVILLE_MODES, ConfigError, ExperimentConfig, run_experiment


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x)


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.split(",") if x)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liouville-lab",
        description="Finite Dirichlet-form models: certificates, semigroups, recurrence.",
        epilog=f"Tolerance overrides are read from the JSON file named by ${ENV_VAR}.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out-dir", default="lab-out")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a nested family of model files")
    g.add_argument("--family", required=True, help="z1|z2|z3|tree:<b>|random:<n>:<deg>|mesh1d|file:<path>")
    g.add_argument("--radii", type=_ints, default=(5, 10))
    g.add_argument("--weights", choices=("unit", "random"), default="unit")

    s = sub.add_parser("semigroup", parents=[common], help="ergodic convergence curves")
    s.add_argument("--model", required=True)
    s.add_argument("--f")
    s.add_argument("--p", type=_floats, default=(2.0,))
    s.add_argument("--times", type=_floats, default=())

    h = sub.add_parser("harmonic", parents=[common], help="harmonic extension of boundary data")
    h.add_argument("--model", required=True)
    h.add_argument("--boundary", required=True)

    lv = sub.add_parser("liouville", parents=[common], help="inequality certificates and verdicts")
    lv.add_argument("--model")
    lv.add_argument("--f")
    lv.add_argument("--family")
    lv.add_argument("--radii", type=_ints, default=(10,))
    lv.add_argument("--weights", choices=("unit", "random"), default="unit")
    lv.add_argument("--f-kind", choices=("coordinate", "constant", "distance", "dirichlet"))
    lv.add_argument("--p", type=_floats, default=(2.0,))
    lv.add_argument("--mode", choices=LIOUVILLE_MODES, required=True)
    lv.add_argument("--r", type=float)
    lv.add_argument("--R", type=float)
    lv.add_argument("--dump-metric", action="store_true", help="also write the intrinsic certificate TSV")

    rc = sub.add_parser("recurrence", parents=[common], help="volume growth versus effective resistance")
    rc.add_argument("--family", required=True)
    rc.add_argument("--max-radius", type=int, default=20)

    va = sub.add_parser("verify-all", parents=[common], help="run the full acceptance suite")
    va.add_argument("--only", type=_ints, default=None, help="comma-separated criterion numbers")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify-all":
            from .acceptance import run_all
            results = run_all(args.seed, args.out_dir, only=args.only, log=print)
            return 0 if all(r.passed for r in results) else 1
        cfg = ExperimentConfig(operation=args.command, out_dir=args.out_dir, seed=args.seed)
        if args.command == "generate":
            cfg.family, cfg.radii, cfg.weights = args.family, args.radii, args.weights
        elif args.command == "semigroup":
            cfg.model, cfg.f, cfg.ps, cfg.times = args.model, args.f, args.p, args.times
        elif args.command == "harmonic":
            cfg.model, cfg.boundary = args.model, args.boundary
        elif args.command == "liouville":
            cfg.model, cfg.f, cfg.family, cfg.radii = args.model, args.f, args.family, args.radii
            cfg.weights, cfg.f_kind, cfg.ps, cfg.mode = args.weights, args.f_kind, args.p, args.mode
            cfg.r, cfg.R, cfg.dump_metric = args.r, args.R, args.dump_metric
        else:
            cfg.family, cfg.radii = args.family, (args.max_radius,)
        return run_experiment(cfg).exit_code
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
