"""Command line: ``fptconflict run|bench|plot-data|mc``."""
from __future__ import annotations

import argparse
import sys

from ..conflict import WORKERS_ENV
from ..errors import ConfigError, MethodError
from . import runner, scenario


def _scenario(path: str):
    return scenario.load(path)


def cmd_run(args) -> int:
    sc = _scenario(args.scenario)
    table = runner.run(sc, args.out, seed=args.seed, mc_samples=args.samples, with_mc=not args.no_mc)
    sys.stdout.write(table.to_csv())
    return 0


def cmd_bench(args) -> int:
    sc = _scenario(args.scenario)
    stats = runner.bench(sc, args.repeats, args.warmup)
    print("method,mean_ms,std_ms,repeats")
    for label, s in stats.items():
        print(f"{label},{s.mean_ms:.4f},{s.std_ms:.4f},{s.repeats}")
    return 0


def cmd_plot(args) -> int:
    sc = _scenario(args.scenario)
    for path in runner.emit_plot_data(sc, args.paths, args.out, seed=args.seed):
        print(path)
    return 0


def cmd_mc(args) -> int:
    sc = _scenario(args.scenario)
    est = runner.run_mc(sc, args.samples, args.seed)
    print(f"probability_pct={100 * est.probability:.3f} std_error_pct={100 * est.std_error:.3f} "
          f"n_samples={est.n_samples} runtime_s={est.runtime:.1f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fptconflict",
        description="Conflict probability by first-passage time distributions, with baselines and a Monte Carlo oracle.",
        epilog=f"Set {WORKERS_ENV}=N to evaluate segments and Monte Carlo chunks on N threads (0 = one per CPU).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run every configured method plus the oracle and write results")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override the Monte Carlo seed")
    p.add_argument("--samples", type=int, default=None, help="override the Monte Carlo sample count")
    p.add_argument("--no-mc", action="store_true", help="skip the Monte Carlo oracle")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("bench", help="time each configured method")
    p.add_argument("--scenario", required=True)
    p.add_argument("--repeats", type=int, default=1000)
    p.add_argument("--warmup", type=int, default=100)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot-data", help="write nominal path, boundary and sampled trajectories as text")
    p.add_argument("--scenario", required=True)
    p.add_argument("--paths", type=int, default=20)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("mc", help="Monte Carlo estimate only")
    p.add_argument("--scenario", required=True)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_mc)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MethodError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
