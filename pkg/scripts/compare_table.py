"""Run a bundled scenario and print every method next to its reference value.

    python scripts/compare_table.py openloop --samples 1000000 --out runs/openloop
    python scripts/compare_table.py closedloop --samples 200000 --out runs/closedloop

The open-loop references are fixed target values; the closed-loop analogue
has no bit-comparable reference (its wall geometry and gains are choices of
this package), so only the Monte Carlo oracle is shown there.
"""
import argparse

from fptconflict.harness import runner, scenario

OPEN_LOOP_REFERENCE = {
    "monte_carlo": 11.344,
    "proposed": 11.359,
    "pf_vdj_20": 11.402,
    "pf_park_published_20": 9.939,
    "pf_park_altered_20": 11.480,
    "icp_max_20": 1.375,
    "icp_acc_last_20": 37.927,
    "icp_acc_all_20": 14.743,
}


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("scenario", choices=["openloop", "closedloop"])
    parser.add_argument("--samples", type=int, default=None, help="Monte Carlo samples (default: scenario file)")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory (default: runs/<scenario>)")
    args = parser.parse_args()

    sc = scenario.load(scenario.bundled(args.scenario))
    table = runner.run(sc, args.out or f"runs/{args.scenario}", seed=args.seed, mc_samples=args.samples)
    reference = OPEN_LOOP_REFERENCE if args.scenario == "openloop" else {}
    mc = table.row("monte_carlo").probability_pct

    print(f"{'method':<24}{'partition':<18}{'runtime ms':>12}{'P %':>10}{'reference':>11}{'vs MC':>9}")
    for row in table.rows:
        ref = reference.get(row.method)
        ref_txt = f"{ref:.3f}" if ref is not None else "-"
        print(f"{row.method:<24}{row.partition:<18}{row.runtime_ms:>12.3f}{row.probability_pct:>10.3f}"
              f"{ref_txt:>11}{row.probability_pct - mc:>+9.3f}")


if __name__ == "__main__":
    main()
