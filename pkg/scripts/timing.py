"""Runtime ordering of all methods and the cost of refining the boundary.

    python scripts/timing.py --repeats 1000

Prints mean/std runtime of every configured method on both bundled scenarios
(shared inputs prepared once, as in ``fptconflict bench``), then the
proposed-method runtime as the segment count is doubled repeatedly.
"""
import argparse
import time

import numpy as np

from fptconflict.conflict import ConflictQuery, boundary_conflict_probability
from fptconflict.harness import runner, scenario
from fptconflict.harness.runner import Prepared


def _doubled(boundary):
    for i in reversed(range(len(boundary))):
        boundary = boundary.refined(i, 0.5)
    return boundary


def _median_ms(fn, block=20, rounds=9):
    fn()
    out = []
    for _ in range(rounds):
        t0 = time.perf_counter()
        for _ in range(block):
            fn()
        out.append(1e3 * (time.perf_counter() - t0) / block)
    return float(np.median(out))


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--repeats", type=int, default=200)
    parser.add_argument("--warmup", type=int, default=20)
    parser.add_argument("--doublings", type=int, default=4)
    args = parser.parse_args()

    for name in ("openloop", "closedloop"):
        sc = scenario.load(scenario.bundled(name))
        stats = runner.bench(sc, args.repeats, args.warmup)
        base = stats["proposed"].mean_ms
        print(f"\n{name}: mean runtime over {args.repeats} calls")
        for label, s in stats.items():
            print(f"  {label:<26}{s.mean_ms:>10.3f} ms  +/- {s.std_ms:7.3f}   x{s.mean_ms / base:6.1f}")

        prep = Prepared.from_scenario(sc)
        q, boundary = prep.query, prep.query.boundary
        print(f"{name}: proposed method vs segment count")
        prev = None
        for _ in range(args.doublings + 1):
            query = ConflictQuery(q.plan, q.model, boundary, q.horizon, q.dt)
            ms = _median_ms(lambda: boundary_conflict_probability(query, inputs=prep.inputs))
            ratio = "" if prev is None else f"  ratio {ms / prev:.2f}"
            print(f"  {len(boundary):>4} segments {ms:9.3f} ms{ratio}")
            prev, boundary = ms, _doubled(boundary)


if __name__ == "__main__":
    main()
