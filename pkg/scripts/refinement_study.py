"""Convergence of the proposed method in the quadrature step and of the baselines in partition size.

    python scripts/refinement_study.py
"""
import numpy as np

from fptconflict.baselines import IcpConfig, PfConfig, icp_to_conflict, pf_park, pf_vdj
from fptconflict.conflict import ConflictQuery, boundary_conflict_probability
from fptconflict.harness import scenario
from fptconflict.harness.runner import Prepared


def main():
    for name, partitions in (("openloop", (5, 10, 20, 40, 80)), ("closedloop", (0.4, 0.2, 0.1, 0.05, 0.025))):
        sc = scenario.load(scenario.bundled(name))
        prep = Prepared.from_scenario(sc)
        q = prep.query
        print(f"\n{name}: proposed method vs quadrature step")
        prev = None
        for dt in q.dt * np.array([4, 2, 1, 0.5, 0.25]):
            p = 100 * boundary_conflict_probability(ConflictQuery(q.plan, q.model, q.boundary, q.horizon, dt)).probability
            delta = "" if prev is None else f"  change {p - prev:+.2e}"
            print(f"  dt {1e3 * dt:7.3f} ms  {p:.6f}%{delta}")
            prev = p

        print(f"{name}: probability flow vs partition")
        for h in partitions:
            cfg = PfConfig(h)
            row = [100 * pf_vdj(prep.timeline, sc.region, cfg).probability,
                   100 * pf_park(prep.timeline, sc.region, cfg, "published").probability,
                   100 * pf_park(prep.timeline, sc.region, cfg, "altered").probability]
            print(f"  partition {h:<6}  vDJ {row[0]:.6f}  PK-P {row[1]:.6f}  PK-A {row[2]:.6f}")

        if name == "openloop":
            print("openloop: rectangle-covered ICP vs rectangle count (150 ms accumulation)")
            for n in (5, 10, 15, 20, 40, 80):
                vals = [100 * icp_to_conflict(prep.timeline, sc.region, IcpConfig(n, 0.15), m).probability
                        for m in ("max", "acc_last", "acc_all")]
                print(f"  {n:>3} rectangles  max {vals[0]:.4f}  acc_last {vals[1]:.4f}  acc_all {vals[2]:.4f}")


if __name__ == "__main__":
    main()
