"""Experiment runner: executes the configured methods, times them and writes result files."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..baselines import IcpConfig, PfConfig, icp_to_conflict, pf_park, pf_vdj
from ..conflict import ConflictQuery, MethodResult, PredictorInputs, boundary_conflict_probability
from ..errors import FptConflictError, MethodError
from ..motion import BeliefTimeline, build_timeline
from ..oracle import McConfig, McEstimate, chunk_rng, estimate, sample_paths
from .scenario import MethodSpec, ScenarioConfig

RESULTS_HEADER = ("method", "partition", "runtime_ms", "probability_pct")


@dataclass(frozen=True, eq=False)
class Prepared:
    """Inputs shared by every method; built once, outside any timed region."""

    scenario: ScenarioConfig
    query: ConflictQuery
    timeline: BeliefTimeline
    inputs: PredictorInputs

    @classmethod
    def from_scenario(cls, sc: ScenarioConfig) -> Prepared:
        query = ConflictQuery(sc.plan, sc.model, sc.boundary, sc.horizon, sc.dt)
        timeline = build_timeline(sc.model, sc.plan, sc.horizon, sc.dt)
        return cls(sc, query, timeline, PredictorInputs.from_query(query, timeline))


def run_method(spec: MethodSpec, prep: Prepared) -> MethodResult:
    sc, p = prep.scenario, spec.params
    try:
        if spec.method == "proposed":
            res = boundary_conflict_probability(prep.query, inputs=prep.inputs)
        elif spec.method in ("pf_vdj", "pf_park"):
            cfg = PfConfig(p.get("partition_m", p.get("partition", 20)))
            if spec.method == "pf_vdj":
                res = pf_vdj(prep.timeline, sc.region, cfg)
            else:
                res = pf_park(prep.timeline, sc.region, cfg, p["variant"],
                              position_diffusion=sc.model.noise_diffusion[:2, :2])
        elif spec.method == "icp":
            cfg = IcpConfig(p.get("n_rectangles", 20), p.get("accumulation_period_s", 0.15))
            res = icp_to_conflict(prep.timeline, sc.region, cfg, p["mode"])
        else:
            raise ValueError(f"unknown method {spec.method!r}")
    except (FptConflictError, ValueError, ArithmeticError) as exc:
        raise MethodError(spec.label, exc) from exc
    res.method_name = spec.label
    return res


@dataclass(frozen=True)
class ResultRow:
    method: str
    partition: str
    runtime_ms: float
    probability_pct: float


@dataclass
class ResultTable:
    rows: list

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(RESULTS_HEADER)
        for r in self.rows:
            w.writerow([r.method, r.partition, f"{r.runtime_ms:.3f}", f"{r.probability_pct:.3f}"])
        return buf.getvalue()

    def row(self, method: str) -> ResultRow:
        for r in self.rows:
            if r.method == method:
                return r
        raise KeyError(method)


def mc_config(sc: ScenarioConfig, samples: int | None = None, seed: int | None = None) -> McConfig:
    m = sc.mc
    return McConfig(n_samples=samples or m.samples, dt=m.dt or sc.dt, seed=m.seed if seed is None else seed,
                    transient=m.transient, chunk_size=m.chunk_size)


def run_mc(sc: ScenarioConfig, samples: int | None = None, seed: int | None = None) -> McEstimate:
    return estimate(sc.model, sc.plan, sc.region, sc.horizon, mc_config(sc, samples, seed))


def _segment_diagnostics(res: MethodResult) -> dict:
    return {
        "probability": res.probability,
        "per_segment": [{"index": s.index, "probability": s.probability, "diagnostics": s.diagnostics}
                        for s in res.per_segment],
        "diagnostics": {k: v for k, v in res.diagnostics.items()},
    }


def run(sc: ScenarioConfig, out_dir, seed: int | None = None, mc_samples: int | None = None,
        with_mc: bool = True) -> ResultTable:
    """Run every configured method (and the oracle), writing results and diagnostics to ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prep = Prepared.from_scenario(sc)
    rows, diag = [], {}
    if with_mc:
        mc = run_mc(sc, mc_samples, seed)
        rows.append(ResultRow("monte_carlo", f"{mc.n_samples} samples", 1e3 * mc.runtime, 100 * mc.probability))
        diag["monte_carlo"] = {"probability": mc.probability, "std_error": mc.std_error,
                               "n_samples": mc.n_samples, "seed": mc_config(sc, mc_samples, seed).seed}
    for spec in sc.methods:
        res = run_method(spec, prep)
        rows.append(ResultRow(spec.label, spec.partition_label, 1e3 * res.runtime, 100 * res.probability))
        diag[spec.label] = _segment_diagnostics(res)
    table = ResultTable(rows)
    (out / "results.csv").write_text(table.to_csv())
    (out / "diagnostics.json").write_text(json.dumps(diag, indent=2, sort_keys=True, default=_jsonable))
    if sc.trajectories:
        emit_plot_data(sc, sc.trajectories, out / "plot", seed=sc.mc.seed if seed is None else seed)
    return table


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj).__name__}")


@dataclass(frozen=True)
class TimingSummary:
    mean_ms: float
    std_ms: float
    repeats: int


def time_callable(fn, repeats: int, warmup: int = 100) -> TimingSummary:
    """Mean and standard deviation of wall-clock time of ``fn()`` over ``repeats`` calls after ``warmup`` calls."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    for _ in range(warmup):
        fn()
    samples = np.empty(repeats)
    for i in range(repeats):
        t0 = time.perf_counter()
        fn()
        samples[i] = time.perf_counter() - t0
    return TimingSummary(1e3 * samples.mean(), 1e3 * samples.std(), repeats)


def bench(sc: ScenarioConfig, repeats: int, warmup: int = 100, methods=None) -> dict:
    """Per-method timing; scenario parsing and shared-input preparation are excluded."""
    prep = Prepared.from_scenario(sc)
    specs = [s for s in sc.methods if methods is None or s.label in methods]
    return {s.label: time_callable(lambda s=s: run_method(s, prep), repeats, warmup) for s in specs}


def emit_plot_data(sc: ScenarioConfig, n_paths: int, out_dir, seed: int = 0) -> list:
    """Write the nominal path, boundary segments and ``n_paths`` sampled trajectories as whitespace-separated text."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    prep_times = build_timeline(sc.model, sc.plan, sc.horizon, sc.dt).times
    pos, _ = sc.plan.mean(prep_times)
    written = []

    def save(name, arr, header):
        path = out / name
        np.savetxt(path, arr, header=header, fmt="%.9g")
        written.append(path)

    save("nominal.txt", np.column_stack([prep_times, pos]), "t_s x_m y_m")
    save("boundary.txt", sc.boundary.endpoints().reshape(-1, 4), "x1_m y1_m x2_m y2_m")
    if n_paths > 0:
        times, paths = sample_paths(sc.model, sc.plan, sc.horizon, sc.mc.dt or sc.dt, n_paths, chunk_rng(seed, 0))
        rows = [np.column_stack([np.full(len(times), i), times, p]) for i, p in enumerate(paths)]
        save("paths.txt", np.vstack(rows), "path t_s x_m y_m")
    return written
