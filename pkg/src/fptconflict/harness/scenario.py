"""Scenario files: TOML text validated against a JSON schema, then built into model objects."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
import tomli

from ..errors import ConfigError
from ..geometry import ConflictBoundary, Disk, Segment, approximate_circle, visible_arc
from ..motion import LtiModel, PiecewiseLinearPlan, PlanStage

SCHEMA_FILE = "scenario.schema.json"


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath(SCHEMA_FILE).read_text())


@dataclass(frozen=True)
class MethodSpec:
    method: str
    label: str
    params: dict = field(default_factory=dict)

    @property
    def partition_label(self) -> str:
        p = self.params
        if self.method == "proposed":
            return f"{p['n_segments']} segments"
        if self.method == "icp":
            return f"{p.get('n_rectangles', 20)} rectangles"
        if "partition_m" in p:
            return f"{p['partition_m']:g} m"
        return f"{p.get('partition', 20)} intervals"


@dataclass(frozen=True)
class McSpec:
    samples: int = 1_000_000
    seed: int = 0
    dt: float | None = None
    transient: bool = True
    chunk_size: int = 50_000


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    name: str
    horizon: float
    dt: float
    plan: PiecewiseLinearPlan
    model: LtiModel
    boundary: ConflictBoundary
    region: object                 # Disk or ConflictBoundary, used by the oracle and region-based baselines
    methods: tuple
    mc: McSpec
    trajectories: int = 0
    source: Path | None = None
    raw: dict = field(default_factory=dict, repr=False)


def _line_of(text: str, path) -> int | None:
    """Best-effort line number of a dotted key path in TOML text."""
    keys = [k for k in path if isinstance(k, str)]
    lines = text.splitlines()
    if keys:
        pat = re.compile(rf"^\s*{re.escape(keys[-1])}\s*=")
        hits = [i + 1 for i, ln in enumerate(lines) if pat.match(ln)]
        if hits:
            return hits[0]
        for depth in range(len(keys), 0, -1):
            header = re.compile(r"^\s*\[\[?\s*" + re.escape(".".join(keys[:depth])) + r"\s*\]\]?")
            hits = [i + 1 for i, ln in enumerate(lines) if header.match(ln)]
            if hits:
                return hits[0]
    return None


def _validation_error(err: jsonschema.ValidationError, text: str) -> ConfigError:
    path = list(err.absolute_path)
    if err.validator == "required":
        missing = re.search(r"'([^']+)' is a required property", err.message)
        if missing:
            path = path + [missing.group(1)]
    name = ".".join(str(p) for p in path) or "<root>"
    line = _line_of(text, path) if err.validator != "required" else _line_of(text, path[:-1])
    return ConfigError(err.message, field=name, line=line)


def validate(data: dict, text: str = "") -> None:
    validator = jsonschema.Draft202012Validator(load_schema())
    # best_match descends into oneOf branches, so the error names the offending leaf
    err = jsonschema.exceptions.best_match(validator.iter_errors(data))
    if err is not None:
        raise _validation_error(err, text)


def _plan(spec: dict, horizon: float) -> PiecewiseLinearPlan:
    stages = []
    p = np.asarray(spec["start_m"], dtype=float)
    for leg in spec["legs"]:
        if "target_m" in leg:
            target = np.asarray(leg["target_m"], dtype=float)
            duration = float(np.hypot(*(target - p))) / leg["speed_mps"]
            velocity = (target - p) / duration
        else:
            velocity = np.asarray(leg["velocity_mps"], dtype=float)
            duration = float(leg["duration_s"])
        stages.append(PlanStage(tuple(p), tuple(velocity), duration))
        p = p + duration * velocity
    total = sum(s.duration for s in stages)
    if spec.get("extend_to_horizon", True) and horizon > total:
        last = stages[-1]
        stages[-1] = PlanStage(last.start, last.velocity, last.duration + horizon - total)
    elif horizon > total + 1e-9:
        raise ConfigError("plan ends before the horizon", field="plan.legs")
    return PiecewiseLinearPlan(tuple(stages))


def _model(spec: dict) -> LtiModel:
    q = spec["q_diag_m2_per_s3"]
    if spec["kind"] == "open_loop":
        return LtiModel.double_integrator(q)
    return LtiModel.tracking(q, spec["kp_per_s2"], spec["kd_per_s"])


def _boundary(spec: dict, start) -> ConflictBoundary:
    if spec["kind"] == "segments":
        segs = [Segment(tuple(a), tuple(b)) for a, b in spec["segments_m"]]
        return ConflictBoundary.from_segments(segs, tuple(spec["interior_m"]))
    center, radius = tuple(spec["center_m"]), float(spec["radius_m"])
    if "arc_rad" in spec:
        arc = tuple(spec["arc_rad"])
    elif spec.get("arc", "visible") == "visible":
        arc = visible_arc(center, radius, start)
    else:
        arc = (-np.pi / 2, np.pi / 2)
    return approximate_circle(center, radius, spec["n_segments"], arc, kind=spec.get("chord", "inscribed"))


def _region(data: dict, boundary: ConflictBoundary):
    spec = data.get("region")
    if spec is None:
        b = data["boundary"]
        if b["kind"] == "circle":
            return Disk(tuple(b["center_m"]), float(b["radius_m"]))
        return boundary
    if spec["kind"] == "disk":
        return Disk(tuple(spec["center_m"]), float(spec["radius_m"]))
    return boundary


def _methods(data: dict, boundary: ConflictBoundary) -> tuple:
    out = []
    for i, m in enumerate(data.get("methods", [{"method": "proposed"}])):
        params = {k: v for k, v in m.items() if k not in ("method", "label")}
        kind = m["method"]
        if kind == "proposed":
            params["n_segments"] = len(boundary)
        if kind == "pf_park":
            params.setdefault("variant", "altered")
        if kind == "icp":
            params.setdefault("mode", "max")
        if kind in ("pf_vdj", "pf_park") and "partition" in params and "partition_m" in params:
            raise ConfigError("give either partition or partition_m", field=f"methods.{i}")
        label = m.get("label") or "_".join([kind] + [str(params[k]) for k in ("variant", "mode") if k in params])
        out.append(MethodSpec(kind, label, params))
    seen = set()
    for i, spec in enumerate(out):
        if spec.label in seen:
            raise ConfigError(f"duplicate method label {spec.label!r}", field=f"methods.{i}.label")
        seen.add(spec.label)
    return tuple(out)


def parse(text: str, source: Path | None = None) -> ScenarioConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"malformed scenario: {exc}", line=int(m.group(1)) if m else None) from exc
    validate(data, text)
    horizon, dt = float(data["horizon_s"]), float(data["dt_s"])
    if dt > horizon:
        raise ConfigError("dt_s must not exceed horizon_s", field="dt_s", line=_line_of(text, ["dt_s"]))
    try:
        plan = _plan(data["plan"], horizon)
        model = _model(data["model"])
        boundary = _boundary(data["boundary"], data["plan"]["start_m"])
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    mc = data.get("mc", {})
    mc_spec = McSpec(samples=mc.get("samples", McSpec.samples), seed=mc.get("seed", 0), dt=mc.get("dt_s"),
                     transient=mc.get("transient", True), chunk_size=mc.get("chunk_size", McSpec.chunk_size))
    return ScenarioConfig(
        name=data["name"], horizon=horizon, dt=dt, plan=plan, model=model, boundary=boundary,
        region=_region(data, boundary), methods=_methods(data, boundary), mc=mc_spec,
        trajectories=data.get("output", {}).get("trajectories", 0), source=source, raw=data,
    )


def load(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from exc
    return parse(text, path)


def bundled(name: str) -> Path:
    """Path of a scenario shipped with the package, e.g. ``bundled("openloop")``."""
    ref = resources.files("fptconflict").joinpath("scenarios", f"{name}.scenario")
    return Path(str(ref))
