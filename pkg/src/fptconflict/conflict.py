"""Conflict probability from first-passage densities and boundary-conditioned mass.

For each boundary segment the motion is reduced onto the segment normal, the
first-passage density of the reduced process weights the Gaussian mass of the
position distribution conditioned on the segment's supporting line, and the
product is integrated over time with the trapezoid rule. Segment results are
summed and clamped at 1.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import erf

from .errors import DegenerateVariance, NotApproaching
from .fptd import density
from .geometry import ConflictBoundary, horizontalize
from .motion import BeliefTimeline, LtiModel, PiecewiseLinearPlan, build_timeline, steady_state_covariance
from .reduction import ConstantVariance, CubicVariance, build_reduced, reduce_noise

WORKERS_ENV = "FPTCONFLICT_WORKERS"


def worker_count(workers: int | None = None) -> int:
    """Parallelism degree: explicit value, else the environment variable (0 = auto)."""
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


@dataclass(frozen=True)
class ConflictQuery:
    plan: PiecewiseLinearPlan
    model: LtiModel
    boundary: ConflictBoundary
    horizon: float
    dt: float

    def __post_init__(self):
        if not (self.horizon > 0 and self.dt > 0 and self.dt <= self.horizon):
            raise ValueError("need 0 < dt <= horizon")

    @property
    def closed_loop(self) -> bool:
        return self.model.is_closed_loop


@dataclass
class SegmentResult:
    index: int
    probability: float
    diagnostics: dict = field(default_factory=dict)


@dataclass
class MethodResult:
    probability: float
    per_segment: list
    runtime: float
    method_name: str
    diagnostics: dict = field(default_factory=dict)


@dataclass(frozen=True, eq=False)
class PredictorInputs:
    """Quantities shared by every segment: the time grid, plan mean and position covariance."""

    times: np.ndarray
    positions: np.ndarray
    stage_of: np.ndarray
    cov_r: np.ndarray        # (T, 2, 2), or (2, 2) when constant
    accel_diffusion: np.ndarray

    @cached_property
    def cov_entries(self):
        """``(C_xx, C_xy, C_yy)`` of the position covariance, each scalar or (T,)."""
        c = self.cov_r
        return c[..., 0, 0], c[..., 0, 1], c[..., 1, 1]

    @classmethod
    def from_query(cls, query: ConflictQuery, timeline: BeliefTimeline | None = None) -> PredictorInputs:
        if query.closed_loop:
            # steady state from t = 0; transients are deliberately ignored
            cov = steady_state_covariance(query.model)[:2, :2]
            if timeline is None:
                from .motion import time_grid
                times = time_grid(query.horizon, query.dt)
                positions, _ = query.plan.mean(times)
            else:
                times, positions = timeline.times, timeline.means[:, :2]
        else:
            if timeline is None:
                timeline = build_timeline(query.model, query.plan, query.horizon, query.dt)
            times, positions, cov = timeline.times, timeline.means[:, :2], timeline.covs[:, :2, :2]
        q_acc = query.model.noise_diffusion[2:, 2:]
        return cls(times, positions, query.plan.stage_index(times), cov, q_acc)


def conditional_moments(mean_xy, cov_xy, y_boundary):
    """Mean and variance of x given y = y_boundary for a 2-D Gaussian (vectorized over leading axes)."""
    mean_xy = np.asarray(mean_xy, dtype=float)
    cov_xy = np.asarray(cov_xy, dtype=float)
    mx, my = mean_xy[..., 0], mean_xy[..., 1]
    cx, cy, cxy = cov_xy[..., 0, 0], cov_xy[..., 1, 1], cov_xy[..., 0, 1]
    if np.any(cy <= 1e-15):
        raise DegenerateVariance("variance normal to the boundary must be positive")
    m = mx + (y_boundary - my) * cxy / cy
    v = np.maximum(cx - cxy ** 2 / cy, 0.0)
    return m, v


def segment_mass(mean, var, x1, x2):
    """Gaussian mass on [x1, x2]; a point mass when the variance vanishes."""
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    ok = var > 0
    s = np.sqrt(2 * np.where(ok, var, 1.0))
    smooth = 0.5 * (erf((x2 - mean) / s) - erf((x1 - mean) / s))
    point = ((mean >= x1) & (mean <= x2)).astype(float)
    return np.where(ok, smooth, point)


def _trapezoid(y, x) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def segment_conflict_probability(query: ConflictQuery, index: int,
                                 inputs: PredictorInputs | None = None) -> SegmentResult:
    if inputs is None:
        inputs = PredictorInputs.from_query(query)
    seg = query.boundary.segments[index]
    n = query.boundary.normal(index)
    rot = horizontalize(seg, n).rotation
    times = inputs.times

    # boundary-conditioned mass in the frame where the segment is horizontal:
    # only the quadratic forms of the position covariance along the rotated axes are needed
    u, v = rot[0], rot[1]
    x = inputs.positions @ u
    y = inputs.positions @ v
    cxx, cxy, cyy = inputs.cov_entries
    c_x = u[0] * u[0] * cxx + 2 * u[0] * u[1] * cxy + u[1] * u[1] * cyy
    c_y = v[0] * v[0] * cxx + 2 * v[0] * v[1] * cxy + v[1] * v[1] * cyy
    c_xy = u[0] * v[0] * cxx + (u[0] * v[1] + u[1] * v[0]) * cxy + u[1] * v[1] * cyy
    c_x, c_y, c_xy = (np.broadcast_to(c, times.shape) for c in (c_x, c_y, c_xy))
    y_c = float(v @ seg.a)
    xs = sorted((float(u @ seg.a), float(u @ seg.b)))
    live = c_y > 1e-15
    mass = np.zeros(len(times))
    if np.any(live):
        m = x[live] + (y_c - y[live]) * c_xy[live] / c_y[live]
        var = np.maximum(c_x[live] - c_xy[live] ** 2 / c_y[live], 0.0)
        mass[live] = segment_mass(m, var, xs[0], xs[1])

    if query.closed_loop:
        law = ConstantVariance(float(n @ inputs.cov_r @ n))
    else:
        law = CubicVariance(reduce_noise(inputs.accel_diffusion, n))

    f = np.zeros(len(times))
    diag = {"skipped_stages": [], "validity_truncated": False}
    starts = query.plan.start_times
    for k, stage in enumerate(query.plan.stages):
        sel = inputs.stage_of == k
        if not np.any(sel):
            continue
        try:
            proc = build_reduced(stage, float(starts[k]), seg, n, law)
        except NotApproaching as exc:
            diag["skipped_stages"].append({"stage": k, "reason": str(exc)})
            continue
        fk, truncated = density(proc, times[sel])
        f[sel] = fk
        diag["validity_truncated"] |= truncated
    p = _trapezoid(f * mass, times)
    return SegmentResult(index, min(1.0, max(0.0, p)), diag)


def boundary_conflict_probability(query: ConflictQuery, workers: int | None = None,
                                  inputs: PredictorInputs | None = None) -> MethodResult:
    """Sum of per-segment probabilities, clamped at 1.

    Segments run on a thread pool when ``workers > 1``; results are reduced in
    segment order, so the total does not depend on the degree of parallelism.
    """
    t0 = time.perf_counter()
    if inputs is None:
        inputs = PredictorInputs.from_query(query)
    indices = range(len(query.boundary))
    nw = worker_count(workers)
    if nw > 1 and len(query.boundary) > 1:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(lambda i: segment_conflict_probability(query, i, inputs), indices))
    else:
        parts = [segment_conflict_probability(query, i, inputs) for i in indices]
    total = 0.0
    for part in parts:
        total += part.probability
    elapsed = time.perf_counter() - t0
    return MethodResult(min(1.0, total), parts, elapsed, "proposed")
