"""Comparison methods: probability flow (two flavours) and rectangle-covered ICP.

All methods consume a :class:`BeliefTimeline` carrying the true (transient)
Gaussian beliefs. Spatial integration loops over boundary nodes and is
vectorized over time, mirroring the per-segment loop of the proposed method.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import erf, ndtr

from .conflict import MethodResult
from .errors import UnsupportedRegion
from .geometry import ConflictBoundary, Disk
from .motion import BeliefTimeline, GaussianBelief

INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class PfConfig:
    """``partition`` is an interval count for disks, or an interval length (m) for segment boundaries."""

    partition: float

    def __post_init__(self):
        if not self.partition > 0:
            raise ValueError("partition must be positive")


@dataclass(frozen=True)
class IcpConfig:
    n_rectangles: int = 20
    accumulation_period: float = 0.15

    def __post_init__(self):
        if self.n_rectangles < 1:
            raise ValueError("need at least one rectangle")
        if not self.accumulation_period > 0:
            raise ValueError("accumulation period must be positive")


def boundary_nodes(region, partition):
    """Quadrature nodes on the boundary: ``(points, outward normals, arc-length weights)``."""
    if isinstance(region, Disk):
        n = int(round(partition))
        if n < 1:
            raise ValueError("disk partition must be at least one interval")
        theta = (np.arange(n) + 0.5) * 2 * np.pi / n
        normals = np.column_stack([np.cos(theta), np.sin(theta)])
        points = np.asarray(region.center) + region.radius * normals
        weights = np.full(n, 2 * np.pi * region.radius / n)
        return points, normals, weights
    if isinstance(region, ConflictBoundary):
        pts, nrm, w = [], [], []
        for seg, normal in zip(region.segments, region.normals):
            k = max(1, int(np.ceil(seg.length / float(partition) - 1e-9)))
            frac = (np.arange(k) + 0.5) / k
            pts.append(seg.a + frac[:, None] * (seg.b - seg.a))
            nrm.append(np.tile(normal, (k, 1)))
            w.append(np.full(k, seg.length / k))
        return np.vstack(pts), np.vstack(nrm), np.concatenate(w)
    raise UnsupportedRegion(f"cannot partition {type(region).__name__}")


class _Moments:
    """Per-time position statistics shared by every boundary node."""

    def __init__(self, timeline: BeliefTimeline):
        covs = timeline.covs
        cr = covs[:, :2, :2]
        det = cr[:, 0, 0] * cr[:, 1, 1] - cr[:, 0, 1] ** 2
        self.live = det > 1e-300
        safe = np.where(self.live, det, 1.0)
        inv = np.empty_like(cr)
        inv[:, 0, 0] = cr[:, 1, 1] / safe
        inv[:, 1, 1] = cr[:, 0, 0] / safe
        inv[:, 0, 1] = inv[:, 1, 0] = -cr[:, 0, 1] / safe
        self.inv = inv
        self.norm = np.where(self.live, 1.0 / (2 * np.pi * np.sqrt(safe)), 0.0)
        self.m_r = timeline.means[:, :2]
        self.m_v = timeline.means[:, 2:]
        self.c_vr = covs[:, 2:, :2]
        self.c_v = covs[:, 2:, 2:]
        # velocity covariance conditioned on position
        self.c_v_given_r = self.c_v - np.einsum("tij,tjk,tlk->til", self.c_vr, inv, self.c_vr)
        self.times = timeline.times

    def position_density(self, point):
        d = point - self.m_r
        q = np.einsum("ti,tij,tj->t", d, self.inv, d)
        return np.where(self.live, self.norm * np.exp(-0.5 * q), 0.0), d


def _inward_speed(mean, sd):
    """E[max(0, -V)] for V ~ N(mean, sd^2)."""
    ok = sd > 0
    s = np.where(ok, sd, 1.0)
    z = mean / s
    smooth = s * INV_SQRT_2PI * np.exp(-0.5 * z * z) - mean * ndtr(-z)
    return np.where(ok, smooth, np.maximum(0.0, -mean))


def park_beta(mean, sd):
    """Mean normal velocity restricted to motion toward the boundary: E[V 1{V < 0}]."""
    return -_inward_speed(mean, sd)


def _trapezoid(y, x) -> float:
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(x)))


def pf_vdj(timeline: BeliefTimeline, region, cfg: PfConfig) -> MethodResult:
    """Upper bound from the inward probability flux through the boundary.

    The flux density at a boundary point is the position density times the
    expected inward normal speed conditioned on that position. The initial
    belief is assumed to lie outside the region.
    """
    t0 = time.perf_counter()
    mom = _Moments(timeline)
    points, normals, weights = boundary_nodes(region, cfg.partition)
    flux = np.zeros(len(mom.times))
    for r, n, w in zip(points, normals, weights):
        p, d = mom.position_density(r)
        cond_v = mom.m_v + np.einsum("tij,tjk,tk->ti", mom.c_vr, mom.inv, d)
        vn = cond_v @ n
        sd = np.sqrt(np.maximum(np.einsum("i,tij,j->t", n, mom.c_v_given_r, n), 0.0))
        flux += w * p * _inward_speed(vn, sd)
    prob = min(1.0, max(0.0, _trapezoid(flux, mom.times)))
    return MethodResult(prob, [], time.perf_counter() - t0, "pf_vdj",
                        {"partition": cfg.partition, "n_nodes": len(points)})


def pf_park(timeline: BeliefTimeline, region, cfg: PfConfig, variant: str = "altered",
            position_diffusion=None) -> MethodResult:
    """Drift plus diffusion flux through the boundary.

    ``variant="published"`` uses the mean normal velocity, gated so only motion
    toward the boundary contributes; ``variant="altered"`` uses
    :func:`park_beta` of the unconditional normal-velocity distribution.
    ``position_diffusion`` is the 2x2 white-noise diffusion acting directly on
    position (zero for acceleration-driven models).
    """
    if variant not in ("published", "altered"):
        raise ValueError(f"unknown variant {variant!r}")
    t0 = time.perf_counter()
    mom = _Moments(timeline)
    points, normals, weights = boundary_nodes(region, cfg.partition)
    dpos = np.zeros((2, 2)) if position_diffusion is None else np.asarray(position_diffusion, dtype=float)
    flux = np.zeros(len(mom.times))
    for r, n, w in zip(points, normals, weights):
        p, d = mom.position_density(r)
        vn = mom.m_v @ n
        if variant == "published":
            speed = np.maximum(0.0, -vn)
        else:
            sd = np.sqrt(np.maximum(np.einsum("i,tij,j->t", n, mom.c_v, n), 0.0))
            speed = -park_beta(vn, sd)
        inward = p * speed
        if np.any(dpos):
            # -(1/2) n^T D grad p, with grad p = -C^-1 (r - m) p
            inward = inward + 0.5 * p * np.einsum("i,ij,tjk,tk->t", n, dpos, mom.inv, d)
        flux += w * inward
    prob = min(1.0, max(0.0, _trapezoid(flux, mom.times)))
    return MethodResult(prob, [], time.perf_counter() - t0, f"pf_park_{variant}",
                        {"partition": cfg.partition, "n_nodes": len(points)})


def _box_mass(cx, cy, hx, hy):
    """Standard bivariate normal mass of the box centred at (cx, cy) with half-widths (hx, hy)."""
    s = np.sqrt(2.0)
    px = 0.5 * (erf((cx + hx) / s) - erf((cx - hx) / s))
    py = 0.5 * (erf((cy + hy) / s) - erf((cy - hy) / s))
    return px * py


def icp_pour(belief: GaussianBelief, region, n_rectangles: int) -> float:
    """Instantaneous probability that the position lies in a disk.

    The position is decorrelated and whitened by its principal axes, which maps
    the disk to an axis-aligned ellipse. The ellipse is covered from inside by
    ``n_rectangles`` centred rectangles whose corners lie on it at evenly spaced
    angles; the mass of their union follows from chain inclusion-exclusion.
    """
    if not isinstance(region, Disk):
        raise UnsupportedRegion("the rectangle-covering ICP is defined only for circular regions")
    lam, u = np.linalg.eigh(belief.cov_r)
    offset = np.asarray(region.center) - belief.mean_r
    if lam.min() <= 1e-300:
        return float(np.hypot(*offset) <= region.radius)
    sd = np.sqrt(lam)
    cx, cy = (u.T @ offset) / sd
    ax, ay = region.radius / sd
    k = np.arange(n_rectangles, 0, -1)
    theta = (k - 0.5) * np.pi / (2 * n_rectangles)
    hx = ax * np.cos(theta)   # increasing
    hy = ay * np.sin(theta)   # decreasing
    total = np.sum(_box_mass(cx, cy, hx, hy))
    overlap = np.sum(_box_mass(cx, cy, hx[:-1], hy[1:]))
    return float(min(1.0, max(0.0, total - overlap)))


def icp_series(timeline: BeliefTimeline, region, cfg: IcpConfig):
    """ICP on the accumulation grid ``period, 2 period, ...`` up to the horizon."""
    dt = timeline.dt
    stride = max(1, int(round(cfg.accumulation_period / dt)))
    idx = np.arange(stride, len(timeline.times), stride)
    values = np.array([icp_pour(timeline.belief(k), region, cfg.n_rectangles) for k in idx])
    return timeline.times[idx], values


def accumulate(icp, mode: str) -> float:
    """Turn an ICP sequence into a conflict probability.

    ``max``: largest instantaneous value. ``acc_last``: P[k+1] = P[k] + ICP[k+1](1 - P[k]).
    ``acc_all``: P[k+1] = P[k] + ICP[k+1] prod_{i<=k}(1 - P[i]), with P[0] = 0.
    """
    icp = np.asarray(icp, dtype=float)
    if icp.size == 0:
        return 0.0
    if mode == "max":
        return float(icp.max())
    p = 0.0
    if mode == "acc_last":
        for v in icp:
            p = p + v * (1.0 - p)
        return float(min(1.0, p))
    if mode == "acc_all":
        prod = 1.0   # includes the factor (1 - P[0]) = 1
        for v in icp:
            p = p + v * prod
            prod *= 1.0 - p
        return float(min(1.0, max(0.0, p)))
    raise ValueError(f"unknown accumulation mode {mode!r}")


def icp_to_conflict(timeline: BeliefTimeline, region, cfg: IcpConfig, mode: str) -> MethodResult:
    t0 = time.perf_counter()
    times, values = icp_series(timeline, region, cfg)
    prob = accumulate(values, mode)
    return MethodResult(prob, [], time.perf_counter() - t0, f"icp_{mode}",
                        {"n_rectangles": cfg.n_rectangles, "accumulation_period": cfg.accumulation_period,
                         "icp_times": times.tolist(), "icp": values.tolist()})
