"""Monte Carlo ground truth for first-crossing probabilities.

Paths are simulated with the exact discretization of the linear model: the
plan supplies the mean and a zero-mean error state evolves as
``e[k+1] = Phi e[k] + L z`` with ``L L^T = Qd``. A path conflicts when a
movement step ``r[k] -> r[k+1]`` first meets the region boundary.

Work is split into fixed-size chunks, each with its own counter-derived seed,
so a given ``(seed, chunk_size)`` yields the same estimate for any number of
worker threads.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_continuous_lyapunov

from .conflict import worker_count
from .geometry import ConflictBoundary, Disk, segment_intersection_params
from .motion import LtiModel, PiecewiseLinearPlan, steady_state_covariance, time_grid
from .reduction import ConstantVariance, CubicVariance, Reduced1DProcess


@dataclass(frozen=True)
class McConfig:
    n_samples: int
    dt: float
    seed: int = 0
    transient: bool = True
    chunk_size: int = 50_000
    workers: int | None = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be at least 1")


@dataclass(frozen=True)
class McEstimate:
    probability: float
    std_error: float
    n_samples: int
    runtime: float = 0.0
    crossing_times: np.ndarray | None = None

    @classmethod
    def from_count(cls, hits: int, n: int, **kw) -> McEstimate:
        p = hits / n
        return cls(p, float(np.sqrt(p * (1 - p) / n)), n, **kw)


def psd_sqrt(m) -> np.ndarray:
    """A factor L with L L^T = m, tolerant of singular PSD matrices."""
    lam, vec = np.linalg.eigh(0.5 * (m + m.T))
    return vec * np.sqrt(np.clip(lam, 0.0, None))


def chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    """Independent stream for chunk ``chunk``; depends only on ``(seed, chunk)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chunk,)))


def _initial_error_cov(model: LtiModel, transient: bool, initial_cov):
    if not transient and model.is_closed_loop:
        return steady_state_covariance(model)
    n = model.A.shape[0]
    return np.zeros((n, n)) if initial_cov is None else np.asarray(initial_cov, dtype=float)


def _error_steps(phi, L, init_L, n, steps, rng):
    """Yield the error state, shape (state, n), at every grid step (including the start)."""
    e = np.zeros((phi.shape[0], n))
    if init_L is not None:
        e = init_L @ rng.standard_normal(e.shape)
    yield e
    for _ in range(steps):
        e = phi @ e + L @ rng.standard_normal(e.shape)
        yield e


def sample_paths(model: LtiModel, plan: PiecewiseLinearPlan, horizon: float, dt: float, n: int,
                 rng: np.random.Generator, initial_cov=None):
    """``(times, positions)`` with positions of shape (n, T, 2)."""
    times = time_grid(horizon, dt)
    mean, _ = plan.mean(times)
    phi, _, qd = model.discretize(times[1] - times[0])
    init_L = None if initial_cov is None else psd_sqrt(np.asarray(initial_cov, dtype=float))
    out = np.empty((n, len(times), 2))
    for k, e in enumerate(_error_steps(phi, psd_sqrt(qd), init_L, n, len(times) - 1, rng)):
        out[:, k] = mean[k] + e[:2].T
    return times, out


def sample_trajectory(model: LtiModel, plan: PiecewiseLinearPlan, horizon: float, cfg: McConfig,
                      rng: np.random.Generator, initial_cov=None):
    """One discrete path ``(times, positions (T, 2))``."""
    times, paths = sample_paths(model, plan, horizon, cfg.dt, 1, rng, initial_cov)
    return times, paths[0]


def step_crossings(p, q, region):
    """For moves p -> q (shape (n, 2)): ``(hit, u)``, u the fraction along the move of the first contact."""
    if isinstance(region, Disk):
        c = np.asarray(region.center, dtype=float)
        d = q - p
        f = p - c
        a = np.einsum("ij,ij->i", d, d)
        b = 2 * np.einsum("ij,ij->i", f, d)
        g = np.einsum("ij,ij->i", f, f) - region.radius ** 2
        inside = g <= 0
        disc = b * b - 4 * a * g
        ok = (disc >= 0) & (a > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = (-b - np.sqrt(np.where(ok, disc, 0.0))) / (2 * a)
        hit = inside | (ok & (u >= 0) & (u <= 1))
        return hit, np.where(inside, 0.0, u)
    if isinstance(region, ConflictBoundary):
        hit = np.zeros(len(p), dtype=bool)
        u = np.full(len(p), np.inf)
        for seg in region.segments:
            h, uk = segment_intersection_params(p, q, seg.a, seg.b)
            u = np.where(h & (uk < u), uk, u)
            hit |= h
        return hit, u
    raise TypeError(f"unsupported region {type(region).__name__}")


def first_crossing(times, path, region):
    """Interpolated time of the first boundary contact along a discrete path, or None."""
    path = np.asarray(path, dtype=float)
    hit, u = step_crossings(path[:-1], path[1:], region)
    if not np.any(hit):
        return None
    k = int(np.argmax(hit))
    return float(times[k] + u[k] * (times[k + 1] - times[k]))


def region_bbox(region):
    """Axis-aligned bounding box ``(xmin, xmax, ymin, ymax)`` of a disk or boundary."""
    if isinstance(region, Disk):
        (cx, cy), r = region.center, region.radius
        return cx - r, cx + r, cy - r, cy + r
    pts = region.endpoints().reshape(-1, 2)
    return pts[:, 0].min(), pts[:, 0].max(), pts[:, 1].min(), pts[:, 1].max()


def _run_chunk(region, times, mean, phi, L, init_L, n, rng):
    xmin, xmax, ymin, ymax = region_bbox(region)
    first = np.full(n, np.inf)
    open_ = np.ones(n, dtype=bool)
    steps = _error_steps(phi, L, init_L, n, len(times) - 1, rng)
    e = next(steps)
    x, y = mean[0, 0] + e[0], mean[0, 1] + e[1]
    for k, e in enumerate(steps, start=1):
        nx, ny = mean[k, 0] + e[0], mean[k, 1] + e[1]
        # only moves whose bounding box meets the region's can touch it
        near = open_ & (np.minimum(x, nx) <= xmax) & (np.maximum(x, nx) >= xmin) \
            & (np.minimum(y, ny) <= ymax) & (np.maximum(y, ny) >= ymin)
        idx = np.flatnonzero(near)
        if idx.size:
            p = np.column_stack([x[idx], y[idx]])
            q = np.column_stack([nx[idx], ny[idx]])
            hit, u = step_crossings(p, q, region)
            j = idx[hit]
            first[j] = times[k - 1] + u[hit] * (times[k] - times[k - 1])
            open_[j] = False
        x, y = nx, ny
    return first


def estimate(model: LtiModel, plan: PiecewiseLinearPlan, region, horizon: float, cfg: McConfig,
             initial_cov=None, keep_times: bool = False) -> McEstimate:
    """Fraction of simulated paths whose first boundary contact happens by ``horizon``.

    ``cfg.transient=False`` starts closed-loop paths from the steady-state
    error covariance instead of ``initial_cov`` (zero by default).
    """
    t0 = time.perf_counter()
    times = time_grid(horizon, cfg.dt)
    mean, _ = plan.mean(times)
    phi, _, qd = model.discretize(times[1] - times[0])
    L = psd_sqrt(qd)
    c0 = _initial_error_cov(model, cfg.transient, initial_cov)
    init_L = psd_sqrt(c0) if np.any(c0) else None
    sizes = [min(cfg.chunk_size, cfg.n_samples - s) for s in range(0, cfg.n_samples, cfg.chunk_size)]

    def job(c):
        return _run_chunk(region, times, mean, phi, L, init_L, sizes[c], chunk_rng(cfg.seed, c))

    nw = worker_count(cfg.workers)
    if nw > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(c) for c in range(len(sizes))]
    first = np.concatenate(parts)
    hits = int(np.count_nonzero(first <= horizon))
    return McEstimate.from_count(hits, cfg.n_samples, runtime=time.perf_counter() - t0,
                                 crossing_times=first if keep_times else None)


def simulate_1d(process: Reduced1DProcess, horizon: float, dt: float, n: int, rng: np.random.Generator,
                kp: float = 4.0, kd: float = 4.0) -> McEstimate:
    """Crossing fraction of a smooth scalar process whose mean and variance follow ``process``.

    Cubic law: integrated white noise of strength ``sigma_n`` from a known start.
    Constant law: a second-order tracking error (gains ``kp``, ``kd``) driven to
    the variance ``c_ss`` and started in stationarity. Both paths are
    differentiable, so sampling every ``dt`` misses almost no excursions.
    """
    p = process.oriented()
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    if isinstance(p.law, CubicVariance):
        q = p.law.sigma_n ** 2
        c0 = np.zeros((2, 2))
    elif isinstance(p.law, ConstantVariance):
        A = np.array([[0.0, 1.0], [-kp, -kd]])
        q = 2 * kp * kd * p.law.c_ss
        c0 = solve_continuous_lyapunov(A, -np.diag([0.0, q]))
    else:
        raise TypeError("unknown variance law")
    model = LtiModel(A, np.array([[0.0], [1.0]]), np.array([[0.0], [1.0]]), np.array([[q]]))
    times = time_grid(horizon, dt)
    phi, _, qd = model.discretize(times[1] - times[0])
    L = psd_sqrt(qd)
    e = rng.standard_normal((n, 2)) @ psd_sqrt(c0).T
    mean = p.mean(times)
    crossed = mean[0] + e[:, 0] >= p.alpha
    for k in range(1, len(times)):
        e = e @ phi.T + rng.standard_normal((n, 2)) @ L.T
        crossed |= mean[k] + e[:, 0] >= p.alpha
    return McEstimate.from_count(int(crossed.sum()), n)

