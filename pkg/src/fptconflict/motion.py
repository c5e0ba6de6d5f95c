"""Linear Gaussian time-invariant motion models.

State layout is ``[r_x, r_y, v_x, v_y]``. Closed-loop models describe the
tracking error about a piecewise-linear plan, so the state mean follows the
plan exactly and only the covariance is propagated through the dynamics.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import expm

from .errors import NonPsdCovariance, OutOfHorizon, UnstableModel

PSD_FLOOR = -1e-9


def _sym(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + np.swapaxes(m, -1, -2))


@dataclass(frozen=True)
class GaussianBelief:
    time: float
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float).reshape(4)
        cov = np.asarray(self.cov, dtype=float).reshape(4, 4)
        scale = max(1.0, float(np.abs(cov).max()))
        if np.abs(cov - cov.T).max() > 1e-12 * scale:
            raise ValueError("covariance is not symmetric")
        cov = _sym(cov)
        if np.linalg.eigvalsh(cov).min() < PSD_FLOOR * scale:
            raise NonPsdCovariance("covariance has a negative eigenvalue")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @classmethod
    def point(cls, position, velocity, time: float = 0.0) -> GaussianBelief:
        return cls(time, np.r_[np.asarray(position, float), np.asarray(velocity, float)], np.zeros((4, 4)))

    @property
    def mean_r(self) -> np.ndarray:
        return self.mean[:2]

    @property
    def mean_v(self) -> np.ndarray:
        return self.mean[2:]

    @property
    def cov_r(self) -> np.ndarray:
        return self.cov[:2, :2]

    @property
    def cov_rv(self) -> np.ndarray:
        return self.cov[:2, 2:]

    @property
    def cov_v(self) -> np.ndarray:
        return self.cov[2:, 2:]


@dataclass(frozen=True, eq=False)
class LtiModel:
    """dx = (A - B K) x dt + B u dt + B_eta dW, with dW of diffusion matrix Q."""

    A: np.ndarray
    B: np.ndarray
    B_eta: np.ndarray
    Q: np.ndarray
    feedback_gain: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for name in ("A", "B", "B_eta", "Q"):
            object.__setattr__(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        if self.feedback_gain is not None:
            object.__setattr__(self, "feedback_gain", np.atleast_2d(np.asarray(self.feedback_gain, dtype=float)))
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape[0] != n or self.B_eta.shape[0] != n:
            raise ValueError("inconsistent model dimensions")
        if self.Q.shape != (self.B_eta.shape[1],) * 2:
            raise ValueError("Q must match the noise input width")
        if np.abs(self.Q - self.Q.T).max() > 1e-12 or np.linalg.eigvalsh(_sym(self.Q)).min() < -1e-12:
            raise ValueError("Q must be symmetric positive semi-definite")

    @classmethod
    def double_integrator(cls, q_diag) -> LtiModel:
        """Open-loop constant-velocity model with white acceleration noise."""
        A = np.zeros((4, 4))
        A[0, 2] = A[1, 3] = 1.0
        B = np.vstack([np.zeros((2, 2)), np.eye(2)])
        return cls(A, B, B.copy(), np.diag(np.asarray(q_diag, dtype=float)))

    @classmethod
    def tracking(cls, q_diag, kp, kd) -> LtiModel:
        """Double integrator under PD state feedback on the plan-tracking error.

        ``kp`` (1/s^2) and ``kd`` (1/s) are scalars or per-axis pairs.
        """
        base = cls.double_integrator(q_diag)
        kp = np.broadcast_to(np.asarray(kp, dtype=float), (2,))
        kd = np.broadcast_to(np.asarray(kd, dtype=float), (2,))
        K = np.hstack([np.diag(kp), np.diag(kd)])
        return cls(base.A, base.B, base.B_eta, base.Q, K)

    @property
    def is_closed_loop(self) -> bool:
        return self.feedback_gain is not None

    @cached_property
    def system_matrix(self) -> np.ndarray:
        if self.feedback_gain is None:
            return self.A
        return self.A - self.B @ self.feedback_gain

    @cached_property
    def noise_diffusion(self) -> np.ndarray:
        """B_eta Q B_eta^T, the state-space diffusion matrix."""
        return self.B_eta @ self.Q @ self.B_eta.T

    def discretize(self, dt: float):
        """Exact zero-order-hold discretization ``(Phi, Gamma, Qd)`` over ``dt``."""
        key = float(dt)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        F = self.system_matrix
        n, m = F.shape[0], self.B.shape[1]
        # input: augmented exponential
        aug = np.zeros((n + m, n + m))
        aug[:n, :n] = F
        aug[:n, n:] = self.B
        e = expm(aug * dt)
        phi, gamma = e[:n, :n], e[:n, n:]
        # process noise: Van Loan
        vl = np.zeros((2 * n, 2 * n))
        vl[:n, :n] = -F
        vl[:n, n:] = self.noise_diffusion
        vl[n:, n:] = F.T
        ev = expm(vl * dt)
        qd = _sym(ev[n:, n:].T @ ev[:n, n:])
        out = (phi, gamma, qd)
        self._cache[key] = out
        return out


def propagate(model: LtiModel, belief: GaussianBelief, dt: float, u=None) -> GaussianBelief:
    """Exact-discretization image of ``belief`` after ``dt`` seconds under constant input ``u``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    phi, gamma, qd = model.discretize(dt)
    mean = phi @ belief.mean
    if u is not None:
        mean = mean + gamma @ np.asarray(u, dtype=float)
    cov = _sym(phi @ belief.cov @ phi.T + qd)
    scale = max(1.0, float(np.abs(cov).max()))
    if np.linalg.eigvalsh(cov).min() < PSD_FLOOR * scale:
        raise NonPsdCovariance(f"covariance lost positive semi-definiteness at t={belief.time + dt}")
    return GaussianBelief(belief.time + dt, mean, cov)


def open_loop_variance(sigma, t):
    """Position variance sigma^2 t^3 / 3 of an integrated random walk started with zero covariance."""
    return np.asarray(sigma, dtype=float) ** 2 * np.asarray(t, dtype=float) ** 3 / 3.0


def steady_state_covariance(model: LtiModel, direction=None, tol: float = 1e-14):
    """Fixed point of the covariance propagation of a stable (closed-loop) model.

    Uses the doubling recursion S <- S + Phi S Phi^T, Phi <- Phi^2 on an exact
    discretization. With ``direction`` given, returns the position variance
    along that unit vector; otherwise the full state covariance.
    """
    F = model.system_matrix
    eig = np.linalg.eigvals(F)
    if np.any(eig.real >= 0) and np.abs(model.noise_diffusion).max() > 0:
        raise UnstableModel(f"closed-loop eigenvalues {eig} are not strictly stable")
    fastest = max(float(np.abs(eig).max()), 1e-6)
    phi, _, qd = model.discretize(0.1 / fastest)
    S = qd.copy()
    grew = 0
    last_inc = np.inf
    for _ in range(200):
        inc = _sym(phi @ S @ phi.T)
        S = S + inc
        phi = phi @ phi
        tr = float(np.trace(inc))
        if not np.isfinite(tr):
            raise UnstableModel("covariance iteration overflowed")
        grew = grew + 1 if tr >= last_inc else 0
        if grew >= 10:
            raise UnstableModel("covariance iteration diverges")
        last_inc = tr
        if np.abs(inc).max() <= tol * max(1.0, np.abs(S).max()):
            break
    if direction is None:
        return S
    n = np.asarray(direction, dtype=float)
    return float(n @ S[:2, :2] @ n)


@dataclass(frozen=True)
class PlanStage:
    start: tuple
    velocity: tuple
    duration: float


@dataclass(frozen=True)
class PiecewiseLinearPlan:
    """Mean path made of constant-velocity stages."""

    stages: tuple

    def __post_init__(self):
        stages = tuple(s if isinstance(s, PlanStage) else PlanStage(*s) for s in self.stages)
        stages = tuple(PlanStage(tuple(map(float, s.start)), tuple(map(float, s.velocity)), float(s.duration))
                       for s in stages)
        if not stages:
            raise ValueError("plan needs at least one stage")
        for s in stages:
            if not s.duration > 0:
                raise ValueError("stage durations must be positive")
        for s, nxt in zip(stages, stages[1:]):
            end = np.asarray(s.start) + s.duration * np.asarray(s.velocity)
            if np.hypot(*(end - nxt.start)) > 1e-9:
                raise ValueError("plan stages are not positionally continuous")
        object.__setattr__(self, "stages", stages)

    @classmethod
    def from_waypoints(cls, start, legs, horizon: float | None = None) -> PiecewiseLinearPlan:
        """Build from ``legs = [(target_point, speed), ...]``.

        If ``horizon`` exceeds the planned duration the last stage is extended
        at constant velocity to cover it.
        """
        stages = []
        p = np.asarray(start, dtype=float)
        for target, speed in legs:
            target = np.asarray(target, dtype=float)
            dist = float(np.hypot(*(target - p)))
            dur = dist / float(speed)
            stages.append(PlanStage(tuple(p), tuple((target - p) / dur), dur))
            p = target
        total = sum(s.duration for s in stages)
        if horizon is not None and horizon > total:
            last = stages[-1]
            stages[-1] = PlanStage(last.start, last.velocity, last.duration + horizon - total)
        return cls(tuple(stages))

    @cached_property
    def start_times(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum([s.duration for s in self.stages])[:-1]])

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.stages))

    def stage_index(self, t):
        """Active stage at ``t``; a switch instant belongs to the later stage."""
        idx = np.searchsorted(self.start_times, np.asarray(t, dtype=float), side="right") - 1
        return np.clip(idx, 0, len(self.stages) - 1)

    def mean(self, t):
        """Vectorized (positions, velocities) at times ``t``."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-12) or np.any(t > self.duration + 1e-9):
            raise OutOfHorizon(f"t outside [0, {self.duration}]")
        idx = self.stage_index(t)
        starts = np.array([s.start for s in self.stages])
        vels = np.array([s.velocity for s in self.stages])
        local = t - self.start_times[idx]
        pos = starts[idx] + local[..., None] * vels[idx]
        return pos, vels[idx]


def plan_mean(plan: PiecewiseLinearPlan, t: float):
    pos, vel = plan.mean(t)
    return pos, vel


@dataclass(frozen=True, eq=False)
class BeliefTimeline:
    """Beliefs on a uniform time grid: ``times (T,)``, ``means (T,4)``, ``covs (T,4,4)``."""

    times: np.ndarray
    means: np.ndarray
    covs: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def belief(self, k: int) -> GaussianBelief:
        return GaussianBelief(float(self.times[k]), self.means[k], self.covs[k])


def time_grid(horizon: float, dt: float) -> np.ndarray:
    """Uniform grid on [0, horizon]; the step is shrunk slightly if dt does not divide the horizon."""
    if not (horizon > 0 and dt > 0 and dt <= horizon):
        raise ValueError("need 0 < dt <= horizon")
    n = int(np.ceil(horizon / dt - 1e-9))
    return np.linspace(0.0, horizon, n + 1)


def build_timeline(model: LtiModel, plan: PiecewiseLinearPlan, horizon: float, dt: float,
                   initial_cov=None) -> BeliefTimeline:
    """Mean from the plan, covariance from the exact discrete recursion."""
    times = time_grid(horizon, dt)
    pos, vel = plan.mean(times)
    means = np.hstack([pos, vel])
    phi, _, qd = model.discretize(times[1] - times[0])
    covs = np.empty((len(times), 4, 4))
    covs[0] = np.zeros((4, 4)) if initial_cov is None else np.asarray(initial_cov, dtype=float)
    for k in range(1, len(times)):
        covs[k] = phi @ covs[k - 1] @ phi.T + qd
    covs = _sym(covs)
    floor = np.linalg.eigvalsh(covs).min(axis=1)
    scale = np.maximum(1.0, np.abs(covs).max(axis=(1, 2)))
    if np.any(floor < PSD_FLOOR * scale):
        raise NonPsdCovariance("covariance recursion lost positive semi-definiteness")
    return BeliefTimeline(times, means, covs)
