"""Projection of the 2-D Gaussian process onto a boundary normal."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .errors import NotApproaching
from .motion import GaussianBelief, PlanStage


class ScalarGaussian(NamedTuple):
    mean: float
    var: float


def _unit(n) -> np.ndarray:
    n = np.asarray(n, dtype=float).reshape(2)
    if abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    return n


def reduce_position(belief: GaussianBelief, n) -> ScalarGaussian:
    n = _unit(n)
    return ScalarGaussian(float(belief.mean_r @ n), max(0.0, float(n @ belief.cov_r @ n)))


def reduce_velocity(belief: GaussianBelief, n) -> ScalarGaussian:
    n = _unit(n)
    return ScalarGaussian(float(belief.mean_v @ n), max(0.0, float(n @ belief.cov_v @ n)))


def reduce_noise(Q, n) -> float:
    """Scalar noise strength sqrt(n^T Q n) along ``n``."""
    n = _unit(n)
    return float(np.sqrt(max(0.0, n @ np.asarray(Q, dtype=float) @ n)))


@dataclass(frozen=True)
class ConstantVariance:
    c_ss: float

    def __post_init__(self):
        if not self.c_ss > 0:
            raise ValueError("steady-state variance must be positive")

    def variance(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.c_ss)

    def rate(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))


@dataclass(frozen=True)
class CubicVariance:
    sigma_n: float

    def __post_init__(self):
        if not self.sigma_n > 0:
            raise ValueError("noise strength must be positive")

    def variance(self, t):
        return self.sigma_n ** 2 * np.asarray(t, dtype=float) ** 3 / 3.0

    def rate(self, t):
        return self.sigma_n ** 2 * np.asarray(t, dtype=float) ** 2


VarianceLaw = Union[ConstantVariance, CubicVariance]


@dataclass(frozen=True)
class Reduced1DProcess:
    """R_n(t) ~ N(mu t + r0, c(t)) against an absorbing level ``alpha``.

    ``r0`` is the value of the linear mean extrapolated to t = 0, so ``t`` is
    always the global time and the open-loop variance clock stays aligned.
    ``t_start`` marks where the stage begins; the vehicle's side of the
    boundary is read from the mean at that instant.
    """

    alpha: float
    r0: float
    mu: float
    law: VarianceLaw
    t_start: float = 0.0
    valid_until: float | None = None

    def mean(self, t):
        return self.mu * np.asarray(t, dtype=float) + self.r0

    def variance(self, t):
        return self.law.variance(t)

    @property
    def side(self) -> float:
        """+1 if the stage starts below ``alpha`` along n, else -1."""
        return 1.0 if self.alpha - (self.mu * self.t_start + self.r0) > 0 else -1.0

    def oriented(self) -> Reduced1DProcess:
        """Mirror so the process starts below the absorbing level."""
        if self.side > 0:
            return self
        return Reduced1DProcess(-self.alpha, -self.r0, -self.mu, self.law, self.t_start, self.valid_until)

    @property
    def a(self) -> float:
        return self.alpha - self.r0


def build_reduced(stage: PlanStage, t_start: float, segment, normal, law: VarianceLaw,
                  valid_until: float | None = None, check: bool = True) -> Reduced1DProcess:
    """Reduce one plan stage against the supporting line of ``segment``."""
    from .fptd import approach_test

    n = _unit(normal)
    alpha = float(np.asarray(segment.p1, dtype=float) @ n)
    mu = float(np.asarray(stage.velocity) @ n)
    r_start = float(np.asarray(stage.start) @ n)
    proc = Reduced1DProcess(alpha, r_start - mu * t_start, mu, law, t_start, valid_until)
    if check:
        # the normal points away from the region, so an entering vehicle starts above alpha
        if r_start <= alpha:
            raise NotApproaching(f"stage starting at t={t_start} is already on the conflict side of the line")
        if not approach_test(proc):
            raise NotApproaching(f"stage starting at t={t_start} does not approach the boundary (mu={mu:.4g})")
    return proc
