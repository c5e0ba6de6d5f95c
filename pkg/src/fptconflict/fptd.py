"""First-passage time densities by the method of images.

Every function accepts a :class:`Reduced1DProcess` in either orientation and
mirrors it internally so the process starts below its absorbing level. The
densities returned by :func:`fptd_closed_loop`, :func:`fptd_open_loop` and
:func:`density` already carry the factor 1/2 that normalizes the image
construction; callers must not rescale them again.
"""
from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import DegenerateVariance, MethodCollapse, NegativeDensity, OutOfValidityDomain
from .reduction import ConstantVariance, CubicVariance, Reduced1DProcess

SQRT_2PI = np.sqrt(2.0 * np.pi)


def _t(t) -> np.ndarray:
    return np.asarray(t, dtype=float)


def approach_test(process: Reduced1DProcess) -> bool:
    """Whether the mean drifts toward the boundary, or the variance grows toward it."""
    p = process.oriented()
    if isinstance(p.law, CubicVariance):
        return True
    return p.mu > 0


def validity_bound(process: Reduced1DProcess) -> float:
    """Upper end of the time domain on which the density is defined."""
    p = process.oriented()
    if isinstance(p.law, CubicVariance) and p.mu > 0:
        return 3.0 * p.a / p.mu
    return np.inf


def image_density(process: Reduced1DProcess, r, t):
    """Unnormalized absorbed density: a Gaussian minus its mirror image about alpha."""
    p = process.oriented()
    r = process.side * _t(r)
    t = _t(t)
    c = p.variance(t)
    m = p.mean(t)
    out = (np.exp(-(r - m) ** 2 / (2 * c)) - np.exp(-(r - (2 * p.alpha - m)) ** 2 / (2 * c))) / np.sqrt(2 * np.pi * c)
    return np.where(r <= p.alpha, out, 0.0)


def survival_cdf(process: Reduced1DProcess, t):
    """erf((alpha - m(t)) / sqrt(2 c(t))) in the oriented frame.

    This is the mass of the image density; it lies in [0, 1] while the mean is
    still on the survival side and keeps decreasing (to -1) afterwards, which is
    what makes half its total drop the normalized crossing probability.
    """
    p = process.oriented()
    t = _t(t)
    c = p.variance(t)
    if np.any(c <= 0):
        raise DegenerateVariance("variance must be positive for the survival function")
    return erf((p.alpha - p.mean(t)) / np.sqrt(2 * c))


def fptd_general(process: Reduced1DProcess, t):
    """-dF_S/dt for a linear mean and an arbitrary variance law (unnormalized, integrates to 2)."""
    p = process.oriented()
    t = _t(t)
    c = p.variance(t)
    cdot = p.law.rate(t)
    if p.mu == 0 and np.all(cdot == 0):
        raise MethodCollapse("zero drift with constant variance")
    if np.any(c <= 0):
        raise DegenerateVariance("variance must be positive")
    gap = p.alpha - p.mean(t)
    bracket = gap * cdot / (2 * c) + p.mu
    if np.any(bracket < 0):
        raise NegativeDensity("first-passage density is negative: the process recedes from the boundary")
    return np.sqrt(2.0 / (np.pi * c)) * np.exp(-gap ** 2 / (2 * c)) * bracket


def fptd_closed_loop(process: Reduced1DProcess, t):
    """Normalized density for a constant (steady-state) variance; zero at t = 0."""
    if not isinstance(process.law, ConstantVariance):
        raise TypeError("closed-loop density needs a constant variance law")
    p = process.oriented()
    if p.mu == 0:
        raise MethodCollapse("zero drift with constant variance")
    t = _t(t)
    c = p.law.c_ss
    f = abs(p.mu) / np.sqrt(2 * np.pi * c) * np.exp(-(p.alpha - p.mean(t)) ** 2 / (2 * c))
    return np.where(t > 0, f, 0.0)


def fptd_open_loop(process: Reduced1DProcess, t):
    """Normalized density for the cubic open-loop variance law.

    Raises :class:`OutOfValidityDomain` for t >= 3a/mu when the drift points
    at the boundary. The t -> 0 limit is 0 and is returned exactly at t = 0.
    """
    if not isinstance(process.law, CubicVariance):
        raise TypeError("open-loop density needs a cubic variance law")
    p = process.oriented()
    t = _t(t)
    bound = validity_bound(p)
    if np.any(t >= bound):
        raise OutOfValidityDomain(f"open-loop density undefined for t >= {bound:.6g} s")
    return _open_loop_unchecked(p, t)


def _open_loop_unchecked(p: Reduced1DProcess, t: np.ndarray) -> np.ndarray:
    sigma = p.law.sigma_n
    a = p.a
    pos = t > 0
    ts = np.where(pos, t, 1.0)
    c = sigma ** 2 * ts ** 3 / 3.0
    f = np.exp(-(p.alpha - p.mean(ts)) ** 2 / (2 * c)) * np.sqrt(3 * ts) * np.abs(3 * a - p.mu * ts) \
        / (2 * SQRT_2PI * sigma * ts ** 3)
    return np.where(pos, f, 0.0)


def density(process: Reduced1DProcess, t):
    """Normalized density on a grid, zeroed outside the validity domain.

    Returns ``(f, truncated)`` where ``truncated`` reports whether any grid
    point fell beyond the open-loop validity bound.
    """
    t = _t(t)
    if isinstance(process.law, ConstantVariance):
        return fptd_closed_loop(process, t), False
    p = process.oriented()
    bound = validity_bound(p)
    inside = t < bound
    f = _open_loop_unchecked(p, np.where(inside, t, 0.0))
    return np.where(inside, f, 0.0), bool(np.any(~inside))


def crossing_cdf(process: Reduced1DProcess, t):
    """Normalized first-passage CDF from the survival function: (F_S(0+) - F_S(t)) / 2."""
    p = process.oriented()
    t = _t(t)
    if isinstance(p.law, CubicVariance):
        start = 1.0 if p.a > 0 else -1.0
    else:
        start = float(erf(p.a / np.sqrt(2 * p.law.c_ss)))
    return 0.5 * (start - survival_cdf(p, t))
