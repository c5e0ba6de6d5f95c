"""Conflict-boundary geometry: segments, outward normals and rigid frames.

A boundary is an ordered list of straight segments, each carrying a unit
normal that points away from the conflict region. Orientation is fixed by an
explicit interior point rather than by vertex winding.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousSide, DegenerateSegment, InvalidArc
from .motion import GaussianBelief, LtiModel, PiecewiseLinearPlan, PlanStage

MIN_SEGMENT_LENGTH = 1e-9
SIDE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Point2:
    x: float
    y: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x, self.y], dtype=dtype or float)


def _as_xy(p) -> np.ndarray:
    return np.asarray(p, dtype=float).reshape(2)


@dataclass(frozen=True)
class Segment:
    p1: tuple
    p2: tuple

    def __post_init__(self):
        object.__setattr__(self, "p1", tuple(float(v) for v in _as_xy(self.p1)))
        object.__setattr__(self, "p2", tuple(float(v) for v in _as_xy(self.p2)))
        if self.length < MIN_SEGMENT_LENGTH:
            raise DegenerateSegment(f"segment {self.p1}->{self.p2} is shorter than {MIN_SEGMENT_LENGTH} m")

    @property
    def a(self) -> np.ndarray:
        return np.array(self.p1)

    @property
    def b(self) -> np.ndarray:
        return np.array(self.p2)

    @property
    def length(self) -> float:
        return float(np.hypot(self.p2[0] - self.p1[0], self.p2[1] - self.p1[1]))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)

    @property
    def direction(self) -> np.ndarray:
        return (self.b - self.a) / self.length

    def split(self, fraction: float = 0.5) -> tuple[Segment, Segment]:
        mid = self.a + fraction * (self.b - self.a)
        return Segment(self.p1, mid), Segment(mid, self.p2)


def outward_normal(segment: Segment, interior_point) -> np.ndarray:
    """Unit normal of ``segment`` pointing away from ``interior_point``."""
    if segment.length < MIN_SEGMENT_LENGTH:
        raise DegenerateSegment("zero-length segment")
    d = segment.direction
    n = np.array([d[1], -d[0]])
    side = float(n @ (_as_xy(interior_point) - segment.a))
    if abs(side) <= SIDE_TOLERANCE:
        raise AmbiguousSide(f"interior point {tuple(_as_xy(interior_point))} lies on the supporting line")
    return -n if side > 0 else n


@dataclass(frozen=True)
class ConflictBoundary:
    """Segments approximating a conflict boundary, with outward unit normals."""

    segments: tuple
    normals: tuple
    interior_point: tuple = field(default=None)

    @classmethod
    def from_segments(cls, segments, interior_point) -> ConflictBoundary:
        segs = tuple(s if isinstance(s, Segment) else Segment(*s) for s in segments)
        normals = tuple(tuple(outward_normal(s, interior_point)) for s in segs)
        return cls(segs, normals, tuple(_as_xy(interior_point)))

    def __post_init__(self):
        if len(self.segments) != len(self.normals):
            raise ValueError("one normal per segment required")
        for s, n in zip(self.segments, self.normals):
            n = np.asarray(n)
            if abs(np.linalg.norm(n) - 1.0) > 1e-12:
                raise ValueError("normals must be unit length")
            if abs(n @ s.direction) > 1e-12:
                raise ValueError("normal is not perpendicular to its segment")

    def __len__(self):
        return len(self.segments)

    def normal(self, i: int) -> np.ndarray:
        return np.array(self.normals[i])

    def transformed(self, t: RigidTransform) -> ConflictBoundary:
        segs = tuple(Segment(t.apply(s.a), t.apply(s.b)) for s in self.segments)
        normals = tuple(tuple(t.apply_vector(n)) for n in self.normals)
        interior = None if self.interior_point is None else tuple(t.apply(self.interior_point))
        return ConflictBoundary(segs, normals, interior)

    def refined(self, index: int, fraction: float = 0.5) -> ConflictBoundary:
        """Split one segment into two collinear pieces."""
        segs = list(self.segments)
        normals = list(self.normals)
        left, right = segs[index].split(fraction)
        segs[index:index + 1] = [left, right]
        normals[index:index + 1] = [normals[index], normals[index]]
        return ConflictBoundary(tuple(segs), tuple(normals), self.interior_point)

    def endpoints(self) -> np.ndarray:
        """(n, 2, 2) array of segment endpoints."""
        return np.array([[s.p1, s.p2] for s in self.segments])


@dataclass(frozen=True)
class Disk:
    """Exact circular conflict region, used by the oracle and the region-based baselines."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in _as_xy(self.center)))
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    def transformed(self, t: RigidTransform) -> Disk:
        return Disk(tuple(t.apply(self.center)), self.radius)


@dataclass(frozen=True)
class RigidTransform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        if abs(np.linalg.det(r) - 1.0) > 1e-12 or not np.allclose(r @ r.T, np.eye(2), atol=1e-12):
            raise ValueError("rotation must be orthonormal with determinant +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(2))

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls(np.eye(2), np.zeros(2))

    @classmethod
    def from_angle(cls, theta: float, translation=(0.0, 0.0)) -> RigidTransform:
        c, s = np.cos(theta), np.sin(theta)
        return cls(np.array([[c, -s], [s, c]]), np.asarray(translation, dtype=float))

    def apply(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return p @ self.rotation.T + self.translation

    def apply_vector(self, vectors) -> np.ndarray:
        return np.asarray(vectors, dtype=float) @ self.rotation.T

    def inverse(self) -> RigidTransform:
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: RigidTransform) -> RigidTransform:
        """``self`` applied after ``other``."""
        return RigidTransform(self.rotation @ other.rotation, self.rotation @ other.translation + self.translation)


def horizontalize(segment: Segment, normal) -> RigidTransform:
    """Rotation taking ``normal`` to (0, 1), so the segment lies on y = const.

    The translation is zero, which keeps the boundary ordinate equal to the
    offset of the segment along its normal.
    """
    if segment.length < MIN_SEGMENT_LENGTH:
        raise DegenerateSegment("zero-length segment")
    nx, ny = _as_xy(normal) / np.linalg.norm(normal)
    return RigidTransform(np.array([[ny, -nx], [nx, ny]]), np.zeros(2))


def visible_arc(center, radius: float, viewpoint) -> tuple[float, float]:
    """Angular interval (radians) of a circle visible from an outside point."""
    c = _as_xy(center)
    d = _as_xy(viewpoint) - c
    dist = float(np.hypot(*d))
    if dist <= radius:
        raise InvalidArc("viewpoint is inside the circle")
    mid = float(np.arctan2(d[1], d[0]))
    half = float(np.arccos(radius / dist))
    return mid - half, mid + half


def approximate_circle(center, radius: float, n_segments: int, arc=(-np.pi / 2, np.pi / 2),
                       kind: str = "inscribed") -> ConflictBoundary:
    """Polygonal approximation of a circular arc.

    ``kind="inscribed"`` returns chords with endpoints on the circle.
    ``kind="circumscribed"`` returns segments tangent to the circle at the
    middle of each angular step, which together enclose the arc.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if n_segments < 1:
        raise ValueError("need at least one segment")
    a0, a1 = float(arc[0]), float(arc[1])
    if not a1 > a0:
        raise InvalidArc(f"empty arc [{a0}, {a1}]")
    if a1 - a0 > 2 * np.pi + 1e-12:
        raise InvalidArc("arc wider than a full turn")
    c = _as_xy(center)
    theta = np.linspace(a0, a1, n_segments + 1)
    half_step = 0.5 * (a1 - a0) / n_segments
    if kind == "inscribed":
        rho = radius
    elif kind == "circumscribed":
        if half_step >= np.pi / 2:
            raise InvalidArc("arc step too wide for a tangent polygon")
        rho = radius / np.cos(half_step)
    else:
        raise ValueError(f"unknown polygon kind {kind!r}")
    pts = c + rho * np.column_stack([np.cos(theta), np.sin(theta)])
    segs = tuple(Segment(pts[i], pts[i + 1]) for i in range(n_segments))
    # equals the radial direction at the mid-angle, but exactly perpendicular to the chord
    normals = tuple(tuple(outward_normal(s, c)) for s in segs)
    return ConflictBoundary(segs, normals, tuple(c))


def transform_belief(belief: GaussianBelief, t: RigidTransform) -> GaussianBelief:
    """Image of a position/velocity belief under a rigid transform."""
    r = t.rotation
    big = np.zeros((4, 4))
    big[:2, :2] = r
    big[2:, 2:] = r
    mean = big @ belief.mean
    mean[:2] += t.translation
    cov = big @ belief.cov @ big.T
    return GaussianBelief(belief.time, mean, 0.5 * (cov + cov.T))


def transform_plan(plan: PiecewiseLinearPlan, t: RigidTransform) -> PiecewiseLinearPlan:
    return PiecewiseLinearPlan(tuple(
        PlanStage(tuple(t.apply(s.start)), tuple(t.apply_vector(s.velocity)), s.duration) for s in plan.stages))


def transform_model(model: LtiModel, t: RigidTransform) -> LtiModel:
    """Model expressed in the rotated frame (translation does not affect the error dynamics)."""
    r = t.rotation
    big = np.zeros((4, 4))
    big[:2, :2] = r
    big[2:, 2:] = r
    gain = None if model.feedback_gain is None else r @ model.feedback_gain @ big.T
    return LtiModel(big @ model.A @ big.T, big @ model.B @ r.T, big @ model.B_eta @ r.T,
                    r @ model.Q @ r.T, gain)


def segment_intersection_params(p, q, a, b):
    """Intersection of moving segments p->q (vectorized, shape (..., 2)) with fixed segment a->b.

    Returns ``(hit, u)`` where ``u`` is the fraction along p->q of the crossing.
    """
    r = q - p
    s = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    denom = r[..., 0] * s[1] - r[..., 1] * s[0]
    ap = np.asarray(a, dtype=float) - p
    with np.errstate(divide="ignore", invalid="ignore"):
        u = (ap[..., 0] * s[1] - ap[..., 1] * s[0]) / denom
        v = (ap[..., 0] * r[..., 1] - ap[..., 1] * r[..., 0]) / denom
    hit = (denom != 0) & (u >= 0) & (u <= 1) & (v >= 0) & (v <= 1)
    return hit, u
