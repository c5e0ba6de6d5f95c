import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import erf

from fptconflict.conflict import (
    ConflictQuery, PredictorInputs, boundary_conflict_probability, conditional_moments,
    segment_conflict_probability, segment_mass,
)
from fptconflict.errors import DegenerateVariance
from fptconflict.fptd import crossing_cdf
from fptconflict.geometry import (
    ConflictBoundary, RigidTransform, Segment, approximate_circle, transform_model, transform_plan, visible_arc,
)
from fptconflict.harness.runner import Prepared
from fptconflict.motion import LtiModel, PiecewiseLinearPlan, PlanStage
from fptconflict.reduction import CubicVariance, build_reduced, reduce_noise


def test_conditional_moments_examples():
    m, v = conditional_moments((1.0, 2.0), np.diag([3.0, 4.0]), 7.0)
    assert (m, v) == (1.0, 3.0)
    cov = np.array([[4.0, 6.0], [6.0, 9.0]])        # rank one
    m, v = conditional_moments((0.0, 0.0), cov, 3.0)
    assert v == pytest.approx(0.0, abs=1e-14)
    assert m == pytest.approx(2.0)
    with pytest.raises(DegenerateVariance):
        conditional_moments((0, 0), np.diag([1.0, 0.0]), 1.0)


def test_conditional_moments_match_rejection_sampling(rng):
    mean = np.array([0.5, -0.3])
    cov = np.array([[1.3, 0.6], [0.6, 0.9]])
    y_c, eps = 0.4, 0.01
    x = rng.multivariate_normal(mean, cov, size=1_000_000)
    band = x[np.abs(x[:, 1] - y_c) < eps, 0]
    m, v = conditional_moments(mean, cov, y_c)
    se_mean = np.sqrt(v / len(band))
    se_var = v * np.sqrt(2 / (len(band) - 1))
    assert abs(band.mean() - m) < 3 * se_mean
    assert abs(band.var(ddof=1) - v) < 3 * se_var


def test_segment_mass_examples():
    m, c, half = 1.5, 0.7, 0.9
    assert segment_mass(m, c, m - half, m + half) == pytest.approx(erf(half / np.sqrt(2 * c)), rel=1e-15)
    assert segment_mass(m, c, 2.0, 2.0) == 0.0
    assert segment_mass(0.5, 0.0, 0.0, 1.0) == 1.0
    assert segment_mass(1.5, 0.0, 0.0, 1.0) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 10), st.floats(-10, 10), st.floats(0, 5), st.floats(0, 5))
def test_segment_mass_additive(m, c, x1, d1, d2):
    x2, x3 = x1 + d1, x1 + d1 + d2
    total = segment_mass(m, c, x1, x2) + segment_mass(m, c, x2, x3)
    assert abs(total - segment_mass(m, c, x1, x3)) < 1e-14
    assert 0 <= segment_mass(m, c, x1, x3) <= 1


def _line_query(horizon=8.0, dt=0.015, length=1e4):
    # vehicle climbing toward a long horizontal segment at y = 0; conflict side above
    model = LtiModel.double_integrator((1.0, 1.0))
    plan = PiecewiseLinearPlan((PlanStage((0.0, -50.0), (0.0, 10.0), horizon),))
    boundary = ConflictBoundary.from_segments([Segment((length, 0.0), (-length, 0.0))], (0.0, 1.0))
    return ConflictQuery(plan, model, boundary, horizon, dt)


def test_infinite_segment_reduces_to_first_passage_cdf():
    q = _line_query()
    res = boundary_conflict_probability(q)
    seg, n = q.boundary.segments[0], q.boundary.normal(0)
    proc = build_reduced(q.plan.stages[0], 0.0, seg, n, CubicVariance(reduce_noise(q.model.noise_diffusion[2:, 2:], n)))
    expected = float(crossing_cdf(proc, q.horizon))
    assert 0.1 < expected < 0.99
    assert res.probability == pytest.approx(expected, abs=1e-6)


def test_open_loop_total(open_query, open_inputs):
    res = boundary_conflict_probability(open_query, inputs=open_inputs)
    assert abs(100 * res.probability - 11.359) < 0.15
    assert len(res.per_segment) == 6
    assert all(p.probability >= 0 for p in res.per_segment)
    assert res.probability == pytest.approx(min(1.0, sum(p.probability for p in res.per_segment)), abs=1e-12)


def test_halving_dt(open_model, open_plan, open_boundary):
    coarse = boundary_conflict_probability(ConflictQuery(open_plan, open_model, open_boundary, 15.0, 0.015))
    fine = boundary_conflict_probability(ConflictQuery(open_plan, open_model, open_boundary, 15.0, 0.0075))
    assert abs(coarse.probability - fine.probability) < 1e-4


def test_step_refinement_converges(open_model, open_plan, open_boundary):
    p = [boundary_conflict_probability(ConflictQuery(open_plan, open_model, open_boundary, 15.0, dt)).probability
         for dt in (0.06, 0.03, 0.015)]
    assert abs(p[2] - p[1]) < abs(p[1] - p[0])


def test_receding_boundary_gives_zero(open_plan):
    # with constant (closed-loop) variance a receding stage never approaches the line
    model = LtiModel.tracking((2.0, 2.0), 4.0, 3.0)
    behind = ConflictBoundary.from_segments([Segment((150.0, -40.0), (150.0, 0.0))], (160.0, -20.0))
    res = boundary_conflict_probability(ConflictQuery(open_plan, model, behind, 15.0, 0.015))
    assert res.probability == 0.0
    assert res.per_segment[0].diagnostics["skipped_stages"]


def test_receding_open_loop_is_small_but_diffuses(open_model, open_plan):
    behind = ConflictBoundary.from_segments([Segment((150.0, -40.0), (150.0, 0.0))], (160.0, -20.0))
    res = boundary_conflict_probability(ConflictQuery(open_plan, open_model, behind, 15.0, 0.015))
    assert 0 < res.probability < 0.01


@pytest.mark.parametrize("index", range(6))
def test_segment_split_invariance(open_query, open_inputs, index):
    base = boundary_conflict_probability(open_query, inputs=open_inputs).probability
    split = ConflictQuery(open_query.plan, open_query.model, open_query.boundary.refined(index, 0.37),
                          open_query.horizon, open_query.dt)
    assert abs(boundary_conflict_probability(split, inputs=open_inputs).probability - base) < 1e-10


@settings(max_examples=10, deadline=None)
@given(st.floats(-np.pi, np.pi), st.floats(-100, 100), st.floats(-100, 100))
def test_rigid_transform_invariance(theta, tx, ty):
    model = LtiModel.double_integrator((2.2 ** 2, 1.58 ** 2))
    plan = PiecewiseLinearPlan((PlanStage((100.0, -20.0), (-10.0, 1.0), 15.0),))
    boundary = approximate_circle((0, 0), 5.0, 6, visible_arc((0, 0), 5.0, (100, -20)), kind="circumscribed")
    base = boundary_conflict_probability(ConflictQuery(plan, model, boundary, 15.0, 0.015)).probability
    t = RigidTransform.from_angle(theta, (tx, ty))
    moved = ConflictQuery(transform_plan(plan, t), transform_model(model, t), boundary.transformed(t), 15.0, 0.015)
    assert abs(boundary_conflict_probability(moved).probability - base) < 1e-10


def test_closed_loop_rigid_transform_invariance(closed_scenario):
    q = Prepared.from_scenario(closed_scenario).query
    base = boundary_conflict_probability(q).probability
    t = RigidTransform.from_angle(2.1, (-4.0, 13.0))
    moved = ConflictQuery(transform_plan(q.plan, t), transform_model(q.model, t), q.boundary.transformed(t),
                          q.horizon, q.dt)
    assert abs(boundary_conflict_probability(moved).probability - base) < 1e-10


def test_monotone_in_horizon(open_model, open_plan, open_boundary):
    values = []
    for horizon in (3.0, 6.0, 9.0, 12.0, 15.0):
        plan = PiecewiseLinearPlan((PlanStage((100.0, -20.0), (-10.0, 1.0), horizon),))
        values.append(boundary_conflict_probability(
            ConflictQuery(plan, open_model, open_boundary, horizon, 0.015)).probability)
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert values[0] < 1e-12 < values[-1]


def test_parallel_matches_serial_bitwise(open_query, open_inputs, closed_scenario):
    prep = Prepared.from_scenario(closed_scenario)
    for q, inputs in ((open_query, open_inputs), (prep.query, prep.inputs)):
        serial = boundary_conflict_probability(q, workers=1, inputs=inputs)
        parallel = boundary_conflict_probability(q, workers=4, inputs=inputs)
        assert serial.probability == parallel.probability
        assert [p.probability for p in serial.per_segment] == [p.probability for p in parallel.per_segment]


def test_clamped_at_one():
    # many identical long segments right in the path: the raw sum exceeds one
    q = _line_query(horizon=14.0)
    seg = q.boundary.segments[0]
    boundary = ConflictBoundary.from_segments([seg] * 3, (0.0, 1.0))
    res = boundary_conflict_probability(ConflictQuery(q.plan, q.model, boundary, q.horizon, q.dt))
    assert sum(p.probability for p in res.per_segment) > 1
    assert res.probability == 1.0


def test_segment_probability_matches_inputs_default(open_query, open_inputs):
    a = segment_conflict_probability(open_query, 2, open_inputs).probability
    b = segment_conflict_probability(open_query, 2).probability
    assert a == pytest.approx(b, rel=1e-12)
    assert isinstance(open_inputs, PredictorInputs)
