import numpy as np
import pytest

from fptconflict.fptd import crossing_cdf
from fptconflict.geometry import ConflictBoundary, Disk, Segment
from fptconflict.harness.runner import Prepared, mc_config
from fptconflict.motion import GaussianBelief, LtiModel, PiecewiseLinearPlan, PlanStage, propagate
from fptconflict.oracle import (
    McConfig, McEstimate, chunk_rng, estimate, first_crossing, psd_sqrt, sample_paths, sample_trajectory,
    simulate_1d, step_crossings,
)
from fptconflict.reduction import ConstantVariance, CubicVariance, Reduced1DProcess


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(0, 0.01)
    with pytest.raises(ValueError):
        McConfig(10, 0.0)
    with pytest.raises(ValueError):
        McConfig(10, 0.01, chunk_size=0)


def test_estimate_standard_error():
    est = McEstimate.from_count(25, 100)
    assert est.probability == 0.25
    assert est.std_error == pytest.approx(np.sqrt(0.25 * 0.75 / 100))


def test_psd_sqrt_singular():
    m = np.array([[4.0, 2.0, 0.0], [2.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    L = psd_sqrt(m)
    np.testing.assert_allclose(L @ L.T, m, atol=1e-12)


def test_zero_noise_path_follows_plan():
    model = LtiModel.double_integrator((0.0, 0.0))
    plan = PiecewiseLinearPlan((PlanStage((100.0, -20.0), (-10.0, 1.0), 15.0),))
    times, path = sample_trajectory(model, plan, 15.0, McConfig(1, 0.015), np.random.default_rng(0))
    np.testing.assert_allclose(path, plan.mean(times)[0], atol=1e-9)


def test_zero_noise_closed_loop_path_follows_two_stage_plan(closed_scenario):
    model = LtiModel.tracking((0.0, 0.0), 16.0, 8.0)
    plan = closed_scenario.plan
    times, path = sample_trajectory(model, plan, closed_scenario.horizon, McConfig(1, 0.01),
                                    np.random.default_rng(0))
    np.testing.assert_allclose(path, plan.mean(times)[0], atol=1e-9)


def test_sample_covariance_matches_propagation(open_model):
    plan = PiecewiseLinearPlan((PlanStage((0.0, 0.0), (1.0, 0.0), 2.0),))
    times, paths = sample_paths(open_model, plan, 2.0, 0.05, 100_000, np.random.default_rng(11))
    cov = propagate(open_model, GaussianBelief.point((0, 0), (1, 0)), 2.0).cov_r
    sample = np.cov(paths[:, -1].T)
    n = paths.shape[0]
    for i in range(2):
        for j in range(2):
            se = np.sqrt((cov[i, i] * cov[j, j] + cov[i, j] ** 2) / (n - 1))
            assert abs(sample[i, j] - cov[i, j]) < 3 * se
    np.testing.assert_allclose(paths.mean(axis=0)[-1], [2.0, 0.0], atol=3 * np.sqrt(cov.max() / n) * 2)


def test_closed_loop_sample_covariance_matches_propagation():
    model = LtiModel.tracking((7.5 ** 2, 2.4 ** 2), 16.0, 8.0)
    plan = PiecewiseLinearPlan((PlanStage((0.0, 0.0), (1.0, 0.5), 1.5),))
    _, paths = sample_paths(model, plan, 1.5, 0.01, 100_000, np.random.default_rng(5))
    cov = propagate(model, GaussianBelief(0.0, np.zeros(4), np.zeros((4, 4))), 1.5).cov_r
    sample = np.cov(paths[:, -1].T)
    n = paths.shape[0]
    for i in range(2):
        se = cov[i, i] * np.sqrt(2 / (n - 1))
        assert abs(sample[i, i] - cov[i, i]) < 3 * se


def test_fixed_seed_is_bit_identical(open_model, open_plan):
    cfg = McConfig(1, 0.015, seed=3)
    a = sample_trajectory(open_model, open_plan, 15.0, cfg, chunk_rng(3, 0))[1]
    b = sample_trajectory(open_model, open_plan, 15.0, cfg, chunk_rng(3, 0))[1]
    assert np.array_equal(a, b)
    c = sample_trajectory(open_model, open_plan, 15.0, cfg, chunk_rng(3, 1))[1]
    assert not np.array_equal(a, c)


def test_first_crossing_through_midpoint():
    wall = ConflictBoundary.from_segments([Segment((0.0, -1.0), (0.0, 1.0))], (-1.0, 0.0))
    times = np.arange(0, 1.01, 0.1)
    # straight path at unit speed reaching x = 0 at t = 0.45
    path = np.column_stack([0.45 - times, np.zeros_like(times)])
    t = first_crossing(times, path, wall)
    assert abs(t - 0.45) < 0.1 * 1e-9
    assert first_crossing(times, np.column_stack([1 + times, times]), wall) is None


def test_first_crossing_disk_and_inside_start():
    disk = Disk((0.0, 0.0), 1.0)
    times = np.linspace(0, 1, 11)
    path = np.column_stack([3 - 3 * times, np.zeros_like(times)])      # reaches x = 1 at t = 2/3
    assert first_crossing(times, path, disk) == pytest.approx(2 / 3, abs=1e-12)
    hit, u = step_crossings(np.array([[0.0, 0.0]]), np.array([[5.0, 0.0]]), disk)
    assert hit[0] and u[0] == 0.0
    with pytest.raises(TypeError):
        step_crossings(np.zeros((1, 2)), np.ones((1, 2)), object())


@pytest.mark.parametrize("start, expected", [((100.0, -1.0), 1.0), ((100.0, -20.0), 0.0)])
def test_zero_noise_gives_zero_or_one(start, expected):
    model = LtiModel.double_integrator((0.0, 0.0))
    plan = PiecewiseLinearPlan((PlanStage(start, (-10.0, 0.0), 15.0),))
    est = estimate(model, plan, Disk((0, 0), 5.0), 15.0, McConfig(200, 0.015))
    assert est.probability == expected and est.std_error == 0.0


def test_crossing_times_monotone_and_prefix_consistent(open_scenario):
    sc = open_scenario
    cfg = McConfig(4000, 0.015, seed=9, chunk_size=1000)
    full = estimate(sc.model, sc.plan, sc.region, 15.0, cfg, keep_times=True)
    fractions = [np.mean(full.crossing_times <= h) for h in np.arange(1.5, 15.01, 1.5)]
    assert all(b >= a for a, b in zip(fractions, fractions[1:]))
    assert fractions[-1] == full.probability
    # a shorter horizon replays the same random stream on a prefix of the grid
    short = estimate(sc.model, sc.plan, sc.region, 10.5, cfg)
    assert short.probability == np.mean(full.crossing_times <= 10.5)


def test_parallel_workers_do_not_change_result(closed_scenario):
    sc = closed_scenario
    base = McConfig(3000, 0.01, seed=1, chunk_size=700, workers=1)
    serial = estimate(sc.model, sc.plan, sc.region, sc.horizon, base, keep_times=True)
    threaded = estimate(sc.model, sc.plan, sc.region, sc.horizon,
                        McConfig(3000, 0.01, seed=1, chunk_size=700, workers=3), keep_times=True)
    assert np.array_equal(serial.crossing_times, threaded.crossing_times)


def test_disjoint_seeds_agree(closed_scenario):
    sc = closed_scenario
    a = estimate(sc.model, sc.plan, sc.region, sc.horizon, mc_config(sc, 20_000, seed=101))
    b = estimate(sc.model, sc.plan, sc.region, sc.horizon, mc_config(sc, 20_000, seed=202))
    assert abs(a.probability - b.probability) < 4 * np.hypot(a.std_error, b.std_error)


def test_refining_the_step_misses_few_crossings(open_scenario):
    # the discretization is exact, so every 4th sample of a fine path is a valid
    # coarse path: the coupled difference counts crossings missed between samples
    sc = open_scenario
    n, fine_dt, misses, total = 2000, sc.mc.dt / 4, 0, 0
    rng = np.random.default_rng(77)
    for _ in range(5):
        _, paths = sample_paths(sc.model, sc.plan, sc.horizon, fine_dt, n, rng)
        for stride in (1, 4):
            p = paths[:, ::stride]
            hit, _ = step_crossings(p[:, :-1].reshape(-1, 2), p[:, 1:].reshape(-1, 2), sc.region)
            crossed = hit.reshape(n, -1).any(axis=1)
            if stride == 1:
                fine = crossed
            else:
                coarse = crossed
        assert not np.any(coarse & ~fine)
        misses += int(np.count_nonzero(fine & ~coarse))
        total += n
    p = fine.mean()
    se_at_1e6 = np.sqrt(p * (1 - p) / 1e6)
    assert misses / total < se_at_1e6


@pytest.mark.parametrize("proc", [
    Reduced1DProcess(20.0, 0.0, 8.0, CubicVariance(1.0)),
    Reduced1DProcess(-15.0, 0.0, -6.0, CubicVariance(0.8)),
])
def test_one_dimensional_calibration_open_loop(proc):
    est = simulate_1d(proc, 2.5, 0.005, 100_000, np.random.default_rng(31))
    assert abs(est.probability - float(crossing_cdf(proc, 2.5))) < 3 * est.std_error


def test_one_dimensional_calibration_closed_loop():
    proc = Reduced1DProcess(6.0, 0.0, 2.0, ConstantVariance(0.01))
    est = simulate_1d(proc, 3.0, 0.005, 100_000, np.random.default_rng(32))
    assert abs(est.probability - float(crossing_cdf(proc, 3.0))) < 3 * est.std_error


def test_closed_loop_seed_self_consistency(closed_scenario, closed_mc):
    sc = closed_scenario
    rerun = estimate(sc.model, sc.plan, sc.region, sc.horizon, mc_config(sc, 100_000, seed=sc.mc.seed + 1))
    assert abs(rerun.probability - closed_mc.probability) < 3 * np.hypot(rerun.std_error, closed_mc.std_error)
    assert closed_mc.n_samples >= 1_000_000


def test_prepared_region_types(open_scenario, closed_scenario):
    assert isinstance(Prepared.from_scenario(open_scenario).scenario.region, Disk)
    assert isinstance(closed_scenario.region, ConflictBoundary)
