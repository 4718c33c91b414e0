import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from statsmodels.stats.proportion import proportion_confint

from dirwalk import montecarlo as mc
from dirwalk.montecarlo import (BoundCheck, Direction, Estimate, MeanEstimate, Verdict,
                                judge, wilson_interval)
from dirwalk.process import (HypothesisError, axis_trap_walk, excited_walk,
                             radial_sector_walk, srw2d)
from dirwalk.stopping import StepCap, level_ge, new_site_times


def lazy_exit_time(width):
    """Exact mean exit time of (-width-1, width+1) for the lazy +-1 walk
    (moves w.p. 1/4 each way) started at 0, from the linear system."""
    states = np.arange(-width, width + 1)
    m = len(states)
    A = np.eye(m)
    for i in range(m):
        A[i, i] -= 0.5
        if i > 0:
            A[i, i - 1] -= 0.25
        if i < m - 1:
            A[i, i + 1] -= 0.25
    return np.linalg.solve(A, np.ones(m))[width]


def test_exit_time_oracle_values():
    assert lazy_exit_time(10) == pytest.approx(242)
    assert lazy_exit_time(20) == pytest.approx(882)


@pytest.mark.parametrize("k,n", [(0, 10), (5, 10), (10, 10), (3, 1000), (517, 1000)])
@pytest.mark.parametrize("level", [0.9, 0.95, 0.99])
def test_wilson_matches_statsmodels(k, n, level):
    lo, hi = wilson_interval(k, n, level)
    want = proportion_confint(k, n, alpha=1 - level, method="wilson")
    assert lo == pytest.approx(want[0], abs=1e-12)
    assert hi == pytest.approx(want[1], abs=1e-12)


@given(st.integers(1, 10**6).flatmap(lambda n: st.tuples(st.integers(0, n), st.just(n))))
def test_estimate_invariants(kn):
    k, n = kn
    e = Estimate.from_counts(k, n)
    assert 0 <= e.ci_low <= e.p_hat <= e.ci_high <= 1


def test_wilson_validation():
    with pytest.raises(ValueError):
        wilson_interval(5, 4)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


def test_interval_width_shrinks_like_root_n():
    widths = [np.subtract(*wilson_interval(n // 2, n)[::-1]) for n in (100, 10_000)]
    assert widths[0] / widths[1] == pytest.approx(10, rel=0.05)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.sampled_from(list(Direction)))
def test_verdict_trichotomy(a, b, bound, direction):
    lo, hi = min(a, b), max(a, b)
    v = judge(lo, hi, bound, direction)
    if direction is Direction.AT_LEAST:
        assert (v is Verdict.VIOLATED) == (hi < bound)
        assert (v is Verdict.CONSISTENT) == (lo >= bound)
    else:
        assert (v is Verdict.VIOLATED) == (lo > bound)
        assert (v is Verdict.CONSISTENT) == (hi <= bound)


def test_forced_inconclusive():
    est = Estimate.from_counts(900, 1000)
    assert BoundCheck.make(est, 0.5, Direction.AT_LEAST).verdict is Verdict.CONSISTENT
    forced = BoundCheck.make(est, 0.5, Direction.AT_LEAST, force_inconclusive=True)
    assert forced.verdict is Verdict.INCONCLUSIVE
    assert BoundCheck.make(est, 0.95, Direction.AT_LEAST).verdict is Verdict.VIOLATED


def test_mean_estimate():
    x = np.arange(1000, dtype=float)
    m = MeanEstimate.from_samples(x)
    assert m.mean == 499.5
    assert m.std_err == pytest.approx(np.std(x, ddof=1) / math.sqrt(1000))
    assert m.ci_low < m.mean < m.ci_high
    assert not m.heavy_tail


@pytest.mark.parametrize("walk", [srw2d(), excited_walk(0.3), axis_trap_walk()], ids=repr)
def test_batch_trivial_invariants(walk):
    b = mc.simulate_batch(walk, (0, 0), 500, 50, seed=3, checkpoints=[0, 10, 100])
    assert b.checkpoints.tolist() == [0, 10, 100, 500]
    assert (b.range_at[:, 0] == 1).all()
    assert (np.diff(b.range_at, axis=1) >= 0).all()
    assert (b.range_at <= b.checkpoints + 1).all()
    assert (b.local_time_start >= 1).all()


@pytest.mark.parametrize("walk", [srw2d(), excited_walk(0.3), radial_sector_walk()], ids=repr)
def test_batch_matches_python_reference(walk):
    b = mc.simulate_batch(walk, (0, 0), 400, 8, seed=21, checkpoints=[50, 200], traj0=3)
    for i in range(8):
        path = mc.sample_path(walk, (0, 0), 400, 21, 3 + i)
        field = mc.local_time_field(path)
        assert sum(field.counts.values()) == 401
        assert field[(0, 0)] == b.local_time_start[i]
        assert max(field.counts.values()) == b.max_local_time[i]
        assert [r for _, r in mc.range_curve(path, b.checkpoints).checkpoints] == b.range_at[i].tolist()
        assert len(new_site_times(path)) == b.range[i]
        assert max(math.hypot(*p) for p in path) == b.max_norm[i]
        assert tuple(b.final[i]) == path[-1]


def test_batch_rows():
    b = mc.simulate_batch(srw2d(), (0, 0), 100, 3, seed=5, traj0=10)
    rows = list(b.rows())
    assert [r["traj_index"] for r in rows] == [10, 11, 12]
    assert set(rows[0]) == {"traj_index", "n", "range", "L_at_start", "max_norm", "seed"}


def test_batch_does_not_depend_on_batch_split():
    whole = mc.simulate_batch(excited_walk(0.3), (0, 0), 300, 20, seed=9)
    part = mc.simulate_batch(excited_walk(0.3), (0, 0), 300, 5, seed=9, traj0=15)
    np.testing.assert_array_equal(whole.range_at[15:], part.range_at)


def test_srw_median_range():
    b = mc.simulate_batch(srw2d(), (0, 0), 10_000, 1000, seed=1)
    ratio = np.median(b.range) / (math.pi * 1e4 / math.log(1e4))
    assert 0.5 <= ratio <= 1.5


def test_estimate_event_always_true():
    est = mc.estimate_event(srw2d(), [level_ge((1, 0), -5), StepCap(10)], lambda r: True,
                            100, seed=1)
    assert est.k == est.n == 100 and est.p_hat == 1.0
    assert est.ci_low == pytest.approx(wilson_interval(100, 100)[0])


def test_estimate_event_fair_coin():
    # every run stops after one step; the first jump is (1,0) or (0,1) w.p. 1/2
    specs = [level_ge((1, 0), -10), StepCap(5)]
    covered = 0
    for seed in range(20):
        est = mc.estimate_event(srw2d(), specs, lambda r: sum(r.final_position) > 0,
                                10_000, seed=seed)
        covered += est.ci_low <= 0.5 <= est.ci_high
    assert covered >= 16


def test_estimate_event_errors():
    with pytest.raises(ValueError):
        mc.estimate_event(srw2d(), [StepCap(5)], lambda r: True, 10, seed=1)
    with pytest.raises(RuntimeError):
        mc.estimate_event(srw2d(), [level_ge((1, 0), 100), StepCap(5)], lambda r: True,
                          50, seed=1)


def test_exit_probability_gates():
    with pytest.raises(HypothesisError):
        mc.exit_probability(excited_walk(0.3), (1, 0), 10, 56, 1, 1, n_traj=100)
    with pytest.raises(ValueError):
        mc.exit_probability(srw2d(), (1, 0), 0.5, 56, 1, 1, n_traj=100)
    res = mc.exit_probability(srw2d(), (1, 0), 2, 56, 1, 1, n_traj=100, seed=1)
    assert res.thin_rect_check is None and res.rho_check is None and res.notes


def test_exit_probability_rho_check_when_representable():
    # a huge rectangle scale makes lambda0 reachable only in log space, so the
    # rho check is attached when lam exceeds it; here it is not.
    res = mc.exit_probability(srw2d(), (0, 1), 10, 56, 1, 1, n_traj=200, seed=2)
    assert res.rho_check is None
    assert res.log2_lambda0 > 500


def test_expected_exit_time_against_oracle():
    est, check = mc.expected_exit_time(srw2d(), 1, 10, n_traj=4000, seed=3)
    assert abs(est.mean - 242) < 3 * (est.ci_high - est.ci_low)
    assert check.bound == 1936 and check.verdict is Verdict.CONSISTENT


def test_expected_exit_time_censoring_forces_inconclusive():
    est, check = mc.expected_exit_time(srw2d(), 1, 10, n_traj=1000, seed=3, cap=100)
    assert est.censored_count > 10
    assert check.verdict is not Verdict.CONSISTENT


def test_expected_exit_time_needs_1000_runs():
    with pytest.raises(ValueError):
        mc.expected_exit_time(srw2d(), 1, 10, n_traj=999)


def test_gambler_check():
    check = mc.gambler_check(srw2d(), 1, 10, n_traj=10_000, seed=4)
    assert check.bound == pytest.approx(10 / 21)
    assert check.estimate.ci_low <= 0.5 <= check.estimate.ci_high
    assert check.verdict is Verdict.CONSISTENT
    assert mc.gambler_bound(1, 10, 1) > 3 / 7
    with pytest.raises(ValueError):
        mc.gambler_check(srw2d(), 1, 3, n_traj=100)


def test_vertical_excursion_bound_and_clamp():
    p = srw2d().spec.params
    assert mc.excursion_horizon(1, 10, p) == pytest.approx(13552)
    assert mc.excursion_bound(56, 1, p) == pytest.approx(1 / 7)
    assert mc.excursion_bound(1, 1, p) == 1.0
    check = mc.vertical_excursion(srw2d(), 1, 1, 10, n_traj=100, seed=1)
    assert check.verdict is Verdict.CONSISTENT


def test_vertical_excursion_monotone_in_horizon():
    # same a * lam, longer horizon for larger lam
    p5 = mc.vertical_excursion(srw2d(), 4, 1, 5, n_traj=2000, seed=1).estimate.p_hat
    p10 = mc.vertical_excursion(srw2d(), 2, 1, 10, n_traj=2000, seed=1).estimate.p_hat
    assert p10 >= p5


def test_tails_and_trivial_gamma():
    est = mc.tail_local_time(srw2d(), 1000, 0.45, n_traj=500, seed=1)
    assert est.p_hat < 0.05
    # n^gamma >= n + 1 can never be exceeded; n^(1-gamma) <= 1 can never be undercut
    assert mc.tail_local_time(srw2d(), 100, 0.9999, n_traj=200, seed=1).k == 0
    assert mc.tail_range(srw2d(), 100, 0.9999, n_traj=200, seed=1).k == 0
    with pytest.raises(ValueError):
        mc.tail_range(srw2d(), 100, 1.0)


def test_axis_trap_range_much_smaller_than_srw():
    trap = mc.simulate_batch(axis_trap_walk(), (0, 0), 10_000, 500, seed=1)
    srw = mc.simulate_batch(srw2d(), (0, 0), 10_000, 500, seed=1)
    assert np.median(trap.range) < 0.5 * np.median(srw.range)
    # at a threshold of order sqrt(n) log n the trapped walk falls short often
    gamma = 0.25
    assert mc.tail_counts(trap, gamma)[1] > 0.2 * 500
    assert mc.tail_counts(srw, gamma)[1] < 0.05 * 500


def test_range_exponent_validation_and_srw():
    with pytest.raises(ValueError):
        mc.range_exponent(srw2d(), [100, 200, 500])
    with pytest.raises(ValueError):
        mc.range_exponent(srw2d(), [100, 10_000])
    fit = mc.range_exponent(srw2d(), [1000, 10_000, 100_000], n_traj=100, seed=1)
    assert fit.within(0.85, 1.0)


def test_avoidance_probability():
    res = mc.avoidance_probability(excited_walk(0.3), n=1000, n_traj=4000, seed=1)
    assert res.y_side.p_hat > 0
    assert res.violations == 0
    assert res.dominated
    with pytest.raises(HypothesisError):
        mc.avoidance_probability(srw2d(), n=10, n_traj=10)


def test_avoidance_decay_slower_than_root_n():
    w = excited_walk(0.3)
    p3 = mc.avoidance_probability(w, n=1000, n_traj=4000, seed=2).y_side
    p4 = mc.avoidance_probability(w, n=10_000, n_traj=4000, seed=2).y_side
    assert p4.ci_high * 100 >= p3.ci_low * math.sqrt(1000)


def test_transform_check_small():
    tc = mc.transform_check(excited_walk(0.3), n_traj=10, n_steps=300, seed=1)
    assert tc.jump_bound_ok and tc.ellipticity_ok and tc.mean_ok
    assert tc.n_steps == 3000 and tc.distinct_kernels == 2
