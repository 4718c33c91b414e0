import math

import numpy as np
import pytest

from dirwalk.geometry import Cone, Face, Rectangle, cone_contains, exit_face, rect_contains
from dirwalk.montecarlo import range_curve, sample_path
from dirwalk.process import axis_trap_walk, excited_walk, radial_sector_walk, srw2d
from dirwalk.stopping import (ConeHit, ExitRect, Level, ReturnTo, StepCap, detect_left_exit,
                              level_ge, level_le0, new_site_times, run_episode, run_episodes)

WALKS = [srw2d(), axis_trap_walk(), excited_walk(0.3), radial_sector_walk(3, 0.45)]


def test_unit_square_is_left_on_first_step():
    rect = Rectangle((0, 0), (1, 0), 1, 1, 1, 1)
    for traj in range(20):
        rec = run_episode(srw2d(), (0, 0), [ExitRect(rect), StepCap(10**6)], seed=1, traj=traj)
        assert rec.stop_time == 1
        assert isinstance(rec.stop_reason, ExitRect)
        assert not rec.censored


def test_step_cap_censors():
    specs = [level_ge((1, 0), 5), StepCap(10)]
    batch = run_episodes(srw2d(), (0, 0), specs, 200, seed=4)
    cens = batch.censored
    assert cens.any() and not cens.all()
    for i in np.flatnonzero(cens):
        rec = batch.record(i)
        assert isinstance(rec.stop_reason, StepCap) and rec.stop_time == 10


def test_step_cap_required():
    with pytest.raises(ValueError):
        run_episode(srw2d(), (0, 0), [level_ge((1, 0), 5)])
    with pytest.raises(ValueError):
        run_episode(srw2d(), (0, 0), [])
    with pytest.raises(ValueError):
        StepCap(0)


def test_start_must_lie_in_rectangle():
    rect = Rectangle((0, 0), (1, 0), 1, 1, 1, 1)
    with pytest.raises(ValueError):
        run_episode(srw2d(), (5, 0), [ExitRect(rect), StepCap(5)])


def test_priority_on_ties():
    rect = Rectangle((0, 0), (1, 0), 1, 1, 1, 1)
    specs = [StepCap(5), ReturnTo((1, 0)), level_ge((1, 0), 1), ExitRect(rect)]
    rec = run_episode(srw2d(), (0, 0), specs, seed=0, traj=0)
    assert isinstance(rec.stop_reason, ExitRect)
    specs = [ReturnTo((0, 0)), level_ge((1, 0), -100), StepCap(5)]
    rec = run_episode(srw2d(), (0, 0), specs, seed=0, traj=0)
    assert isinstance(rec.stop_reason, Level) and rec.stop_time == 1


def test_level_ops():
    with pytest.raises(ValueError):
        Level((1, 0), 1, "==")
    assert level_le0((0, 1)).op == "<=" and level_le0((0, 1)).threshold == 0.0


def _fires(spec, x, y):
    if isinstance(spec, ExitRect):
        return not rect_contains(spec.rect, y)
    if isinstance(spec, ConeHit):
        return cone_contains(spec.cone, y)
    if isinstance(spec, Level):
        v = y[0] * spec.ell[0] + y[1] * spec.ell[1]
        return {">=": v >= spec.threshold, "<=": v <= spec.threshold,
                ">": v > spec.threshold, "<": v < spec.threshold}[spec.op]
    return tuple(x) == tuple(spec.site)


@pytest.mark.parametrize("walk", WALKS, ids=repr)
def test_stop_time_is_first_firing_time(walk):
    rect = Rectangle((0, 0), (1, 0), 4, 2, 3, 3)
    specs = [ExitRect(rect), ConeHit(Cone(0.9, (-1, 0))), Level((0, 1), 5, ">"),
             ReturnTo((0, 0)), StepCap(400)]
    for transform in ("x", "y"):
        for traj in range(15):
            rec = run_episode(walk, (0, 0), specs, transform, seed=8, traj=traj, keep_trace=True)
            trace = rec.y_trace if transform == "y" else rec.trace
            for k in range(1, rec.stop_time):
                assert not any(_fires(s, rec.trace[k], trace[k]) for s in specs[:-1])
            if not rec.censored:
                assert _fires(rec.stop_reason, rec.trace[-1], trace[-1])
            assert rec.stop_time >= 1


@pytest.mark.parametrize("walk", WALKS, ids=repr)
def test_compiled_and_python_episodes_agree(walk):
    rect = Rectangle((0, 0), (1, 0), 5, 2, 2, 4)
    specs = [ExitRect(rect), ConeHit(Cone(1.0, (-1, 0))), StepCap(500)]
    batch = run_episodes(walk, (0, 0), specs, 30, seed=2**64 - 3, transform="y", traj0=7)
    for i in range(30):
        slow = run_episode(walk, (0, 0), specs, "y", seed=2**64 - 3, traj=7 + i,
                           keep_trace=True)
        fast = batch.record(i)
        assert fast.stop_reason == slow.stop_reason
        assert fast.stop_time == slow.stop_time
        assert fast.final_position == slow.final_position
        assert fast.pre_exit_position == slow.pre_exit_position
        assert fast.final_y == slow.final_y
        assert fast.pre_exit_y == slow.pre_exit_y
        assert fast.max_perp_deviation == slow.max_perp_deviation


def test_rectangle_episode_invariants():
    rect = Rectangle((0, 0), (1, 0), 3, 1, 1, 5)
    for traj in range(30):
        rec = run_episode(srw2d(), (0, 0), [ExitRect(rect), StepCap(10**5)], seed=2,
                          traj=traj, keep_trace=True)
        assert all(rect_contains(rect, p) for p in rec.trace[:-1])
        assert not rect_contains(rect, rec.trace[-1])


def test_detect_left_exit_examples():
    from dirwalk.stopping import EpisodeRecord

    rect = Rectangle((0, 0), (1, 0), 1, 1, 1, 10)
    spec = ExitRect(rect)
    left = EpisodeRecord(spec, 5, (-10.5, 0), (-9.5, 0), False, 0.0)
    top = EpisodeRecord(spec, 5, (0, 10.5), (0, 9.5), False, 10.5)
    assert detect_left_exit(rect, left)
    assert not detect_left_exit(rect, top)
    with pytest.raises(ValueError):
        detect_left_exit(rect, EpisodeRecord(StepCap(5), 5, (0, 0), (0, 0), True, 0.0))


def test_left_and_other_exits_partition_and_overshoot():
    rect = Rectangle((0, 0), (1, 0), 2, 1, 1, 10)
    spec = ExitRect(rect)
    batch = run_episodes(srw2d(), (0, 0), [spec, StepCap(10**6)], 10_000, seed=5)
    assert not batch.censored.any()
    left = other = 0
    for rec in batch:
        s, t = rect.local(rec.final_position)
        overshoot = max(-10 - s, s - 10, abs(t) - 20)
        assert 0 <= overshoot < 1
        if detect_left_exit(rect, rec):
            left += 1
        else:
            other += 1
    assert left + other == 10_000


def test_square_left_and_right_exits_balance():
    rect = Rectangle((0, 0), (1, 0), 1, 1, 1, 10)
    # the mirrored square's left face is the original right face
    mirrored = Rectangle((0, 0), (-1, 0), 1, 1, 1, 10)
    batch = run_episodes(srw2d(), (0, 0), [ExitRect(rect), StepCap(10**6)], 10_000, seed=9)
    left = right = 0
    for rec in batch:
        left += exit_face(rect, rec.pre_exit_position, rec.final_position) is Face.LEFT
        right += exit_face(mirrored, rec.pre_exit_position, rec.final_position) is Face.LEFT
    assert 1500 < left < 3500
    # difference of two counts from one multinomial sample
    se = math.sqrt(10_000 * 0.5)
    assert abs(left - right) < 3 * se


def test_cone_hit_on_y_survival_decays_slowly():
    walk = excited_walk(0.3)
    survive = []
    for n in (1000, 10_000):
        batch = run_episodes(walk, (0, 0), [ConeHit(Cone(1.0, (-1, 0))), StepCap(n)],
                             4000, seed=6, transform="y")
        survive.append(batch.censored.mean())
    assert survive[0] > 0 and survive[1] > 0
    assert survive[1] * math.sqrt(10_000) >= survive[0] * math.sqrt(1000)


def test_new_site_times():
    assert new_site_times([(0, 0), (1, 0), (0, 0), (0, 1)]) == [0, 1, 3]
    assert new_site_times([(2, 2)] * 5) == [0]


@pytest.mark.parametrize("walk", WALKS, ids=repr)
def test_new_site_times_count_equals_range(walk):
    for traj in range(5):
        path = sample_path(walk, (0, 0), 500, seed=1, traj=traj)
        times = new_site_times(path)
        assert times[0] == 0 and all(a < b for a, b in zip(times, times[1:]))
        assert len(times) == len(set(path)) == range_curve(path, [500]).checkpoints[-1][1]
