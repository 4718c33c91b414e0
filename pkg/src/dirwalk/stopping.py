"""Stopping times, exit events and first-visit times.

A run is stopped at the earliest time ``k >= 1`` at which one of its stop
conditions holds.  A :class:`StepCap` is mandatory; hitting it means the
run was censored.  When several conditions hold at the same time the one
with the highest priority wins, in the order

    ExitRect > ConeHit > Level > ReturnTo > StepCap

and, within a kind, the order they were given in.

With ``transform="y"`` the drift-compensated process ``Y = X - sum(D)`` is
tracked alongside ``X``; rectangle, cone and level conditions are then
evaluated on ``Y`` while :class:`ReturnTo` always looks at ``X``.
"""
from dataclasses import dataclass

import numpy as np

from . import _fast, rng
from .geometry import (Cone, Face, Rectangle, as_vector, basis, exit_face,
                       perp, rect_contains)
from .process import drift, step


@dataclass(frozen=True)
class ExitRect:
    rect: Rectangle
    priority = 0


@dataclass(frozen=True)
class ConeHit:
    cone: Cone
    priority = 1

    def __post_init__(self):
        if self.cone.plane.dim != 2:
            raise ValueError("cone stop conditions are planar")
        if not (np.array_equal(self.cone.plane.u1, basis(0))
                and np.array_equal(self.cone.plane.u2, basis(1))):
            raise ValueError("planar cone conditions use the standard plane basis")


_OPS = {">=": _fast.OP_GE, "<=": _fast.OP_LE, ">": _fast.OP_GT, "<": _fast.OP_LT}


@dataclass(frozen=True)
class Level:
    """``process . ell  <op>  threshold`` with op one of >=, <=, >, <."""

    ell: tuple
    threshold: float
    op: str = ">="
    priority = 2

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unknown comparison {self.op!r}")
        object.__setattr__(self, "ell", tuple(float(z) for z in as_vector(self.ell, 2)))


def level_ge(ell, k):
    return Level(ell, k, ">=")


def level_le0(ell):
    return Level(ell, 0.0, "<=")


@dataclass(frozen=True)
class ReturnTo:
    site: tuple
    priority = 3


@dataclass(frozen=True)
class StepCap:
    n: int
    priority = 4

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"step cap must be a positive integer, got {self.n}")


def _sorted_specs(specs):
    specs = list(specs)
    if not specs:
        raise ValueError("at least one stop condition is required")
    caps = [s for s in specs if isinstance(s, StepCap)]
    if not caps:
        raise ValueError("a StepCap is required (unbounded runs are not simulated)")
    cap = min(s.n for s in caps)
    rest = sorted((s for s in specs if not isinstance(s, StepCap)),
                  key=lambda s: s.priority)
    return rest, cap, next(s for s in caps if s.n == cap)


def _encode(specs, on_y):
    table = np.zeros((len(specs), _fast.ROW))
    for i, s in enumerate(specs):
        row = table[i]
        row[1] = 1.0 if on_y else 0.0
        if isinstance(s, ExitRect):
            r = s.rect
            row[0] = _fast.RECT
            row[2:10] = [r.anchor[0], r.anchor[1], r.v[0], r.v[1], r.a, r.b, r.c, r.lam]
        elif isinstance(s, ConeHit):
            row[0] = _fast.CONE
            row[2:5] = [s.cone.u, s.cone.ell[0], s.cone.ell[1]]
        elif isinstance(s, Level):
            row[0] = _fast.LEVEL
            row[2:6] = [s.ell[0], s.ell[1], s.threshold, _OPS[s.op]]
        elif isinstance(s, ReturnTo):
            row[0] = _fast.RETURN
            row[1] = 0.0
            row[2:4] = [s.site[0], s.site[1]]
        else:
            raise TypeError(f"unsupported stop condition {s!r}")
    return table


def _perp_axis(specs, start, perp_axis):
    if perp_axis is not None:
        ref, w = perp_axis
        return np.array([ref[0], ref[1], w[0], w[1]], dtype=float)
    for s in specs:
        if isinstance(s, ExitRect):
            w = perp(s.rect.v)
            return np.array([s.rect.anchor[0], s.rect.anchor[1], w[0], w[1]])
    return np.array([float(start[0]), float(start[1]), 0.0, 1.0])


@dataclass(frozen=True)
class EpisodeRecord:
    """Outcome of one stopped run.

    ``max_perp_deviation`` is the largest ``|(X_t - ref) . w|`` up to the
    stop time, where ``(ref, w)`` is the first rectangle's anchor and
    normal-to-axis direction (or the start and ``e2`` without one).
    ``final_y`` / ``pre_exit_y`` hold the compensated process.
    """

    stop_reason: object
    stop_time: int
    final_position: tuple
    pre_exit_position: tuple
    censored: bool
    max_perp_deviation: float
    final_y: tuple = None
    pre_exit_y: tuple = None
    trace: tuple = None
    y_trace: tuple = None


def _uses_fast(walk, start):
    return walk.fast is not None and all(float(z).is_integer() for z in start)


def run_episode(walk, start, specs, transform="x", seed=0, traj=0,
                keep_trace=False, perp_axis=None):
    """One stopped run of ``walk`` from ``start`` using stream ``(seed, traj)``."""
    if transform not in ("x", "y"):
        raise ValueError("transform must be 'x' or 'y'")
    rest, cap, cap_spec = _sorted_specs(specs)
    start = tuple(start)
    for s in rest:
        if isinstance(s, ExitRect) and not rect_contains(s.rect, start):
            raise ValueError("the start must lie inside every exit rectangle")
    if _uses_fast(walk, start) and not keep_trace:
        batch = run_episodes(walk, start, specs, 1, seed, transform, traj0=traj,
                             perp_axis=perp_axis)
        return batch.record(0)
    table = _encode(rest, transform == "y")
    pa = _perp_axis(rest, start, perp_axis)
    state = walk.initial_state(start, seed, traj)
    sd = [0.0, 0.0]
    y = [float(start[0]), float(start[1])]
    best = abs((start[0] - pa[0]) * pa[2] + (start[1] - pa[1]) * pa[3])
    trace, y_trace = [start], [tuple(y)]
    prev, prev_y = start, tuple(y)
    hit = None
    while state.time < cap:
        d = drift(walk, state)
        prev, prev_y = state.position, tuple(y)
        state = step(walk, state)
        sd = [sd[0] + float(d[0]), sd[1] + float(d[1])]
        x = state.position
        y = [x[0] - sd[0], x[1] - sd[1]]
        dev = abs((x[0] - pa[0]) * pa[2] + (x[1] - pa[1]) * pa[3])
        best = max(best, dev)
        if keep_trace:
            trace.append(x)
            y_trace.append(tuple(y))
        for k, s in enumerate(rest):
            if _fast.fires(table[k], x[0], x[1], y[0], y[1]):
                hit = s
                break
        if hit is not None:
            break
    return EpisodeRecord(
        stop_reason=hit if hit is not None else cap_spec,
        stop_time=state.time,
        final_position=state.position,
        pre_exit_position=prev,
        censored=hit is None,
        max_perp_deviation=float(best),
        final_y=tuple(y),
        pre_exit_y=prev_y,
        trace=tuple(trace) if keep_trace else None,
        y_trace=tuple(y_trace) if keep_trace else None,
    )


class EpisodeBatch:
    """Column-wise records of ``n`` independent stopped runs."""

    def __init__(self, specs, cap_spec, stop_row, stop_time, xs, ys, dev):
        self.specs = specs
        self.cap_spec = cap_spec
        self.stop_row = stop_row
        self.stop_time = stop_time
        self.final = xs[:, 0:2]
        self.pre = xs[:, 2:4]
        self.final_y = ys[:, 0:2]
        self.pre_y = ys[:, 2:4]
        self.max_perp_deviation = dev

    def __len__(self):
        return self.stop_time.size

    @property
    def censored(self):
        return self.stop_row < 0

    def reason(self, i):
        r = self.stop_row[i]
        return self.cap_spec if r < 0 else self.specs[r]

    def fired(self, spec):
        """Mask of runs stopped by the condition ``spec``."""
        idx = [k for k, s in enumerate(self.specs) if s is spec]
        if not idx:
            raise ValueError("stop condition is not part of this batch")
        return self.stop_row == idx[0]

    def record(self, i):
        return EpisodeRecord(
            stop_reason=self.reason(i),
            stop_time=int(self.stop_time[i]),
            final_position=tuple(self.final[i].tolist()),
            pre_exit_position=tuple(self.pre[i].tolist()),
            censored=bool(self.stop_row[i] < 0),
            max_perp_deviation=float(self.max_perp_deviation[i]),
            final_y=tuple(float(z) for z in self.final_y[i]),
            pre_exit_y=tuple(float(z) for z in self.pre_y[i]),
        )

    def __iter__(self):
        return (self.record(i) for i in range(len(self)))


def run_episodes(walk, start, specs, n_traj, seed, transform="x", traj0=0,
                 perp_axis=None):
    """``n_traj`` runs using trajectory streams ``traj0, traj0 + 1, ...``."""
    if n_traj < 1:
        raise ValueError("n_traj must be positive")
    rest, cap, cap_spec = _sorted_specs(specs)
    start = tuple(start)
    if not _uses_fast(walk, start):
        recs = [run_episode(walk, start, specs, transform, seed, traj0 + i,
                            perp_axis=perp_axis) for i in range(n_traj)]
        row = np.array([-1 if r.censored else rest.index(r.stop_reason) for r in recs])
        xs = np.array([r.final_position + r.pre_exit_position for r in recs])
        ys = np.array([r.final_y + r.pre_exit_y for r in recs])
        return EpisodeBatch(rest, cap_spec, row, np.array([r.stop_time for r in recs]),
                            xs, ys, np.array([r.max_perp_deviation for r in recs]))
    for s in rest:
        if isinstance(s, ExitRect) and not rect_contains(s.rect, start):
            raise ValueError("the start must lie inside every exit rectangle")
    kind, prm = walk.fast
    table = _encode(rest, transform == "y")
    pa = _perp_axis(rest, start, perp_axis)
    key, t0 = rng.stream_key(seed, traj0)
    out = _fast.run_episodes(kind, prm, int(start[0]), int(start[1]), table, int(cap),
                             key, t0, n_traj, pa)
    return EpisodeBatch(rest, cap_spec, *out)


def detect_left_exit(rect, episode):
    """Whether the exit segment of a rectangle run crosses the left face."""
    if episode.censored:
        raise ValueError("left exit is undefined for a censored run")
    reason = episode.stop_reason
    if not isinstance(reason, ExitRect) or reason.rect != rect:
        raise ValueError("the run was not stopped by leaving this rectangle")
    return exit_face(rect, episode.pre_exit_position, episode.final_position) is Face.LEFT


def new_site_times(trajectory):
    """Times at which the path enters a site it has not visited before."""
    seen = set()
    times = []
    for t, p in enumerate(trajectory):
        p = tuple(p)
        if p not in seen:
            seen.add(p)
            times.append(t)
    return times
