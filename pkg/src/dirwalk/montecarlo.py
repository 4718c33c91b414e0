"""Batch simulation, proportion/mean estimates and one-sided bound checks.

Monte Carlo can refute a one-sided bound or support it, never prove it, so
every comparison returns a three-way :class:`Verdict`.  Censored runs (step
cap reached) count as failures for events bounded below, so censoring can
only push an estimate towards a violation, never hide one.
"""
from dataclasses import dataclass, field
from enum import Enum
import math
from statistics import NormalDist

import numpy as np
from scipy import stats

from . import _fast, rng
from .constants import (THIN_RECT_PROBABILITY, exit_constants,
                        thin_rect_requirements, transformed_ellipticity)
from .geometry import Rectangle, as_unit
from .process import (HypothesisError, ProcessClass, kernel_ellipticity,
                      martingale_transform, replay, step, transformed_distribution)
from .stopping import (ConeHit, ExitRect, Level, ReturnTo, StepCap,
                       detect_left_exit, run_episodes)


class Verdict(Enum):
    CONSISTENT = "CONSISTENT"
    VIOLATED = "VIOLATED"
    INCONCLUSIVE = "INCONCLUSIVE"


class Direction(Enum):
    AT_LEAST = "AT_LEAST"
    AT_MOST = "AT_MOST"


def _z(level):
    return NormalDist().inv_cdf(0.5 + level / 2.0)


def wilson_interval(k, n, level=0.95):
    if n <= 0 or not 0 <= k <= n:
        raise ValueError(f"need 0 <= k <= n and n > 0, got k={k}, n={n}")
    z = _z(level)
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n))
    return max(0.0, min(p, center - half)), min(1.0, max(p, center + half))


@dataclass(frozen=True)
class Estimate:
    """Proportion ``k / n`` with a Wilson score interval."""

    k: int
    n: int
    p_hat: float
    ci_low: float
    ci_high: float
    level: float = 0.95
    censored_count: int = 0

    @classmethod
    def from_counts(cls, k, n, level=0.95, censored=0):
        lo, hi = wilson_interval(k, n, level)
        return cls(int(k), int(n), k / n, lo, hi, level, int(censored))

    @property
    def value(self):
        return self.p_hat


@dataclass(frozen=True)
class MeanEstimate:
    """Sample mean with a normal-approximation interval."""

    mean: float
    std_err: float
    ci_low: float
    ci_high: float
    n: int
    level: float = 0.95
    censored_count: int = 0
    kurtosis: float = 0.0

    @classmethod
    def from_samples(cls, x, level=0.95, censored=0):
        x = np.asarray(x, dtype=float)
        n = x.size
        if n < 2:
            raise ValueError("need at least two samples")
        mean = math.fsum(x) / n
        se = float(np.std(x, ddof=1)) / math.sqrt(n)
        half = _z(level) * se
        kurt = float(stats.kurtosis(x)) if se > 0 else 0.0
        return cls(mean, se, mean - half, mean + half, n, level, int(censored), kurt)

    @property
    def value(self):
        return self.mean

    @property
    def heavy_tail(self):
        return self.kurtosis > 20


def judge(ci_low, ci_high, bound, direction):
    if direction is Direction.AT_LEAST:
        if ci_high < bound:
            return Verdict.VIOLATED
        return Verdict.CONSISTENT if ci_low >= bound else Verdict.INCONCLUSIVE
    if ci_low > bound:
        return Verdict.VIOLATED
    return Verdict.CONSISTENT if ci_high <= bound else Verdict.INCONCLUSIVE


@dataclass(frozen=True)
class BoundCheck:
    estimate: object
    bound: float
    direction: Direction
    verdict: Verdict
    note: str = ""

    @classmethod
    def make(cls, estimate, bound, direction, note="", force_inconclusive=False):
        verdict = judge(estimate.ci_low, estimate.ci_high, bound, direction)
        if force_inconclusive and verdict is Verdict.CONSISTENT:
            verdict = Verdict.INCONCLUSIVE
        return cls(estimate, float(bound), direction, verdict, note)


# -- batches of free-running trajectories ---------------------------------

@dataclass(frozen=True)
class LocalTimeField:
    counts: dict
    horizon: int

    def __getitem__(self, site):
        return self.counts.get(tuple(site), 0)


def local_time_field(path):
    counts = {}
    for p in path:
        p = tuple(p)
        counts[p] = counts.get(p, 0) + 1
    return LocalTimeField(counts, len(path) - 1)


@dataclass(frozen=True)
class RangeCurve:
    checkpoints: tuple  # of (n, |R_n|)


def range_curve(path, checkpoints):
    seen = set()
    out, j = [], 0
    cps = sorted(checkpoints)
    for t, p in enumerate(path):
        seen.add(tuple(p))
        while j < len(cps) and cps[j] == t:
            out.append((t, len(seen)))
            j += 1
    return RangeCurve(tuple(out))


@dataclass
class Batch:
    """Per-trajectory summaries of ``n_traj`` runs of ``n_steps`` steps."""

    n_steps: int
    seed: int
    start: tuple
    checkpoints: np.ndarray
    range_at: np.ndarray
    local_time_start: np.ndarray
    max_local_time: np.ndarray
    max_norm: np.ndarray
    final: np.ndarray
    traj0: int = 0

    def __len__(self):
        return self.range_at.shape[0]

    @property
    def range(self):
        return self.range_at[:, -1]

    def range_curve(self, i):
        return RangeCurve(tuple((int(n), int(r)) for n, r in
                                zip(self.checkpoints, self.range_at[i])))

    def rows(self):
        for i in range(len(self)):
            yield {"traj_index": self.traj0 + i, "n": self.n_steps,
                   "range": int(self.range[i]),
                   "L_at_start": int(self.local_time_start[i]),
                   "max_norm": float(self.max_norm[i]), "seed": self.seed}


def _checkpoints(n_steps, checkpoints):
    cps = {int(n_steps)} if checkpoints is None else {int(c) for c in checkpoints} | {int(n_steps)}
    if min(cps) < 0 or max(cps) > n_steps:
        raise ValueError("checkpoints must lie in [0, n_steps]")
    return np.array(sorted(cps), dtype=np.int64)


def simulate_batch(walk, start=(0, 0), n_steps=1000, n_traj=100, seed=0,
                   checkpoints=None, traj0=0):
    if n_traj < 1:
        raise ValueError("n_traj must be positive")
    if n_steps < 0:
        raise ValueError("n_steps must be nonnegative")
    start = tuple(start)
    cps = _checkpoints(n_steps, checkpoints)
    if walk.fast is not None and all(float(z).is_integer() for z in start):
        kind, prm = walk.fast
        key, t0 = rng.stream_key(seed, traj0)
        ra, ls, mlt, mn2, fin = _fast.simulate_stats(
            kind, prm, int(start[0]), int(start[1]), int(n_steps), key, t0, n_traj, cps)
        return Batch(n_steps, seed, start, cps, ra, ls, mlt, np.sqrt(mn2.astype(float)),
                     fin, traj0)
    rows = []
    for i in range(n_traj):
        path = sample_path(walk, start, n_steps, seed, traj0 + i)
        field_ = local_time_field(path)
        curve = range_curve(path, cps)
        rows.append(([r for _, r in curve.checkpoints], field_[start],
                     max(field_.counts.values()),
                     max(math.sqrt(sum(float(z) ** 2 for z in p)) for p in path), path[-1]))
    ra, ls, mlt, mn, fin = (np.array(c) for c in zip(*rows))
    return Batch(n_steps, seed, start, cps, ra, ls, mlt, mn.astype(float), fin, traj0)


def sample_path(walk, start, n_steps, seed=0, traj=0):
    """One trajectory ``X_0, ..., X_n`` as a list of tuples."""
    state = walk.initial_state(start, seed, traj)
    path = [state.position]
    for _ in range(n_steps):
        state = step(walk, state)
        path.append(state.position)
    return path


def sample_paths(walk, start, n_steps, n_traj, seed=0, traj0=0):
    """Array ``(n_traj, n_steps + 1, dim)`` of trajectories."""
    start = tuple(start)
    if walk.fast is not None and all(float(z).is_integer() for z in start):
        kind, prm = walk.fast
        key, t0 = rng.stream_key(seed, traj0)
        pos, _ = _fast.simulate_paths(kind, prm, int(start[0]), int(start[1]),
                                      int(n_steps), key, t0, n_traj)
        return pos
    return np.array([sample_path(walk, start, n_steps, seed, traj0 + i)
                     for i in range(n_traj)])


# -- event estimates -------------------------------------------------------

def estimate_event(walk, specs, event, n_traj, seed, level=0.95, start=(0, 0),
                   transform="x", censored_as=False, traj0=0):
    """Proportion of runs for which ``event(record)`` holds.

    Censored runs are not passed to ``event``; they count as
    ``censored_as`` and are reported in ``censored_count``.
    """
    if n_traj < 30:
        raise ValueError("n_traj must be at least 30")
    batch = run_episodes(walk, start, specs, n_traj, seed, transform, traj0=traj0)
    censored = int(batch.censored.sum())
    if censored == n_traj:
        raise RuntimeError("every run hit the step cap; raise the cap")
    k = sum(bool(event(rec)) if not rec.censored else bool(censored_as) for rec in batch)
    return Estimate.from_counts(k, n_traj, level, censored)


def _require_martingale(walk, what):
    if walk.spec.klass is not ProcessClass.MARTINGALE:
        raise HypothesisError(
            f"{what} assumes a martingale; {walk.name} is declared {walk.spec.klass.value}")


@dataclass(frozen=True)
class ExitProbability:
    estimate: Estimate
    rho_check: BoundCheck = None
    thin_rect_check: BoundCheck = None
    log2_lambda0: float = None
    log_rho: float = None
    notes: tuple = ()


def exit_probability(walk, v, lam, a, b, c, start=(0, 0), n_traj=10_000, seed=0,
                     cap=1_000_000, level=0.95):
    """Probability of leaving ``R^{a,b,c}_{v,lam}(start)`` through its left face."""
    _require_martingale(walk, "the rectangle exit bound")
    if lam < 1:
        raise ValueError("lam must be at least 1")
    rect = Rectangle(start, as_unit(v), a, b, c, lam)
    spec = ExitRect(rect)
    est = estimate_event(walk, [spec, StepCap(cap)], lambda rec: detect_left_exit(rect, rec),
                         n_traj, seed, level, start)
    p = walk.spec.params
    ec = exit_constants(a, b, c, p)
    notes = []
    rho_check = None
    rho = math.exp(ec.log_rho) if math.isfinite(ec.log_rho) else 0.0
    if ec.log2_lambda0 < 1000 and lam >= ec.lambda0 and rho > 0.0:
        rho_check = BoundCheck.make(est, rho, Direction.AT_LEAST)
    else:
        notes.append(f"rho bound not attached: log2 lambda0 = {ec.log2_lambda0:.6g}, "
                     f"ln rho = {ec.log_rho:.6g}")
    thin = None
    a_min, lam_min = thin_rect_requirements(b, p)
    if b == c and a >= a_min and lam >= lam_min:
        thin = BoundCheck.make(est, THIN_RECT_PROBABILITY, Direction.AT_LEAST)
    else:
        notes.append(f"1/7 bound not attached: needs b == c, a >= {a_min:.6g}, "
                     f"lam >= {lam_min:.6g}")
    return ExitProbability(est, rho_check, thin, ec.log2_lambda0, ec.log_rho, tuple(notes))


def _strip_levels(start, b, lam):
    x0 = float(start[0])
    right = Level((1, 0), x0 + b * lam, ">")
    left = Level((1, 0), x0 - b * lam, "<")
    return left, right


def exit_time_bound(b, lam, p):
    return (b * lam + p.K) ** 2 / (p.r ** 2 * p.h)


def expected_exit_time(walk, b, lam, n_traj=10_000, seed=0, start=(0, 0), cap=None,
                       level=0.95):
    """Mean of the first time ``|X . e1 - x0| > b * lam``, checked against
    ``(b*lam + K)^2 / (r^2 h)``."""
    _require_martingale(walk, "the exit-time bound")
    if n_traj < 1000:
        raise ValueError("mean estimates need at least 1000 runs")
    p = walk.spec.params
    bound = exit_time_bound(b, lam, p)
    cap = int(cap or max(1000, math.ceil(50 * bound)))
    left, right = _strip_levels(start, b, lam)
    batch = run_episodes(walk, start, [left, right, StepCap(cap)], n_traj, seed)
    censored = int(batch.censored.sum())
    # Censored runs enter at the cap, an underestimate of their exit time.
    est = MeanEstimate.from_samples(batch.stop_time, level, censored)
    note = "heavy-tailed sample" if est.heavy_tail else ""
    check = BoundCheck.make(est, bound, Direction.AT_MOST, note,
                            force_inconclusive=censored > 0.01 * n_traj)
    return est, check


def gambler_bound(b, lam, K):
    return b * lam / (2 * b * lam + K)


def gambler_check(walk, b, lam, n_traj=10_000, seed=0, start=(0, 0), cap=None,
                  level=0.95):
    """``P[leave the strip on the left first] >= b*lam / (2*b*lam + K)``."""
    _require_martingale(walk, "the gambler's-ruin bound")
    p = walk.spec.params
    if not lam > 3 * p.K / b:
        raise ValueError(f"needs lam > 3K/b = {3 * p.K / b}")
    cap = int(cap or max(1000, math.ceil(50 * exit_time_bound(b, lam, p))))
    left, right = _strip_levels(start, b, lam)
    batch = run_episodes(walk, start, [left, right, StepCap(cap)], n_traj, seed)
    k = int(batch.fired(left).sum())
    est = Estimate.from_counts(k, n_traj, level, int(batch.censored.sum()))
    return BoundCheck.make(est, gambler_bound(b, lam, p.K), Direction.AT_LEAST)


def excursion_horizon(b, lam, p):
    return 7.0 * (b * lam + p.K) ** 2 / (p.r ** 2 * p.h)


def excursion_bound(a, b, p):
    return min(1.0, 7.0 * p.K ** 2 * (b + p.K) ** 2 / (p.r ** 2 * p.h * a ** 2))


def vertical_excursion(walk, a, b, lam, n_traj=1000, seed=0, start=(0, 0), level=0.95):
    """``P[max_{j <= s} |(X_j - x0) . e2| >= a*lam]`` over the horizon
    ``s = 7 (b*lam + K)^2 / (r^2 h)``.  The horizon is part of the event, so
    reaching it is an ordinary outcome here, not censoring."""
    _require_martingale(walk, "the vertical excursion bound")
    p = walk.spec.params
    horizon = int(math.floor(excursion_horizon(b, lam, p)))
    batch = run_episodes(walk, start, [StepCap(horizon)], n_traj, seed,
                         perp_axis=(start, (0.0, 1.0)))
    k = int((batch.max_perp_deviation >= a * lam).sum())
    est = Estimate.from_counts(k, n_traj, level)
    return BoundCheck.make(est, excursion_bound(a, b, p), Direction.AT_MOST,
                           note=f"horizon {horizon} steps")


# -- local time and range tails -------------------------------------------

def _gamma(gamma):
    if not 0 < gamma < 1:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")


def tail_counts(batch, gamma):
    """(#{L_n(start) > n^gamma}, #{|R_n| < n^(1-gamma)}) for a batch."""
    n = batch.n_steps
    return (int((batch.local_time_start > n ** gamma).sum()),
            int((batch.range < n ** (1.0 - gamma)).sum()))


def tail_local_time(walk, n, gamma=0.45, n_traj=10_000, seed=0, start=(0, 0), level=0.95):
    _gamma(gamma)
    batch = simulate_batch(walk, start, n, n_traj, seed)
    return Estimate.from_counts(tail_counts(batch, gamma)[0], n_traj, level)


def tail_range(walk, n, gamma=0.45, n_traj=10_000, seed=0, start=(0, 0), level=0.95):
    _gamma(gamma)
    batch = simulate_batch(walk, start, n, n_traj, seed)
    return Estimate.from_counts(tail_counts(batch, gamma)[1], n_traj, level)


@dataclass(frozen=True)
class RangeFit:
    slope: float
    std_err: float
    intercept: float
    n_list: tuple
    medians: tuple

    def within(self, lo, hi, k=2.0):
        """Whether ``slope +- k * std_err`` meets ``[lo, hi]``."""
        return self.slope + k * self.std_err >= lo and self.slope - k * self.std_err <= hi


def range_exponent(walk, n_list, n_traj=200, seed=0, start=(0, 0)):
    """Least-squares slope of log median range against log n."""
    n_list = sorted(int(n) for n in n_list)
    if len(n_list) < 3 or n_list[-1] < 10 * n_list[0]:
        raise ValueError("need at least three horizons spanning a decade")
    batch = simulate_batch(walk, start, n_list[-1], n_traj, seed, checkpoints=n_list)
    idx = [int(np.searchsorted(batch.checkpoints, n)) for n in n_list]
    med = [float(np.median(batch.range_at[:, i])) for i in idx]
    fit = stats.linregress(np.log(n_list), np.log(med))
    return RangeFit(float(fit.slope), float(fit.stderr), float(fit.intercept),
                    tuple(n_list), tuple(med))


# -- the compensated process ----------------------------------------------

def _require_directed(walk):
    if walk.spec.klass is not ProcessClass.STRONG_SUBMARTINGALE:
        raise HypothesisError(
            f"{walk.name} is not declared a strongly directed submartingale")


@dataclass(frozen=True)
class Avoidance:
    """Paired estimates on common trajectories: ``y_side`` is
    ``P[Y avoids the reversed cone through n]``, ``x_side`` is
    ``P[X avoids its start through n]``."""

    y_side: Estimate
    x_side: Estimate
    violations: int
    joint_se: float

    @property
    def dominated(self):
        return self.x_side.p_hat >= self.y_side.p_hat - 2.0 * self.joint_se


def avoidance_probability(walk, cone=None, n=1000, n_traj=10_000, seed=0, level=0.95):
    """``cone`` is the drift cone ``H^u_ell`` (default: the walk's own); the
    compensated process started at the origin must avoid ``H^u_{-ell}``.

    ``violations`` counts trajectories on which X returned to the origin
    strictly before Y entered the reversed cone.
    """
    _require_directed(walk)
    cone = walk.spec.directed if cone is None else cone
    avoid = cone.reversed()
    start = (0, 0)
    ya = run_episodes(walk, start, [ConeHit(avoid), StepCap(n)], n_traj, seed, "y")
    xa = run_episodes(walk, start, [ReturnTo(start), StepCap(n)], n_traj, seed, "x")
    y_ok = ya.censored
    x_ok = xa.censored
    violations = int((xa.stop_time < ya.stop_time).sum())
    d = x_ok.astype(float) - y_ok.astype(float)
    joint_se = float(np.std(d, ddof=1) / math.sqrt(n_traj)) if n_traj > 1 else 0.0
    return Avoidance(Estimate.from_counts(int(y_ok.sum()), n_traj, level),
                     Estimate.from_counts(int(x_ok.sum()), n_traj, level),
                     violations, joint_se)


@dataclass
class TransformCheck:
    n_steps: int
    max_jump: float
    jump_bound: float
    jump_bound_ok: bool
    mean_jump: tuple
    std_err: tuple
    mean_ok: bool
    r_prime: float
    h_prime: float
    ellipticity_ok: bool
    distinct_kernels: int
    failing: list = field(default_factory=list)


def transform_check(walk, n_traj=100, n_steps=1000, seed=0, n_dirs=360, z_max=4.0):
    """Properties of ``Y = X - sum(D)`` along sampled paths: the exact jump
    bound ``2K``, zero mean jump within ``z_max`` standard errors, and the
    transformed ellipticity constants at every visited state."""
    K = walk.spec.K
    tp = transformed_ellipticity(walk.spec.params)
    paths = sample_paths(walk, (0, 0), n_steps, n_traj, seed)
    bound2 = (2 * K) ** 2
    max2 = 0
    sums = np.zeros(2)
    sq = np.zeros(2)
    count = 0
    verdicts = {}
    failing = []
    for i, path in enumerate(paths):
        path = [tuple(p) for p in path.tolist()]
        states = replay(walk, path, seed, i)
        drifts = []
        for s in states[:-1]:
            dist = walk.kernel(s)
            drifts.append(dist.mean())
            if dist not in verdicts:
                verdicts[dist] = kernel_ellipticity(
                    transformed_distribution(walk, s), tp.r, tp.h, n_dirs)
                if not verdicts[dist]:
                    failing.append((s.position, s.fresh))
        ys = martingale_transform(path, drifts)
        for a, b in zip(ys, ys[1:]):
            dy = (b[0] - a[0], b[1] - a[1])
            n2 = dy[0] ** 2 + dy[1] ** 2
            if n2 > max2:
                max2 = n2
            f = np.array([float(dy[0]), float(dy[1])])
            sums += f
            sq += f * f
            count += 1
    mean = sums / count
    se = np.sqrt((sq / count - mean ** 2) / (count - 1))
    return TransformCheck(
        n_steps=count, max_jump=math.sqrt(float(max2)), jump_bound=2 * float(K),
        jump_bound_ok=max2 <= bound2, mean_jump=tuple(mean.tolist()),
        std_err=tuple(se.tolist()), mean_ok=bool(np.all(np.abs(mean) <= z_max * se)),
        r_prime=float(tp.r), h_prime=float(tp.h),
        ellipticity_ok=all(bool(v) for v in verdicts.values()),
        distinct_kernels=len(verdicts), failing=failing)
