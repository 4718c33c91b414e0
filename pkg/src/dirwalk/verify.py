"""Verification suites: hypothesis gates followed by bound checks.

Each suite first probes the walk with the exact kernel checkers (bounded
jumps, ellipticity, martingale or directed drift).  A walk that fails a
gate yields a REFUSED entry naming the failing state instead of a
misleading VIOLATED verdict.
"""
from dataclasses import dataclass, field, asdict
import json
import math
import time

from . import montecarlo as mc
from .constants import exit_constants, thin_rect_requirements
from .geometry import Cone
from .montecarlo import Direction
from .process import (HypothesisError, ProcessClass, ProcessState, check_bounded_jumps,
                      check_ellipticity, check_strong_direction, drift, make_walk,
                      replay)

SUITES = ("exit", "thin-rect", "tails", "transform", "lyapunov")

CONSISTENT, VIOLATED, INCONCLUSIVE = "CONSISTENT", "VIOLATED", "INCONCLUSIVE"
REFUSED, SKIPPED = "REFUSED", "SKIPPED"


@dataclass
class VerifyConfig:
    seed: int
    walk: str = None
    walk_params: dict = field(default_factory=dict)
    n: int = 10_000
    traj: int = None
    gamma: float = 0.45
    lam: float = 10.0
    a: float = 56.0
    b: float = 1.0
    c: float = 1.0
    v_angle: float = 0.0
    lyapunov_b: float = 0.9
    lyapunov_x: tuple = (50, 0)
    avoid_n: int = 1000
    probe_steps: int = 2000

    def traj_or(self, default):
        return default if self.traj is None else self.traj


@dataclass
class Entry:
    name: str
    claim: str
    status: str
    walk: str = ""
    estimate: dict = None
    bound: float = None
    direction: str = None
    details: dict = field(default_factory=dict)
    note: str = ""
    runtime: float = None


def _finite(x):
    """JSON-safe float: non-finite values become strings."""
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    return _finite(obj)


@dataclass
class VerificationReport:
    suite: str
    seed: int
    config: dict
    entries: list

    @property
    def overall(self):
        statuses = {e.status for e in self.entries}
        for s in (VIOLATED, REFUSED, INCONCLUSIVE):
            if s in statuses:
                return s
        return CONSISTENT

    @property
    def exit_code(self):
        overall = self.overall
        if overall == VIOLATED:
            return 2
        return 3 if overall == REFUSED else 0

    def to_dict(self, timing=False):
        entries = []
        for e in self.entries:
            d = asdict(e)
            if not timing:
                d.pop("runtime")
            entries.append(d)
        return _clean({"suite": self.suite, "seed": self.seed, "config": self.config,
                       "entries": entries, "overall": self.overall})

    def to_json(self, timing=False):
        return json.dumps(self.to_dict(timing), indent=2, allow_nan=False) + "\n"

    def table(self):
        rows = [("check", "walk", "status", "estimate", "bound")]
        for e in self.entries:
            est = ""
            if e.estimate:
                v = e.estimate.get("p_hat", e.estimate.get("mean", e.estimate.get("value")))
                lo, hi = e.estimate.get("ci_low"), e.estimate.get("ci_high")
                est = f"{v:.6g}" if lo is None else f"{v:.6g} [{lo:.6g}, {hi:.6g}]"
            bound = "" if e.bound is None else f"{'>=' if e.direction == 'AT_LEAST' else '<='} {e.bound:.6g}"
            rows.append((e.name, e.walk, e.status, est, bound))
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
        for e in self.entries:
            if e.note:
                lines.append(f"note [{e.name}]: {e.note}")
        lines.append(f"overall: {self.overall}")
        return "\n".join(lines) + "\n"


def _from_check(name, claim, walk, check, details=None):
    est = check.estimate
    return Entry(name, claim, check.verdict.value, walk.name, _clean(asdict(est)),
                 check.bound, check.direction.value, details or {}, check.note)


def _property(name, claim, walk, ok, details, note=""):
    return Entry(name, claim, CONSISTENT if ok else VIOLATED, walk.name,
                 details=_clean(details), note=note)


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        entries = fn(*args, **kwargs)
        dt = time.perf_counter() - t0
        for e in entries:
            e.runtime = dt / len(entries)
        return entries
    return wrapper


# -- hypothesis gates ------------------------------------------------------

def probe_states(walk, cfg):
    """States along one seeded path, with their first-visit flags."""
    path = [tuple(p) for p in mc.sample_paths(walk, (0, 0), cfg.probe_steps, 1,
                                              cfg.seed, traj0=2**32)[0].tolist()]
    return replay(walk, path)


def gate(walk, cfg, need):
    """Raise :class:`HypothesisError` unless ``walk`` fits ``need``, one of
    "martingale" or "directed" (martingale or strongly directed)."""
    states = probe_states(walk, cfg)
    if not check_bounded_jumps(walk, states):
        raise HypothesisError(f"{walk.name}: a jump exceeds the declared bound K")
    seen = {}
    for s in states:
        dist = walk.kernel(s)
        if dist not in seen:
            seen[dist] = s
            if not check_ellipticity(walk, s):
                raise HypothesisError(
                    f"{walk.name}: not uniformly elliptic with the declared (r, h) "
                    f"at {s.position}")
    klass = walk.spec.klass
    if need == "martingale" or klass is ProcessClass.MARTINGALE:
        for s in seen.values():
            d = drift(walk, s)
            if any(z != 0 for z in d):
                raise HypothesisError(
                    f"{walk.name}: drift {tuple(float(z) for z in d)} at {s.position} "
                    "is nonzero, so the walk is not a martingale")
        return
    cone = walk.spec.directed or Cone(1e-9, (1, 0))
    for s in seen.values():
        if not check_strong_direction(walk, s, cone):
            d = tuple(float(z) for z in drift(walk, s))
            raise HypothesisError(
                f"{walk.name}: drift {d} at {s.position} leaves the cone with axis "
                f"{tuple(float(z) for z in cone.ell)} and cosine {cone.u:g}, so the walk is neither a "
                "martingale nor a strongly directed submartingale")
    if klass is ProcessClass.GENERAL:
        raise HypothesisError(f"{walk.name} is declared neither a martingale nor "
                              "strongly directed")


def _refused(name, walk, err):
    return [Entry(name, "hypothesis gate", REFUSED, walk.name, note=str(err))]


# -- suites ----------------------------------------------------------------

def _sub(seed, k):
    """Seed for the ``k``-th check of a suite."""
    return (seed + k) % 2**64


def _walk(cfg, default, **params):
    if cfg.walk is None:
        return make_walk(default, **params)
    return make_walk(cfg.walk, **cfg.walk_params)


def _direction(cfg):
    return (math.cos(cfg.v_angle), math.sin(cfg.v_angle))


@_timed
def suite_exit(cfg):
    walk = _walk(cfg, "srw2d")
    try:
        gate(walk, cfg, "martingale")
    except HypothesisError as err:
        return _refused("exit", walk, err)
    res = mc.exit_probability(walk, _direction(cfg), cfg.lam, cfg.a, cfg.b, cfg.c,
                              n_traj=cfg.traj_or(10_000), seed=cfg.seed)
    ec = exit_constants(cfg.a, cfg.b, cfg.c, walk.spec.params)
    details = {"log2_lambda0": ec.log2_lambda0, "log_rho": ec.log_rho,
               "log_neg_log_rho": ec.log_neg_log_rho}
    claim = "rectangle exit through the left face: P[G] >= rho once lam >= lambda0"
    if res.rho_check is not None:
        return [_from_check("exit-rho", claim, walk, res.rho_check, details)]
    return [Entry("exit-rho", claim, SKIPPED, walk.name, _clean(asdict(res.estimate)),
                  details=_clean(details), note="; ".join(res.notes))]


@_timed
def suite_thin_rect(cfg):
    walk = _walk(cfg, "srw2d")
    try:
        gate(walk, cfg, "martingale")
    except HypothesisError as err:
        return _refused("thin-rect", walk, err)
    p = walk.spec.params
    out = []
    res = mc.exit_probability(walk, _direction(cfg), cfg.lam, cfg.a, cfg.b, cfg.c,
                              n_traj=cfg.traj_or(10_000), seed=cfg.seed)
    claim = "thin rectangle exit through the left face: P[G] >= 1/7"
    if res.thin_rect_check is not None:
        out.append(_from_check("thin-rect", claim, walk, res.thin_rect_check))
    else:
        a_min, lam_min = thin_rect_requirements(cfg.b, p)
        out.append(Entry("thin-rect", claim, SKIPPED, walk.name,
                         _clean(asdict(res.estimate)),
                         details={"a_min": a_min, "lambda_min": lam_min},
                         note="; ".join(res.notes)))
    _, check = mc.expected_exit_time(walk, cfg.b, cfg.lam, n_traj=cfg.traj_or(10_000),
                                     seed=_sub(cfg.seed, 1))
    out.append(_from_check("exit-time", "strip exit time: E tau <= (b lam + K)^2 / (r^2 h)",
                           walk, check))
    if cfg.lam > 3 * p.K / cfg.b:
        check = mc.gambler_check(walk, cfg.b, cfg.lam, n_traj=cfg.traj_or(10_000),
                                 seed=_sub(cfg.seed, 2))
        out.append(_from_check("gambler", "left side of the strip first: "
                               "P >= b lam / (2 b lam + K)", walk, check))
    else:
        out.append(Entry("gambler", "left side of the strip first", SKIPPED, walk.name,
                         note=f"needs lam > 3K/b = {3 * p.K / cfg.b:g}"))
    check = mc.vertical_excursion(walk, cfg.a, cfg.b, cfg.lam,
                                  n_traj=cfg.traj_or(1000), seed=_sub(cfg.seed, 3))
    out.append(_from_check("excursion", "transversal excursion before the horizon: "
                           "P <= 7 K^2 (b + K)^2 / (r^2 h a^2)", walk, check))
    return out


@_timed
def suite_tails(cfg):
    walks = ([make_walk("srw2d"), make_walk("excited", beta=0.3)] if cfg.walk is None
             else [make_walk(cfg.walk, **cfg.walk_params)])
    out = []
    for k, walk in enumerate(walks):
        try:
            gate(walk, cfg, "directed")
        except HypothesisError as err:
            out += _refused("tails", walk, err)
            continue
        n_traj = cfg.traj_or(10_000)
        batch = mc.simulate_batch(walk, (0, 0), cfg.n, n_traj, _sub(cfg.seed, 10 * k))
        lt, rg = mc.tail_counts(batch, cfg.gamma)
        details = {"n": cfg.n, "gamma": cfg.gamma}
        for name, kk, claim in (
                ("tail-local-time", lt, "P[L_n(start) > n^gamma] is small (< 0.01)"),
                ("tail-range", rg, "P[|R_n| < n^(1 - gamma)] is small (< 0.01)")):
            check = mc.BoundCheck.make(mc.Estimate.from_counts(kk, n_traj), 0.01,
                                       Direction.AT_MOST)
            out.append(_from_check(name, claim, walk, check, dict(details)))
    return out


@_timed
def suite_transform(cfg):
    walk = _walk(cfg, "excited", beta=0.3)
    try:
        gate(walk, cfg, "directed")
        if walk.spec.klass is not ProcessClass.STRONG_SUBMARTINGALE:
            raise HypothesisError(f"{walk.name} is not declared strongly directed")
    except HypothesisError as err:
        return _refused("transform", walk, err)
    n_traj = 100 if cfg.traj is None else max(1, cfg.traj // 100)
    tc = mc.transform_check(walk, n_traj=n_traj, n_steps=1000, seed=cfg.seed)
    out = [
        _property("transform-jump", "compensated jumps are bounded by 2K", walk,
                  tc.jump_bound_ok, {"max_jump": tc.max_jump, "bound": tc.jump_bound,
                                     "steps": tc.n_steps}),
        _property("transform-mean", "compensated jumps have mean zero (4 s.e.)", walk,
                  tc.mean_ok, {"mean": tc.mean_jump, "std_err": tc.std_err}),
        _property("transform-ellipticity",
                  "compensated kernel is elliptic with (r h / (2 sqrt 2), r h / (4K))",
                  walk, tc.ellipticity_ok,
                  {"r": tc.r_prime, "h": tc.h_prime, "kernels": tc.distinct_kernels,
                   "failing": [list(map(float, s)) + [f] for s, f in tc.failing]}),
    ]
    av = mc.avoidance_probability(walk, n=cfg.avoid_n, n_traj=cfg.traj_or(10_000),
                                  seed=_sub(cfg.seed, 1))
    out.append(_property(
        "domination", "Y avoids the reversed cone through k implies X avoids its start",
        walk, av.violations == 0 and av.dominated,
        {"violations": av.violations, "y_side": asdict(av.y_side),
         "x_side": asdict(av.x_side), "joint_se": av.joint_se, "n": cfg.avoid_n}))
    return out


@_timed
def suite_lyapunov(cfg):
    from .process import lyapunov_margin

    x = tuple(cfg.lyapunov_x)
    cases = [(make_walk("srw2d"), 1), (make_walk("radial-sector", rho_r=3, p=0.49), -1)]
    if cfg.walk is not None:
        cases = [(make_walk(cfg.walk, **cfg.walk_params), 0)]
    out = []
    for walk, sign in cases:
        m = lyapunov_margin(walk, ProcessState(x), cfg.lyapunov_b)
        details = {"margin": m, "b": cfg.lyapunov_b, "x": list(x)}
        if sign == 0:
            out.append(Entry("lyapunov", "Lyapunov margin E|X'|^b - |x|^b", INCONCLUSIVE,
                             walk.name, details=_clean(details),
                             note="no expected sign for this walk"))
            continue
        want = "> 0" if sign > 0 else "< 0"
        out.append(_property("lyapunov", f"Lyapunov margin E|X'|^b - |x|^b {want}",
                             walk, m * sign > 0, details))
    return out


_RUNNERS = {"exit": suite_exit, "thin-rect": suite_thin_rect, "tails": suite_tails,
            "transform": suite_transform, "lyapunov": suite_lyapunov}


def run_suite(name, cfg):
    if name == "all":
        names = SUITES
    elif name in _RUNNERS:
        names = (name,)
    else:
        raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    entries = []
    for n in names:
        entries += _RUNNERS[n](cfg)
    config = asdict(cfg)
    config["lyapunov_x"] = list(cfg.lyapunov_x)
    return VerificationReport(name, cfg.seed, _clean(config), entries)
