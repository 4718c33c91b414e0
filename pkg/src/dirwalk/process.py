"""Processes given by a finite step distribution at every state.

A :class:`Walk` maps a :class:`ProcessState` to a :class:`StepDistribution`.
Built-in walks use exact rational probabilities wherever their parameters
allow it, so drifts and kernel sums are exact.  Each built-in also carries a
compiled twin (``fast``) used by the batch simulators; both sample with the
same rule, so a seeded trajectory is identical on either route.
"""
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
import math

import numpy as np

from . import rng
from .constants import EllipticityParams
from .geometry import Cone, as_vector, cone_contains


class HypothesisError(ValueError):
    """A process does not satisfy the assumptions an operation needs."""


class ProcessClass(Enum):
    MARTINGALE = "martingale"
    STRONG_SUBMARTINGALE = "strong-submartingale"
    GENERAL = "general"


@dataclass(frozen=True)
class ProcessSpec:
    params: EllipticityParams
    klass: ProcessClass = ProcessClass.GENERAL
    directed: Cone = None

    def __post_init__(self):
        if self.klass is ProcessClass.STRONG_SUBMARTINGALE:
            if self.directed is None or self.directed.u <= 0:
                raise ValueError("a strongly directed submartingale needs a cone with u > 0")

    @property
    def K(self):
        return self.params.K

    @property
    def r(self):
        return self.params.r

    @property
    def h(self):
        return self.params.h


def _exact(x):
    return x if isinstance(x, (int, Fraction)) else Fraction(float(x))


@dataclass(frozen=True)
class StepDistribution:
    """Jumps with their probabilities; order matters for sampling."""

    jumps: tuple
    probs: tuple

    def __post_init__(self):
        jumps = tuple(tuple(j) for j in self.jumps)
        probs = tuple(self.probs)
        if not jumps or len(jumps) != len(probs):
            raise ValueError("need one probability per jump")
        if len({len(j) for j in jumps}) != 1:
            raise ValueError("jumps must share a dimension")
        if any(not p > 0 for p in probs):
            raise ValueError("probabilities must be positive")
        total = sum(_exact(p) for p in probs)
        if abs(float(total - 1)) > 1e-12:
            raise ValueError(f"probabilities sum to {float(total)!r}, not 1")
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "probs", probs)

    def __iter__(self):
        return iter(zip(self.jumps, self.probs))

    def __len__(self):
        return len(self.jumps)

    @property
    def dim(self):
        return len(self.jumps[0])

    def mean(self):
        return tuple(sum(p * j[i] for j, p in self) for i in range(self.dim))

    def shifted(self, d):
        return StepDistribution(
            tuple(tuple(ji - di for ji, di in zip(j, d)) for j in self.jumps), self.probs)

    def sample_index(self, u):
        c = 0.0
        for i, p in enumerate(self.probs):
            c += float(p)
            if u < c:
                return i
        return len(self.probs) - 1


@dataclass
class ProcessState:
    """Position and history of one trajectory.

    ``visited`` is tracked only for self-interacting walks; ``fresh`` says
    whether the current position is being visited for the first time.
    ``seed`` and ``traj`` name the random stream; the draw for the move
    out of this state is the one indexed by ``time``.  :func:`step` hands
    the visited set over to the new state, so treat the old state as spent.
    """

    position: tuple
    time: int = 0
    visited: set = None
    fresh: bool = True
    seed: int = 0
    traj: int = 0


class Walk:
    """A process defined by ``kernel(state) -> StepDistribution``."""

    name = "custom"
    self_interacting = False
    fast = None

    def __init__(self, spec, kernel=None, name=None, self_interacting=None):
        self.spec = spec
        if kernel is not None:
            self._kernel = kernel
        if name is not None:
            self.name = name
        if self_interacting is not None:
            self.self_interacting = self_interacting

    def kernel(self, state):
        return self._kernel(state)

    @property
    def params(self):
        return {}

    def initial_state(self, start=(0, 0), seed=0, traj=0):
        start = tuple(start)
        visited = {start} if self.self_interacting else None
        return ProcessState(start, 0, visited, True, rng.check_seed(seed), int(traj))

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({args})"


_SRW_JUMPS = ((1, 0), (-1, 0), (0, 1), (0, -1))
_QUARTER = Fraction(1, 4)

FAST_SRW, FAST_AXIS_TRAP, FAST_EXCITED, FAST_RADIAL = 0, 1, 2, 3


class SimpleRandomWalk(Walk):
    name = "srw2d"
    fast = (FAST_SRW, np.zeros(3))

    def __init__(self):
        super().__init__(ProcessSpec(EllipticityParams(1, 0.5, 0.25), ProcessClass.MARTINGALE))
        self._dist = StepDistribution(_SRW_JUMPS, (_QUARTER,) * 4)

    def kernel(self, state):
        return self._dist


class AxisTrapWalk(Walk):
    """Nearest-neighbour walk pulled back to the horizontal axis.

    On the axis all four neighbours are equally likely.  Off the axis the
    horizontal moves have probability 1/4 each, ``|y|`` grows with
    probability 1/6 and shrinks with probability 1/3.
    """

    name = "axis-trap"
    fast = (FAST_AXIS_TRAP, np.zeros(3))

    def __init__(self):
        super().__init__(ProcessSpec(EllipticityParams(1, 0.5, Fraction(1, 6)),
                                     ProcessClass.GENERAL))
        self._axis = StepDistribution(_SRW_JUMPS, (_QUARTER,) * 4)
        probs = (_QUARTER, _QUARTER, Fraction(1, 6), Fraction(1, 3))
        self._up = StepDistribution(((1, 0), (-1, 0), (0, 1), (0, -1)), probs)
        self._down = StepDistribution(((1, 0), (-1, 0), (0, -1), (0, 1)), probs)

    def kernel(self, state):
        y = state.position[1]
        if y == 0:
            return self._axis
        return self._up if y > 0 else self._down


_AXES = {(1, 0), (-1, 0), (0, 1), (0, -1)}


class ExcitedWalk(Walk):
    """Cookie walk: drift ``beta * ell`` on first visits, simple random
    walk on revisits."""

    name = "excited"
    self_interacting = True

    def __init__(self, beta=0.3, ell=(1, 0), u=1.0):
        given = tuple(float(z) for z in ell)
        ell = tuple(int(z) for z in given)
        if ell not in _AXES or ell != given:
            raise ValueError(f"ell must be a coordinate direction, got {given}")
        if not 0 < beta < 0.5:
            raise ValueError(f"beta must lie in (0, 1/2), got {beta}")
        self.beta = beta
        self.ell = ell
        b = _exact(beta)
        params = EllipticityParams(1, 0.5, _QUARTER - b / 2)
        cone = Cone(u, ell)
        super().__init__(ProcessSpec(params, ProcessClass.STRONG_SUBMARTINGALE, cone))
        lx, ly = ell
        jumps = ((lx, ly), (-lx, -ly), (-ly, lx), (ly, -lx))
        self._fresh = StepDistribution(jumps, (_QUARTER + b / 2, _QUARTER - b / 2,
                                               _QUARTER, _QUARTER))
        self._stale = StepDistribution(_SRW_JUMPS, (_QUARTER,) * 4)
        self.fast = (FAST_EXCITED, np.array([float(beta), float(lx), float(ly)]))

    @property
    def params(self):
        return {"beta": self.beta, "ell": self.ell, "u": self.spec.directed.u}

    def kernel(self, state):
        return self._fresh if state.fresh else self._stale


def round_half_away(z):
    return math.copysign(math.floor(abs(z) + 0.5), z)


def radial_jumps(x, y, rho_r):
    """Long radial jump and unit transversal jump at a nonzero site."""
    norm = math.sqrt(x * x + y * y)
    wx, wy = x / norm, y / norm
    jx, jy = int(round_half_away(rho_r * wx)), int(round_half_away(rho_r * wy))
    tx, ty = int(round_half_away(-wy)), int(round_half_away(wx))
    # Rounding cannot produce zero for rho_r >= 2 and a unit transversal;
    # kept as a guard for direct callers.
    if jx == 0 and jy == 0:
        jx, jy = (int(math.copysign(1, wx)), 0) if abs(wx) >= abs(wy) else (0, int(math.copysign(1, wy)))
    if tx == 0 and ty == 0:
        tx, ty = (int(math.copysign(1, -wy)), 0) if abs(wy) >= abs(wx) else (0, int(math.copysign(1, wx)))
    return (jx, jy), (tx, ty)


class RadialSectorWalk(Walk):
    """Zero-drift walk preferring radial moves.

    Away from the origin it jumps by ``+-J`` (the lattice rounding of
    ``rho_r`` times the outward unit vector) with probability ``p`` each
    and by ``+-T`` (the rounded unit transversal) with ``1/2 - p`` each.
    """

    name = "radial-sector"

    def __init__(self, rho_r=3, p=0.4):
        if int(rho_r) != rho_r or rho_r < 2:
            raise ValueError(f"rho_r must be an integer >= 2, got {rho_r}")
        if not 0.25 < p < 0.5:
            raise ValueError(f"p must lie in (1/4, 1/2), got {p}")
        self.rho_r = int(rho_r)
        self.p = p
        # Directions nearly orthogonal to the radial jump only see the
        # transversal pair, hence h = 1/2 - p.
        params = EllipticityParams(self.rho_r + 1, 0.5, 0.5 - p)
        super().__init__(ProcessSpec(params, ProcessClass.MARTINGALE))
        self._origin = StepDistribution(_SRW_JUMPS, (_QUARTER,) * 4)
        self.fast = (FAST_RADIAL, np.array([float(self.rho_r), float(p), 0.0]))

    @property
    def params(self):
        return {"rho_r": self.rho_r, "p": self.p}

    def kernel(self, state):
        x, y = state.position
        if x == 0 and y == 0:
            return self._origin
        (jx, jy), (tx, ty) = radial_jumps(x, y, self.rho_r)
        q = 0.5 - self.p
        return StepDistribution(((jx, jy), (-jx, -jy), (tx, ty), (-tx, -ty)),
                                (self.p, self.p, q, q))


def srw2d():
    return SimpleRandomWalk()


def axis_trap_walk():
    return AxisTrapWalk()


def excited_walk(beta=0.3, ell=(1, 0), u=1.0):
    return ExcitedWalk(beta, ell, u)


def radial_sector_walk(rho_r=3, p=0.4):
    return RadialSectorWalk(rho_r, p)


WALKS = {
    "srw2d": srw2d,
    "axis-trap": axis_trap_walk,
    "excited": excited_walk,
    "radial-sector": radial_sector_walk,
}


def make_walk(name, **params):
    try:
        factory = WALKS[name]
    except KeyError:
        raise ValueError(f"unknown walk {name!r}; choose from {sorted(WALKS)}") from None
    return factory(**params)


def drift(walk, state):
    """Exact conditional mean jump at ``state``."""
    return walk.kernel(state).mean()


def step(walk, state):
    dist = walk.kernel(state)
    u = rng.uniform(*rng.stream_key(state.seed, state.traj), state.time)
    jump = dist.jumps[dist.sample_index(u)]
    pos = tuple(a + b for a, b in zip(state.position, jump))
    visited, fresh = state.visited, True
    if visited is not None:
        fresh = pos not in visited
        visited.add(pos)
    return ProcessState(pos, state.time + 1, visited, fresh, state.seed, state.traj)


def replay(walk, path, seed=0, traj=0):
    """States along a given path (as the kernel would see them)."""
    states = [ProcessState(tuple(path[0]), 0, None, True, seed, traj)]
    seen = {tuple(path[0])}
    for t, pos in enumerate(path[1:], start=1):
        pos = tuple(pos)
        fresh = pos not in seen
        seen.add(pos)
        states.append(ProcessState(pos, t, None, fresh, seed, traj))
    return states


def check_bounded_jumps(walk, states):
    K2 = _exact(walk.spec.K) ** 2
    for state in states:
        for jump, _ in walk.kernel(state):
            if sum(_exact(z) ** 2 for z in jump) > K2:
                return False
    return True


@dataclass
class EllipticityVerdict:
    passed: bool
    r: float
    h: float
    n_dirs: int
    failing: list = field(default_factory=list)
    # A direction grid can refute ellipticity but never certify it for all
    # directions.
    certified: bool = False

    def __bool__(self):
        return self.passed


def kernel_ellipticity(dist, r, h, n_dirs=360):
    """Per-direction mass ``P[jump . ell > r]`` against ``h`` on an
    ``n_dirs`` grid of planar unit directions."""
    if n_dirs < 8:
        raise ValueError("n_dirs must be at least 8")
    if dist.dim != 2:
        raise ValueError("the direction grid is planar")
    h_exact = _exact(h)
    jumps = [(float(j[0]), float(j[1])) for j in dist.jumps]
    failing = []
    for k in range(n_dirs):
        theta = 2.0 * math.pi * k / n_dirs
        lx, ly = math.cos(theta), math.sin(theta)
        mass = sum((_exact(p) for (jx, jy), p in zip(jumps, dist.probs)
                    if jx * lx + jy * ly > r), Fraction(0))
        if mass < h_exact:
            failing.append((theta, float(mass)))
    return EllipticityVerdict(not failing, float(r), float(h), n_dirs, failing)


def check_ellipticity(walk, state, n_dirs=360, r=None, h=None):
    r = walk.spec.r if r is None else r
    h = walk.spec.h if h is None else h
    return kernel_ellipticity(walk.kernel(state), r, h, n_dirs)


def transformed_distribution(walk, state):
    """Law of the drift-compensated jump ``X_{n+1} - X_n - D_n``."""
    dist = walk.kernel(state)
    return dist.shifted(dist.mean())


def check_strong_direction(walk, state, cone):
    return cone_contains(cone, [float(z) for z in drift(walk, state)])


def martingale_transform(positions, drifts):
    """``Y_0 = X_0`` and ``Y_n = X_n - sum_{k<n} D_k``.

    Arithmetic follows the inputs, so integer positions with rational
    drifts give exact results.  ``drifts`` may hold one entry per position
    or one fewer (the last drift is never used).
    """
    positions = [tuple(p) for p in positions]
    drifts = [tuple(d) for d in drifts]
    if len(drifts) not in (len(positions), len(positions) - 1):
        raise ValueError(f"{len(positions)} positions need {len(positions) - 1} drifts, "
                         f"got {len(drifts)}")
    if not positions:
        return []
    dim = len(positions[0])
    if any(len(p) != dim for p in positions) or any(len(d) != dim for d in drifts):
        raise ValueError("positions and drifts must share a dimension")
    acc = [0] * dim
    out = [positions[0]]
    for pos, d in zip(positions[1:], drifts):
        acc = [a + z for a, z in zip(acc, d)]
        out.append(tuple(x - a for x, a in zip(pos, acc)))
    return out


def lyapunov_margin(walk, state, b):
    """``E ||X_{n+1}||^b - ||x||^b`` summed exactly over the kernel."""
    if not 0 < b < 1:
        raise ValueError(f"b must lie in (0, 1), got {b}")
    x = as_vector([float(z) for z in state.position])
    r2 = float(x @ x)
    if r2 == 0.0:
        raise ValueError("the margin is undefined at the origin")
    base = r2 ** (b / 2)
    terms = []
    for jump, p in walk.kernel(state):
        j = np.array([float(z) for z in jump])
        rel = (2.0 * float(x @ j) + float(j @ j)) / r2
        # ||x+j||^b - ||x||^b without cancellation.
        terms.append(float(p) * base * math.expm1(0.5 * b * math.log1p(rel)))
    return math.fsum(terms)
