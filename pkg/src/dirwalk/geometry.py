"""Vectors, projections, the directed cone and rectangular exit domains.

Vectors are plain 1-d float arrays (anything ``np.asarray`` accepts is
fine as input).  The exit machinery is two-dimensional.
"""
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
import math

import numpy as np

UNIT_TOL = 1e-12
ZERO_TOL = 1e-12


def as_vector(x, dim=None):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError(f"expected a vector of dimension >= 2, got shape {v.shape}")
    if dim is not None and v.size != dim:
        raise ValueError(f"dimension mismatch: expected {dim}, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector components must be finite")
    return v


def as_unit(x):
    v = as_vector(x)
    if abs(math.sqrt(float(v @ v)) - 1.0) > UNIT_TOL:
        raise ValueError(f"not a unit vector: {v}")
    return v


def normalize(x):
    v = as_vector(x)
    n = math.sqrt(float(v @ v))
    if n == 0.0:
        raise ValueError("cannot normalize the zero vector")
    return v / n


class _ValueEq:
    """Equality and hashing on the numeric field values (arrays included)."""

    def _key(self):
        out = []
        for name in self.__dataclass_fields__:
            val = getattr(self, name)
            if isinstance(val, np.ndarray):
                val = tuple(val.tolist())
            elif isinstance(val, _ValueEq):
                val = val._key()
            out.append(val)
        return tuple(out)

    def __eq__(self, other):
        return type(self) is type(other) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


def basis(i, dim=2):
    e = np.zeros(dim)
    e[i] = 1.0
    return e


@dataclass(frozen=True, eq=False)
class Plane2(_ValueEq):
    """Two-dimensional subspace spanned by an orthonormal pair."""

    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        u1, u2 = as_unit(self.u1), as_unit(self.u2)
        if u1.size != u2.size:
            raise ValueError("basis vectors must have the same dimension")
        if abs(float(u1 @ u2)) > UNIT_TOL:
            raise ValueError("plane basis is not orthogonal")
        object.__setattr__(self, "u1", u1)
        object.__setattr__(self, "u2", u2)

    @property
    def dim(self):
        return self.u1.size

    @classmethod
    def coordinate(cls, dim=2, i=0, j=1):
        return cls(basis(i, dim), basis(j, dim))


def _dot(x, y):
    # Left-to-right summation, matching the compiled stop conditions.
    s = 0.0
    for a, b in zip(x, y):
        s += a * b
    return float(s)


def project(plane, x):
    """Orthogonal projection of ``x`` onto ``plane``."""
    x = as_vector(x, plane.dim)
    return _dot(x, plane.u1) * plane.u1 + _dot(x, plane.u2) * plane.u2


@dataclass(frozen=True, eq=False)
class Cone(_ValueEq):
    """The set of vectors whose in-plane part is zero or makes cosine at
    least ``u`` with ``ell``.

    ``u`` may be negative so that :meth:`complement` is expressible; the
    directed-submartingale condition itself uses ``u > 0``.
    """

    u: float
    ell: np.ndarray
    plane: Plane2 = None

    def __post_init__(self):
        ell = as_unit(self.ell)
        plane = self.plane if self.plane is not None else Plane2.coordinate(ell.size)
        if not -1.0 <= self.u <= 1.0 or self.u == 0.0:
            raise ValueError(f"cone parameter u must lie in [-1, 0) or (0, 1], got {self.u}")
        if ell.size != plane.dim:
            raise ValueError("cone direction and plane differ in dimension")
        if np.linalg.norm(project(plane, ell) - ell) > UNIT_TOL:
            raise ValueError("cone direction must lie in the plane")
        object.__setattr__(self, "ell", ell)
        object.__setattr__(self, "plane", plane)
        object.__setattr__(self, "u", float(self.u))

    def complement(self):
        """The cone with ``-u`` around ``-ell``; together they cover space."""
        return Cone(-self.u, -self.ell, self.plane)

    def reversed(self):
        """Same opening, opposite axis."""
        return Cone(self.u, -self.ell, self.plane)


def cone_contains(cone, x):
    px = project(cone.plane, x)
    norm = math.sqrt(_dot(px, px))
    if norm <= ZERO_TOL:
        return True
    return _dot(px, cone.ell) / norm >= cone.u


def angle_ccw(x, y):
    """Anticlockwise angle from ``x`` to ``y`` in [0, 2*pi); 0 if either is zero."""
    x, y = as_vector(x, 2), as_vector(y, 2)
    if not x.any() or not y.any():
        return 0.0
    theta = math.atan2(x[0] * y[1] - x[1] * y[0], x[0] * y[0] + x[1] * y[1])
    if theta < 0.0:
        theta += 2.0 * math.pi
        if theta >= 2.0 * math.pi:
            theta = 0.0
    return theta


def perp(v):
    """``v`` rotated by +pi/2."""
    v = as_vector(v, 2)
    return np.array([-v[1], v[0]])


@dataclass(frozen=True, eq=False)
class Rectangle(_ValueEq):
    """Open rectangle around ``anchor``: ``|(y-x).perp(v)| < a*lam`` and
    ``(y-x).v`` in ``(-b*lam, c*lam)``.  The face at ``-b*lam`` is "left"."""

    anchor: np.ndarray
    v: np.ndarray
    a: float
    b: float
    c: float
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "anchor", as_vector(self.anchor, 2))
        object.__setattr__(self, "v", as_unit(self.v))
        if self.v.size != 2:
            raise ValueError("rectangles are two-dimensional")
        for name in ("a", "b", "c", "lam"):
            val = getattr(self, name)
            if not (val > 0 and math.isfinite(val)):
                raise ValueError(f"rectangle parameter {name} must be positive, got {val}")
            object.__setattr__(self, name, float(val))

    def local(self, y):
        """(along v, along perp(v)) coordinates of ``y`` relative to the anchor."""
        d = as_vector(y, 2) - self.anchor
        w = perp(self.v)
        return d[0] * self.v[0] + d[1] * self.v[1], d[0] * w[0] + d[1] * w[1]


def rect_contains(rect, y):
    s, t = rect.local(y)
    return abs(t) < rect.a * rect.lam and -rect.b * rect.lam < s < rect.c * rect.lam


class Face(Enum):
    LEFT = "left"
    OTHER = "other"


def exit_face(rect, p_prev, p_next):
    """Which face the exit segment ``p_prev -> p_next`` crosses.

    The segment and the closed left face are intersected in exact rational
    arithmetic over the given float values; a segment through a corner of
    the left face counts as LEFT.
    """
    if not rect_contains(rect, p_prev):
        raise ValueError(f"exit segment must start inside the rectangle: {p_prev}")
    if rect_contains(rect, p_next):
        raise ValueError(f"exit segment must end outside the rectangle: {p_next}")
    q = [Fraction(float(z)) for z in as_vector(p_prev, 2)]
    p = [Fraction(float(z)) for z in as_vector(p_next, 2)]
    x = [Fraction(float(z)) for z in rect.anchor]
    v = [Fraction(float(z)) for z in rect.v]
    w = [-v[1], v[0]]
    lam = Fraction(rect.lam)
    left = -Fraction(rect.b) * lam
    half = Fraction(rect.a) * lam

    def coords(y):
        d = (y[0] - x[0], y[1] - x[1])
        return d[0] * v[0] + d[1] * v[1], d[0] * w[0] + d[1] * w[1]

    s0, t0 = coords(q)
    s1, t1 = coords(p)
    if s1 > left or s0 == s1:
        return Face.OTHER
    alpha = (left - s0) / (s1 - s0)
    t = t0 + alpha * (t1 - t0)
    return Face.LEFT if abs(t) <= half else Face.OTHER
