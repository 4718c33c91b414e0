"""Explicit constants of the rectangle-exit estimates.

The exit-probability constant involves ``2**m0`` with ``m0`` in the hundreds
for any realistic process, so scale-like quantities are kept as logarithms:
``log2_s0``, ``log2_lambda0`` in base 2 and ``log_rho`` in base e.
"""
from dataclasses import dataclass
from fractions import Fraction
import math

# Probability lower bound for leaving a thin rectangle through a long side.
THIN_RECT_PROBABILITY = 1.0 / 7.0
# Lower bound on the one-dimensional gambler's-ruin probability once
# lam > 3K/b.
GAMBLER_LOWER = 3.0 / 7.0


@dataclass(frozen=True)
class EllipticityParams:
    """Jump bound ``K``, ellipticity advance ``r`` and probability ``h``."""

    K: float
    r: float
    h: float

    def __post_init__(self):
        for name in ("K", "r", "h"):
            val = getattr(self, name)
            if isinstance(val, bool) or not isinstance(val, (int, float, Fraction)):
                raise TypeError(f"{name} must be a real number")
            if not math.isfinite(val):
                raise ValueError(f"{name} must be finite")
        if self.K < 1:
            raise ValueError(f"jump bound K must be >= 1, got {self.K}")
        if not 0 < self.r <= 1:
            raise ValueError(f"ellipticity advance r must lie in (0, 1], got {self.r}")
        if not 0 < self.h <= 1:
            raise ValueError(f"ellipticity probability h must lie in (0, 1], got {self.h}")


@dataclass(frozen=True)
class BaseConstants:
    a0: float
    alpha0: float
    m0: int
    log2_s0: float


@dataclass(frozen=True)
class ExitConstants:
    """``lambda0 = 2**log2_lambda0`` and ``rho = exp(log_rho)``.

    ``ceil_count`` is the exact integer ``ceil(2**m0 * b / min(a, c))``.
    ``log_neg_log_rho`` is ``ln(-log_rho)`` and is always finite; when
    ``-log_rho`` itself exceeds the double range ``log_rho`` is ``-inf`` and
    ``approx`` is set.
    """

    log2_lambda0: float
    log_rho: float
    log_neg_log_rho: float
    ceil_count: int
    approx: bool = False

    @property
    def lambda0(self):
        return 2.0 ** self.log2_lambda0 if self.log2_lambda0 < 1024 else math.inf

    @property
    def rho(self):
        return math.exp(self.log_rho)


def _ceil_ratio(num, den):
    """ceil(num / den) for positive numbers that may be huge."""
    return math.ceil(Fraction(num) / Fraction(den))


def base_constants(p):
    a0 = 7.0 * p.K * (1.0 + p.K) / (p.r * math.sqrt(p.h))
    alpha0 = math.atan(1.0 / (3.0 * a0))
    ratio = math.pi / alpha0
    m0 = math.ceil(ratio)
    if abs(ratio - round(ratio)) < 1e-9 * ratio:
        # Too close to an integer for double precision to settle the ceiling.
        import mpmath

        with mpmath.workdps(50):
            a0_hp = 7 * mpmath.mpf(p.K) * (1 + mpmath.mpf(p.K)) / (
                mpmath.mpf(p.r) * mpmath.sqrt(mpmath.mpf(p.h)))
            m0 = int(mpmath.ceil(mpmath.pi / mpmath.atan(1 / (3 * a0_hp))))
    log2_s0 = m0 + math.log2(6.0 * p.K * a0)
    return BaseConstants(a0=a0, alpha0=alpha0, m0=m0, log2_s0=log2_s0)


def exit_constants(a, b, c, p):
    if not (a > 0 and b > 0 and c > 0):
        raise ValueError("rectangle parameters a, b, c must be positive")
    base = base_constants(p)
    side = min(a, c)
    log2_lambda0 = base.log2_s0 - math.log2(side)
    count = _ceil_ratio(Fraction(2) ** base.m0 * Fraction(b), side)
    # ln(-log rho) = ln m0 + ln count + ln ln 7, with ln count taken from
    # the big integer directly.
    log_count = math.log(count)
    log_neg = math.log(base.m0) + log_count + math.log(math.log(7.0))
    approx = False
    try:
        log_rho = -base.m0 * float(count) * math.log(7.0)
    except OverflowError:
        log_rho, approx = -math.inf, True
    if math.isinf(log_rho):
        approx = True
    return ExitConstants(log2_lambda0=log2_lambda0, log_rho=log_rho,
                         log_neg_log_rho=log_neg, ceil_count=count, approx=approx)


def thin_rect_requirements(b, p):
    """Smallest half-width factor ``a`` and scale ``lam`` for which a thin
    rectangle ``R^{a,b,b}`` is left through its left face w.p. >= 1/7."""
    if not b > 0:
        raise ValueError("b must be positive")
    a_min = 7.0 * p.K * (b + p.K) / (p.r * math.sqrt(p.h))
    lambda_min = 3.0 * p.K / b
    return a_min, lambda_min


def transformed_ellipticity(p):
    """Constants valid for the drift-compensated process ``X - sum(D)``."""
    return EllipticityParams(K=2 * p.K, r=p.r * p.h / (2.0 * math.sqrt(2.0)),
                             h=p.r * p.h / (4.0 * p.K))
