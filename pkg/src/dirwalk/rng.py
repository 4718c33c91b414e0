"""Counter-based random numbers (Philox4x64-10).

Every draw is a pure function of ``(seed, trajectory, step)``, so a
trajectory's randomness does not depend on how trajectories are scheduled
across threads or batches.
"""
import numpy as np
from numba import njit

_M32 = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S11 = np.uint64(11)
_MUL0 = np.uint64(0xD2E7470EE14C6C93)
_MUL1 = np.uint64(0xCA5A826395121157)
_BUMP0 = np.uint64(0x9E3779B97F4A7C15)
_BUMP1 = np.uint64(0xBB67AE8584CAA73B)
_INV53 = 1.0 / 9007199254740992.0

MAX_SEED = 2**64 - 1


@njit(cache=True, inline="always")
def _mulhilo(a, b):
    a_lo = a & _M32
    a_hi = a >> _S32
    b_lo = b & _M32
    b_hi = b >> _S32
    ll = a_lo * b_lo
    hl = a_hi * b_lo
    lh = a_lo * b_hi
    hh = a_hi * b_hi
    cross = (ll >> _S32) + (hl & _M32) + lh
    hi = hh + (hl >> _S32) + (cross >> _S32)
    lo = (cross << _S32) | (ll & _M32)
    return hi, lo


@njit(cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64 with 10 rounds; all arguments are ``np.uint64``."""
    for i in range(10):
        if i > 0:
            k0 = k0 + _BUMP0
            k1 = k1 + _BUMP1
        hi0, lo0 = _mulhilo(_MUL0, c0)
        hi1, lo1 = _mulhilo(_MUL1, c2)
        c0, c1, c2, c3 = hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0
    return c0, c1, c2, c3


@njit(cache=True, inline="always")
def to_unit(word):
    return (word >> _S11) * _INV53


@njit(cache=True)
def block(seed, traj, index):
    """The four raw words of block ``index``; step ``s`` uses lane ``s % 4``
    of block ``s // 4``."""
    return philox4x64(np.uint64(index), np.uint64(0), np.uint64(0),
                      np.uint64(0), np.uint64(seed), np.uint64(traj))


@njit(cache=True)
def uniform(seed, traj, step):
    """Uniform double in [0, 1) for the draw at ``step`` of ``traj``."""
    r = block(seed, traj, step >> 2)
    return to_unit(r[step & 3])


@njit(cache=True)
def uniforms(seed, traj, start, count):
    """``count`` consecutive draws of ``traj`` beginning at ``start``."""
    out = np.empty(count)
    s = start
    while s < start + count:
        r = block(seed, traj, s >> 2)
        for lane in range(s & 3, 4):
            if s >= start + count:
                break
            out[s - start] = to_unit(r[lane])
            s += 1
    return out


def check_seed(seed):
    seed = int(seed)
    if not 0 <= seed <= MAX_SEED:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def stream_key(seed, traj):
    """``(seed, traj)`` as the unsigned words the compiled code expects."""
    traj = int(traj)
    if not 0 <= traj <= MAX_SEED:
        raise ValueError(f"trajectory index must fit in 64 bits, got {traj}")
    return np.uint64(check_seed(seed)), np.uint64(traj)
