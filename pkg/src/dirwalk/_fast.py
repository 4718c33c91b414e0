"""Compiled inner loops for the built-in walks.

Transition rules here mirror the ``kernel`` methods in :mod:`dirwalk.process`
entry for entry (same jump order, same float probabilities, same
cumulative-sum sampling), which the test-suite checks trajectory by
trajectory.  All loops over trajectories are ``prange`` loops writing to
per-index slots, so results do not depend on the thread count.
"""
import math

import numpy as np
from numba import njit, prange

from .rng import block, to_unit

SRW, AXIS_TRAP, EXCITED, RADIAL = 0, 1, 2, 3

RECT, CONE, LEVEL, RETURN = 0, 1, 2, 3
OP_GE, OP_LE, OP_GT, OP_LT = 0, 1, 2, 3
ROW = 10

_OFFSET = 1 << 30
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_S29 = np.uint64(29)
EMPTY = -1


@njit(cache=True, inline="always")
def _pick4(u, p0, p1, p2, p3):
    c = p0
    if u < c:
        return 0
    c += p1
    if u < c:
        return 1
    c += p2
    if u < c:
        return 2
    c += p3
    if u < c:
        return 3
    return 3


@njit(cache=True, inline="always")
def _round_half_away(z):
    return math.copysign(math.floor(abs(z) + 0.5), z)


@njit(cache=True)
def transition(kind, prm, x, y, fresh, u):
    """Sampled jump and exact drift: ``(dx, dy, drift_x, drift_y)``."""
    if kind == EXCITED and fresh:
        beta, lx, ly = prm[0], int(prm[1]), int(prm[2])
        i = _pick4(u, 0.25 + beta / 2.0, 0.25 - beta / 2.0, 0.25, 0.25)
        if i == 0:
            dx, dy = lx, ly
        elif i == 1:
            dx, dy = -lx, -ly
        elif i == 2:
            dx, dy = -ly, lx
        else:
            dx, dy = ly, -lx
        return dx, dy, beta * prm[1], beta * prm[2]
    if kind == AXIS_TRAP and y != 0:
        s = 1 if y > 0 else -1
        i = _pick4(u, 0.25, 0.25, 1.0 / 6.0, 1.0 / 3.0)
        if i == 0:
            dx, dy = 1, 0
        elif i == 1:
            dx, dy = -1, 0
        elif i == 2:
            dx, dy = 0, s
        else:
            dx, dy = 0, -s
        return dx, dy, 0.0, -s / 6.0
    if kind == RADIAL and (x != 0 or y != 0):
        fx, fy = float(x), float(y)
        norm = math.sqrt(fx * fx + fy * fy)
        wx, wy = fx / norm, fy / norm
        jx = int(_round_half_away(prm[0] * wx))
        jy = int(_round_half_away(prm[0] * wy))
        tx = int(_round_half_away(-wy))
        ty = int(_round_half_away(wx))
        p = prm[1]
        q = 0.5 - p
        i = _pick4(u, p, p, q, q)
        if i == 0:
            return jx, jy, 0.0, 0.0
        elif i == 1:
            return -jx, -jy, 0.0, 0.0
        elif i == 2:
            return tx, ty, 0.0, 0.0
        return -tx, -ty, 0.0, 0.0
    i = _pick4(u, 0.25, 0.25, 0.25, 0.25)
    if i == 0:
        return 1, 0, 0.0, 0.0
    elif i == 1:
        return -1, 0, 0.0, 0.0
    elif i == 2:
        return 0, 1, 0.0, 0.0
    return 0, -1, 0.0, 0.0


# -- visited-site table (open addressing, linear probing, grows at 1/2) --

@njit(cache=True, inline="always")
def site_key(x, y):
    return (x + _OFFSET) * (1 << 31) + (y + _OFFSET)


@njit(cache=True, inline="always")
def _slot(key, shift):
    return np.int64((np.uint64(key) * _GOLDEN) >> shift)


@njit(cache=True)
def new_table(capacity):
    size = 16
    bits = 4
    while size < 2 * capacity:
        size *= 2
        bits += 1
    keys = np.full(size, EMPTY, dtype=np.int64)
    counts = np.zeros(size, dtype=np.int64)
    return keys, counts, bits


@njit(cache=True)
def _insert(keys, counts, bits, key, add):
    shift = np.uint64(64 - bits)
    mask = keys.size - 1
    i = _slot(key, shift)
    while True:
        k = keys[i]
        if k == key:
            counts[i] += add
            return counts[i]
        if k == EMPTY:
            keys[i] = key
            counts[i] = add
            return add
        i = (i + 1) & mask


@njit(cache=True)
def _grow(keys, counts, bits):
    nk = np.full(keys.size * 2, EMPTY, dtype=np.int64)
    nc = np.zeros(keys.size * 2, dtype=np.int64)
    for i in range(keys.size):
        if keys[i] != EMPTY:
            _insert(nk, nc, bits + 1, keys[i], counts[i])
    return nk, nc, bits + 1


@njit(cache=True, inline="always")
def _lane(seed, traj, t, words):
    if (t & 3) == 0:
        words = block(seed, traj, t >> 2)
    return words, to_unit(words[t & 3])


@njit(cache=True, parallel=True)
def simulate_stats(kind, prm, sx, sy, n_steps, seed, traj0, n_traj, checkpoints):
    """Range at checkpoints, local time at the start, largest local time,
    largest squared norm and final position for each trajectory."""
    ncp = checkpoints.size
    range_at = np.zeros((n_traj, ncp), dtype=np.int64)
    l_start = np.zeros(n_traj, dtype=np.int64)
    max_lt = np.zeros(n_traj, dtype=np.int64)
    max_norm2 = np.zeros(n_traj, dtype=np.int64)
    final = np.zeros((n_traj, 2), dtype=np.int64)
    for i in prange(n_traj):
        traj = traj0 + np.uint64(i)
        keys, counts, bits = new_table(min(n_steps + 1, 1 << 16))
        filled = 1
        _insert(keys, counts, bits, site_key(sx, sy), 1)
        best = 1
        ls = 1
        x, y = sx, sy
        m2 = x * x + y * y
        fresh = True
        j = 0
        while j < ncp and checkpoints[j] == 0:
            range_at[i, j] = 1
            j += 1
        words = block(seed, traj, 0)
        for t in range(n_steps):
            words, u = _lane(seed, traj, t, words)
            dx, dy, _, _ = transition(kind, prm, x, y, fresh, u)
            x += dx
            y += dy
            if 2 * (filled + 1) > keys.size:
                keys, counts, bits = _grow(keys, counts, bits)
            c = _insert(keys, counts, bits, site_key(x, y), 1)
            fresh = c == 1
            if fresh:
                filled += 1
            if c > best:
                best = c
            if x == sx and y == sy:
                ls += 1
            n2 = x * x + y * y
            if n2 > m2:
                m2 = n2
            while j < ncp and checkpoints[j] == t + 1:
                range_at[i, j] = filled
                j += 1
        l_start[i] = ls
        max_lt[i] = best
        max_norm2[i] = m2
        final[i, 0] = x
        final[i, 1] = y
    return range_at, l_start, max_lt, max_norm2, final


@njit(cache=True, parallel=True)
def simulate_paths(kind, prm, sx, sy, n_steps, seed, traj0, n_traj):
    """Full positions ``(n_traj, n_steps + 1, 2)`` and first-visit flags."""
    pos = np.zeros((n_traj, n_steps + 1, 2), dtype=np.int64)
    first = np.zeros((n_traj, n_steps + 1), dtype=np.bool_)
    track = kind == EXCITED
    for i in prange(n_traj):
        traj = traj0 + np.uint64(i)
        keys, counts, bits = new_table(64)
        filled = 1
        if track:
            _insert(keys, counts, bits, site_key(sx, sy), 1)
        x, y = sx, sy
        fresh = True
        pos[i, 0, 0] = x
        pos[i, 0, 1] = y
        first[i, 0] = True
        words = block(seed, traj, 0)
        for t in range(n_steps):
            words, u = _lane(seed, traj, t, words)
            dx, dy, _, _ = transition(kind, prm, x, y, fresh, u)
            x += dx
            y += dy
            if track:
                if 2 * (filled + 1) > keys.size:
                    keys, counts, bits = _grow(keys, counts, bits)
                fresh = _insert(keys, counts, bits, site_key(x, y), 1) == 1
                if fresh:
                    filled += 1
            pos[i, t + 1, 0] = x
            pos[i, t + 1, 1] = y
            first[i, t + 1] = fresh
    return pos, first


@njit(cache=True)
def fires(row, x, y, yx, yy):
    """Whether a stop condition row holds at X = (x, y), Y = (yx, yy)."""
    kind = int(row[0])
    if kind == RETURN:
        return x == row[2] and y == row[3]
    if row[1] > 0.5:
        px, py = yx, yy
    else:
        px, py = float(x), float(y)
    if kind == RECT:
        dx = px - row[2]
        dy = py - row[3]
        vx, vy = row[4], row[5]
        s = dx * vx + dy * vy
        t = dx * (-vy) + dy * vx
        lam = row[9]
        inside = abs(t) < row[6] * lam and -row[7] * lam < s and s < row[8] * lam
        return not inside
    if kind == CONE:
        n = math.sqrt(px * px + py * py)
        if n <= 1e-12:
            return True
        return (px * row[3] + py * row[4]) / n >= row[2]
    val = px * row[2] + py * row[3]
    op = int(row[5])
    thr = row[4]
    if op == OP_GE:
        return val >= thr
    if op == OP_LE:
        return val <= thr
    if op == OP_GT:
        return val > thr
    return val < thr


@njit(cache=True, parallel=True)
def run_episodes(kind, prm, sx, sy, table, cap, seed, traj0, n_traj, perp):
    """Run each trajectory until the first row of ``table`` fires (rows are
    in priority order) or ``cap`` steps have been taken.

    ``perp = (rx, ry, wx, wy)`` defines the tracked deviation
    ``|(X - r) . w|``.  Returns stop row (-1 for the cap), stop time, and
    X / Y at the stop time and the step before, plus the max deviation.
    """
    stop_row = np.full(n_traj, -1, dtype=np.int64)
    stop_time = np.zeros(n_traj, dtype=np.int64)
    xs = np.zeros((n_traj, 4), dtype=np.int64)
    ys = np.zeros((n_traj, 4))
    dev = np.zeros(n_traj)
    track = kind == EXCITED
    nrows = table.shape[0]
    for i in prange(n_traj):
        traj = traj0 + np.uint64(i)
        keys, counts, bits = new_table(64)
        filled = 1
        if track:
            _insert(keys, counts, bits, site_key(sx, sy), 1)
        x, y = sx, sy
        px, py = x, y
        sdx, sdy = 0.0, 0.0
        yx, yy = float(x), float(y)
        pyx, pyy = yx, yy
        fresh = True
        best = abs((x - perp[0]) * perp[2] + (y - perp[1]) * perp[3])
        words = block(seed, traj, 0)
        hit = -1
        t = 0
        while t < cap:
            words, u = _lane(seed, traj, t, words)
            dx, dy, ddx, ddy = transition(kind, prm, x, y, fresh, u)
            px, py, pyx, pyy = x, y, yx, yy
            x += dx
            y += dy
            sdx += ddx
            sdy += ddy
            yx = x - sdx
            yy = y - sdy
            t += 1
            if track:
                if 2 * (filled + 1) > keys.size:
                    keys, counts, bits = _grow(keys, counts, bits)
                fresh = _insert(keys, counts, bits, site_key(x, y), 1) == 1
                if fresh:
                    filled += 1
            d = abs((x - perp[0]) * perp[2] + (y - perp[1]) * perp[3])
            if d > best:
                best = d
            for k in range(nrows):
                if fires(table[k], x, y, yx, yy):
                    hit = k
                    break
            if hit >= 0:
                break
        stop_row[i] = hit
        stop_time[i] = t
        xs[i, 0] = x
        xs[i, 1] = y
        xs[i, 2] = px
        xs[i, 3] = py
        ys[i, 0] = yx
        ys[i, 1] = yy
        ys[i, 2] = pyx
        ys[i, 3] = pyy
        dev[i] = best
    return stop_row, stop_time, xs, ys, dev
