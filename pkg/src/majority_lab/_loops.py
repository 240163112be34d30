"""Jitted inner loops for sequential-model simulation.

Every loop consumes a `numpy.random.Generator` directly; numba reproduces the
exact PCG64 stream, so these loops are bit-identical to stepping the pure
Python `simulate.sequential_step` with the same seed (a unit test holds that
line).  Draw order per step is part of the reproducibility contract:

1. one uniform for the activated agent's own opinion (< alpha means ``a``),
2. up to j uniforms for the sampled opinions, stopping early once one side
   has reached the quorum of j//2 + 1,
3. for even j, one extra uniform breaking a j/2 : j/2 tie (< 0.5 means ``a``).
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def seq_step(gen, n, s, j):
    """One direct-sampled step; returns the next count."""
    alpha = s / n
    holds_a = gen.random() < alpha
    quorum = j // 2 + 1
    ca = 0
    cb = 0
    for _ in range(j):
        if gen.random() < alpha:
            ca += 1
        else:
            cb += 1
        if ca >= quorum or cb >= quorum:
            break
    if ca >= quorum:
        adopt_a = True
    elif cb >= quorum:
        adopt_a = False
    else:
        adopt_a = gen.random() < 0.5
    if adopt_a and not holds_a:
        return s + 1
    if holds_a and not adopt_a:
        return s - 1
    return s


@njit(cache=True, nogil=True)
def seq_run(gen, n, s0, j, cap):
    """Run to absorption or cap; returns (final count, steps taken)."""
    s = s0
    steps = 0
    while 0 < s < n and steps < cap:
        s = seq_step(gen, n, s, j)
        steps += 1
    return s, steps


@njit(cache=True, nogil=True)
def seq_run_probe(gen, n, s0, j, cap, every, ts, ss):
    """Like seq_run but samples (t, s) every ``every`` steps into ts/ss.

    Returns (final count, steps, samples written, min count, max count).
    The extremes cover every step, not just the sampled ones, and the final
    state is always appended when room remains.
    """
    s = s0
    steps = 0
    k = 0
    min_s = s
    max_s = s
    if k < len(ts):
        ts[k] = 0
        ss[k] = s
        k += 1
    while 0 < s < n and steps < cap:
        s = seq_step(gen, n, s, j)
        steps += 1
        if s < min_s:
            min_s = s
        if s > max_s:
            max_s = s
        if steps % every == 0 and k < len(ts):
            ts[k] = steps
            ss[k] = s
            k += 1
    if k < len(ts) and (k == 0 or ts[k - 1] != steps):
        ts[k] = steps
        ss[k] = s
        k += 1
    return s, steps, k, min_s, max_s


@njit(cache=True, nogil=True)
def seq_step_counts(gen, n, s, j, reps):
    """Classify ``reps`` independent steps from a frozen state s.

    Returns (down, stay, up) counts for goodness-of-fit against the kernel row.
    """
    down = 0
    stay = 0
    up = 0
    for _ in range(reps):
        nxt = seq_step(gen, n, s, j)
        if nxt < s:
            down += 1
        elif nxt > s:
            up += 1
        else:
            stay += 1
    return down, stay, up


@njit(cache=True, nogil=True)
def seq_run_window(gen, n, s0, j, target_bias, floor_bias, cap):
    """Run until the lead 2s - n first reaches target_bias (or absorption/cap).

    Tracks productive steps (count actually moved) and whether the lead ever
    fell below floor_bias on the way.  Returns
    (final count, steps, productive steps, reached flag, floor-violated flag,
    productive steps at the moment the target was reached; -1 if never).
    """
    s = s0
    steps = 0
    productive = 0
    violated = False
    reached = (2 * s0 - n) >= target_bias
    prod_at_reach = 0 if reached else -1
    if reached:
        return s, steps, productive, True, False, 0
    while 0 < s < n and steps < cap:
        nxt = seq_step(gen, n, s, j)
        steps += 1
        if nxt != s:
            productive += 1
        s = nxt
        bias = 2 * s - n
        if bias < floor_bias:
            violated = True
        if bias >= target_bias:
            reached = True
            prod_at_reach = productive
            break
    return s, steps, productive, reached, violated, prod_at_reach


@njit(cache=True, nogil=True)
def pair_order(down_lo, mid_lo, down_hi, mid_hi, s_lo, s_hi):
    """Pointwise CDF comparison of the two one-step rows at states s_lo, s_hi.

    Both rows are supported on {s-1, s, s+1}, so the step CDFs can only
    separate at the six lattice points around the two states.  Returns +1 when
    the high row is stochastically above the low row (CDF_high <= CDF_low
    everywhere), -1 for the mirrored order, 0 when neither holds (equal rows
    or a genuine crossing).
    """
    hi_ok = True
    lo_ok = True
    for k in (s_lo - 1, s_lo, s_lo + 1, s_hi - 1, s_hi, s_hi + 1):
        if k < s_lo - 1:
            cl = 0.0
        elif k == s_lo - 1:
            cl = down_lo[s_lo]
        elif k == s_lo:
            cl = mid_lo[s_lo]
        else:
            cl = 1.0
        if k < s_hi - 1:
            ch = 0.0
        elif k == s_hi - 1:
            ch = down_hi[s_hi]
        elif k == s_hi:
            ch = mid_hi[s_hi]
        else:
            ch = 1.0
        if ch > cl:
            hi_ok = False
        if ch < cl:
            lo_ok = False
    if hi_ok and not lo_ok:
        return 1
    if lo_ok and not hi_ok:
        return -1
    return 0


@njit(cache=True, nogil=True)
def coupled_seq_run(gen, down_lo, mid_lo, down_hi, mid_hi, n, s0, cap):
    """Shared-uniform inverse-CDF coupling of two tridiagonal chains.

    down_*/mid_* are the per-state row-CDF thresholds (P[down] and
    P[down] + P[stay]).  Both chains read the same uniform each step.  Before
    each step the expected order of the two rows is computed exactly from the
    CDFs (pair_order); after the step the realized pair must respect it.  The
    inverse-CDF map is monotone in u, so a mismatch can only come from a
    defective coupling, never from randomness.

    Returns (t_low, t_high, final s_low, final s_high, violation step or -1,
    steps run).  Absorption times are -1 while a chain is still live at cap.
    """
    s_lo = s0
    s_hi = s0
    t = 0
    t_low = 0 if (s_lo == 0 or s_lo == n) else -1
    t_high = 0 if (s_hi == 0 or s_hi == n) else -1
    while (t_low < 0 or t_high < 0) and t < cap:
        order = pair_order(down_lo, mid_lo, down_hi, mid_hi, s_lo, s_hi)
        u = gen.random()
        if 0 < s_lo < n:
            if u < down_lo[s_lo]:
                s_lo -= 1
            elif u >= mid_lo[s_lo]:
                s_lo += 1
        if 0 < s_hi < n:
            if u < down_hi[s_hi]:
                s_hi -= 1
            elif u >= mid_hi[s_hi]:
                s_hi += 1
        t += 1
        if t_low < 0 and (s_lo == 0 or s_lo == n):
            t_low = t
        if t_high < 0 and (s_hi == 0 or s_hi == n):
            t_high = t
        if (order > 0 and s_hi < s_lo) or (order < 0 and s_hi > s_lo):
            return t_low, t_high, s_lo, s_hi, t, t
    return t_low, t_high, s_lo, s_hi, -1, t


_WARMED = False


def warm_up() -> None:
    """Force compilation of all loops on tiny inputs (cached across processes)."""
    global _WARMED
    if _WARMED:
        return
    gen = np.random.Generator(np.random.PCG64(0))
    seq_run(gen, 4, 2, 3, 8)
    ts = np.zeros(4, dtype=np.int64)
    ss = np.zeros(4, dtype=np.int64)
    seq_run_probe(gen, 4, 2, 3, 8, 2, ts, ss)
    seq_step_counts(gen, 4, 2, 3, 4)
    seq_run_window(gen, 8, 5, 3, 4, 0, 8)
    z = np.zeros(5)
    coupled_seq_run(gen, z, z, z, z, 4, 2, 4)
    _WARMED = True
