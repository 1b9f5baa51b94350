"""Hot numeric kernels, each with a numba path and a pure-numpy path.

The two paths perform the same floating-point operations in the same order,
so they return identical results; ``tests/test_kernels.py`` checks this and
``benchmarks/bench_kernels.py`` times them against each other.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import jit_enabled, njit

# ---------------------------------------------------------------------------
# Word expansion: certified multi-level attractor covers
# ---------------------------------------------------------------------------


@njit
def _mark_ball(x, rho, origin, delta, side, out_key, count, cap, p, lo, hi, u, idx):
    # cells whose closed cube meets the closed ball B(x, rho)
    rd = rho / delta
    for i in range(p):
        u[i] = (x[i] - origin[i]) / delta
        a = math.ceil(u[i] - rd - 1.0)
        b = math.floor(u[i] + rd)
        if a < 0:
            a = 0
        if b > side - 1:
            b = side - 1
        lo[i] = a
        hi[i] = b
        if a > b:
            return count
    for i in range(p):
        idx[i] = lo[i]
    rd2 = rd * rd
    while True:
        d2 = 0.0
        for i in range(p):
            if u[i] < idx[i]:
                g = idx[i] - u[i]
            elif u[i] > idx[i] + 1:
                g = u[i] - idx[i] - 1
            else:
                g = 0.0
            d2 += g * g
        if d2 <= rd2:
            if count >= cap:
                return -1
            key = 0
            mul = 1
            for i in range(p):
                key += idx[i] * mul
                mul *= side
            out_key[count] = key
            count += 1
        j = 0
        while j < p:
            idx[j] += 1
            if idx[j] <= hi[j]:
                break
            idx[j] = lo[j]
            j += 1
        if j == p:
            return count


@njit
def _expand_words_jit(ratios, orth, trans, c0, radius, prefix, thresholds,
                      origin, deltas, sides, max_depth, out_lvl, out_key):
    nmaps = ratios.shape[0]
    p = c0.shape[0]
    nlev = thresholds.shape[0]
    q = prefix.shape[0]
    cap = out_key.shape[0]
    st_r = np.empty(max_depth + 1)
    st_o = np.empty((max_depth + 1, p, p))
    st_t = np.empty((max_depth + 1, p))
    st_lev = np.empty(max_depth + 1, np.int64)
    st_child = np.empty(max_depth + 1, np.int64)
    st_end = np.empty(max_depth + 1, np.int64)
    x = np.empty(p)
    lo = np.empty(p, np.int64)
    hi = np.empty(p, np.int64)
    u = np.empty(p)
    idx = np.empty(p, np.int64)
    count = 0

    st_r[0] = 1.0
    for i in range(p):
        for j in range(p):
            st_o[0, i, j] = 1.0 if i == j else 0.0
        st_t[0, i] = 0.0
    d = 0
    fresh = True
    while d >= 0:
        if fresh:
            fresh = False
            r = st_r[d]
            for i in range(p):
                acc = 0.0
                for j in range(p):
                    acc += st_o[d, i, j] * c0[j]
                x[i] = r * acc + st_t[d, i]
            rho = r * radius
            lev = st_lev[d] if d > 0 else 0
            while lev < nlev and rho <= thresholds[lev]:
                before = count
                count = _mark_ball(x, rho, origin, deltas[lev], sides[lev],
                                   out_key, count, cap, p, lo, hi, u, idx)
                if count < 0:
                    return -1
                for c in range(before, count):
                    out_lvl[c] = lev
                lev += 1
            st_lev[d] = lev
            if lev == nlev:
                d -= 1
                continue
            if d >= max_depth:
                return -2
            if d < q:
                st_child[d] = prefix[d]
                st_end[d] = prefix[d] + 1
            else:
                st_child[d] = 0
                st_end[d] = nmaps
        if st_child[d] >= st_end[d]:
            d -= 1
            continue
        k = st_child[d]
        st_child[d] += 1
        # compose S_w o S_k
        r = st_r[d]
        st_r[d + 1] = r * ratios[k]
        for i in range(p):
            for j in range(p):
                acc = 0.0
                for c in range(p):
                    acc += st_o[d, i, c] * orth[k, c, j]
                st_o[d + 1, i, j] = acc
            acc = 0.0
            for c in range(p):
                acc += st_o[d, i, c] * trans[k, c]
            st_t[d + 1, i] = r * acc + st_t[d, i]
        st_lev[d + 1] = st_lev[d]
        d += 1
        fresh = True
    return count


def _mark_balls_numpy(x, rho, origin, delta, side):
    """Vectorized twin of ``_mark_ball`` for many balls at one level."""
    n, p = x.shape
    if n == 0:
        return np.empty(0, np.int64)
    u = (x - origin) / delta
    rd = rho / delta
    lo = np.ceil(u - rd[:, None] - 1.0).astype(np.int64)
    hi = np.floor(u + rd[:, None]).astype(np.int64)
    lo = np.maximum(lo, 0)
    hi = np.minimum(hi, side - 1)
    width = int((hi - lo).max(initial=0)) + 1
    keys = []
    rd2 = rd * rd
    for off in np.ndindex(*([width] * p)):
        idx = lo + np.asarray(off, dtype=np.int64)
        ok = np.all(idx <= hi, axis=1)
        fi = idx.astype(np.float64)
        d2 = np.zeros(n)
        for i in range(p):
            g = np.where(u[:, i] < fi[:, i], fi[:, i] - u[:, i],
                         np.where(u[:, i] > fi[:, i] + 1, u[:, i] - fi[:, i] - 1, 0.0))
            d2 = d2 + g * g
        ok &= d2 <= rd2
        key = np.zeros(n, np.int64)
        mul = 1
        for i in range(p):
            key += idx[:, i] * mul
            mul *= side
        keys.append(key[ok])
    return np.concatenate(keys)


def _expand_words_numpy(ratios, orth, trans, c0, radius, prefix, thresholds,
                        origin, deltas, sides, max_depth):
    nmaps = ratios.shape[0]
    p = c0.shape[0]
    nlev = thresholds.shape[0]
    r = np.ones(1)
    o = np.eye(p)[None].copy()
    t = np.zeros((1, p))
    lev = np.zeros(1, np.int64)
    out_lvl, out_key = [], []
    depth = 0
    while r.size:
        x = np.empty((r.size, p))
        for i in range(p):
            acc = np.zeros(r.size)
            for j in range(p):
                acc = acc + o[:, i, j] * c0[j]
            x[:, i] = r * acc + t[:, i]
        rho = r * radius
        for j in range(nlev):
            sel = (lev == j) & (rho <= thresholds[j])
            if sel.any():
                keys = _mark_balls_numpy(x[sel], rho[sel], origin, deltas[j], sides[j])
                out_key.append(keys)
                out_lvl.append(np.full(keys.size, j, np.int64))
                lev[sel] = j + 1
        alive = lev < nlev
        if not alive.any():
            break
        if depth >= max_depth:
            raise OverflowError("word depth limit reached")
        r, o, t, lev = r[alive], o[alive], t[alive], lev[alive]
        letters = [int(prefix[depth])] if depth < prefix.shape[0] else range(nmaps)
        nr, no, nt, nl = [], [], [], []
        for k in letters:
            nr.append(r * ratios[k])
            ok = np.empty_like(o)
            tk = np.empty_like(t)
            for i in range(p):
                for j in range(p):
                    acc = np.zeros(r.size)
                    for c in range(p):
                        acc = acc + o[:, i, c] * orth[k, c, j]
                    ok[:, i, j] = acc
                acc = np.zeros(r.size)
                for c in range(p):
                    acc = acc + o[:, i, c] * trans[k, c]
                tk[:, i] = r * acc + t[:, i]
            no.append(ok)
            nt.append(tk)
            nl.append(lev)
        r = np.concatenate(nr)
        o = np.concatenate(no)
        t = np.concatenate(nt)
        lev = np.concatenate(nl)
        depth += 1
    if not out_key:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(out_lvl), np.concatenate(out_key)


def expand_words(ratios, orth, trans, c0, radius, prefix, thresholds,
                 origin, deltas, sides, max_depth, capacity=1 << 20):
    """Mark grid cells met by word-image balls for every requested level.

    Returns ``(levels, keys)``: parallel int64 arrays, one entry per marked
    (level, cell) incidence, duplicates included.
    """
    prefix = np.ascontiguousarray(prefix, dtype=np.int64)
    if not jit_enabled():
        return _expand_words_numpy(ratios, orth, trans, c0, radius, prefix,
                                   thresholds, origin, deltas, sides, max_depth)
    cap = capacity
    while True:
        out_lvl = np.empty(cap, np.int64)
        out_key = np.empty(cap, np.int64)
        n = _expand_words_jit(ratios, orth, trans, c0, radius, prefix, thresholds,
                              origin, deltas, sides, max_depth, out_lvl, out_key)
        if n == -2:
            raise OverflowError("word depth limit reached")
        if n >= 0:
            return out_lvl[:n], out_key[:n]
        cap *= 4


# ---------------------------------------------------------------------------
# Auxiliary function: base-(nm) digit recursion on quantized arguments
# ---------------------------------------------------------------------------


@njit
def _phi_quantized_jit(q, powers, nm, m, y0, step, depth, out):
    L = powers.shape[0] - 1
    full = powers[L]
    steps = depth if depth < L else L
    for e in range(q.shape[0]):
        qe = q[e]
        if qe >= full:
            out[e] = 1.0
            continue
        a = 0.0
        s = 1.0
        rem = qe
        for lvl in range(steps):
            div = powers[L - lvl - 1]
            dg = rem // div
            rem -= dg * div
            a += s * y0[dg]
            s *= step[dg]
        if steps < L:
            out[e] = a + s * (rem / powers[L - steps])
        else:
            out[e] = a
    return out


def _phi_quantized_numpy(q, powers, nm, m, y0, step, depth):
    L = powers.shape[0] - 1
    full = q >= powers[L]
    rem = np.where(full, 0, q)
    a = np.zeros(q.shape)
    s = np.ones(q.shape)
    steps = min(depth, L)
    for lvl in range(steps):
        div = powers[L - lvl - 1]
        dg = rem // div
        rem = rem - dg * div
        a = a + s * y0[dg]
        s = s * step[dg]
    if steps < L:
        val = a + s * (rem / powers[L - steps])
    else:
        val = a
    return np.where(full, 1.0, val)


def phi_quantized(q, powers, nm, m, y0, step, depth):
    """Evaluate the depth-``depth`` approximant at ``q / nm**L``.

    ``q`` is an int64 array in ``[0, nm**L]``; ``powers[j] = nm**j``.
    ``y0[d]`` is the first-iteration value at ``d/(nm)`` and ``step[d]`` the
    signed rise ``±1/m`` of piece ``d``.
    """
    q = np.ascontiguousarray(q, dtype=np.int64)
    if jit_enabled():
        out = np.empty(q.shape[0])
        return _phi_quantized_jit(q, powers, nm, m, y0, step, int(depth), out)
    return _phi_quantized_numpy(q, powers, nm, m, y0, step, int(depth))
