"""Compiled inner loops shared by the dynamics, multi-class and Gibbs modules.

Every random quantity is a pure function of an integer key
``(seed, t, site, cls, stream)`` hashed through a splitmix64-style mixer, so
the same site/time/class draw is reproduced exactly wherever it is needed.
"""
from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0

# stream identifiers
STREAM_CHI = 1
STREAM_JUMP = 2
STREAM_VERTEX = 3
STREAM_SEAM = 4
STREAM_INIT = 5
STREAM_LABEL = 6
STREAM_SEED = 7
STREAM_LABEL_CHI = 8
STREAM_LABEL_JUMP = 9
STREAM_QUADRANT = 10
STREAM_AUX = 11


@njit(cache=True, inline="always")
def _mix(z):
    z = z + _GOLDEN
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def key_hash(seed, t, x, cls, stream):
    h = _mix(np.uint64(seed))
    h = _mix(h ^ np.uint64(stream))
    h = _mix(h ^ np.uint64(t))
    h = _mix(h ^ np.uint64(x))
    h = _mix(h ^ np.uint64(cls))
    return h


@njit(cache=True)
def key_uniform(seed, t, x, cls, stream):
    """Uniform variate strictly inside (0, 1)."""
    h = key_hash(seed, t, x, cls, stream)
    return (np.float64(h >> _S11) + 0.5) * _INV53


@njit(cache=True, inline="always")
def geometric_from_uniform(u, log_b2):
    # P[j >= v] = P[u <= b2**(v-1)] = b2**(v-1)
    return 1 + np.int64(np.floor(np.log(u) / log_b2))


@njit(cache=True)
def uniform_array(seed, t, sites, cls, stream):
    out = np.empty(sites.shape[0], np.float64)
    for i in range(sites.shape[0]):
        out[i] = key_uniform(seed, t, sites[i], cls, stream)
    return out


@njit(cache=True)
def uniform_range(seed, t, lo, hi, cls, stream):
    out = np.empty(hi - lo, np.float64)
    for i in range(hi - lo):
        out[i] = key_uniform(seed, t, lo + i, cls, stream)
    return out


@njit(cache=True)
def coins_at(sites, classes, seed, t, b1, b2):
    """Stay coins and jump lengths at the given (site, class) keys."""
    n = sites.shape[0]
    chi = np.empty(n, np.uint8)
    jump = np.empty(n, np.int64)
    lb2 = np.log(b2)
    for i in range(n):
        chi[i] = 1 if key_uniform(seed, t, sites[i], classes[i], STREAM_CHI) < b1 else 0
        jump[i] = geometric_from_uniform(
            key_uniform(seed, t, sites[i], classes[i], STREAM_JUMP), lb2)
    return chi, jump


@njit(cache=True)
def bernoulli_range(seed, lo, hi, prob, stream):
    out = np.empty(hi - lo, np.uint8)
    for i in range(hi - lo):
        out[i] = 1 if key_uniform(seed, 0, lo + i, 0, stream) < prob else 0
    return out


# ---------------------------------------------------------------- line ----

@njit(cache=True)
def line_step_core(pos, chi, jump):
    """One left-to-right sweep; ``chi``/``jump`` are indexed by particle."""
    n = pos.shape[0]
    out = np.empty(n, np.int64)
    for k in range(n):
        x = pos[k]
        forced = k > 0 and out[k - 1] == x
        if not forced and chi[k] == 1:
            out[k] = x
            continue
        target = x + jump[k]
        if k + 1 < n and pos[k + 1] < target:
            target = pos[k + 1]
        out[k] = target
    return out


@njit(cache=True)
def line_step_keyed(pos, b1, b2, seed, t):
    n = pos.shape[0]
    out = np.empty(n, np.int64)
    lb2 = np.log(b2)
    for k in range(n):
        x = pos[k]
        forced = k > 0 and out[k - 1] == x
        if not forced and key_uniform(seed, t, x, 1, STREAM_CHI) < b1:
            out[k] = x
            continue
        target = x + geometric_from_uniform(key_uniform(seed, t, x, 1, STREAM_JUMP), lb2)
        if k + 1 < n and pos[k + 1] < target:
            target = pos[k + 1]
        out[k] = target
    return out


@njit(cache=True)
def line_run_keyed(pos, b1, b2, seed, t0, steps):
    """Positions at times t0..t0+steps, shape (steps + 1, n)."""
    n = pos.shape[0]
    hist = np.empty((steps + 1, n), np.int64)
    hist[0] = pos
    cur = pos.copy()
    for s in range(steps):
        cur = line_step_keyed(cur, b1, b2, seed, t0 + s + 1)
        hist[s + 1] = cur
    return hist


@njit(cache=True)
def horizontal_row(before, after, lo, hi):
    """Indicators of occupied horizontal edges x -> x+1 for x in [lo, hi)."""
    row = np.zeros(hi - lo, np.uint8)
    for k in range(before.shape[0]):
        a = max(before[k], lo)
        b = min(after[k], hi)
        for x in range(a, b):
            row[x - lo] = 1
    return row


@njit(cache=True)
def occupancy_window(pos, lo, hi):
    occ = np.zeros(hi - lo, np.uint8)
    for k in range(pos.shape[0]):
        x = pos[k]
        if lo <= x < hi:
            occ[x - lo] = 1
    return occ


# ---------------------------------------------------------------- rows ----

@njit(cache=True, inline="always")
def _transfer(i1, h_in, h_out, b1, b2):
    if i1 == 1:
        if h_in == 1:
            return 1.0 if h_out == 1 else 0.0
        return 1.0 - b1 if h_out == 1 else b1
    if h_in == 0:
        return 1.0 if h_out == 0 else 0.0
    return b2 if h_out == 1 else 1.0 - b2


@njit(cache=True)
def ring_seam_weights(occ, b1, b2):
    """log of (prod_x M_x)[h, h] for h = 0, 1."""
    n = occ.shape[0]
    logw = np.empty(2)
    for h0 in range(2):
        v0 = 1.0 if h0 == 0 else 0.0
        v1 = 1.0 - v0
        logscale = 0.0
        for x in range(n - 1, -1, -1):
            i1 = occ[x]
            w0 = _transfer(i1, 0, 0, b1, b2) * v0 + _transfer(i1, 0, 1, b1, b2) * v1
            w1 = _transfer(i1, 1, 0, b1, b2) * v0 + _transfer(i1, 1, 1, b1, b2) * v1
            m = max(w0, w1)
            if m <= 0.0:
                v0 = 0.0
                v1 = 0.0
                break
            v0 = w0 / m
            v1 = w1 / m
            logscale += np.log(m)
        val = v0 if h0 == 0 else v1
        logw[h0] = np.log(val) + logscale if val > 0.0 else -np.inf
    return logw


@njit(cache=True)
def ring_row_from_uniforms(occ, b1, b2, u_seam, u_sites):
    """Exact row of the periodic (cylinder) measure by seam conditioning.

    Returns the new occupancy and horizontal edge indicators; entry ``x`` of
    the latter is the edge x -> x+1, the last one being the seam edge.
    """
    n = occ.shape[0]
    logw = ring_seam_weights(occ, b1, b2)
    if logw[0] == -np.inf and logw[1] == -np.inf:
        raise ValueError("degenerate row: both seam values have zero weight")
    if logw[1] == -np.inf:
        p1 = 0.0
    elif logw[0] == -np.inf:
        p1 = 1.0
    else:
        p1 = 1.0 / (1.0 + np.exp(logw[0] - logw[1]))
    h0 = 1 if u_seam < p1 else 0
    # normalized suffix vectors s[x] = (prod_{y >= x} M_y)[:, h0]
    s = np.empty((n + 1, 2))
    s[n, 0] = 1.0 if h0 == 0 else 0.0
    s[n, 1] = 1.0 if h0 == 1 else 0.0
    for x in range(n - 1, -1, -1):
        i1 = occ[x]
        w0 = _transfer(i1, 0, 0, b1, b2) * s[x + 1, 0] + _transfer(i1, 0, 1, b1, b2) * s[x + 1, 1]
        w1 = _transfer(i1, 1, 0, b1, b2) * s[x + 1, 0] + _transfer(i1, 1, 1, b1, b2) * s[x + 1, 1]
        m = max(w0, w1)
        if m > 0.0:
            w0 /= m
            w1 /= m
        s[x, 0] = w0
        s[x, 1] = w1
    new = np.empty(n, np.uint8)
    hrow = np.empty(n, np.uint8)
    h = h0
    for x in range(n):
        i1 = occ[x]
        a0 = _transfer(i1, h, 0, b1, b2) * s[x + 1, 0]
        a1 = _transfer(i1, h, 1, b1, b2) * s[x + 1, 1]
        tot = a0 + a1
        o = 1 if u_sites[x] * tot < a1 else 0
        new[x] = i1 + h - o
        hrow[x] = o
        h = o
    return new, hrow


@njit(cache=True)
def ring_row_keyed(occ, b1, b2, seed, t):
    n = occ.shape[0]
    u_seam = key_uniform(seed, t, 0, 0, STREAM_SEAM)
    u_sites = uniform_range(seed, t, 0, n, 0, STREAM_VERTEX)
    return ring_row_from_uniforms(occ, b1, b2, u_seam, u_sites)


@njit(cache=True)
def ring_run_keyed(occ, b1, b2, seed, t0, steps):
    n = occ.shape[0]
    occ_hist = np.empty((steps + 1, n), np.uint8)
    h_hist = np.empty((steps, n), np.uint8)
    occ_hist[0] = occ
    cur = occ.copy()
    for s in range(steps):
        cur, hrow = ring_row_keyed(cur, b1, b2, seed, t0 + s + 1)
        occ_hist[s + 1] = cur
        h_hist[s] = hrow
    return occ_hist, h_hist


@njit(cache=True)
def line_row_keyed(occ, h_in, b1, b2, seed, t, x0):
    """Unconditioned vertex sweep over sites x0 .. x0+len-1 (half-plane row).

    Uses the same per-vertex uniforms as the periodic sampler so the two can
    be coupled site by site.
    """
    n = occ.shape[0]
    new = np.empty(n, np.uint8)
    hrow = np.empty(n, np.uint8)
    h = h_in
    for x in range(n):
        i1 = occ[x]
        p1 = _transfer(i1, h, 1, b1, b2)
        o = 1 if key_uniform(seed, t, x0 + x, 0, STREAM_VERTEX) < p1 else 0
        new[x] = i1 + h - o
        hrow[x] = o
        h = o
    return new, hrow, h


# ------------------------------------------------------- separation ----

@njit(cache=True)
def is_separating(k, seed, t0, nsteps, b1, b2, depth):
    lb2 = np.log(b2)
    for tp in range(1, nsteps + 1):
        t = t0 + tp
        s = k + tp
        if key_uniform(seed, t, s, 1, STREAM_CHI) < b1:
            return False
        for m in range(s - depth, s):
            if m + geometric_from_uniform(key_uniform(seed, t, m, 1, STREAM_JUMP), lb2) > s:
                return False
    return True


@njit(cache=True)
def separating_in_range(lo, hi, seed, t0, nsteps, b1, b2, depth):
    out = np.empty(hi - lo, np.int64)
    c = 0
    for k in range(lo, hi):
        if is_separating(k, seed, t0, nsteps, b1, b2, depth):
            out[c] = k
            c += 1
    return out[:c]


@njit(cache=True)
def bracket_schedule(seed, t0, steps, wlo, whi, b1, b2, depth, keep_window, cap):
    """Backward construction of one-step slabs covering the window.

    Row ``t`` (1-based) holds the slab [lo, hi) of sites at time t-1 whose
    particles are evolved from time t-1 to t. Returns ok=False when a search
    exceeds ``cap`` sites.
    """
    slabs = np.empty((steps + 1, 2), np.int64)
    need_lo = wlo
    need_hi = whi
    for t in range(steps, 0, -1):
        ka = need_lo - 2
        c = 0
        while not is_separating(ka, seed, t0 + t - 1, 1, b1, b2, depth):
            ka -= 1
            c += 1
            if c > cap:
                return slabs, False
        kb = need_hi - 2
        c = 0
        while not is_separating(kb, seed, t0 + t - 1, 1, b1, b2, depth):
            kb += 1
            c += 1
            if c > cap:
                return slabs, False
        slabs[t, 0] = ka + 1
        slabs[t, 1] = kb + 1
        need_lo = ka + 1
        need_hi = kb + 1
        if keep_window:
            need_lo = min(need_lo, wlo)
            need_hi = max(need_hi, whi)
    slabs[0, 0] = need_lo
    slabs[0, 1] = need_hi
    return slabs, True


# ------------------------------------------------------- coupling ----

@njit(cache=True)
def quantile_chain(pos, first_label, b1, b2, seed, t):
    """One step driven by one uniform per particle label (inverse-CDF coupling)."""
    n = pos.shape[0]
    out = np.empty(n, np.int64)
    lb2 = np.log(b2)
    for i in range(n):
        x = pos[i]
        forced = i > 0 and out[i - 1] == x
        u = key_uniform(seed, t, first_label + i, 0, STREAM_LABEL)
        if not forced:
            if u < b1:
                out[i] = x
                continue
            v = (u - b1) / (1.0 - b1)
        else:
            v = u
        m = np.int64(np.ceil(np.log1p(-v) / lb2))
        if m < 1:
            m = 1
        target = x + m
        if i + 1 < n and pos[i + 1] < target:
            target = pos[i + 1]
        out[i] = target
    return out


# ----------------------------------------------------- multi-class ----

@njit(cache=True)
def multiclass_step_core(pos, cls, chi, jump, ncls):
    """One step of the multi-class dynamics.

    ``pos`` is sorted over all particles, ``cls`` holds classes 1..ncls and
    ``chi``/``jump`` the class-resolved coins at each particle's own key.
    Returns new positions aligned with the input particles.
    """
    n = pos.shape[0]
    out = pos.copy()
    if n == 0:
        return out
    lo = pos[0]
    reach = pos[n - 1]
    for k in range(n):
        if pos[k] + jump[k] > reach:
            reach = pos[k] + jump[k]
    width = reach - lo + n + 2
    crossed = np.zeros(width, np.uint8)
    stayer = np.zeros(width, np.uint8)
    mover = np.zeros(width, np.uint8)
    landed = np.zeros(width, np.uint8)
    # next same-class original position
    nxt = np.full(n, -1, np.int64)
    last = np.full(ncls + 1, -1, np.int64)
    for k in range(n - 1, -1, -1):
        c = cls[k]
        nxt[k] = last[c]
        last[c] = k
    for r in range(1, ncls + 1):
        for k in range(n):
            if cls[k] != r:
                continue
            x = pos[k]
            ix = x - lo
            if crossed[ix] == 1:
                out[k] = x
                landed[ix] = 1
                continue
            if landed[ix] == 0 and chi[k] == 1:
                out[k] = x
                landed[ix] = 1
                continue
            has_next = nxt[k] >= 0
            y = pos[nxt[k]] if has_next else 0
            z = x
            steps = 0
            while True:
                z += 1
                if has_next and z == y:
                    break
                iz = z - lo
                if mover[iz] == 1:
                    break
                if stayer[iz] == 1:
                    continue
                steps += 1
                if steps == jump[k]:
                    break
            out[k] = z
            landed[z - lo] = 1
        for k in range(n):
            if cls[k] != r:
                continue
            a = pos[k] - lo
            b = out[k] - lo
            if a == b:
                stayer[a] = 1
            else:
                mover[a] = 1
                for s in range(a + 1, b):
                    crossed[s] = 1
    return out


# -------------------------------------------------------- quadrant ----

@njit(cache=True)
def quadrant_grow(vin, hin, b1, b2, seed):
    """Diagonal-by-diagonal completion of the triangle x + y <= n.

    ``vin[x-1]`` is the entrance arrow below vertex (x, 1) and ``hin[y-1]``
    the entrance arrow left of vertex (1, y). Returns arrays
    ``vert[y, x-1]`` = arrow (x, y) -> (x, y+1) (row 0 = entrances) and
    ``hor[y-1, x]`` = arrow (x, y) -> (x+1, y) (column 0 = entrances);
    entries outside the triangle are 0.
    """
    n = vin.shape[0] + 1
    vert = np.zeros((n + 1, n), np.uint8)
    hor = np.zeros((n, n + 1), np.uint8)
    for x in range(1, n):
        vert[0, x - 1] = vin[x - 1]
    for y in range(1, n):
        hor[y - 1, 0] = hin[y - 1]
    for d in range(2, n + 1):
        for x in range(1, d):
            y = d - x
            i1 = vert[y - 1, x - 1]
            j1 = hor[y - 1, x - 1]
            p1 = _transfer(i1, j1, 1, b1, b2)
            o = 1 if key_uniform(seed, y, x, 0, STREAM_QUADRANT) < p1 else 0
            hor[y - 1, x] = o
            vert[y, x - 1] = i1 + j1 - o
    return vert, hor
