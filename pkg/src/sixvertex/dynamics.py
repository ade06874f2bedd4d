"""Single-class dynamics on the line, the ring and the half-plane.

Line dynamics move particles left to right: a particle stays with
probability ``b1`` unless its left neighbour just landed on it, otherwise it
jumps a geometric(``b2``) distance capped by the old position of its right
neighbour. Ring rows are sampled exactly from the periodic vertex weights.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels as K
from .core import (
    DEFAULT_PARAMS,
    InfiniteSystem,
    ModelParams,
    NoneFound,
    OrderViolation,
    ParticleConfiguration,
    RangeViolation,
    StepRandomness,
    VertexEnsemble,
    bernoulli_occupancy,
    keyed_uniform,
)

InitialGenerator = Callable[[int, int], np.ndarray]


# ------------------------------------------------------------ trajectory --

@dataclass
class Trajectory:
    """Time-indexed states with the horizontal arrows between them.

    ``states[i]`` is the configuration at time ``t0 + i``. For ring and
    window trajectories ``horizontal[i]`` holds row ``t0 + i + 1`` over the
    edge columns ``[lo - 1, hi)``; finite line trajectories derive their
    horizontal arrows from the tagged positions on demand.
    """

    params: ModelParams
    states: list
    horizontal: np.ndarray | None = None
    lo: int | None = None
    hi: int | None = None
    t0: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def steps(self) -> int:
        return len(self.states) - 1

    @property
    def topology(self) -> str:
        return self.states[0].topology

    @property
    def ensemble(self) -> VertexEnsemble:
        return extract_ensemble(self)


def _horizontal_line(traj: Trajectory, i: int, lo: int, hi: int) -> np.ndarray:
    a, b = traj.states[i].positions, traj.states[i + 1].positions
    return K.horizontal_row(a, b, lo, hi)


def extract_ensemble(traj: Trajectory, x_range: tuple[int, int] | None = None,
                     t_range: tuple[int, int] | None = None) -> VertexEnsemble:
    """Vertex ensemble on columns ``x_range`` and rows ``t_range`` (half-open).

    Rows are time indices ``y`` with ``t0 + 1 <= y <= t0 + steps``: the vertex
    ``(x, y)`` receives the arrow ``eta_{y-1}(x)`` and emits ``eta_y(x)``.
    """
    T = traj.steps
    y_lo, y_hi = t_range if t_range is not None else (traj.t0 + 1, traj.t0 + T + 1)
    if y_lo < traj.t0 + 1 or y_hi > traj.t0 + T + 1 or y_hi <= y_lo:
        raise RangeViolation("row range outside trajectory")
    topo = traj.topology
    if topo == "ring":
        N = traj.states[0].size
        x_lo, x_hi = x_range if x_range is not None else (0, N)
    elif topo == "window":
        x_lo, x_hi = x_range if x_range is not None else (traj.lo, traj.hi)
        if x_lo < traj.lo or x_hi > traj.hi:
            raise RangeViolation("columns outside recorded window")
    else:
        if x_range is None:
            allpos = np.concatenate([s.positions for s in traj.states])
            x_lo, x_hi = (int(allpos.min()), int(allpos.max()) + 1) if allpos.size else (0, 1)
        else:
            x_lo, x_hi = x_range
    H, W = y_hi - y_lo, x_hi - x_lo
    vert = np.empty((H + 1, W), np.uint8)
    hor = np.empty((H, W + 1), np.uint8)
    for r in range(H + 1):
        i = y_lo - 1 + r - traj.t0
        s = traj.states[i]
        if topo == "ring":
            vert[r] = s.occupancy(0, s.size)[np.arange(x_lo, x_hi) % s.size]
        else:
            vert[r] = K.occupancy_window(s.positions, x_lo, x_hi)
    for r in range(H):
        i = y_lo - 1 + r - traj.t0
        if topo == "line":
            hor[r] = _horizontal_line(traj, i, x_lo - 1, x_hi)
        elif topo == "ring":
            N = traj.states[0].size
            hor[r] = traj.horizontal[i][np.arange(x_lo - 1, x_hi) % N]
        else:
            c0 = x_lo - traj.lo
            hor[r] = traj.horizontal[i][c0:c0 + W + 1]
    return VertexEnsemble(x_lo, y_lo, vert, hor)


# ------------------------------------------------------------------ line --

def step_line(config: ParticleConfiguration, rnd: StepRandomness) -> ParticleConfiguration:
    """One step of the line dynamics using explicit randomness.

    Raises
    ------
    RandomnessGap
        If a particle sits on a site not covered by ``rnd``.
    """
    if config.topology != "line":
        raise RangeViolation("step_line expects a line configuration")
    pos = config.positions
    chi = rnd.chi_at(pos, 1)
    jump = rnd.jump_at(pos, 1)
    new = K.line_step_core(pos, np.ascontiguousarray(chi), np.ascontiguousarray(jump))
    return ParticleConfiguration(new, "line", None, 0, config.first_label)


def step_line_keyed(config: ParticleConfiguration, params: ModelParams, seed: int,
                    t: int) -> ParticleConfiguration:
    """Same as :func:`step_line` with the keyed randomness of ``(seed, t)``."""
    new = K.line_step_keyed(config.positions, params.b1, params.b2, int(seed), int(t))
    return ParticleConfiguration(new, "line", None, 0, config.first_label)


def run_line(config: ParticleConfiguration, params: ModelParams, seed: int, steps: int,
             t0: int = 0) -> Trajectory:
    hist = K.line_run_keyed(config.positions, params.b1, params.b2, int(seed), int(t0), int(steps))
    states = [ParticleConfiguration(row, "line", None, 0, config.first_label) for row in hist]
    return Trajectory(params, states, t0=t0, meta={"seed": seed})


# ------------------------------------------------------------------ ring --

def ring_row(config: ParticleConfiguration, params: ModelParams, seed: int,
             t: int) -> tuple[ParticleConfiguration, np.ndarray]:
    """Next ring row and its horizontal arrows (entry ``x``: edge ``x -> x+1``)."""
    if config.topology != "ring":
        raise RangeViolation("ring_row expects a ring configuration")
    occ = config.occupancy()
    new, hrow = K.ring_row_keyed(occ, params.b1, params.b2, int(seed), int(t))
    return ParticleConfiguration.from_occupancy(new, "ring"), hrow


def step_ring(config: ParticleConfiguration, params: ModelParams, seed: int,
              t: int) -> ParticleConfiguration:
    """Exact one-row update of the periodic model via seam conditioning."""
    return ring_row(config, params, seed, t)[0]


def run_ring(config: ParticleConfiguration, params: ModelParams, seed: int, steps: int,
             t0: int = 0) -> Trajectory:
    occ_hist, h_hist = K.ring_run_keyed(config.occupancy(), params.b1, params.b2,
                                        int(seed), int(t0), int(steps))
    states = [ParticleConfiguration.from_occupancy(r, "ring") for r in occ_hist]
    return Trajectory(params, states, horizontal=h_hist, lo=0, hi=config.size, t0=t0,
                      meta={"seed": seed})


def ring_displacements(before: np.ndarray, after: np.ndarray, hrow: np.ndarray) -> np.ndarray:
    """One-step displacements of ring particles, in the order of ``before``.

    A particle leaving site ``a`` horizontally travels to the first site
    ``x > a`` (cyclically, possibly ``a`` itself after a full turn) whose
    outgoing vertical arrow is occupied.
    """
    N = before.size
    src = np.flatnonzero(before)
    dst = np.flatnonzero(after)
    disp = np.zeros(src.size, np.int64)
    if dst.size == 0:
        return disp
    movers = hrow[src] == 1
    nxt_idx = np.searchsorted(dst, src[movers], side="right")
    wrap = nxt_idx == dst.size
    target = np.where(wrap, dst[0] + N, dst[np.minimum(nxt_idx, dst.size - 1)])
    disp[movers] = target - src[movers]
    return disp


# --------------------------------------------------------- half-plane row --

def sweep_row(occ: np.ndarray, h_in: int, params: ModelParams, seed: int, t: int,
              x0: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Unconditioned vertex sweep of sites ``x0 ..`` sharing the ring's uniforms."""
    return K.line_row_keyed(np.ascontiguousarray(occ, np.uint8), int(h_in), params.b1,
                            params.b2, int(seed), int(t), int(x0))


# ------------------------------------------------------------ separation --

def separation_depth(b2: float, tol: float = 1e-15) -> int:
    """Left-tail scan depth beyond which a crossing jump has probability < ``tol``."""
    return max(1, math.ceil(math.log(tol * (1.0 - b2)) / math.log(b2)) - 1)


@dataclass(frozen=True)
class SeparatingIntegers:
    sites: np.ndarray
    depth: int
    nsteps: int
    t0: int


def find_separating(seed: int, nsteps: int, window: tuple[int, int],
                    params: ModelParams = DEFAULT_PARAMS, t0: int = 0) -> SeparatingIntegers:
    """Separating integers in ``[window[0], window[1])`` over times ``t0+1 .. t0+nsteps``.

    ``k`` qualifies when, at every step ``t``, site ``k + t`` keeps its
    stay coin at 0 and no jump from a site left of ``k + t`` overshoots it.

    Raises
    ------
    NoneFound
        If the window holds no separating integer.
    """
    if nsteps < 1:
        raise RangeViolation("nsteps must be >= 1")
    depth = separation_depth(params.b2)
    sites = K.separating_in_range(int(window[0]), int(window[1]), int(seed), int(t0),
                                  int(nsteps), params.b1, params.b2, depth)
    if sites.size == 0:
        raise NoneFound(f"no separating integer in [{window[0]}, {window[1]})")
    return SeparatingIntegers(sites, depth, nsteps, t0)


def bernoulli_initial(rho: float, seed: int) -> InitialGenerator:
    """Product Bernoulli(``rho``) occupancy as a keyed site generator."""
    return lambda lo, hi: bernoulli_occupancy(rho, lo, hi, seed)


def double_sided_initial(theta: float, rho: float, seed: int, split: int = 0) -> InitialGenerator:
    """Bernoulli(``theta``) on sites ``< split`` and Bernoulli(``rho``) on sites ``>= split``."""
    def gen(lo, hi):
        x = np.arange(lo, hi)
        return bernoulli_occupancy(np.where(x < split, theta, rho), lo, hi, seed)
    return gen


def evolve_half_plane_infinite(initial: InitialGenerator, nsteps: int, window: tuple[int, int],
                               params: ModelParams = DEFAULT_PARAMS, seed: int = 0,
                               record: str = "all", cap: int = 1_000_000,
                               t0: int = 0) -> Trajectory:
    """Evolve infinite-volume initial data and observe a finite window.

    For every step a pair of one-step separating integers brackets the sites
    that influence the window; particles between them form a finite system
    that evolves exactly as in infinite volume. The brackets are built
    backwards from the final window, so only finitely many sites are sampled.

    Parameters
    ----------
    initial : callable
        ``initial(lo, hi)`` returns the time-``t0`` occupancy of ``[lo, hi)``.
    window : (int, int)
        Observed sites ``[lo, hi)``.
    record : {"all", "final"}
        Keep every time slice of the window or only the final one.
    cap : int
        Maximum number of sites scanned per separating-integer search.

    Raises
    ------
    NoneFound
        If a search exceeds ``cap``.
    """
    if record not in ("all", "final"):
        raise RangeViolation("record must be 'all' or 'final'")
    wlo, whi = int(window[0]), int(window[1])
    if whi <= wlo:
        raise RangeViolation("empty observation window")
    depth = separation_depth(params.b2)
    keep = record == "all"
    slabs, ok = K.bracket_schedule(int(seed), int(t0), int(nsteps), wlo, whi, params.b1,
                                   params.b2, depth, keep, int(cap))
    if not ok:
        raise NoneFound(f"no separating integer within {cap} sites")
    lo0, hi0 = int(slabs[0, 0]), int(slabs[0, 1])
    pos = np.flatnonzero(np.asarray(initial(lo0, hi0))).astype(np.int64) + lo0
    W = whi - wlo
    states = []
    rows = []

    def snapshot(p):
        occ = K.occupancy_window(p, wlo, whi)
        return ParticleConfiguration.from_occupancy(occ, "window", offset=wlo)

    if keep or nsteps == 0:
        states.append(snapshot(pos))
    for t in range(1, nsteps + 1):
        lo, hi = slabs[t]
        i0, i1 = np.searchsorted(pos, [lo, hi])
        pos = pos[i0:i1]
        new = K.line_step_keyed(pos, params.b1, params.b2, int(seed), int(t0 + t))
        if keep or t == nsteps:
            rows.append(K.horizontal_row(pos, new, wlo - 1, whi))
            if not keep:
                states.append(snapshot(pos))
            states.append(snapshot(new))
        pos = new
    horizontal = np.array(rows, dtype=np.uint8).reshape(len(rows), W + 1)
    widths = slabs[1:, 1] - slabs[1:, 0] if nsteps else np.zeros(0, np.int64)
    meta = {"seed": seed, "depth": depth, "region": (lo0, hi0),
            "max_slab": int(widths.max()) if widths.size else 0}
    start = t0 if keep else t0 + nsteps - 1
    if nsteps == 0:
        start = t0
    return Trajectory(params, states, horizontal, wlo, whi, t0=start, meta=meta)


def observe_half_plane(initial: InitialGenerator, times, window: tuple[int, int],
                       params: ModelParams = DEFAULT_PARAMS, seed: int = 0,
                       cap: int = 1_000_000) -> dict:
    """Occupancy of ``window`` at each of ``times`` for infinite-volume initial data.

    One evolution serves every requested time; the brackets keep the
    window inside the simulated slab throughout.
    """
    times = sorted({int(t) for t in times})
    if not times or times[0] < 0:
        raise RangeViolation("times must be non-negative")
    wlo, whi = int(window[0]), int(window[1])
    T = times[-1]
    depth = separation_depth(params.b2)
    slabs, ok = K.bracket_schedule(int(seed), 0, T, wlo, whi, params.b1, params.b2,
                                   depth, True, int(cap))
    if not ok:
        raise NoneFound(f"no separating integer within {cap} sites")
    lo0, hi0 = int(slabs[0, 0]), int(slabs[0, 1])
    pos = np.flatnonzero(np.asarray(initial(lo0, hi0))).astype(np.int64) + lo0
    out = {}
    if times[0] == 0:
        out[0] = K.occupancy_window(pos, wlo, whi)
    for t in range(1, T + 1):
        lo, hi = slabs[t]
        i0, i1 = np.searchsorted(pos, [lo, hi])
        pos = K.line_step_keyed(pos[i0:i1], params.b1, params.b2, int(seed), t)
        if t in out or t in times:
            out[t] = K.occupancy_window(pos, wlo, whi)
    return out


# -------------------------------------------------------------- coupling --

def _check_order(p: ParticleConfiguration, q: ParticleConfiguration) -> None:
    p_last = p.first_label + p.count - 1
    q_last = q.first_label + q.count - 1
    if p.count and q.count:
        if q.first_label < p.first_label or p_last > q_last:
            raise OrderViolation("sentinel ordering p >= q fails at the label ends")
        lo, hi = q.first_label, p_last
        if hi >= lo:
            a = p.positions[lo - p.first_label:hi - p.first_label + 1]
            b = q.positions[lo - q.first_label:hi - q.first_label + 1]
            if np.any(a < b):
                raise OrderViolation("p >= q fails")


def _single_shift(p: ParticleConfiguration, q: ParticleConfiguration) -> int | None:
    """Label where p exceeds q by one when that is the only difference."""
    if p.first_label != q.first_label or p.count != q.count:
        return None
    diff = p.positions - q.positions
    idx = np.flatnonzero(diff)
    if idx.size == 1 and diff[idx[0]] == 1:
        return int(idx[0])
    return None


def _label_coins(labels: np.ndarray, params: ModelParams, seed: int, t: int):
    chi = keyed_uniform(seed, t, labels, 0, K.STREAM_LABEL_CHI) < params.b1
    u = keyed_uniform(seed, t, labels, 0, K.STREAM_LABEL_JUMP)
    jump = 1 + np.floor(np.log(u) / math.log(params.b2)).astype(np.int64)
    return chi, jump


def _handoff_system(pos: np.ndarray, k: int, chi: np.ndarray, jump: np.ndarray) -> np.ndarray:
    """Particle-indexed step where particles ``k-1`` and ``k`` are sampled jointly."""
    n = pos.size
    out = np.empty(n, np.int64)

    def nxt(i):
        return pos[i + 1] if i + 1 < n else None

    def standard(i):
        x = pos[i]
        forced = i > 0 and out[i - 1] == x
        if not forced and chi[i]:
            return x
        t = x + jump[i]
        y = nxt(i)
        return t if y is None else min(t, y)

    i = 0
    while i < n:
        if i == k - 1:
            x = pos[i]
            forced = i > 0 and out[i - 1] == x
            pk, pk1 = pos[k], nxt(k)
            if chi[i] and not forced:
                out[i] = x
                out[k] = standard(k)
            else:
                T = x + jump[i]
                if T < pk:
                    out[i] = T
                    out[k] = pk if chi[k] else (pk + jump[k] if pk1 is None else min(pk + jump[k], pk1))
                elif pk1 is None or T < pk1:
                    out[i] = pk
                    out[k] = T + 1
                else:
                    out[i] = pk
                    out[k] = pk1
            i = k + 1
            continue
        out[i] = standard(i)
        i += 1
    return out


def monotone_step(p: ParticleConfiguration, q: ParticleConfiguration,
                  params: ModelParams = DEFAULT_PARAMS, seed: int = 0, t: int = 1,
                  method: str = "auto") -> tuple[ParticleConfiguration, ParticleConfiguration]:
    """Advance two label-ordered line systems one step so that ``p' >= q'``.

    Randomness is indexed by particle label. When the inputs differ only by
    one particle shifted one site, ``"handoff"`` samples the pair
    ``(k-1, k)`` jointly from the jump of particle ``k-1``. The general
    ``"quantile"`` method drives each label by a single uniform through the
    inverse conditional CDF of its new position; this is monotone because a
    free particle's law dominates that of a forced particle at a lower site
    whenever ``1 - b1 >= b2``.

    Raises
    ------
    OrderViolation
        If ``p >= q`` fails under sentinel conventions.
    """
    if p.topology != "line" or q.topology != "line":
        raise RangeViolation("monotone_step expects line configurations")
    _check_order(p, q)
    shift = _single_shift(p, q)
    if method == "auto":
        method = "handoff" if shift is not None and shift > 0 else "quantile"
    if method == "handoff":
        if shift is None:
            raise RangeViolation("handoff coupling needs a single one-site difference")
        labels = p.labels
        chi, jump = _label_coins(labels, params, seed, t)
        if shift == 0:
            newp = K.line_step_core(p.positions, chi.astype(np.uint8), jump)
            newq = K.line_step_core(q.positions, chi.astype(np.uint8), jump)
        else:
            newp = _handoff_system(p.positions, shift, chi, jump)
            newq = _handoff_system(q.positions, shift, chi, jump)
    elif method == "quantile":
        newp = K.quantile_chain(p.positions, p.first_label, params.b1, params.b2, int(seed), int(t))
        newq = K.quantile_chain(q.positions, q.first_label, params.b1, params.b2, int(seed), int(t))
    else:
        raise RangeViolation(f"unknown coupling method {method!r}")
    return (ParticleConfiguration(newp, "line", None, 0, p.first_label),
            ParticleConfiguration(newq, "line", None, 0, q.first_label))


# ---------------------------------------------------- shift and evolution --

def shift_S(config: ParticleConfiguration, m: int) -> ParticleConfiguration:
    """Shift left by ``m``: the new occupancy at ``x`` is the old one at ``x + m``."""
    m = int(m)
    if config.topology == "ring":
        pos = np.sort((config.positions - m) % config.size)
        return ParticleConfiguration(pos, "ring", config.size)
    if config.topology == "window":
        return ParticleConfiguration(config.positions - m, "window", config.size,
                                     config.offset - m, config.first_label)
    return ParticleConfiguration(config.positions - m, "line", None, 0, config.first_label)


def evolve_M(config: ParticleConfiguration, t: int, params: ModelParams = DEFAULT_PARAMS,
             seed: int = 0, t0: int = 0) -> ParticleConfiguration:
    """Apply ``t`` steps of the dynamics matching the configuration's topology."""
    if t < 0:
        raise RangeViolation("t must be >= 0")
    if config.topology == "ring":
        return run_ring(config, params, seed, t, t0).states[-1] if t else config
    if config.topology == "window":
        raise InfiniteSystem("window configurations cannot be evolved on their own")
    if t == 0:
        return config
    hist = K.line_run_keyed(config.positions, params.b1, params.b2, int(seed), int(t0), int(t))
    return ParticleConfiguration(hist[-1], "line", None, 0, config.first_label)
