"""Experiment runners E1-E8.

Each runner turns an :class:`ExperimentConfig` into :class:`ResultRecord`
rows. All randomness is derived from ``config.seed`` through keyed seeds,
so a configuration fixes every emitted number regardless of the worker
count.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable

import numpy as np

from .. import _kernels as K
from ..core import (
    ConfigInvalid,
    NoneFound,
    OrderViolation,
    ParticleConfiguration,
    IdentityViolation,
    SixVertexError,
    bernoulli_occupancy,
    keyed_uniform,
    pack_bits,
    spawn_seed,
)
from ..dynamics import (
    _check_order,
    double_sided_initial,
    bernoulli_initial,
    evolve_half_plane_infinite,
    monotone_step,
    observe_half_plane,
    ring_displacements,
    run_line,
    run_ring,
)
from ..gibbs import histogram_from_keys, sample_mu_windows, window_keys
from ..multiclass import CoupledSystem, CouplingAudit, higher_rank_step, tagged_speed_tail
from ..pde import FluxModel, GridField, evolve_Q, riemann_solution, shock_speed
from ..stats import current_rate, mean_sigma, total_current, tv_distance
from .config import ExperimentConfig, margin_speed
from .io import ResultRecord

NAN = float("nan")


class _Recorder:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.rows: list[ResultRecord] = []
        self.series: dict = {}
        self.t0 = time.perf_counter()

    def add(self, N, statistic, value, target=NAN, sigma=NAN, passed=True):
        self.rows.append(ResultRecord(self.cfg.kind, self.cfg.seed, int(N), statistic, float(value),
                                      float(target), float(sigma), bool(passed),
                                      time.perf_counter() - self.t0, self.cfg.hash))


def _pmap(fn: Callable, tasks: list, workers: int) -> list:
    """Ordered map, optionally over a process pool."""
    if workers <= 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(workers) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _non_increasing(values) -> list[bool]:
    return [True] + [b <= a for a, b in zip(values, values[1:])]


def _decreasing(values) -> list[bool]:
    return [True] + [b < a for a, b in zip(values, values[1:])]


def _within(value, target, sigma, z) -> bool:
    return abs(value - target) <= z * sigma


# ----------------------------------------------------------------------- E1 --

def pde_corner_integrals(field: GridField, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """``int_0^y int_0^x G`` for every ``(y, x)`` pair of the grids (rows follow ``ys``)."""
    dx = np.diff(field.edges)
    C = np.concatenate([np.zeros((field.u.shape[0], 1)), np.cumsum(field.u * dx, axis=1)], axis=1)
    Cx = np.stack([np.interp(xs, field.edges - field.edges[0], c) for c in C])
    t0, t1 = field.times[:-1], field.times[1:]
    W = np.clip(np.minimum(t1[None, :], ys[:, None]) - t0[None, :], 0.0, None)
    return W @ Cx


def max_rectangle(D: np.ndarray) -> float:
    """Largest ``|D(y2,x2) - D(y1,x2) - D(y2,x1) + D(y1,x1)|`` over grid rectangles."""
    diff = D[:, None, :] - D[None, :, :]
    return float(np.max(np.ptp(diff, axis=2)))


def _e1_replica(args):
    occ0, b1, b2, seed, L, N, Xs, Ys, I = args
    occ_hist, _ = K.ring_run_keyed(occ0, b1, b2, seed, 0, L)
    S = np.zeros((L + 1, N + 1))
    S[1:, 1:] = np.cumsum(np.cumsum(occ_hist[1:], axis=0), axis=1)
    return max_rectangle(S[np.ix_(Ys, Xs)] / N**2 - I)


def run_e1(cfg: ExperimentConfig, rec: _Recorder) -> None:
    p = cfg.params
    lam = p.aspect
    prof = cfg.profile.density("torus")
    field = evolve_Q(prof, lam, dx=float(cfg.opt("dx")), flux=FluxModel(p.kappa), keep_history=True)
    grid = int(cfg.opt("grid"))
    tol = cfg.tol("max_deviation")
    for N in cfg.sizes:
        L = max(1, math.floor(lam * N))
        Xs = np.unique(np.append(np.arange(0, N + 1, max(1, N // grid)), N))
        Ys = np.unique(np.append(np.arange(0, L + 1, max(1, L // grid)), L))
        I = pde_corner_integrals(field, Xs / N, Ys / N)
        tasks = [(cfg.profile.sample_ring(N, spawn_seed(cfg.seed, 1, N, r)), p.b1, p.b2,
                  spawn_seed(cfg.seed, 2, N, r), L, N, Xs, Ys, I) for r in range(cfg.replicas)]
        devs = _pmap(_e1_replica, tasks, cfg.workers)
        m, s = mean_sigma(devs)
        rec.add(N, "max_rectangle_deviation", m, 0.0, s, m <= tol)


# ----------------------------------------------------------------------- E2 --

def _e2_replica(args):
    theta, rho, times, window, params, s_init, s_dyn, cap = args
    occ = observe_half_plane(double_sided_initial(theta, rho, s_init), times, window, params,
                             s_dyn, cap)
    return [occ[t] for t in times]


def shock_location(occ: np.ndarray, lo: int, theta: float, rho: float) -> float:
    """Mass-balance position of a single jump from ``theta`` to ``rho`` in ``[lo, lo + len)``."""
    a, b = lo, lo + occ.size
    return (rho * b - theta * a - float(occ.sum())) / (rho - theta)


def _block_deviation(mean_occ: np.ndarray, lo: int, N: int, w: int, theta, rho, flux) -> float:
    nb = mean_occ.size // w
    x = lo + np.arange(nb * w)
    exact = riemann_solution(theta, rho, (x + 0.5) / N, flux).reshape(nb, w).mean(1)
    emp = mean_occ[:nb * w].reshape(nb, w).mean(1)
    return float(np.max(np.abs(emp - exact)))


def _moving_average(x: np.ndarray, w: int) -> np.ndarray:
    c = np.concatenate([[0.0], np.cumsum(x)])
    return (c[w:] - c[:-w]) / w


def fan_edges(mean_occ: np.ndarray, lo: int, N: int, w: int, theta: float, rho: float,
              delta: float) -> tuple[float, float]:
    """Edges of the non-constant region containing ``x = N``.

    The replica-averaged profile is smoothed over ``w`` sites and scanned
    outwards from ``x = N`` until it returns within ``delta`` of the
    left/right states.
    """
    sm = _moving_average(mean_occ, w)
    centers = lo + np.arange(sm.size) + (w - 1) / 2.0 + 0.5
    c = int(np.clip(np.searchsorted(centers, N), 0, sm.size - 1))
    i = c
    while i > 0 and sm[i] < theta - delta:
        i -= 1
    j = c
    while j < sm.size - 1 and sm[j] > rho + delta:
        j += 1
    return float(centers[i] / N), float(centers[j] / N)


def run_e2(cfg: ExperimentConfig, rec: _Recorder) -> None:
    p = cfg.params
    flux = FluxModel(p.kappa)
    theta, rho = cfg.profile.theta, cfg.profile.rho
    if cfg.profile.kind != "double-sided" or theta == rho:
        raise ConfigInvalid("E2 needs a double-sided profile with distinct states")
    shock = theta < rho
    sizes = list(cfg.sizes)
    frac = float(cfg.opt("window"))
    if shock:
        speed = shock_speed(theta, rho, flux)
        wins = {N: (round((speed - 0.5) * N), round((speed + 0.5) * N)) for N in sizes}
    else:
        lo_xi, hi_xi = float(flux.phi_prime(theta)) - 0.15, float(flux.phi_prime(rho)) + 0.15
        wins = {N: (math.floor(lo_xi * N), math.ceil(hi_xi * N)) for N in sizes}
    glo = min(w[0] for w in wins.values())
    ghi = max(w[1] for w in wins.values())
    tasks = [(theta, rho, sizes, (glo, ghi), p, spawn_seed(cfg.seed, 1, r), spawn_seed(cfg.seed, 2, r),
              int(cfg.opt("cap"))) for r in range(cfg.replicas)]
    runs = _pmap(_e2_replica, tasks, cfg.workers)
    prev_err = None
    for k, N in enumerate(sizes):
        lo, hi = wins[N]
        occs = np.stack([run[k][lo - glo:hi - glo] for run in runs]).astype(float)
        mean_occ = occs.mean(0)
        w = max(1, round(frac * N))
        dev = _block_deviation(mean_occ, lo, N, w, theta, rho, flux)
        rec.series[f"E2 density N={N}"] = ((lo + np.arange(hi - lo) + 0.5) / N, mean_occ)
        if shock:
            locs = np.array([shock_location(o, lo, theta, rho) for o in occs]) / (speed * N)
            m, s = mean_sigma(locs)
            err = abs(m - 1.0)
            rec.add(N, "shock_location_ratio", m, 1.0, s, err <= cfg.tol("shock_ratio"))
            rec.add(N, "shock_abs_error", err, 0.0, s, prev_err is None or err <= prev_err)
            prev_err = err
        else:
            a = round(N - w / 2)
            vals = occs[:, a - lo:a - lo + w].mean(1)
            m, s = mean_sigma(vals)
            target = float(riemann_solution(theta, rho, 1.0, flux))
            rec.add(N, "fan_density_at_1", m, target, s, abs(m - target) <= cfg.tol("fan_density"))
            left, right = fan_edges(mean_occ, lo, N, w, theta, rho, float(cfg.opt("edge_delta")))
            for name, val, target in (("fan_left_edge", left, flux.phi_prime(theta)),
                                      ("fan_right_edge", right, flux.phi_prime(rho))):
                rec.add(N, name, val, float(target), NAN, abs(val - target) <= cfg.tol("fan_edge"))
        rec.add(N, "window_deviation", dev, 0.0, NAN, dev <= cfg.tol("window_deviation"))


# ----------------------------------------------------------------------- E3 --

def _e3_replica(args):
    rho, T, width, params, s_init, s_dyn = args
    traj = evolve_half_plane_infinite(bernoulli_initial(rho, s_init), T, (0, width), params,
                                      s_dyn, record="final")
    occ = traj.states[-1].occupancy(0, width).astype(float)
    edges = traj.horizontal[-1][1:].astype(float)
    return occ.mean(), (occ[:-1] * occ[1:]).mean(), edges.mean()


def run_e3(cfg: ExperimentConfig, rec: _Recorder) -> None:
    p = cfg.params
    rho = cfg.profile.rho
    width = int(cfg.opt("width"))
    z = cfg.tol("z")
    for T in cfg.sizes:
        tasks = [(rho, T, width, p, spawn_seed(cfg.seed, 1, T, r), spawn_seed(cfg.seed, 2, T, r))
                 for r in range(cfg.replicas)]
        stats = np.array(_pmap(_e3_replica, tasks, cfg.workers))
        for col, (name, target) in enumerate((("site_density", rho), ("pair_product", rho * rho),
                                              ("edge_density", float(p.flux(rho))))):
            m, s = mean_sigma(stats[:, col])
            rec.add(T, name, m, target, s, _within(m, target, s, z))


# ----------------------------------------------------------------------- E4 --

def continuity_point(G, u0: float, h: float, threshold: float, step: float = 0.01) -> float:
    """Grid point nearest ``u0`` where ``|G(u +- h) - G(u)| < threshold``.

    Raises
    ------
    NoneFound
        If every grid point is within reach of a discontinuity.
    """
    us = np.round(np.arange(0.0, 1.0, step), 10)
    g = G(us)
    ok = (np.abs(G(us + h) - g) < threshold) & (np.abs(G(us - h) - g) < threshold)
    if not ok.any():
        raise NoneFound("no continuity point on the grid")
    dist = np.abs(((us - u0) + 0.5) % 1.0 - 0.5)
    dist[~ok] = np.inf
    return float(us[int(np.argmin(dist))])


def _e4_bits(args):
    occ0, b1, b2, seed, x, y = args
    N = occ0.size
    oh, hh = K.ring_run_keyed(occ0, b1, b2, seed, 0, y + 1)
    cols1, cols2 = [x], [x, (x + 1) % N]
    hc1, hc2 = [(x - 1) % N, x], [(x - 1) % N, x, (x + 1) % N]
    one = np.concatenate([oh[y - 1:y + 1][:, cols1].ravel(), hh[y - 1:y][:, hc1].ravel()])
    two = np.concatenate([oh[y - 1:y + 2][:, cols2].ravel(), hh[y - 1:y + 1][:, hc2].ravel()])
    return one, two


def run_e4(cfg: ExperimentConfig, rec: _Recorder) -> None:
    p = cfg.params
    v = float(cfg.opt("v"))
    if not 0.0 < v < p.aspect:
        raise ConfigInvalid("E4 needs 0 < v < aspect")
    prof = cfg.profile.density("torus")
    G = evolve_Q(prof, v, dx=float(cfg.opt("dx")), flux=FluxModel(p.kappa))
    u = continuity_point(G, float(cfg.opt("u")), float(cfg.opt("h")), float(cfg.opt("threshold")))
    rho = float(G(u))
    rec.add(0, "continuity_u", u)
    rec.add(0, "continuity_rho", rho)
    refs = {}
    for size in (1, 2):
        shape, keys = window_keys(sample_mu_windows(rho, size, int(cfg.opt("reference")),
                                                    spawn_seed(cfg.seed, 3, size), p,
                                                    str(cfg.opt("method"))))
        refs[size] = histogram_from_keys(shape, keys)
    tvs = {1: [], 2: []}
    for N in cfg.sizes:
        x, y = math.floor(u * N) % N, math.floor(v * N)
        if y < 1 or y + 1 > math.floor(p.aspect * N):
            raise ConfigInvalid(f"N={N} too small for the observation row")
        tasks = [(cfg.profile.sample_ring(N, spawn_seed(cfg.seed, 1, N, r)), p.b1, p.b2,
                  spawn_seed(cfg.seed, 2, N, r), x, y) for r in range(cfg.replicas)]
        bits = _pmap(_e4_bits, tasks, cfg.workers)
        for size, col in ((1, 0), (2, 1)):
            h = histogram_from_keys(refs[size].shape, pack_bits(np.stack([b[col] for b in bits])))
            tvs[size].append(tv_distance(h, refs[size]))
    tol = cfg.tol("tv_1x1")
    for size in (1, 2):
        trend = _non_increasing(tvs[size])
        for k, N in enumerate(cfg.sizes):
            ok = trend[k] and (size != 1 or N != cfg.sizes[-1] or tvs[size][k] < tol)
            rec.add(N, f"tv_{size}x{size}", tvs[size][k], 0.0, NAN, ok)


# ----------------------------------------------------------------------- E5 --

def nested_initial(n: int, width: int, rho: float, seed: int) -> CoupledSystem:
    """A single model and ``n`` nested models sharing most particles."""
    sites = np.arange(width)
    u, w, c = (keyed_uniform(seed, k, sites) for k in range(3))
    xis = [ParticleConfiguration.from_occupancy(u < rho * (0.7 + 0.3 * m / n)) for m in range(1, n + 1)]
    # half of the sites copy the top model, the rest are independent
    eta = ParticleConfiguration.from_occupancy(np.where(c < 0.5, u < rho, w < rho))
    return CoupledSystem.from_models(eta, xis)


def _audit_rank(n: int, target: int, width: int, steps: int, rho: float, params, seed: int) -> CouplingAudit:
    audit = CouplingAudit()
    r = 0
    while audit.particle_steps < target:
        s = spawn_seed(seed, n, r)
        sys = nested_initial(n, width, rho, s)
        for t in range(1, steps + 1):
            broken = audit.order_violations
            sys = higher_rank_step(sys, params, s, t, audit)
            # a lost nesting cannot be continued; start a fresh replica
            if audit.particle_steps >= target or audit.order_violations > broken:
                break
        r += 1
    return audit


def ordered_pair(width: int, rho: float, seed: int, single: bool) -> tuple:
    """Label-ordered ``p >= q``: a one-site shift of one particle, or a general push."""
    q = np.flatnonzero(bernoulli_occupancy(rho, 0, width, seed)).astype(np.int64)
    p = q.copy()
    u = keyed_uniform(seed, 2, np.arange(q.size))
    room = np.append(q[1:], np.iinfo(np.int64).max) - q > 1
    if single:
        cand = np.flatnonzero(room[1:]) + 1
        if cand.size:
            p[cand[int(u[0] * cand.size)]] += 1
    else:
        for k in range(q.size - 1, -1, -1):
            nxt = p[k + 1] if k + 1 < q.size else np.iinfo(np.int64).max
            if u[k] < 0.5 and q[k] + 1 < nxt:
                p[k] = q[k] + 1
    return ParticleConfiguration(p, "line"), ParticleConfiguration(q, "line")


def _audit_monotone(target: int, width: int, steps: int, rho: float, params, seed: int) -> tuple[int, int]:
    done = violations = 0
    r = 0
    while done < target:
        s = spawn_seed(seed, 9, r)
        p, q = ordered_pair(width, rho, s, single=r % 2 == 0)
        for t in range(1, steps + 1):
            p, q = monotone_step(p, q, params, s, t)
            done += p.count + q.count
            try:
                _check_order(p, q)
            except OrderViolation:
                violations += 1
                break
            if done >= target:
                break
        r += 1
    return done, violations


def _entry_event(N: int, rho: float, ratio: float, params, seed: int) -> bool:
    lo, hi = -3 * N, 3 * N
    x = np.arange(lo, hi)
    a = bernoulli_occupancy(rho, lo, hi, spawn_seed(seed, 1))
    b = bernoulli_occupancy(rho, lo, hi, spawn_seed(seed, 2))
    inner = (x >= -N) & (x <= N)
    b = np.where(inner, a, b)
    sys = CoupledSystem.from_models(ParticleConfiguration.from_occupancy(a, offset=lo),
                                    [ParticleConfiguration.from_occupancy(b, offset=lo)])
    M = max(1, math.floor(ratio * N))
    I = (-(N // 2), N - math.ceil(2 * M / (1 - params.b2)))
    for t in range(1, M + 1):
        sys = higher_rank_step(sys, params, seed, t)
        diff = np.setxor1d(sys.etas[0].positions, sys.xis[0].positions)
        if np.any((diff >= I[0]) & (diff <= I[1])):
            return True
    return False


def run_e5(cfg: ExperimentConfig, rec: _Recorder) -> None:
    p = cfg.params
    rho = cfg.profile.rho
    width, steps = int(cfg.opt("width")), int(cfg.opt("steps"))
    for n, key in ((1, "rank1_steps"), (2, "rank2_steps")):
        target = int(cfg.opt(key))
        if target <= 0:
            continue
        a = _audit_rank(n, target, width, steps, rho, p, spawn_seed(cfg.seed, 1))
        rec.add(width, f"rank{n}_particle_steps", a.particle_steps, target, NAN, a.particle_steps >= target)
        for name in ("attractivity_violations", "class_violations", "order_violations"):
            val = getattr(a, name)
            rec.add(width, f"rank{n}_{name}", val, 0.0, NAN, val == 0)
    target = int(cfg.opt("monotone_steps"))
    if target > 0:
        mw = int(cfg.opt("monotone_width"))
        done, bad = _audit_monotone(target, mw, steps, rho, p, spawn_seed(cfg.seed, 2))
        rec.add(mw, "monotone_particle_steps", done, target, NAN, done >= target)
        rec.add(mw, "monotone_order_violations", bad, 0.0, NAN, bad == 0)
    ratio = float(cfg.opt("speed_ratio"))
    freqs, sigmas = [], []
    for N in cfg.sizes:
        hits = [_entry_event(N, rho, ratio, p, spawn_seed(cfg.seed, 3, N, r)) for r in range(cfg.replicas)]
        f = float(np.mean(hits))
        freqs.append(f)
        sigmas.append(math.sqrt(max(f * (1 - f), 1e-300) / cfg.replicas))
    for N, f, s, ok in zip(cfg.sizes, freqs, sigmas, _non_increasing(freqs)):
        rec.add(N, "discrepancy_entry_frequency", f, 0.0, s, ok)


# ----------------------------------------------------------------------- E6 --

def line_displacements(W: int, rho: float, steps: int, params, seed: int) -> np.ndarray:
    pos = np.flatnonzero(bernoulli_occupancy(rho, 0, W, spawn_seed(seed, 1))).astype(np.int64)
    hist = K.line_run_keyed(pos, params.b1, params.b2, seed, 0, steps)
    return np.diff(hist, axis=0).ravel()


def ring_steps(W: int, rho: float, steps: int, params, seed: int) -> np.ndarray:
    occ = bernoulli_occupancy(rho, 0, W, spawn_seed(seed, 1))
    oh, hh = K.ring_run_keyed(occ, params.b1, params.b2, seed, 0, steps)
    return np.concatenate([ring_displacements(oh[t], oh[t + 1], hh[t]) for t in range(steps)])


def run_e6(cfg: ExperimentConfig, rec: _Recorder) -> None:
    p = cfg.params
    rho = cfg.profile.rho
    steps, vmax, z = int(cfg.opt("steps")), int(cfg.opt("vmax")), cfg.tol("z")
    for W in cfg.sizes:
        for topo, fn in (("line", line_displacements), ("ring", ring_steps)):
            samples = np.concatenate([fn(W, rho, steps, p, spawn_seed(cfg.seed, 1 if topo == "line" else 2, W, r))
                                      for r in range(cfg.replicas)])
            est = tagged_speed_tail(samples, p.b2, vmax, z)
            rec.add(W, f"{topo}_samples", est.samples, 100000, NAN, est.samples >= 100000)
            for v, tail, s, bound in zip(est.v, est.tail, est.sigma, est.bound):
                rec.add(W, f"{topo}_tail_v{int(v)}", tail, bound, s, tail <= bound + z * s)


# ----------------------------------------------------------------------- E7 --

def _e7_replica(args):
    rho, T, width, ring, params, seed = args
    halo = T * math.ceil(2.0 / (1.0 - params.b2)) + 1
    occ = bernoulli_occupancy(rho, 0, width + 2 * halo, spawn_seed(seed, 1))
    mism = 0
    traj = run_line(ParticleConfiguration.from_occupancy(occ), params, spawn_seed(seed, 2), T)
    try:
        total_current(traj)
    except IdentityViolation:
        mism += 1
    rate = current_rate(traj, (halo, halo + width))
    rtraj = run_ring(ParticleConfiguration.from_occupancy(bernoulli_occupancy(rho, 0, ring, spawn_seed(seed, 3)),
                                                          "ring"), params, spawn_seed(seed, 4), T)
    try:
        total_current(rtraj)
    except IdentityViolation:
        mism += 1
    return rate, mism


def run_e7(cfg: ExperimentConfig, rec: _Recorder) -> None:
    p = cfg.params
    z = cfg.tol("z")
    width, ring = int(cfg.opt("width")), int(cfg.opt("ring"))
    mismatches = trajectories = 0
    for T in cfg.sizes:
        for rho in cfg.opt("rhos"):
            rho = float(rho)
            tasks = [(rho, T, width, ring, p, spawn_seed(cfg.seed, T, round(rho * 1e6), r))
                     for r in range(cfg.replicas)]
            out = _pmap(_e7_replica, tasks, cfg.workers)
            rates = [o[0] for o in out]
            mismatches += sum(o[1] for o in out)
            trajectories += 2 * len(out)
            m, s = mean_sigma(rates)
            target = float(p.flux(rho))
            rec.add(T, f"current_rate_rho{rho:g}", m, target, s, _within(m, target, s, z))
    rec.add(cfg.sizes[-1], "identity_trajectories", trajectories, NAN, NAN, trajectories > 0)
    rec.add(cfg.sizes[-1], "identity_mismatches", mismatches, 0.0, NAN, mismatches == 0)


# ----------------------------------------------------------------------- E8 --

def cylinder_line_geometry(L: int, speed: float) -> tuple[int, int, int]:
    """Margin ``m``, block length ``A`` and ring size ``N`` for comparison window ``[m, A - m]``."""
    m = math.ceil(speed * L)
    A = 2 * m + L
    return m, A, A + 2 * m


def window_discrepancy(L: int, speed: float, rho: float, params, seed: int) -> bool:
    """Whether a ring and a line run, sharing vertex uniforms and the data on
    ``[0, A]``, ever disagree on ``[m, A - m]`` within ``L`` steps."""
    m, A, N = cylinder_line_geometry(L, speed)
    H = L * math.ceil(2.0 / (1.0 - params.b2)) + 4
    core = bernoulli_occupancy(rho, 0, A + 1, spawn_seed(seed, 1))
    ring = np.concatenate([core, bernoulli_occupancy(rho, A + 1, N, spawn_seed(seed, 2))]).astype(np.uint8)
    line = np.concatenate([bernoulli_occupancy(rho, -H, 0, spawn_seed(seed, 3)), core,
                           bernoulli_occupancy(rho, A + 1, N + H, spawn_seed(seed, 4))]).astype(np.uint8)
    for t in range(1, L + 1):
        ring, _ = K.ring_row_keyed(ring, params.b1, params.b2, seed, t)
        line, _, _ = K.line_row_keyed(line, 0, params.b1, params.b2, seed, t, -H)
        if np.any(ring[m:A - m + 1] != line[H + m:H + A - m + 1]):
            return True
    return False


def run_e8(cfg: ExperimentConfig, rec: _Recorder) -> None:
    p = cfg.params
    speed = float(cfg.opt("margin_speed", margin_speed(p)))
    freqs = []
    for L in cfg.sizes:
        hits = [window_discrepancy(L, speed, cfg.profile.rho, p, spawn_seed(cfg.seed, L, r))
                for r in range(cfg.replicas)]
        freqs.append(float(np.mean(hits)))
    for L, f, ok in zip(cfg.sizes, freqs, _decreasing(freqs)):
        rec.add(L, "window_discrepancy_frequency", f, 0.0, math.sqrt(f * (1 - f) / cfg.replicas), ok)


# ------------------------------------------------------------------ dispatch --

RUNNERS = {"E1": run_e1, "E2": run_e2, "E3": run_e3, "E4": run_e4,
           "E5": run_e5, "E6": run_e6, "E7": run_e7, "E8": run_e8}


def run_with_series(cfg: ExperimentConfig) -> tuple[list[ResultRecord], dict]:
    rec = _Recorder(cfg)
    try:
        RUNNERS[cfg.kind](cfg, rec)
    except SixVertexError as e:
        raise type(e)(f"{cfg.kind}: {e}") from e
    return rec.rows, rec.series


def run_experiment(cfg: ExperimentConfig) -> list[ResultRecord]:
    """Run one experiment and return its records.

    Raises
    ------
    ConfigInvalid
        If the configuration does not suit the experiment; other library
        errors propagate with the experiment id prefixed.
    """
    return run_with_series(cfg)[0]
