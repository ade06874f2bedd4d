"""Deterministic hydrodynamic oracle for ``u_t + phi(u)_x = 0``.

The flux is increasing and concave on ``[0, 1]``, so the Godunov flux of
the finite-volume scheme is the upwind value ``phi(u_left)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import (
    DEFAULT_PARAMS,
    DomainMismatch,
    EmptyInterval,
    EqualStates,
    ModelParams,
    RangeViolation,
    ResolutionTooCoarse,
)

CFL = 0.9


@dataclass(frozen=True)
class FluxModel:
    kappa: float

    def __post_init__(self):
        if not self.kappa > 1.0:
            raise RangeViolation("kappa must exceed 1")

    @classmethod
    def from_params(cls, params: ModelParams = DEFAULT_PARAMS) -> "FluxModel":
        return cls(params.kappa)

    def phi(self, z):
        z = np.asarray(z, dtype=float)
        return self.kappa * z / ((self.kappa - 1.0) * z + 1.0)

    def phi_prime(self, z):
        z = np.asarray(z, dtype=float)
        return self.kappa / ((self.kappa - 1.0) * z + 1.0) ** 2

    def phi_second(self, z):
        z = np.asarray(z, dtype=float)
        k = self.kappa
        return -2.0 * k * (k - 1.0) / ((k - 1.0) * z + 1.0) ** 3

    def phi_prime_inverse(self, s):
        """Density whose characteristic speed is ``s`` in ``[1/kappa, kappa]``."""
        s = np.asarray(s, dtype=float)
        if np.any(s < 1.0 / self.kappa - 1e-12) or np.any(s > self.kappa + 1e-12):
            raise RangeViolation("speed outside [1/kappa, kappa]")
        return np.clip((np.sqrt(self.kappa / s) - 1.0) / (self.kappa - 1.0), 0.0, 1.0)


# ---------------------------------------------------------------- profiles --

@dataclass(frozen=True)
class DensityProfile:
    """Piecewise-constant density.

    ``values[i]`` holds on ``[breakpoints[i], breakpoints[i+1])``. On the
    line the density vanishes outside ``[breakpoints[0], breakpoints[-1])``;
    on the torus that interval is one period.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    domain: str = "line"

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float).reshape(-1)
        v = np.array(self.values, dtype=float).reshape(-1)
        if self.domain not in ("line", "torus"):
            raise RangeViolation(f"unknown domain {self.domain!r}")
        if b.size != v.size + 1 or v.size == 0:
            raise RangeViolation("need one more breakpoint than values")
        if np.any(np.diff(b) <= 0):
            raise RangeViolation("breakpoints must increase strictly")
        if np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
            raise RangeViolation("densities must lie in [0, 1]")
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_grid(cls, a: float, dx: float, values, domain: str = "line") -> "DensityProfile":
        values = np.asarray(values, dtype=float)
        return cls(a + dx * np.arange(values.size + 1), values, domain)

    @classmethod
    def from_function(cls, f: Callable, a: float, b: float, cells: int,
                      domain: str = "line") -> "DensityProfile":
        """Cell averages of ``f`` on a uniform grid (8-point Gauss rule per cell)."""
        edges = np.linspace(a, b, cells + 1)
        nodes, weights = np.polynomial.legendre.leggauss(8)
        mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * np.diff(edges)
        pts = mid[:, None] + half[:, None] * nodes[None, :]
        vals = np.asarray(f(pts), dtype=float) @ weights / 2.0
        return cls(edges, np.clip(vals, 0.0, 1.0), domain)

    @classmethod
    def riemann(cls, theta: float, rho: float, half_width: float) -> "DensityProfile":
        return cls(np.array([-half_width, 0.0, half_width]), np.array([theta, rho]))

    @property
    def period(self) -> float:
        return float(self.breakpoints[-1] - self.breakpoints[0])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        b, v = self.breakpoints, self.values
        if self.domain == "torus":
            x = b[0] + np.mod(x - b[0], self.period)
        i = np.searchsorted(b, x, side="right") - 1
        inside = (i >= 0) & (i < v.size)
        return np.where(inside, v[np.clip(i, 0, v.size - 1)], 0.0)

    def cumulative(self, x):
        """Exact integral of the density from the left end to ``x``."""
        x = np.asarray(x, dtype=float)
        b, v = self.breakpoints, self.values
        cum = np.concatenate([[0.0], np.cumsum(v * np.diff(b))])
        if self.domain == "torus":
            turns = np.floor((x - b[0]) / self.period)
            x = x - turns * self.period
            base = turns * cum[-1]
        else:
            base = 0.0
        xc = np.clip(x, b[0], b[-1])
        i = np.clip(np.searchsorted(b, xc, side="right") - 1, 0, v.size - 1)
        return base + cum[i] + v[i] * (xc - b[i])

    def mass(self) -> float:
        return float(np.sum(self.values * np.diff(self.breakpoints)))

    def to_text(self) -> str:
        """Breakpoint/value table, one pair per line; the final pair closes the last piece."""
        tail = self.values[0] if self.domain == "torus" else 0.0
        lines = [f"# domain {self.domain}"]
        lines += [f"{float(x)!r} {float(y)!r}" for x, y in zip(self.breakpoints, np.append(self.values, tail))]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "DensityProfile":
        domain = "line"
        rows = []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "domain":
                    domain = parts[1]
                continue
            x, y = line.split()
            rows.append((float(x), float(y)))
        arr = np.array(rows)
        return cls(arr[:, 0], arr[:-1, 1], domain)


def _cell_averages(profile: DensityProfile, edges: np.ndarray) -> np.ndarray:
    avg = np.diff(profile.cumulative(edges)) / np.diff(edges)
    # cells inside one piece take its value exactly, free of cancellation error
    b, v = profile.breakpoints, profile.values
    if profile.domain == "torus":
        shift = np.floor((edges[:-1] - b[0]) / profile.period) * profile.period
        lo, hi = edges[:-1] - shift, edges[1:] - shift
    else:
        lo, hi = edges[:-1], edges[1:]
    i = np.searchsorted(b, lo, side="right") - 1
    j = np.searchsorted(b, hi, side="left") - 1
    inside = (i == j) & (i >= 0) & (i < v.size)
    avg[inside] = v[i[inside]]
    return avg


# --------------------------------------------------------------- Riemann --

def shock_speed(theta: float, rho: float, flux: FluxModel) -> float:
    """Rankine-Hugoniot speed of the jump from ``theta`` to ``rho``."""
    if theta == rho:
        raise EqualStates("states coincide")
    for s in (theta, rho):
        if not 0.0 <= s <= 1.0:
            raise RangeViolation("states must lie in [0, 1]")
    return float((flux.phi(rho) - flux.phi(theta)) / (rho - theta))


def riemann_solution(theta: float, rho: float, xi, flux: FluxModel):
    """Entropy solution of the Riemann problem at ``x / t = xi``."""
    for s in (theta, rho):
        if not 0.0 <= s <= 1.0:
            raise RangeViolation("states must lie in [0, 1]")
    xi = np.asarray(xi, dtype=float)
    if theta == rho:
        return np.full_like(xi, theta)
    if theta < rho:
        return np.where(xi <= shock_speed(theta, rho, flux), theta, rho)
    lo, hi = float(flux.phi_prime(theta)), float(flux.phi_prime(rho))
    inner = flux.phi_prime_inverse(np.clip(xi, lo, hi))
    return np.where(xi <= lo, theta, np.where(xi >= hi, rho, inner))


def riemann_breaks(theta: float, rho: float, flux: FluxModel) -> tuple:
    """Self-similar speeds where the Riemann solution is not smooth."""
    if theta == rho:
        return ()
    if theta < rho:
        return (shock_speed(theta, rho, flux),)
    return (float(flux.phi_prime(theta)), float(flux.phi_prime(rho)))


# ---------------------------------------------------------------- solvers --

@dataclass(frozen=True)
class GridField:
    """Solver output: cell values ``u[n]`` holding on ``[times[n], times[n+1])``."""

    edges: np.ndarray
    times: np.ndarray
    u: np.ndarray
    domain: str

    def profile(self, n: int = -1) -> DensityProfile:
        return DensityProfile(self.edges, np.clip(self.u[n], 0.0, 1.0), self.domain)


def _upwind(u: np.ndarray, t: float, dx: float, flux: FluxModel, periodic: bool,
            keep: bool) -> tuple[np.ndarray, list, list]:
    dt_max = CFL * dx / flux.kappa
    steps = max(1, math.ceil(t / dt_max - 1e-12)) if t > 0 else 0
    u = u.copy()
    hist, times = [u.copy()], [0.0]
    done = 0.0
    for n in range(steps):
        dt = min(dt_max, t - done)
        f = flux.phi(u)
        left = np.roll(f, 1) if periodic else np.concatenate([[0.0], f[:-1]])
        u = u - (dt / dx) * (f - left)
        done += dt
        if keep:
            hist.append(u.copy())
            times.append(done)
    if not keep:
        hist, times = [u], [done]
    return u, hist, times


def _check_dx(dx: float, max_dx: float) -> None:
    if dx > max_dx:
        raise ResolutionTooCoarse(f"dx={dx} exceeds the configured maximum {max_dx}")


def evolve_P(profile: DensityProfile, t: float, dx: float = 1e-2,
             flux: FluxModel | None = None, margin: float = 0.0,
             max_dx: float = 0.1, keep_history: bool = False):
    """Entropy solution on the line at time ``t`` (Godunov/upwind scheme).

    The grid extends past ``b`` by one cell per time step plus ``margin``,
    which covers the scheme's numerical domain of dependence, so no mass
    leaves it. Returns a :class:`DensityProfile`, or a :class:`GridField`
    with ``keep_history``.
    """
    if profile.domain != "line":
        raise DomainMismatch("evolve_P expects a line profile")
    if t < 0:
        raise RangeViolation("t must be >= 0")
    flux = flux or FluxModel.from_params()
    _check_dx(dx, max_dx)
    a = float(profile.breakpoints[0])
    steps = math.ceil(t / (CFL * dx / flux.kappa) - 1e-12) if t > 0 else 0
    b = float(profile.breakpoints[-1]) + (steps + 2) * dx + margin
    cells = max(1, math.ceil((b - a) / dx))
    edges = a + dx * np.arange(cells + 1)
    u0 = _cell_averages(profile, edges)
    u, hist, times = _upwind(u0, t, dx, flux, False, keep_history)
    if keep_history:
        return GridField(edges, np.array(times + [t]), np.array(hist), "line")
    return DensityProfile(edges, np.clip(u, 0.0, 1.0), "line")


def evolve_Q(profile: DensityProfile, t: float, dx: float | None = None,
             flux: FluxModel | None = None, max_dx: float = 0.1,
             keep_history: bool = False):
    """Entropy solution on the torus at time ``t``."""
    if profile.domain != "torus":
        raise DomainMismatch("evolve_Q expects a torus profile")
    if t < 0:
        raise RangeViolation("t must be >= 0")
    flux = flux or FluxModel.from_params()
    L = profile.period
    dx = dx if dx is not None else L / 200
    _check_dx(dx, max_dx)
    cells = max(1, round(L / dx))
    edges = profile.breakpoints[0] + (L / cells) * np.arange(cells + 1)
    u0 = _cell_averages(profile, edges)
    u, hist, times = _upwind(u0, t, L / cells, flux, True, keep_history)
    if keep_history:
        return GridField(edges, np.array(times + [t]), np.array(hist), "torus")
    return DensityProfile(edges, np.clip(u, 0.0, 1.0), "torus")


# -------------------------------------------------------------- distances --

def delta_distance(u: DensityProfile, v: DensityProfile) -> float:
    """``sup_x |int^x u - int^x v|``, exact for piecewise-constant inputs.

    On the torus both integrals start at the common left end of the period.
    """
    if u.domain != v.domain:
        raise DomainMismatch("profiles live on different domains")
    if u.domain == "torus":
        if not (np.isclose(u.breakpoints[0], v.breakpoints[0]) and np.isclose(u.period, v.period)):
            raise DomainMismatch("tori differ")
        pts = np.union1d(u.breakpoints, v.breakpoints)
        pts = pts[pts <= u.breakpoints[-1]]
    else:
        pts = np.union1d(u.breakpoints, v.breakpoints)
    return float(np.max(np.abs(u.cumulative(pts) - v.cumulative(pts))))


def finite_speed_check(u: DensityProfile, v: DensityProfile, A: float, B: float, t: float,
                       c: float | None = None, dx: float = 1e-2,
                       flux: FluxModel | None = None) -> bool:
    """Solutions from data agreeing on ``[A, B]`` agree on ``[A + ct, B - ct]``.

    With ``c >= kappa / CFL`` the upwind scheme's own domain of dependence
    lies inside the cone, so agreement is exact; otherwise the L1 mismatch
    must stay below ``10 dx``.

    Raises
    ------
    EmptyInterval
        If ``B - A < 2ct``.
    """
    flux = flux or FluxModel.from_params()
    c = 2.0 * flux.kappa if c is None else c
    if B - A < 2 * c * t:
        raise EmptyInterval("interval shrinks to nothing")
    if u.domain != v.domain:
        raise DomainMismatch("profiles live on different domains")
    if u.domain == "line":
        a = min(u.breakpoints[0], v.breakpoints[0])
        b = max(u.breakpoints[-1], v.breakpoints[-1])
        uu = evolve_P(_merge_support(u, a, b), t, dx, flux)
        vv = evolve_P(_merge_support(v, a, b), t, dx, flux)
    else:
        uu = evolve_Q(u, t, dx, flux)
        vv = evolve_Q(v, t, dx, flux)
    edges = uu.breakpoints
    lo, hi = A + c * t, B - c * t
    inside = (edges[:-1] >= lo) & (edges[1:] <= hi)
    diff = np.abs(uu.values[inside] - vv.values[inside])
    if c >= flux.kappa / CFL:
        return bool(np.all(diff <= 1e-12))
    return bool(np.sum(diff) * dx <= 10 * dx)


def _merge_support(p: DensityProfile, a: float, b: float) -> DensityProfile:
    bp, vals = list(p.breakpoints), list(p.values)
    if a < bp[0]:
        bp, vals = [a] + bp, [0.0] + vals
    if b > bp[-1]:
        bp, vals = bp + [b], vals + [0.0]
    return DensityProfile(np.array(bp), np.array(vals))


# ------------------------------------------------------- entropy residual --

def _bump(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1.0, (1.0 - s * s) ** 4, 0.0)


def _bump_prime(s):
    s = np.asarray(s, dtype=float)
    return np.where(np.abs(s) < 1.0, -8.0 * s * (1.0 - s * s) ** 3, 0.0)


_BUMP_ANTI = np.polynomial.Polynomial([1, 0, -4, 0, 6, 0, -4, 0, 1]).integ()


def _bump_integral(a, b):
    """``int_a^b (1 - s^2)^4 ds`` restricted to ``[-1, 1]``."""
    a = np.clip(a, -1.0, 1.0)
    b = np.clip(b, -1.0, 1.0)
    return _BUMP_ANTI(b) - _BUMP_ANTI(a)


@dataclass(frozen=True)
class BumpFamily:
    """Tensor bumps ``B((x - x0)/rx) B((t - t0)/rt)`` with ``B(s) = (1 - s^2)^4``."""

    x0: np.ndarray
    t0: np.ndarray
    rx: np.ndarray
    rt: np.ndarray

    @classmethod
    def dyadic(cls, x_range: tuple, t_range: tuple, levels: int = 3) -> "BumpFamily":
        """Centres on dyadic grids: level ``l`` uses radius ``L / 2**(l+1)`` and spacing of one radius."""
        xs, ts, rxs, rts = [], [], [], []
        Lx = x_range[1] - x_range[0]
        Lt = t_range[1] - t_range[0]
        for lev in range(levels):
            rx, rt = Lx / 2 ** (lev + 1), Lt / 2 ** (lev + 1)
            cx = x_range[0] + rx * np.arange(0, 2 ** (lev + 1) + 1)
            ct = t_range[0] + rt * np.arange(0, 2 ** (lev + 1) + 1)
            X, T = np.meshgrid(cx, ct, indexing="ij")
            xs.append(X.ravel()); ts.append(T.ravel())
            rxs.append(np.full(X.size, rx)); rts.append(np.full(X.size, rt))
        return cls(np.concatenate(xs), np.concatenate(ts), np.concatenate(rxs), np.concatenate(rts))

    def __len__(self) -> int:
        return int(self.x0.size)


def _c_grid(n: int = 21) -> np.ndarray:
    return np.linspace(0.0, 1.0, n)


def entropy_residual(solution, flux: FluxModel | None = None, family: BumpFamily | None = None,
                     c_grid=None, x_range: tuple | None = None, t_max: float | None = None,
                     order: int = 24) -> float:
    """Most negative Kruzkov entropy functional over test functions and constants.

    For a constant ``c`` and a test function ``f >= 0`` on ``[0, T]`` the functional is
    ``iint (|G - c| f_t + |phi(G) - phi(c)| f_x) dx dt + int |G(x,0) - c| f(x,0) dx
    - int |G(x,T) - c| f(x,T) dx``; the last term vanishes for test functions
    supported below ``T``. Entropy solutions make it non-negative.

    Parameters
    ----------
    solution : GridField or SelfSimilar
        Solver output, integrated exactly cell by cell, or a self-similar
        closed form, integrated by Gauss-Legendre quadrature split wherever
        ``G`` or ``|G - c|`` fails to be smooth.
    family : BumpFamily, optional
        Default: dyadic bumps over ``x_range x [0, t_max]``. Bumps leaving a
        grid field's spatial domain are skipped.
    """
    flux = flux or FluxModel.from_params()
    cs = _c_grid() if c_grid is None else np.asarray(c_grid, dtype=float)
    if isinstance(solution, GridField):
        xr = x_range or (solution.edges[0], solution.edges[-1])
        family = family or BumpFamily.dyadic(xr, (0.0, solution.times[-1]))
        return _residual_grid(solution, flux, family, cs)
    if x_range is None or t_max is None:
        raise RangeViolation("closed forms need x_range and t_max")
    family = family or BumpFamily.dyadic(x_range, (0.0, t_max))
    return _residual_closed(solution, flux, family, cs, float(t_max), order)


def _residual_grid(field: GridField, flux: FluxModel, fam: BumpFamily, cs: np.ndarray) -> float:
    e, tm, U = field.edges, field.times, field.u
    ntime = U.shape[0]
    if tm.size != ntime + 1:
        raise RangeViolation("grid field needs one more time than states")
    worst = np.inf
    G = U[:, None, :]
    absG = np.abs(G - cs[None, :, None])
    absF = np.abs(flux.phi(G) - flux.phi(cs)[None, :, None])
    tol = 1e-12 * (e[-1] - e[0])
    for x0, t0, rx, rt in zip(fam.x0, fam.t0, fam.rx, fam.rt):
        if x0 - rx < e[0] - tol or x0 + rx > e[-1] + tol:
            continue
        bx = rx * _bump_integral((e[:-1] - x0) / rx, (e[1:] - x0) / rx)
        bt = rt * _bump_integral((tm[:-1] - t0) / rt, (tm[1:] - t0) / rt)
        ft = _bump((tm - t0) / rt)
        fx = _bump((e - x0) / rx)
        # f_t term: int_cell [f(x, t_{n+1}) - f(x, t_n)] dx; f_x term: int_step [f(x_{i+1}) - f(x_i)] dt
        val = np.einsum("n,i,nci->c", np.diff(ft), bx, absG)
        val += np.einsum("n,i,nci->c", bt, np.diff(fx), absF)
        val += ft[0] * (absG[0] @ bx)
        val -= ft[-1] * (absG[-1] @ bx)
        worst = min(worst, float(val.min()))
    return worst


@dataclass(frozen=True)
class SelfSimilar:
    """Closed form ``G(x, t) = g(x / t)`` with initial data ``left`` / ``right`` about 0."""

    g: Callable
    left: float
    right: float
    breaks: tuple
    fan: tuple | None = None

    def __call__(self, x, t):
        return self.g(np.asarray(x, dtype=float) / t)

    def initial(self, x):
        return np.where(np.asarray(x) < 0.0, self.left, self.right)

    def level_speeds(self, cs: np.ndarray, flux: FluxModel) -> np.ndarray:
        """Speeds inside a fan where ``G`` crosses each constant in ``cs``."""
        if self.fan is None:
            return np.zeros(0)
        lo, hi = self.fan
        s = flux.phi_prime(cs)
        return s[(s > lo) & (s < hi)]


def riemann_field(theta: float, rho: float, flux: FluxModel) -> SelfSimilar:
    """Closed-form entropy solution of the Riemann problem."""
    br = riemann_breaks(theta, rho, flux)
    fan = br if theta > rho else None
    return SelfSimilar(lambda xi: riemann_solution(theta, rho, xi, flux), theta, rho, br, fan)


def glued_jump_field(left: float, right: float, speed: float) -> SelfSimilar:
    """A single jump travelling at ``speed`` regardless of admissibility."""
    return SelfSimilar(lambda xi: np.where(xi <= speed, left, right), left, right, (speed,))


def _gl_pieces(cuts, order):
    nodes, weights = np.polynomial.legendre.leggauss(order)
    cuts = np.unique(cuts)
    a, b = cuts[:-1], cuts[1:]
    pts = 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * nodes[None, :]
    w = 0.5 * (b - a)[:, None] * weights[None, :]
    return pts.ravel(), w.ravel()


def _residual_closed(sol: SelfSimilar, flux, fam, cs, T, order) -> float:
    worst = np.inf
    speeds = np.concatenate([np.asarray(sol.breaks, float), sol.level_speeds(cs, flux)])
    speeds = speeds[speeds != 0]
    for x0, t0, rx, rt in zip(fam.x0, fam.t0, fam.rx, fam.rt):
        xa, xb = x0 - rx, x0 + rx
        ta, tb = max(0.0, t0 - rt), min(T, t0 + rt)
        if tb <= ta:
            continue
        tc = np.concatenate([[ta, tb], xa / speeds, xb / speeds])
        tq, tw = _gl_pieces(tc[(tc >= ta) & (tc <= tb)], order)
        acc = np.zeros(cs.size)
        for t, wt in zip(tq, tw):
            xc = np.concatenate([[xa, xb], speeds * t])
            xq, xw = _gl_pieces(xc[(xc >= xa) & (xc <= xb)], order)
            g = sol(xq, t)
            sx = (xq - x0) / rx
            ft = _bump(sx) * _bump_prime((t - t0) / rt) / rt
            fx = _bump_prime(sx) / rx * _bump((t - t0) / rt)
            absG = np.abs(g[None, :] - cs[:, None])
            absF = np.abs(flux.phi(g)[None, :] - flux.phi(cs)[:, None])
            acc += wt * ((absG * ft[None, :] + absF * fx[None, :]) @ xw)
        for tt, sign in ((0.0, 1.0), (T, -1.0)):
            ftt = float(_bump((tt - t0) / rt))
            if ftt == 0.0:
                continue
            xc = np.concatenate([[xa, xb], speeds * tt])
            xq, xw = _gl_pieces(xc[(xc >= xa) & (xc <= xb)], order)
            g = sol.initial(xq) if tt == 0.0 else sol(xq, tt)
            w = _bump((xq - x0) / rx) * xw
            acc += sign * ftt * (np.abs(g[None, :] - cs[:, None]) @ w)
        worst = min(worst, float(acc.min()))
    return worst
