"""Estimators: ordering discrepancies, cumulative distances, currents and
histogram comparisons."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from .core import (
    IdentityViolation,
    InfiniteSystem,
    ParticleConfiguration,
    RangeViolation,
    SupportMismatch,
    UnboundedSupport,
)
from .dynamics import Trajectory, extract_ensemble, ring_displacements
from .gibbs import WindowHistogram
from .pde import DensityProfile


def _occ(config, lo: int, hi: int) -> np.ndarray:
    if isinstance(config, ParticleConfiguration):
        if config.topology == "ring":
            return config.occupancy()[np.arange(lo, hi) % config.size]
        return config.occupancy(lo, hi)
    arr = np.asarray(config)
    return arr[lo:hi]


def discrepancy_R(I: tuple[int, int], eta, xi) -> int:
    """1 if ``eta`` and ``xi`` are unordered on sites ``[I[0], I[1])``, else 0.

    Configurations may be :class:`ParticleConfiguration` objects or 0/1
    arrays indexed from site 0.
    """
    lo, hi = int(I[0]), int(I[1])
    if hi < lo:
        raise RangeViolation("reversed interval")
    a = _occ(eta, lo, hi).astype(np.int64)
    b = _occ(xi, lo, hi).astype(np.int64)
    return int(bool(np.any(a > b)) and bool(np.any(a < b)))


def _finite_positions(config) -> np.ndarray:
    if isinstance(config, ParticleConfiguration):
        if config.topology == "window":
            raise UnboundedSupport("a window observes an infinite configuration")
        return config.positions
    return np.flatnonzero(np.asarray(config)).astype(np.int64)


def delta_N(eta, xi, N: int) -> float:
    """``(1/N) max_x |sum_{i <= x} (eta(i) - xi(i))|`` for finite configurations."""
    if N <= 0:
        raise RangeViolation("N must be positive")
    p, q = _finite_positions(eta), _finite_positions(xi)
    pts = np.union1d(p, q)
    if pts.size == 0:
        return 0.0
    cp = np.searchsorted(p, pts, side="right")
    cq = np.searchsorted(q, pts, side="right")
    return float(np.max(np.abs(cp - cq))) / N


def config_profile(eta, N: int, domain: str = "line") -> DensityProfile:
    """The rescaled density ``y -> eta(floor(yN))`` as a piecewise-constant profile."""
    if isinstance(eta, ParticleConfiguration) and eta.topology == "ring":
        occ = eta.occupancy().astype(float)
        return DensityProfile(np.arange(occ.size + 1) / N, occ, "torus")
    p = _finite_positions(eta)
    if p.size == 0:
        return DensityProfile(np.array([0.0, 1.0 / N]), np.zeros(1), domain)
    lo, hi = int(p[0]), int(p[-1]) + 1
    return DensityProfile(np.arange(lo, hi + 1) / N, _occ(eta, lo, hi).astype(float), domain)


def delta_N_profile(eta, f: DensityProfile, N: int) -> float:
    """``sup_x |int_{-inf}^x (eta(floor(yN)) - f(y)) dy|``, exact for piecewise-constant ``f``.

    Raises
    ------
    UnboundedSupport
        If ``eta`` is only observed through a window.
    """
    if N <= 0:
        raise RangeViolation("N must be positive")
    g = config_profile(eta, N, f.domain)
    if f.domain == "torus":
        if g.domain != "torus" or not np.isclose(g.period, f.period):
            raise UnboundedSupport("ring configuration and torus profile differ in period")
        pts = np.union1d(g.breakpoints, f.breakpoints + (g.breakpoints[0] - f.breakpoints[0]))
    else:
        pts = np.union1d(g.breakpoints, f.breakpoints)
    return float(np.max(np.abs(g.cumulative(pts) - f.cumulative(pts))))


@dataclass(frozen=True)
class ProfileEstimate:
    """Cumulative particle counts ``S(x) = sum_{i <= x} eta(i)`` at scale ``N``."""

    N: int
    sites: np.ndarray
    S: np.ndarray
    replicas: int = 1
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_occupancy(cls, occ, N: int, offset: int = 0, **meta) -> "ProfileEstimate":
        occ = np.asarray(occ, dtype=np.int64)
        S = np.cumsum(occ)
        return cls(N, np.arange(offset, offset + occ.size), S, 1, meta)

    def __call__(self, x):
        """Normalized profile ``S(xN) / N``."""
        idx = np.clip(np.floor(np.asarray(x) * self.N).astype(np.int64) - self.sites[0], -1,
                      self.sites.size - 1)
        return np.where(idx < 0, 0.0, self.S[np.maximum(idx, 0)]) / self.N


def trajectory_current(traj: Trajectory) -> tuple[int, int]:
    """Total displacement of all particles and the count of horizontal arrows."""
    topo = traj.topology
    if topo == "window":
        raise InfiniteSystem("current of an infinite system is undefined")
    if topo == "ring":
        disp = 0
        for i in range(traj.steps):
            disp += int(ring_displacements(traj.states[i].occupancy(), traj.states[i + 1].occupancy(),
                                           traj.horizontal[i]).sum())
        return disp, int(traj.horizontal.sum()) if traj.steps else 0
    disp = int((traj.states[-1].positions - traj.states[0].positions).sum())
    edges = int(extract_ensemble(traj).horizontal.sum()) if traj.steps else 0
    return disp, edges


def total_current(traj: Trajectory) -> int:
    """Total distance moved by all particles.

    Raises
    ------
    IdentityViolation
        If the displacement sum differs from the number of horizontal arrows.
    InfiniteSystem
        For window trajectories.
    """
    disp, edges = trajectory_current(traj)
    if disp != edges:
        raise IdentityViolation(f"displacement {disp} != horizontal arrows {edges}")
    return disp


def current_rate(traj: Trajectory, x_range: tuple[int, int] | None = None) -> float:
    """Horizontal arrows per vertex over a window of the trajectory."""
    if traj.steps == 0:
        raise RangeViolation("trajectory has no steps")
    e = extract_ensemble(traj, x_range)
    W, H = e.shape
    return float(e.horizontal[:, 1:].sum()) / (W * H)


# ------------------------------------------------------------- histograms --

def _as_dict(h) -> tuple[dict, tuple | None]:
    if isinstance(h, WindowHistogram):
        return h.as_dict(), h.shape
    d = {k: float(v) for k, v in dict(h).items()}
    tot = sum(d.values())
    if tot <= 0:
        raise RangeViolation("empty histogram")
    return {k: v / tot for k, v in d.items()}, None


def tv_distance(h1, h2) -> float:
    """Half the L1 distance between two normalized histograms.

    Raises
    ------
    SupportMismatch
        If the histograms describe windows of different shapes.
    """
    a, sa = _as_dict(h1)
    b, sb = _as_dict(h2)
    if sa is not None and sb is not None and sa != sb:
        raise SupportMismatch(f"window shapes {sa} and {sb} differ")
    keys = set(a) | set(b)
    return 0.5 * float(sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys))


def histogram_chi2(h1: WindowHistogram, h2: WindowHistogram, min_expected: float = 5.0) -> float:
    """p-value of a chi-square homogeneity test; sparse states are pooled."""
    if h1.shape != h2.shape:
        raise SupportMismatch("window shapes differ")
    keys = np.union1d(h1.keys, h2.keys)
    c1 = dict(zip(h1.keys.tolist(), h1.counts.tolist()))
    c2 = dict(zip(h2.keys.tolist(), h2.counts.tolist()))
    tab = np.array([[c1.get(k, 0) for k in keys], [c2.get(k, 0) for k in keys]], float)
    expected = tab.sum(0) * tab.sum(1)[:, None] / tab.sum()
    rare = expected.min(0) < min_expected
    if rare.any():
        tab = np.column_stack([tab[:, ~rare], tab[:, rare].sum(1)])
        tab = tab[:, tab.sum(0) > 0]
    if tab.shape[1] < 2:
        return 1.0
    return float(sps.chi2_contingency(tab, correction=False)[1])


def mean_sigma(x) -> tuple[float, float]:
    """Sample mean and its standard error."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), float("nan")
    return float(x.mean()), float(x.std(ddof=1) / np.sqrt(x.size))


def multinomial_check(counts: dict, law: dict, total: int, z: float = 4.0) -> list:
    """Outcomes whose empirical frequency differs from ``law`` by more than ``z`` sigma.

    Outcomes seen but absent from ``law`` are always reported.
    """
    bad = []
    for k in set(counts) | set(law):
        p = law.get(k, 0.0)
        f = counts.get(k, 0) / total
        sd = np.sqrt(p * (1 - p) / total)
        if (p == 0.0 and counts.get(k, 0) > 0) or abs(f - p) > z * sd + 1e-15:
            bad.append((k, f, p, sd))
    return bad

