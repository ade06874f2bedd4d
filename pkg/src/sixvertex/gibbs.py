"""Samplers for the translation-invariant Gibbs measure of slope ``(rho, phi(rho))``.

Two constructions are provided. The quadrant grows diagonal by diagonal
from independent Bernoulli entrances (``rho`` on the bottom, ``phi(rho)`` on
the left); the half-plane method runs the line dynamics from product
Bernoulli(``rho``) data and reads windows far from the lateral boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .core import (
    DEFAULT_PARAMS,
    MixedShapes,
    ModelParams,
    RangeViolation,
    TooFewSamples,
    VertexEnsemble,
    WindowTooLarge,
    bernoulli_occupancy,
    pack_bits,
    spawn_seed,
)


@dataclass(frozen=True)
class GibbsWindowSample:
    rho: float
    window: VertexEnsemble
    provenance: str
    meta: dict = field(default_factory=dict, compare=False)


def _entrances(rho: float, params: ModelParams, count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    vin = bernoulli_occupancy(rho, 1, count + 1, spawn_seed(seed, 1))
    hin = bernoulli_occupancy(float(params.flux(rho)), 1, count + 1, spawn_seed(seed, 2))
    return vin, hin


def sample_quadrant(rho: float, n: int, seed: int = 0,
                    params: ModelParams = DEFAULT_PARAMS) -> VertexEnsemble:
    """Quadrant ensemble on the triangle ``x, y >= 1, x + y <= n``.

    The returned ensemble spans vertices ``[1, n) x [1, n)``; ``mask`` marks
    the triangle and arrows outside it are zero.
    """
    if n < 2:
        raise RangeViolation("triangle size must be >= 2")
    if not 0.0 <= rho <= 1.0:
        raise RangeViolation("rho must lie in [0, 1]")
    vin, hin = _entrances(rho, params, n - 1, seed)
    vert, hor = K.quadrant_grow(vin, hin, params.b1, params.b2, int(seed))
    W = n - 1
    ys, xs = np.mgrid[1:n, 1:n]
    return VertexEnsemble(1, 1, vert[:W + 1, :W], hor[:W, :W + 1], mask=(xs + ys) <= n)


def halo_requirement(size: int, T: int, params: ModelParams) -> tuple[int, int]:
    """Minimal slab width and number of steps for windows of ``size`` vertices.

    Uses ``W >= 2k + 2T ceil(2 / (1 - b2))`` and ``T >= 8k`` with ``k`` the
    half-size of the window.
    """
    k = (size - 1) // 2 + (size - 1) % 2
    return 2 * k + 2 * T * math.ceil(2.0 / (1.0 - params.b2)), 8 * k


def sample_mu_windows(rho: float, size: int | tuple[int, int], count: int, seed: int = 0,
                      params: ModelParams = DEFAULT_PARAMS, method: str = "half-plane",
                      T: int | None = None, spacing: int | None = None,
                      depth: int = 0) -> list:
    """Draw ``count`` windows of ``size`` vertices from the Gibbs measure.

    Parameters
    ----------
    size : int or (int, int)
        Window width and height in vertices.
    method : {"half-plane", "quadrant"}
    T : int, optional
        Steps of the half-plane run (default ``max(8k, 8)``).
    spacing : int, optional
        Column gap between windows cut from one slab or triangle.
    depth : int
        Extra rows between the top of the run and the top of the window.

    Raises
    ------
    WindowTooLarge
        If the run is too short for the window under the halo rule.
    """
    w, h = (size, size) if np.ndim(size) == 0 else (int(size[0]), int(size[1]))
    if w < 1 or h < 1:
        raise RangeViolation("window size must be >= 1")
    if count < 1:
        raise RangeViolation("count must be >= 1")
    spacing = spacing if spacing is not None else max(w, h) + 8
    if method == "half-plane":
        return _half_plane_windows(rho, w, h, count, seed, params, T, spacing, depth)
    if method == "quadrant":
        return _quadrant_windows(rho, w, h, count, seed, params, spacing)
    raise RangeViolation(f"unknown method {method!r}")


def sample_mu_window(rho: float, k: int, seed: int = 0, params: ModelParams = DEFAULT_PARAMS,
                     method: str = "half-plane", **kw) -> GibbsWindowSample:
    """One window on ``[-k, k]^2`` (``2k + 1`` vertices per side)."""
    if k < 0:
        raise RangeViolation("k must be >= 0")
    return sample_mu_windows(rho, 2 * k + 1, 1, seed, params, method, **kw)[0]


def _half_plane_windows(rho, w, h, count, seed, params, T, spacing, depth):
    size = max(w, h)
    need_W, need_T = halo_requirement(size, 1, params)
    k = (size - 1) // 2 + (size - 1) % 2
    T = T if T is not None else max(need_T, 8)
    if T < max(need_T, h + depth):
        raise WindowTooLarge(f"T={T} too small for a {w}x{h} window (need >= {max(need_T, h + depth)})")
    halo = 2 * k + T * math.ceil(2.0 / (1.0 - params.b2)) + 1
    per_slab = max(1, min(count, 4096))
    out = []
    slab = 0
    while len(out) < count:
        m = min(per_slab, count - len(out))
        width = 2 * halo + m * spacing
        s = spawn_seed(seed, slab)
        pos = np.flatnonzero(bernoulli_occupancy(rho, 0, width, s)).astype(np.int64)
        hist = K.line_run_keyed(pos, params.b1, params.b2, s, 0, T)
        y_top = T - depth
        y_lo = y_top - h + 1
        occ = np.stack([K.occupancy_window(hist[y], 0, width) for y in range(y_lo - 1, y_top + 1)])
        hor = np.stack([K.horizontal_row(hist[y - 1], hist[y], -1, width) for y in range(y_lo, y_top + 1)])
        for i in range(m):
            x = halo + i * spacing
            e = VertexEnsemble(x, y_lo, occ[:, x:x + w], hor[:, x:x + w + 1])
            out.append(GibbsWindowSample(rho, e, "half-plane",
                                         {"slab": slab, "T": T, "left": x, "right": width - x - w,
                                          "top": depth}))
        slab += 1
    return out


def _quadrant_windows(rho, w, h, count, seed, params, spacing):
    # windows sit along the anti-diagonal band of one triangle; the measure
    # restricted to any window of the quadrant is exact
    a = 2
    per_tri = max(1, min(count, 64))
    out = []
    tri = 0
    while len(out) < count:
        m = min(per_tri, count - len(out))
        n = 2 * a + m * spacing + w + h + 2
        e = sample_quadrant(rho, n, spawn_seed(seed, tri), params)
        for i in range(m):
            x = a + 1 + i * spacing
            y = n - x - w - h + 1 - a
            out.append(GibbsWindowSample(rho, e.sub(x, y, w, h), "quadrant",
                                         {"triangle": tri, "n": n, "x": x, "y": y}))
        tri += 1
    return out


# ------------------------------------------------------------- histograms --

@dataclass(frozen=True)
class WindowHistogram:
    """Empirical law over packed window states (see :meth:`VertexEnsemble.key`)."""

    shape: tuple
    keys: np.ndarray
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.total

    def as_dict(self) -> dict:
        return {int(k): float(p) for k, p in zip(self.keys, self.probs)}


def window_keys(windows: Sequence) -> tuple[tuple, np.ndarray]:
    ens = [s.window if isinstance(s, GibbsWindowSample) else s for s in windows]
    if not ens:
        raise TooFewSamples("no windows")
    shape = ens[0].shape
    if any(e.shape != shape for e in ens):
        raise MixedShapes("windows of different shapes")
    bits = np.stack([np.concatenate([e.vertical.ravel(), e.horizontal.ravel()]) for e in ens])
    return shape, pack_bits(bits)


def histogram_from_keys(shape: tuple, keys: np.ndarray) -> WindowHistogram:
    k, c = np.unique(np.asarray(keys, np.int64), return_counts=True)
    return WindowHistogram(tuple(shape), k, c)


def window_histogram(samples: Sequence, min_samples: int = 1000) -> WindowHistogram:
    """Normalized histogram of window states.

    Raises
    ------
    MixedShapes
        If the windows differ in size.
    TooFewSamples
        If fewer than ``min_samples`` windows are supplied.
    """
    shape, keys = window_keys(samples)
    if keys.size < min_samples:
        raise TooFewSamples(f"{keys.size} windows < {min_samples}")
    return histogram_from_keys(shape, keys)
