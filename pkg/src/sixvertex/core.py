"""Parameters, lattice configurations, keyed randomness and vertex ensembles."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K

__all__ = [
    "BadThresholds",
    "ConfigInvalid",
    "DEFAULT_PARAMS",
    "DegenerateRow",
    "DomainMismatch",
    "EmptyInterval",
    "EqualStates",
    "IdentityViolation",
    "InfiniteSystem",
    "IoError",
    "MixedShapes",
    "ModelParams",
    "NEG_INF",
    "NoneFound",
    "OrderViolation",
    "OrderingViolation",
    "POS_INF",
    "ParticleConfiguration",
    "RandomnessGap",
    "RangeViolation",
    "ResolutionTooCoarse",
    "SixVertexError",
    "StepRandomness",
    "SupportMismatch",
    "TooFewSamples",
    "UnboundedSupport",
    "VertexEnsemble",
    "WindowTooLarge",
    "bernoulli_occupancy",
    "draw_randomness",
    "keyed_uniform",
    "line_config",
    "make_params",
    "pack_bits",
    "ring_config",
    "spawn_seed",
    "validate_ensemble",
]


# ------------------------------------------------------------------ errors --

class SixVertexError(Exception):
    """Base class of all library errors."""


class OrderingViolation(SixVertexError, ValueError):
    """Jump parameters are not ordered as ``b1 < b2``."""


class RangeViolation(SixVertexError, ValueError):
    """A parameter or state lies outside its admissible range."""


class RandomnessGap(SixVertexError, KeyError):
    """A step needs a randomness key that the supplied draws do not cover."""


class DegenerateRow(SixVertexError, RuntimeError):
    """Both seam values of a periodic row carry zero weight."""


class NoneFound(SixVertexError, LookupError):
    """No separating integer exists in the searched window."""


class OrderViolation(SixVertexError, ValueError):
    """Configurations that must be ordered are not."""


class BadThresholds(SixVertexError, ValueError):
    """Class-merging thresholds are not increasing or exceed the class count."""


class TooFewSamples(SixVertexError, ValueError):
    """An estimator received fewer samples than it requires."""


class WindowTooLarge(SixVertexError, ValueError):
    """Slab width or burn-in is too small for the requested window."""


class MixedShapes(SixVertexError, ValueError):
    """Window samples of different shapes were pooled."""


class EqualStates(SixVertexError, ValueError):
    """Left and right Riemann states coincide."""


class ResolutionTooCoarse(SixVertexError, ValueError):
    """Grid spacing exceeds the configured maximum."""


class DomainMismatch(SixVertexError, ValueError):
    """Profiles live on different domains."""


class EmptyInterval(SixVertexError, ValueError):
    """The interval left after removing the influence cone is empty."""


class UnboundedSupport(SixVertexError, ValueError):
    """A profile or configuration does not have compact support."""


class InfiniteSystem(SixVertexError, ValueError):
    """An operation that needs a finite particle system got a windowed one."""


class SupportMismatch(SixVertexError, ValueError):
    """Histograms are defined on different supports."""


class ConfigInvalid(SixVertexError, ValueError):
    """An experiment configuration is malformed."""


class IdentityViolation(SixVertexError, AssertionError):
    """An exact identity failed to hold."""


class IoError(SixVertexError, OSError):
    """Results could not be written or parsed."""


# ------------------------------------------------------------------ params --

@dataclass(frozen=True)
class ModelParams:
    """Jump parameters ``0 < b1 < b2 < 1`` and cylinder aspect ratio."""

    b1: float
    b2: float
    aspect: float = 1.0

    @property
    def kappa(self) -> float:
        return (1.0 - self.b1) / (1.0 - self.b2)

    def flux(self, z):
        """Stationary current ``kappa z / ((kappa - 1) z + 1)``."""
        k = self.kappa
        z = np.asarray(z, dtype=float)
        return k * z / ((k - 1.0) * z + 1.0)

    def flux_prime(self, z):
        k = self.kappa
        z = np.asarray(z, dtype=float)
        return k / ((k - 1.0) * z + 1.0) ** 2


def make_params(b1: float, b2: float, aspect: float = 1.0) -> ModelParams:
    """Validate and build :class:`ModelParams`.

    Raises
    ------
    OrderingViolation
        If ``b1 >= b2``.
    RangeViolation
        If a probability is outside (0, 1) or ``aspect <= 0``.
    """
    for name, val in (("b1", b1), ("b2", b2)):
        if not (0.0 < float(val) < 1.0):
            raise RangeViolation(f"{name}={val} must lie in (0, 1)")
    if not float(aspect) > 0.0 or not np.isfinite(aspect):
        raise RangeViolation(f"aspect={aspect} must be positive and finite")
    if b1 >= b2:
        raise OrderingViolation(f"need b1 < b2, got b1={b1}, b2={b2}")
    return ModelParams(float(b1), float(b2), float(aspect))


DEFAULT_PARAMS = ModelParams(0.25, 0.5, 1.0)


# ------------------------------------------------------------- randomness --

def spawn_seed(seed: int, *keys: int) -> int:
    """Derive an independent 63-bit seed from ``seed`` and integer keys."""
    h = int(seed) & 0x7FFFFFFFFFFFFFFF
    for i, k in enumerate(keys):
        h = int(K.key_hash(h, i, int(k), 0, K.STREAM_SEED)) & 0x7FFFFFFFFFFFFFFF
    return h


def keyed_uniform(seed: int, t: int, sites, cls: int = 0, stream: int = K.STREAM_AUX) -> np.ndarray:
    """Uniform variates in (0, 1) at the keys ``(seed, t, site, cls, stream)``."""
    sites = np.ascontiguousarray(np.atleast_1d(sites), dtype=np.int64)
    return K.uniform_array(int(seed), int(t), sites, int(cls), int(stream))


@dataclass(frozen=True)
class StepRandomness:
    """Stay coins and jump lengths for one time step over a site range.

    ``chi[r - 1, x - lo]`` and ``jump[r - 1, x - lo]`` hold the class-``r``
    values at site ``x``.
    """

    t: int
    lo: int
    chi: np.ndarray
    jump: np.ndarray

    @property
    def hi(self) -> int:
        return self.lo + self.chi.shape[1]

    @property
    def classes(self) -> int:
        return self.chi.shape[0]

    def _index(self, sites, classes) -> tuple[np.ndarray, np.ndarray]:
        sites = np.asarray(sites, dtype=np.int64)
        classes = np.broadcast_to(np.asarray(classes, dtype=np.int64), sites.shape)
        if sites.size and (sites.min() < self.lo or sites.max() >= self.hi):
            bad = sites[(sites < self.lo) | (sites >= self.hi)][0]
            raise RandomnessGap(f"site {bad} outside randomness range [{self.lo}, {self.hi})")
        if classes.size and (classes.min() < 1 or classes.max() > self.classes):
            raise RandomnessGap(f"class outside 1..{self.classes}")
        return classes - 1, sites - self.lo

    def chi_at(self, sites, classes=1) -> np.ndarray:
        r, c = self._index(sites, classes)
        return self.chi[r, c]

    def jump_at(self, sites, classes=1) -> np.ndarray:
        r, c = self._index(sites, classes)
        return self.jump[r, c]


def draw_randomness(seed: int, t: int, sites: tuple[int, int], classes: int = 1,
                    params: ModelParams = DEFAULT_PARAMS) -> StepRandomness:
    """Keyed stay coins and geometric jumps on sites ``[lo, hi)`` for classes ``1..classes``.

    The value at each key is a pure function of ``(seed, t, site, class)``;
    drawing a sub-range or a super-range yields the same values where they
    overlap.
    """
    lo, hi = int(sites[0]), int(sites[1])
    if hi < lo:
        raise RangeViolation("empty or reversed site range")
    xs = np.arange(lo, hi, dtype=np.int64)
    chi = np.empty((classes, hi - lo), np.uint8)
    jump = np.empty((classes, hi - lo), np.int64)
    for r in range(1, classes + 1):
        c, j = K.coins_at(xs, np.full(xs.size, r, np.int64), int(seed), int(t), params.b1, params.b2)
        chi[r - 1] = c
        jump[r - 1] = j
    chi.setflags(write=False)
    jump.setflags(write=False)
    return StepRandomness(int(t), lo, chi, jump)


# ---------------------------------------------------------- configurations --

NEG_INF = "-inf"
POS_INF = "+inf"


def _frozen(a, dtype=np.int64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ParticleConfiguration:
    """Tagged particle positions on a line, a ring or a finite window.

    Parameters
    ----------
    positions : array of int
        Strictly increasing occupied sites. On a ring they lie in ``[0, size)``;
        on a window in ``[offset, offset + size)``.
    topology : {"line", "ring", "window"}
    size : int, optional
        Ring circumference or window width.
    offset : int
        Left end of a window.
    first_label : int
        Tag of the leftmost particle; labels are consecutive.
    """

    positions: np.ndarray
    topology: str = "line"
    size: int | None = None
    offset: int = 0
    first_label: int = 0

    def __post_init__(self):
        pos = _frozen(self.positions)
        object.__setattr__(self, "positions", pos)
        if self.topology not in ("line", "ring", "window"):
            raise RangeViolation(f"unknown topology {self.topology!r}")
        if pos.size > 1 and np.any(np.diff(pos) <= 0):
            raise OrderViolation("tagged positions must be strictly increasing")
        if self.topology in ("ring", "window"):
            if self.size is None or self.size < 1:
                raise RangeViolation("ring and window configurations need a positive size")
            lo = 0 if self.topology == "ring" else self.offset
            if pos.size and (pos[0] < lo or pos[-1] >= lo + self.size):
                raise RangeViolation("positions outside the ring/window")

    @classmethod
    def from_occupancy(cls, occ, topology: str = "line", offset: int = 0,
                       first_label: int = 0) -> "ParticleConfiguration":
        occ = np.asarray(occ)
        pos = np.flatnonzero(occ).astype(np.int64) + (0 if topology == "ring" else offset)
        size = occ.size if topology in ("ring", "window") else None
        return cls(pos, topology, size, offset if topology == "window" else 0, first_label)

    @property
    def count(self) -> int:
        return int(self.positions.size)

    @property
    def labels(self) -> np.ndarray:
        return np.arange(self.first_label, self.first_label + self.count)

    def tagged(self, k: int):
        """Position of particle ``k`` or the sentinel flag beyond either end."""
        i = k - self.first_label
        if i < 0:
            return NEG_INF
        if i >= self.count:
            return POS_INF
        return int(self.positions[i])

    def occupancy(self, lo: int | None = None, hi: int | None = None) -> np.ndarray:
        """0/1 occupancy on ``[lo, hi)`` (defaults: the ring, window or particle hull)."""
        if lo is None or hi is None:
            if self.topology == "ring":
                lo, hi = 0, self.size
            elif self.topology == "window":
                lo, hi = self.offset, self.offset + self.size
            else:
                lo = int(self.positions[0]) if self.count else 0
                hi = int(self.positions[-1]) + 1 if self.count else 0
        return K.occupancy_window(self.positions, int(lo), int(hi))

    def __eq__(self, other):
        if not isinstance(other, ParticleConfiguration):
            return NotImplemented
        return (self.topology == other.topology and self.size == other.size
                and self.offset == other.offset and self.first_label == other.first_label
                and np.array_equal(self.positions, other.positions))

    def __hash__(self):
        return hash((self.topology, self.size, self.offset, self.first_label,
                     self.positions.tobytes()))


def line_config(positions: Iterable[int], first_label: int = 0) -> ParticleConfiguration:
    return ParticleConfiguration(np.fromiter(positions, np.int64), "line", None, 0, first_label)


def ring_config(occupancy: Sequence[int]) -> ParticleConfiguration:
    return ParticleConfiguration.from_occupancy(np.asarray(occupancy), "ring")


def bernoulli_occupancy(prob, lo: int, hi: int, seed: int) -> np.ndarray:
    """Keyed product-Bernoulli occupancy on ``[lo, hi)``.

    ``prob`` may be a scalar or an array of per-site probabilities. The
    same site always uses the same uniform, so densities are coupled
    monotonically across calls with the same seed.
    """
    if np.ndim(prob) == 0:
        return K.bernoulli_range(int(seed), int(lo), int(hi), float(prob), K.STREAM_INIT)
    u = K.uniform_range(int(seed), 0, int(lo), int(hi), 0, K.STREAM_INIT)
    return (u < np.asarray(prob, float)).astype(np.uint8)


# --------------------------------------------------------------- ensembles --

@dataclass(frozen=True)
class VertexEnsemble:
    """Arrow indicators around a ``W x H`` rectangle of vertices.

    The rectangle covers vertices ``x0 <= x < x0 + W``, ``y0 <= y < y0 + H``.
    ``vertical[r, c]`` is the arrow from ``(x0 + c, y0 - 1 + r)`` upward
    (``r = 0`` are the incoming arrows), shape ``(H + 1, W)``;
    ``horizontal[r, c]`` is the arrow from ``(x0 - 1 + c, y0 + r)`` rightward
    (``c = 0`` are the incoming arrows), shape ``(H, W + 1)``. An optional
    boolean ``mask`` of shape ``(H, W)`` restricts which vertices are defined.
    """

    x0: int
    y0: int
    vertical: np.ndarray
    horizontal: np.ndarray
    mask: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        v = _frozen(self.vertical, np.uint8).reshape(np.shape(self.vertical))
        h = _frozen(self.horizontal, np.uint8).reshape(np.shape(self.horizontal))
        object.__setattr__(self, "vertical", v)
        object.__setattr__(self, "horizontal", h)
        if v.ndim != 2 or h.ndim != 2:
            raise RangeViolation("edge arrays must be two-dimensional")
        H, W = v.shape[0] - 1, v.shape[1]
        if h.shape != (H, W + 1):
            raise RangeViolation(f"horizontal shape {h.shape} does not match vertical {v.shape}")
        if self.mask is not None and np.shape(self.mask) != (H, W):
            raise RangeViolation("mask shape must be (H, W)")

    @property
    def shape(self) -> tuple[int, int]:
        """(width, height) in vertices."""
        return self.vertical.shape[1], self.vertical.shape[0] - 1

    def vertical_at(self, x: int, y: int) -> int:
        return int(self.vertical[y - self.y0 + 1, x - self.x0])

    def horizontal_at(self, x: int, y: int) -> int:
        return int(self.horizontal[y - self.y0, x - self.x0 + 1])

    def sub(self, x: int, y: int, width: int, height: int) -> "VertexEnsemble":
        """The ensemble around vertices ``[x, x+width) x [y, y+height)``."""
        c0, r0 = x - self.x0, y - self.y0
        W, H = self.shape
        if c0 < 0 or r0 < 0 or c0 + width > W or r0 + height > H:
            raise RangeViolation("sub-window outside ensemble")
        v = self.vertical[r0:r0 + height + 1, c0:c0 + width]
        h = self.horizontal[r0:r0 + height, c0:c0 + width + 1]
        m = None if self.mask is None else self.mask[r0:r0 + height, c0:c0 + width]
        return VertexEnsemble(x, y, v, h, m)

    def key(self) -> int:
        """Canonical bit-packing: vertical bits row-major, then horizontal bits."""
        bits = np.concatenate([self.vertical.ravel(), self.horizontal.ravel()])
        return int(pack_bits(bits[None, :])[0])


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack rows of 0/1 values (at most 63 per row) into integers, first bit most significant."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[1] > 63:
        raise RangeViolation("window too large for 63-bit packing")
    weights = np.left_shift(np.int64(1), np.arange(bits.shape[1] - 1, -1, -1, dtype=np.int64))
    return bits @ weights


def validate_ensemble(e: VertexEnsemble) -> bool:
    """True iff every (defined) vertex conserves arrows with 0/1 edge values."""
    v = e.vertical.astype(np.int64)
    h = e.horizontal.astype(np.int64)
    if v.size and v.max(initial=0) > 1 or h.size and h.max(initial=0) > 1:
        return False
    i1, i2 = v[:-1, :], v[1:, :]
    j1, j2 = h[:, :-1], h[:, 1:]
    ok = (i1 + j1) == (i2 + j2)
    if e.mask is not None:
        ok = ok | ~np.asarray(e.mask, bool)
    return bool(np.all(ok))
