"""Multi-class dynamics, class assignment and the higher-rank coupling.

Lower classes move first and see higher classes as holes. Coupling several
single-class models amounts to running one multi-class system per model
with randomness keyed by ``(time, site, class)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels as K
from .core import (
    DEFAULT_PARAMS,
    BadThresholds,
    ModelParams,
    OrderViolation,
    ParticleConfiguration,
    RangeViolation,
    StepRandomness,
    TooFewSamples,
)


@dataclass(frozen=True)
class MultiClassConfiguration:
    """Particles on the line carrying classes ``1..n``.

    ``positions`` is strictly increasing over all particles and ``classes``
    is aligned with it.
    """

    positions: np.ndarray
    classes: np.ndarray
    n: int

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.int64).reshape(-1)
        cls = np.array(self.classes, dtype=np.int64).reshape(-1)
        if pos.shape != cls.shape:
            raise RangeViolation("positions and classes differ in length")
        order = np.argsort(pos, kind="stable")
        pos, cls = pos[order], cls[order]
        if pos.size > 1 and np.any(np.diff(pos) <= 0):
            raise RangeViolation("two particles share a site")
        if cls.size and (cls.min() < 1 or cls.max() > self.n):
            raise RangeViolation(f"classes must lie in 1..{self.n}")
        pos.setflags(write=False)
        cls.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "classes", cls)

    @classmethod
    def from_occupancy(cls, occ, n: int, offset: int = 0) -> "MultiClassConfiguration":
        """Build from site labels (0 = empty, otherwise the class)."""
        occ = np.asarray(occ, dtype=np.int64)
        idx = np.flatnonzero(occ)
        return cls(idx + offset, occ[idx], n)

    def occupancy(self, lo: int, hi: int) -> np.ndarray:
        out = np.zeros(hi - lo, np.int64)
        m = (self.positions >= lo) & (self.positions < hi)
        out[self.positions[m] - lo] = self.classes[m]
        return out

    def class_positions(self, r: int) -> np.ndarray:
        return self.positions[self.classes == r]

    @property
    def count(self) -> int:
        return int(self.positions.size)

    def single_class(self) -> ParticleConfiguration:
        """Occupied-versus-empty projection."""
        return ParticleConfiguration(self.positions, "line")

    def __eq__(self, other):
        return (isinstance(other, MultiClassConfiguration) and self.n == other.n
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.classes, other.classes))

    def __hash__(self):
        return hash((self.n, self.positions.tobytes(), self.classes.tobytes()))


def _advance(config: MultiClassConfiguration, chi: np.ndarray, jump: np.ndarray) -> np.ndarray:
    return K.multiclass_step_core(config.positions, config.classes,
                                  np.ascontiguousarray(chi, np.uint8),
                                  np.ascontiguousarray(jump, np.int64), config.n)


def step_multiclass(config: MultiClassConfiguration, rnd: StepRandomness) -> MultiClassConfiguration:
    """One multi-class step using explicit class-resolved randomness.

    Raises
    ------
    RandomnessGap
        If a particle's (site, class) key is not covered by ``rnd``.
    """
    chi = rnd.chi_at(config.positions, config.classes)
    jump = rnd.jump_at(config.positions, config.classes)
    return MultiClassConfiguration(_advance(config, chi, jump), config.classes, config.n)


def step_multiclass_keyed(config: MultiClassConfiguration, params: ModelParams = DEFAULT_PARAMS,
                          seed: int = 0, t: int = 1) -> MultiClassConfiguration:
    """Same as :func:`step_multiclass` with the keyed randomness of ``(seed, t)``."""
    new = step_multiclass_tracked(config, params, seed, t)
    return MultiClassConfiguration(new, config.classes, config.n)


def step_multiclass_tracked(config: MultiClassConfiguration, params: ModelParams, seed: int,
                            t: int) -> np.ndarray:
    """New positions aligned with ``config.positions`` (unsorted)."""
    chi, jump = K.coins_at(config.positions, config.classes, int(seed), int(t), params.b1, params.b2)
    return _advance(config, chi, jump)


def project_classes(config: MultiClassConfiguration, thresholds: Sequence[int]) -> MultiClassConfiguration:
    """Merge consecutive classes: class ``r`` in ``(j[i-1], j[i]]`` becomes ``i``.

    Classes above the last threshold become holes.

    Raises
    ------
    BadThresholds
        If thresholds are not strictly increasing positive integers bounded by ``n``.
    """
    th = np.asarray(thresholds, dtype=np.int64)
    if th.size == 0 or th[0] < 1 or np.any(np.diff(th) <= 0) or th[-1] > config.n:
        raise BadThresholds(f"thresholds {list(thresholds)} invalid for {config.n} classes")
    new_cls = np.searchsorted(th, config.classes, side="left") + 1
    keep = config.classes <= th[-1]
    return MultiClassConfiguration(config.positions[keep], new_cls[keep], int(th.size))


# ---------------------------------------------------------------- coupling --

def _check_nested(models: Sequence[ParticleConfiguration], name: str) -> None:
    for a, b in zip(models, models[1:]):
        if np.setdiff1d(a.positions, b.positions).size:
            raise OrderViolation(f"{name} configurations are not nested")


def _membership_index(sites: np.ndarray, models: Sequence[ParticleConfiguration]) -> np.ndarray:
    """Smallest ``m`` (1-based) with the site occupied in model ``m``; ``n + 1`` if none."""
    n = len(models)
    idx = np.full(sites.size, n + 1, np.int64)
    for m in range(n, 0, -1):
        idx[np.isin(sites, models[m - 1].positions)] = m
    return idx


def assign_classes(eta, xis: Sequence[ParticleConfiguration]) -> MultiClassConfiguration:
    """Joint class labels of two nested families of configurations.

    ``eta`` is either a single configuration (used as every member of its
    family) or a nested sequence of the same length as ``xis``. A site first
    entering the first family at index ``i`` and the second at index ``j``
    gets class ``i + j - 1`` out of ``2n``.

    Raises
    ------
    OrderViolation
        If either family is not nested.
    """
    xis = list(xis)
    etas = [eta] * len(xis) if isinstance(eta, ParticleConfiguration) else list(eta)
    if len(etas) != len(xis) or not xis:
        raise RangeViolation("need equally many (>= 1) configurations in each family")
    _check_nested(etas, "first-family")
    _check_nested(xis, "second-family")
    n = len(xis)
    sites = np.unique(np.concatenate([m.positions for m in etas + xis]))
    i = _membership_index(sites, etas)
    j = _membership_index(sites, xis)
    return MultiClassConfiguration(sites, i + j - 1, 2 * n)


@dataclass
class CouplingAudit:
    """Violation counters accumulated by :func:`higher_rank_step`."""

    particle_steps: int = 0
    order_violations: int = 0
    attractivity_violations: int = 0
    class_violations: int = 0

    @property
    def clean(self) -> bool:
        return self.order_violations == self.attractivity_violations == self.class_violations == 0


@dataclass(frozen=True)
class CoupledSystem:
    """Two nested families of line configurations evolved jointly."""

    etas: tuple
    xis: tuple
    meta: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_models(cls, eta, xis: Sequence[ParticleConfiguration]) -> "CoupledSystem":
        xis = tuple(xis)
        etas = (eta,) * len(xis) if isinstance(eta, ParticleConfiguration) else tuple(eta)
        assign_classes(etas, xis)
        return cls(etas, xis)

    @property
    def models(self) -> list:
        return list(self.etas) + list(self.xis)

    @property
    def n(self) -> int:
        return len(self.xis)

    @property
    def joint(self) -> MultiClassConfiguration:
        return assign_classes(self.etas, self.xis)


def _model_view(joint: MultiClassConfiguration, model: ParticleConfiguration) -> MultiClassConfiguration:
    keep = np.isin(joint.positions, model.positions)
    return MultiClassConfiguration(joint.positions[keep], joint.classes[keep], joint.n)


def _overlap(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.intersect1d(a, b, assume_unique=True).size)


def higher_rank_step(sys: CoupledSystem, params: ModelParams = DEFAULT_PARAMS, seed: int = 0,
                     t: int = 1, audit: CouplingAudit | None = None) -> CoupledSystem:
    """Advance every model one step under shared class-resolved randomness.

    Classes are reassigned from the current configurations, each model runs
    as a multi-class system restricted to its own particles, and the result
    is projected back to occupancy. With ``audit`` the step also checks that
    the families stay nested, that pairwise overlaps never shrink and that
    no tracked particle's class increases.

    Raises
    ------
    OrderViolation
        If the input families are not nested.
    """
    joint = sys.joint
    models = sys.models
    new_models = []
    tracks = []
    for model in models:
        view = _model_view(joint, model)
        new = step_multiclass_tracked(view, params, seed, t)
        tracks.append((view.classes, new))
        new_models.append(ParticleConfiguration(np.sort(new), "line"))
    n = sys.n
    out = CoupledSystem(tuple(new_models[:n]), tuple(new_models[n:]))
    if audit is not None:
        audit.particle_steps += sum(m.count for m in models)
        for a in range(len(models)):
            for b in range(a + 1, len(models)):
                before = _overlap(models[a].positions, models[b].positions)
                after = _overlap(new_models[a].positions, new_models[b].positions)
                if after < before:
                    audit.attractivity_violations += 1
        try:
            new_joint = out.joint
        except OrderViolation:
            audit.order_violations += 1
            return out
        for old_cls, new_pos in tracks:
            idx = np.searchsorted(new_joint.positions, new_pos)
            audit.class_violations += int(np.sum(new_joint.classes[idx] > old_cls))
    return out


# ------------------------------------------------------------- speed tail --

@dataclass(frozen=True)
class TailEstimate:
    """Empirical tail ``P[D >= v]`` with binomial standard errors."""

    v: np.ndarray
    tail: np.ndarray
    sigma: np.ndarray
    bound: np.ndarray
    samples: int
    z: float

    @property
    def violations(self) -> np.ndarray:
        """Thresholds where the tail exceeds the bound by more than ``z`` sigma."""
        return self.v[self.tail > self.bound + self.z * self.sigma]

    @property
    def ok(self) -> bool:
        return self.violations.size == 0


def tagged_speed_tail(samples, b2: float = DEFAULT_PARAMS.b2, vmax: int = 12, z: float = 4.0,
                      min_samples: int = 10_000) -> TailEstimate:
    """Empirical tail of one-step displacements against ``b2 ** (v - 1)``.

    The standard error uses the bound itself as the Bernoulli mean when the
    empirical tail is zero, so an empty tail is never flagged.

    Raises
    ------
    TooFewSamples
        If fewer than ``min_samples`` displacements are supplied.
    """
    d = np.asarray(samples, dtype=np.int64).reshape(-1)
    if d.size < min_samples:
        raise TooFewSamples(f"{d.size} samples < {min_samples}")
    v = np.arange(1, vmax + 1)
    counts = np.bincount(np.minimum(d, vmax + 1), minlength=vmax + 2)
    tail = counts[::-1].cumsum()[::-1][1:vmax + 1] / d.size
    bound = b2 ** (v - 1.0)
    p = np.maximum(tail, np.minimum(bound, 1.0))
    sigma = np.sqrt(p * (1 - p) / d.size)
    return TailEstimate(v, tail, sigma, bound, int(d.size), float(z))
