"""Experiment configuration: INI files plus command-line overrides.

A configuration file has the sections ``[experiment]``, ``[params]``,
``[profile]``, ``[options]`` and ``[tolerances]``; everything except
``experiment.kind`` has a per-experiment default.
"""
from __future__ import annotations

import ast
import configparser
import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..core import ConfigInvalid, ModelParams, SixVertexError, bernoulli_occupancy, make_params
from ..pde import DensityProfile

KINDS = ("E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8")
PROFILE_KINDS = ("constant", "double-sided", "table", "bits", "sine")
FORMATS = ("csv", "jsonl")


@dataclass(frozen=True)
class ProfileSpec:
    """Initial density: a macroscopic profile plus a rule for drawing 0/1 data from it."""

    kind: str = "constant"
    rho: float = 0.5
    theta: float = 0.5
    mean: float = 0.5
    amplitude: float = 0.3
    table: str = ""
    bits: str = ""
    sampling: str = "bernoulli"

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigInvalid(f"unknown profile kind {self.kind!r}")
        if self.sampling not in ("bernoulli", "quantile"):
            raise ConfigInvalid(f"unknown sampling {self.sampling!r}")
        for name in ("rho", "theta"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigInvalid(f"profile {name} must lie in [0, 1]")
        if self.kind == "sine" and not (0.0 <= self.mean - abs(self.amplitude)
                                        and self.mean + abs(self.amplitude) <= 1.0):
            raise ConfigInvalid("sine profile leaves [0, 1]")
        if self.kind == "bits" and (not self.bits or set(self.bits) - {"0", "1"}):
            raise ConfigInvalid("bits profile needs a nonempty 0/1 string")
        if self.kind == "table":
            try:
                self.density()
            except (SixVertexError, ValueError, IndexError) as e:
                raise ConfigInvalid(f"bad profile table: {e}") from e

    def density(self, domain: str = "torus") -> DensityProfile:
        """The macroscopic profile; on the torus it has period 1."""
        if self.kind == "constant":
            return DensityProfile(np.array([0.0, 1.0]), np.array([self.rho]), domain)
        if self.kind == "double-sided":
            if domain == "torus":
                return DensityProfile(np.array([0.0, 0.5, 1.0]), np.array([self.theta, self.rho]), "torus")
            return DensityProfile.riemann(self.theta, self.rho, 1.0)
        if self.kind == "sine":
            m, a = self.mean, self.amplitude
            return DensityProfile.from_function(lambda x: m + a * np.sin(2 * np.pi * x), 0.0, 1.0,
                                                400, domain)
        if self.kind == "bits":
            b = np.array([int(c) for c in self.bits], float)
            return DensityProfile.from_grid(0.0, 1.0 / b.size, b, domain)
        return DensityProfile.from_text(self.table)

    def sample_ring(self, N: int, seed: int) -> np.ndarray:
        """0/1 data on ``N`` torus sites whose empirical profile tracks :meth:`density`."""
        if self.kind == "bits" and len(self.bits) == N:
            return np.array([int(c) for c in self.bits], np.uint8)
        prof = self.density("torus")
        cum = prof.cumulative(np.arange(N + 1) / N) * N
        if self.sampling == "quantile":
            return np.diff(np.floor(cum + 1e-9)).clip(0, 1).astype(np.uint8)
        return bernoulli_occupancy(np.clip(np.diff(cum), 0.0, 1.0), 0, N, seed)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    params: ModelParams
    sizes: tuple
    replicas: int
    seed: int
    profile: ProfileSpec
    out: str = "-"
    format: str = "csv"
    workers: int = 1
    timing: bool = False
    plot: str = ""
    options: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigInvalid(f"unknown experiment {self.kind!r}; expected one of {KINDS}")
        if not self.sizes:
            raise ConfigInvalid("size list is empty")
        if any(int(n) < 1 for n in self.sizes) or any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ConfigInvalid("sizes must be positive and strictly ascending")
        if self.replicas < 1:
            raise ConfigInvalid("replicas must be >= 1")
        if self.format not in FORMATS:
            raise ConfigInvalid(f"unknown format {self.format!r}")
        if self.workers < 1:
            raise ConfigInvalid("workers must be >= 1")

    def opt(self, name: str, default=None):
        return self.options.get(name, default)

    def tol(self, name: str) -> float:
        try:
            return float(self.tolerances[name])
        except KeyError:
            raise ConfigInvalid(f"{self.kind} has no tolerance {name!r}") from None

    def canonical(self) -> dict:
        """Everything that influences the emitted numbers, in a JSON-friendly form."""
        return {
            "kind": self.kind,
            "params": [self.params.b1, self.params.b2, self.params.aspect],
            "sizes": list(self.sizes),
            "replicas": self.replicas,
            "seed": self.seed,
            "profile": vars(self.profile),
            "options": {k: self.options[k] for k in sorted(self.options)},
            "tolerances": {k: self.tolerances[k] for k in sorted(self.tolerances)},
        }

    @property
    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ----------------------------------------------------------------- defaults --

_DEFAULTS = {
    "E1": dict(sizes=(64, 128, 256), replicas=20, profile=dict(kind="sine"),
               options=dict(grid=32, dx=1 / 400),
               tolerances=dict(max_deviation=0.05)),
    "E2": dict(sizes=(500, 1000, 2000), replicas=50, profile=dict(kind="double-sided", theta=0.2, rho=0.8),
               options=dict(window=0.05, edge_delta=0.02, cap=1_000_000),
               tolerances=dict(shock_ratio=0.05, fan_density=0.03, fan_edge=0.05, window_deviation=0.25)),
    "E3": dict(sizes=(500,), replicas=100, profile=dict(kind="constant", rho=0.4),
               options=dict(width=4000), tolerances=dict(z=3.0)),
    "E4": dict(sizes=(64, 128, 256), replicas=20000, profile=dict(kind="sine"),
               options=dict(v=0.5, u=0.35, h=0.02, threshold=0.02, reference=200000,
                            method="half-plane", dx=1 / 400),
               tolerances=dict(tv_1x1=0.08)),
    "E5": dict(sizes=(64, 128, 256), replicas=200, profile=dict(kind="constant", rho=0.5),
               options=dict(width=1000, steps=500, rank1_steps=10_000_000, rank2_steps=1_000_000,
                            monotone_steps=1_000_000, monotone_width=400, speed_ratio=0.125),
               tolerances=dict()),
    "E6": dict(sizes=(1000,), replicas=2, profile=dict(kind="constant", rho=0.5),
               options=dict(steps=120, vmax=12), tolerances=dict(z=4.0)),
    "E7": dict(sizes=(200,), replicas=20, profile=dict(kind="constant", rho=0.5),
               options=dict(rhos=(0.2, 0.5, 0.8), width=2000, ring=256), tolerances=dict(z=3.0)),
    "E8": dict(sizes=(16, 32, 64), replicas=2000, profile=dict(kind="constant", rho=0.5),
               options=dict(), tolerances=dict()),
}


def default_config(kind: str, **overrides) -> ExperimentConfig:
    """Configuration with the declared defaults of ``kind``; keyword overrides win."""
    kind = str(kind).upper()
    if kind not in _DEFAULTS:
        raise ConfigInvalid(f"unknown experiment {kind!r}")
    d = _DEFAULTS[kind]
    options = {**d["options"], **overrides.pop("options", {})}
    tolerances = {**d["tolerances"], **overrides.pop("tolerances", {})}
    profile = overrides.pop("profile", None)
    if not isinstance(profile, ProfileSpec):
        profile = ProfileSpec(**{**d["profile"], **(profile or {})})
    base = dict(kind=kind, params=make_params(0.25, 0.5), sizes=tuple(d["sizes"]),
                replicas=d["replicas"], seed=0, profile=profile, options=options,
                tolerances=tolerances)
    base.update(overrides)
    base["sizes"] = tuple(int(n) for n in base["sizes"])
    return ExperimentConfig(**base)


# ------------------------------------------------------------------ parsing --

def _value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text.strip()


def _ints(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(int(x) for x in text)
    return tuple(int(x) for x in str(text).replace(",", " ").split())


def parse_config(text: str, base_dir: str | Path = ".", **overrides) -> ExperimentConfig:
    """Build a configuration from INI text; keyword overrides (None = unset) win.

    Raises
    ------
    ConfigInvalid
        On unknown sections or keys, malformed values or violated invariants.
    """
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigInvalid(f"unreadable config: {e}") from e
    unknown = set(cp.sections()) - {"experiment", "params", "profile", "options", "tolerances"}
    if unknown:
        raise ConfigInvalid(f"unknown sections {sorted(unknown)}")
    exp = dict(cp["experiment"]) if cp.has_section("experiment") else {}
    kind = overrides.get("kind") or exp.pop("kind", None)
    exp.pop("kind", None)
    if not kind:
        raise ConfigInvalid("experiment kind is missing")
    kw: dict = {}
    try:
        for key, val in exp.items():
            if key == "sizes":
                kw["sizes"] = _ints(val)
            elif key in ("seed", "replicas", "workers"):
                kw[key] = int(val)
            elif key in ("out", "format", "plot"):
                kw[key] = val.strip()
            elif key == "timing":
                kw["timing"] = cp.getboolean("experiment", "timing")
            else:
                raise ConfigInvalid(f"unknown [experiment] key {key!r}")
        if cp.has_section("params"):
            p = {k: float(v) for k, v in cp["params"].items()}
            if set(p) - {"b1", "b2", "aspect"}:
                raise ConfigInvalid(f"unknown [params] keys {sorted(set(p) - {'b1', 'b2', 'aspect'})}")
            kw["params"] = make_params(p.get("b1", 0.25), p.get("b2", 0.5), p.get("aspect", 1.0))
        if cp.has_section("profile"):
            prof = dict(cp["profile"])
            if "file" in prof:
                prof["table"] = (Path(base_dir) / prof.pop("file")).read_text()
            if "points" in prof:
                rows = [r.split() for r in prof.pop("points").split(";") if r.strip()]
                domain = prof.pop("domain", "torus")
                prof["table"] = f"# domain {domain}\n" + "\n".join(" ".join(r) for r in rows) + "\n"
            prof.pop("domain", None)
            spec = {}
            for k, v in prof.items():
                if k in ("kind", "sampling", "table", "bits"):
                    spec[k] = v.strip()
                elif k in ("rho", "theta", "mean", "amplitude"):
                    spec[k] = float(v)
                else:
                    raise ConfigInvalid(f"unknown [profile] key {k!r}")
            kw["profile"] = spec
        if cp.has_section("options"):
            kw["options"] = {k: _value(v) for k, v in cp["options"].items()}
        if cp.has_section("tolerances"):
            kw["tolerances"] = {k: float(v) for k, v in cp["tolerances"].items()}
    except ConfigInvalid:
        raise
    except (SixVertexError, ValueError, OSError) as e:
        raise ConfigInvalid(str(e)) from e
    for key, val in overrides.items():
        if key != "kind" and val is not None:
            kw[key] = _ints(val) if key == "sizes" else val
    try:
        return default_config(kind, **kw)
    except ConfigInvalid:
        raise
    except (SixVertexError, TypeError, ValueError) as e:
        raise ConfigInvalid(str(e)) from e


def load_config(path: str | Path, **overrides) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigInvalid(f"cannot read {path}: {e}") from e
    return parse_config(text, path.parent, **overrides)


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})


def margin_speed(params: ModelParams) -> float:
    """Light-cone speed used by the cylinder-versus-line comparison window."""
    return 4.0 / (1.0 - params.b2)
