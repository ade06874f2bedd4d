"""Stochastic six-vertex model: exact samplers, coupling tools and
hydrodynamic checks."""
from . import dynamics, gibbs, multiclass, pde, stats  # noqa: F401
from .core import *  # noqa: F401,F403
from .core import __all__ as _core_all

__version__ = "0.1.0"
__all__ = list(_core_all) + ["dynamics", "gibbs", "multiclass", "pde", "stats"]
