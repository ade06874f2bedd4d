"""Monte Carlo samplers of one-step outcomes on tiny boxes, used against the
enumeration oracles."""
from __future__ import annotations

import numpy as np

from sixvertex import DEFAULT_PARAMS, spawn_seed
from sixvertex import _kernels as K
from sixvertex.multiclass import MultiClassConfiguration, step_multiclass_tracked


def tally(outcomes) -> dict:
    out: dict = {}
    for o in outcomes:
        out[o] = out.get(o, 0) + 1
    return out


def line_mc(positions, hi: int, reps: int, seed: int = 0, params=DEFAULT_PARAMS) -> dict:
    """New positions, with particles beyond the box recorded at ``hi``."""
    pos = np.asarray(positions, dtype=np.int64)
    out = []
    for r in range(reps):
        new = K.line_step_keyed(pos, params.b1, params.b2, spawn_seed(seed, r), 1)
        out.append(tuple(int(x) for x in np.minimum(new, hi)))
    return tally(out)


def ring_mc(occ, reps: int, seed: int = 0, params=DEFAULT_PARAMS) -> dict:
    occ = np.asarray(occ, dtype=np.uint8)
    out = []
    for r in range(reps):
        new, _ = K.ring_row_keyed(occ, params.b1, params.b2, spawn_seed(seed, r), 1)
        out.append(tuple(int(x) for x in new))
    return tally(out)


def multiclass_mc(occ, ncls: int, reps: int, seed: int = 0, params=DEFAULT_PARAMS) -> dict:
    """``(site classes, exiting class)`` outcomes of one multi-class step."""
    occ = np.asarray(occ, dtype=np.int64)
    W = occ.size
    cfg = MultiClassConfiguration.from_occupancy(occ, ncls)
    out = []
    for r in range(reps):
        new = step_multiclass_tracked(cfg, params, spawn_seed(seed, r), 1)
        sites = [0] * W
        exit_cls = 0
        for p, c in zip(new, cfg.classes):
            if p >= W:
                exit_cls = int(c)
            else:
                sites[int(p)] = int(c)
        out.append((tuple(sites), exit_cls))
    return tally(out)
