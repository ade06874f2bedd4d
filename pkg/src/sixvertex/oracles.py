"""Exact one-step transition laws of tiny systems by brute-force enumeration.

Two independent routes are provided for the line: summing products of
vertex weights over all horizontal arrow rows, and enumerating stay coins
and (tail-folded) jump lengths through the particle stepper. Particles that
leave the box ``[lo, hi)`` are recorded at ``hi``.
"""
from __future__ import annotations

import itertools

import numpy as np

from . import _kernels as K
from .core import DEFAULT_PARAMS, ModelParams, RangeViolation

def vertex_weight(i1: int, j1: int, i2: int, j2: int, params: ModelParams) -> float:
    """Multi-class vertex weight; class 0 means no arrow (the highest class)."""
    big = 1 << 30
    a, b, c, d = (x if x else big for x in (i1, j1, i2, j2))
    if sorted((a, b)) != sorted((c, d)):
        return 0.0
    if a == b:
        return 1.0
    if a < b:
        return params.b1 if c == a else 1.0 - params.b1
    return params.b2 if d == b else 1.0 - params.b2


def _add(law: dict, key, w: float) -> None:
    if w > 0.0:
        law[key] = law.get(key, 0.0) + w


def line_law_vertex(positions, lo: int, hi: int, params: ModelParams = DEFAULT_PARAMS) -> dict:
    """Law of the new position tuple from vertex weights on the sites ``[lo, hi)``."""
    pos = np.asarray(positions, dtype=np.int64)
    if pos.size and (pos[0] < lo or pos[-1] >= hi):
        raise RangeViolation("particles must lie in the box")
    occ = K.occupancy_window(pos, lo, hi).astype(np.int64)
    W = hi - lo
    law: dict = {}
    for h in itertools.product((0, 1), repeat=W):
        w, hin, new = 1.0, 0, []
        for x in range(W):
            i2 = occ[x] + hin - h[x]
            if i2 not in (0, 1):
                w = 0.0
                break
            w *= vertex_weight(int(occ[x]), hin, int(i2), h[x], params)
            if i2:
                new.append(lo + x)
            hin = h[x]
        if w == 0.0:
            continue
        if h[-1]:
            new.append(hi)
        _add(law, tuple(new), w)
    return law


def _jump_table(caps: np.ndarray, pos: np.ndarray, b2: float):
    """Per particle: jump values 1..J with the last one carrying the tail mass."""
    tables = []
    for x, c in zip(pos, caps):
        J = int(c - x)
        vals = np.arange(1, J + 1)
        probs = (1 - b2) * b2 ** (vals - 1.0)
        probs[-1] = b2 ** (J - 1.0)
        tables.append(list(zip(vals.tolist(), probs.tolist())))
    return tables


def line_law_coins(positions, hi: int, params: ModelParams = DEFAULT_PARAMS) -> dict:
    """Law of the new position tuple by enumerating stay coins and jumps."""
    pos = np.asarray(positions, dtype=np.int64)
    n = pos.size
    caps = np.append(pos[1:], hi)
    tables = _jump_table(caps, pos, params.b2)
    law: dict = {}
    for chi in itertools.product((0, 1), repeat=n):
        pc = np.prod([params.b1 if c else 1 - params.b1 for c in chi])
        for combo in itertools.product(*tables):
            jump = np.array([j for j, _ in combo], np.int64)
            w = pc * np.prod([p for _, p in combo])
            new = K.line_step_core(pos, np.array(chi, np.uint8), jump)
            _add(law, tuple(int(min(x, hi)) for x in new), w)
    return law


def ring_law(occ, params: ModelParams = DEFAULT_PARAMS) -> tuple[dict, float]:
    """Normalized law of the next ring occupancy and the row partition function."""
    occ = np.asarray(occ, dtype=np.int64)
    N = occ.size
    law: dict = {}
    for h in itertools.product((0, 1), repeat=N):
        w, new = 1.0, []
        for x in range(N):
            hin = h[x - 1]
            i2 = occ[x] + hin - h[x]
            if i2 not in (0, 1):
                w = 0.0
                break
            w *= vertex_weight(int(occ[x]), hin, int(i2), h[x], params)
            new.append(int(i2))
        _add(law, tuple(new), w)
    Z = sum(law.values())
    return {k: v / Z for k, v in law.items()}, Z


def multiclass_law_vertex(occ, ncls: int, params: ModelParams = DEFAULT_PARAMS) -> dict:
    """Law of ``(new site classes, exiting class)`` for classes on a box (0 = empty)."""
    occ = [int(c) for c in occ]
    W = len(occ)
    law: dict = {}
    for h in itertools.product(range(ncls + 1), repeat=W):
        w, hin, new = 1.0, 0, []
        for x in range(W):
            a, b, d = occ[x], hin, h[x]
            if d == a:
                c = b
            elif d == b:
                c = a
            else:
                w = 0.0
                break
            w *= vertex_weight(a, b, c, d, params)
            if w == 0.0:
                break
            new.append(c)
            hin = d
        if w == 0.0:
            continue
        _add(law, (tuple(new), h[-1]), w)
    return law


def multiclass_law_coins(occ, ncls: int, params: ModelParams = DEFAULT_PARAMS) -> dict:
    """Law of ``(new site classes, exiting class)`` by enumerating class-resolved coins."""
    occ = np.asarray(occ, dtype=np.int64)
    W = occ.size
    pos = np.flatnonzero(occ).astype(np.int64)
    cls = occ[pos]
    n = pos.size
    # any jump longer than the box reaches the same outcome as one of length W + n
    J = W + n
    vals = np.arange(1, J + 1)
    probs = (1 - params.b2) * params.b2 ** (vals - 1.0)
    probs[-1] = params.b2 ** (J - 1.0)
    table = list(zip(vals.tolist(), probs.tolist()))
    law: dict = {}
    for chi in itertools.product((0, 1), repeat=n):
        pc = float(np.prod([params.b1 if c else 1 - params.b1 for c in chi]))
        for combo in itertools.product(table, repeat=n):
            jump = np.array([j for j, _ in combo], np.int64)
            w = pc * float(np.prod([p for _, p in combo]))
            new = K.multiclass_step_core(pos, cls, np.array(chi, np.uint8), jump, ncls)
            sites = [0] * W
            exit_cls = 0
            for p, c in zip(new, cls):
                if p >= W:
                    exit_cls = int(c)
                else:
                    sites[p] = int(c)
            _add(law, (tuple(sites), exit_cls), w)
    return law
