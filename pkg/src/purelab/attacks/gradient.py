"""Gradient-guided evasion attacks.

All functions take a batch X (n, d) with per-row box bounds and return
(X_adv, info) where info carries per-row success, iterations and query
counts. Oblivious specs stop each row at its first evasion; adaptive ones
spend the whole budget.
"""
from __future__ import annotations

import numpy as np

from ..rng import Rng
from .base import AttackSpec, AttackSurface, binarize

_NEG = -np.inf


def _early_stop_pass(surface, cur_bits, lower, upper, active, adv, success, queries):
    """Freeze rows whose current bits already evade; returns updated active set."""
    rows = np.flatnonzero(active)
    if rows.size == 0:
        return active
    ev = surface.evades(cur_bits[rows])
    queries[rows] += 1
    hit = rows[ev]
    if hit.size:
        adv[hit] = cur_bits[hit]
        success[hit] = True
        active = active.copy()
        active[hit] = False
    return active


def pgd(X: np.ndarray, lower: np.ndarray, upper: np.ndarray, spec: AttackSpec,
        surface: AttackSurface):
    """Projected gradient ascent on the attack loss inside the box.

    kind selects the step rule: pgd_linf takes sign steps, pgd_l2 normalized
    steps, pgd_l1 flips the single most promising admissible bit per
    iteration. rfgsm is pgd_linf from a random in-box starting point.
    A row whose gradient offers nothing (flat loss) stops unchanged.
    """
    kind = spec.kind
    if kind not in ("pgd_l1", "pgd_l2", "pgd_linf", "rfgsm"):
        raise ValueError(f"pgd cannot run kind {kind!r}")
    n, d = X.shape
    discrete = kind == "pgd_l1"
    cur = X.astype(np.float64).copy()
    if kind == "rfgsm" or (spec.random_start and not discrete):
        r = Rng(spec.seed).derive("pgd-start")
        cur = lower + r.uniform(X.shape) * (upper - lower)
    elif spec.random_start and discrete:
        r = Rng(spec.seed).derive("pgd-start")
        cur = binarize(lower + r.uniform(X.shape) * (upper - lower), lower, upper)

    adv = binarize(cur, lower, upper)
    success = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    iters = np.zeros(n, dtype=np.int64)
    queries = np.zeros(n, dtype=np.int64)
    early = spec.stops_early()

    for _ in range(spec.iterations):
        if early:
            active = _early_stop_pass(surface, binarize(cur, lower, upper), lower, upper,
                                      active, adv, success, queries)
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        _, g = surface.loss_and_grad(cur[rows])
        iters[rows] += 1
        if kind == "pgd_l1":
            sub = cur[rows]
            direction = 1.0 - 2.0 * sub  # +1 on zero bits, -1 on one bits
            gain = g * direction
            feasible = np.where(direction > 0, upper[rows] == 1.0, lower[rows] == 0.0)
            gain = np.where(feasible, gain, _NEG)
            best = np.argmax(gain, axis=1)
            take = gain[np.arange(rows.size), best] > 0.0
            stuck = rows[~take]
            if stuck.size:
                adv[stuck] = binarize(cur[stuck], lower[stuck], upper[stuck])
                active = active.copy()
                active[stuck] = False
            move = rows[take]
            cur[move, best[take]] = 1.0 - cur[move, best[take]]
        elif kind == "pgd_l2":
            norm = np.linalg.norm(g, axis=1, keepdims=True)
            step = spec.step_size * g / np.maximum(norm, 1e-12)
            cur[rows] = np.clip(cur[rows] + step, lower[rows], upper[rows])
        else:  # pgd_linf / rfgsm
            cur[rows] = np.clip(cur[rows] + spec.step_size * np.sign(g),
                                lower[rows], upper[rows])

    rows = np.flatnonzero(active)
    if rows.size:
        adv[rows] = binarize(cur[rows], lower[rows], upper[rows])
    pending = np.flatnonzero(~success)
    if pending.size:  # covers rows that ran out of budget or got stuck
        ev = surface.evades(adv[pending])
        queries[pending] += 1
        success[pending] = ev
    return adv, {"success": success, "iterations": iters, "queries": queries}


def _bit_ascent(X, lower, upper, spec, surface, criterion):
    """Shared loop for bca/grosse: flip the best admissible 0->1 bit each round."""
    n, d = X.shape
    cur = X.astype(np.float64).copy()
    adv = cur.copy()
    success = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    iters = np.zeros(n, dtype=np.int64)
    queries = np.zeros(n, dtype=np.int64)
    early = spec.stops_early()

    for _ in range(spec.iterations):
        if early:
            active = _early_stop_pass(surface, cur, lower, upper, active, adv, success, queries)
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        gain = criterion(cur[rows])
        iters[rows] += 1
        addable = (cur[rows] == 0.0) & (upper[rows] == 1.0)
        gain = np.where(addable, gain, _NEG)
        best = np.argmax(gain, axis=1)
        take = gain[np.arange(rows.size), best] > 0.0
        stuck = rows[~take]
        if stuck.size:
            adv[stuck] = cur[stuck]
            active = active.copy()
            active[stuck] = False
        move = rows[take]
        cur[move, best[take]] = 1.0

    rows = np.flatnonzero(active)
    if rows.size:
        adv[rows] = cur[rows]
    pending = np.flatnonzero(~success)
    if pending.size:
        ev = surface.evades(adv[pending])
        queries[pending] += 1
        success[pending] = ev
    return adv, {"success": success, "iterations": iters, "queries": queries}


def bca(X, lower, upper, spec: AttackSpec, surface: AttackSurface):
    """Per round, set the zero bit with the largest attack-loss gradient."""
    def criterion(cur):
        _, g = surface.loss_and_grad(cur)
        return g

    return _bit_ascent(X, lower, upper, spec, surface, criterion)


def grosse(X, lower, upper, spec: AttackSpec, surface: AttackSurface):
    """Per round, set the zero bit with the largest benign-score gradient."""
    def criterion(cur):
        _, ds = surface.score_and_grad(cur)
        return -ds  # benign probability is 1 - score

    return _bit_ascent(X, lower, upper, spec, surface, criterion)
