"""Ensemble attacks built from the projected-gradient family."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from ..rng import Rng
from .base import AttackSpec, AttackSurface, binarize
from .gradient import pgd

DEFAULT_MEMBERS = ("pgd_l1", "pgd_l2", "pgd_linf")
_MEMBER_STEPS = {"pgd_l1": 1.0, "pgd_l2": 0.5, "pgd_linf": 0.02, "rfgsm": 0.02}


def member_specs(spec: AttackSpec) -> list[AttackSpec]:
    """Materialize the member list: AttackSpecs pass through, names become
    specs inheriting the ensemble's scenario/budget with their usual steps."""
    members = spec.members or DEFAULT_MEMBERS
    out = []
    for i, m in enumerate(members):
        if isinstance(m, AttackSpec):
            out.append(replace(m, scenario=spec.scenario))
        else:
            out.append(AttackSpec(kind=m, scenario=spec.scenario, iterations=spec.iterations,
                                  step_size=_MEMBER_STEPS.get(m, spec.step_size),
                                  seed=spec.seed + i, early_stop=spec.early_stop))
    return out


def max_ma(X: np.ndarray, lower, upper, spec: AttackSpec, surface: AttackSurface):
    """Run every member and keep, per row, the result with the largest
    attack loss."""
    specs = member_specs(spec)
    n = X.shape[0]
    best_adv = X.astype(np.float64).copy()
    best_loss = np.full(n, -np.inf)
    success = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=np.int64)
    queries = np.zeros(n, dtype=np.int64)
    for mspec in specs:
        adv, info = pgd(X, lower, upper, mspec, surface)
        loss = surface.loss(adv)
        better = loss > best_loss
        best_adv[better] = adv[better]
        best_loss[better] = loss[better]
        success |= info["success"]
        iters += info["iterations"]
        queries += info["queries"]
    return best_adv, {"success": success, "iterations": iters, "queries": queries,
                      "loss": best_loss}


def imax_ma(X: np.ndarray, lower, upper, spec: AttackSpec, surface: AttackSurface):
    """max_ma repeated with random restarts, keeping the best by loss.

    Restart 0 is the plain deterministic-start run, so the result never
    scores below max_ma under the same seed.
    """
    n = X.shape[0]
    best_adv = X.astype(np.float64).copy()
    best_loss = np.full(n, -np.inf)
    success = np.zeros(n, dtype=bool)
    iters = np.zeros(n, dtype=np.int64)
    queries = np.zeros(n, dtype=np.int64)
    base_members = member_specs(spec)
    for r in range(max(spec.restarts, 1)):
        if r == 0:
            ms = tuple(base_members)
        else:
            ms = tuple(replace(m, random_start=True,
                               seed=Rng(m.seed).derive(f"restart{r}").seed)
                       for m in base_members)
        adv, info = max_ma(X, lower, upper, replace(spec, members=ms), surface)
        better = info["loss"] > best_loss
        best_adv[better] = adv[better]
        best_loss[better] = info["loss"][better]
        success |= info["success"]
        iters += info["iterations"]
        queries += info["queries"]
    return best_adv, {"success": success, "iterations": iters, "queries": queries,
                      "loss": best_loss}


def stepwise_ma(X: np.ndarray, lower, upper, spec: AttackSpec, surface: AttackSurface):
    """Interleave one step of each member per round on one shared iterate."""
    specs = member_specs(replace(spec, members=spec.members or ("pgd_l2", "pgd_linf")))
    n, d = X.shape
    cur = X.astype(np.float64).copy()
    adv = binarize(cur, lower, upper)
    success = np.zeros(n, dtype=bool)
    active = np.ones(n, dtype=bool)
    iters = np.zeros(n, dtype=np.int64)
    queries = np.zeros(n, dtype=np.int64)
    early = spec.stops_early()

    for _ in range(spec.iterations):
        if early:
            rows = np.flatnonzero(active)
            if rows.size:
                bits = binarize(cur[rows], lower[rows], upper[rows])
                ev = surface.evades(bits)
                queries[rows] += 1
                hit = rows[ev]
                adv[hit] = bits[ev]
                success[hit] = True
                active[hit] = False
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        for mspec in specs:
            _, g = surface.loss_and_grad(cur[rows])
            if mspec.kind in ("pgd_linf", "rfgsm"):
                step = mspec.step_size * np.sign(g)
            elif mspec.kind == "pgd_l2":
                norm = np.linalg.norm(g, axis=1, keepdims=True)
                step = mspec.step_size * g / np.maximum(norm, 1e-12)
            elif mspec.kind == "pgd_l1":
                sub = cur[rows]
                direction = np.where(g >= 0, 1.0, -1.0)
                gain = np.abs(g) * np.abs(direction * 0.5 + 0.5 - sub)
                feasible = np.where(direction > 0, upper[rows] == 1.0, lower[rows] == 0.0)
                gain = np.where(feasible, gain, -np.inf)
                best = np.argmax(gain, axis=1)
                take = gain[np.arange(rows.size), best] > 0.0
                step = np.zeros_like(sub)
                tgt = (direction[np.arange(rows.size), best] + 1.0) / 2.0
                step[np.arange(rows.size), best] = np.where(
                    take, tgt - sub[np.arange(rows.size), best], 0.0)
            else:
                raise ValueError(f"stepwise member {mspec.kind!r} unsupported")
            cur[rows] = np.clip(cur[rows] + step, lower[rows], upper[rows])
        iters[rows] += 1

    rows = np.flatnonzero(active)
    if rows.size:
        adv[rows] = binarize(cur[rows], lower[rows], upper[rows])
    pending = np.flatnonzero(~success)
    if pending.size:
        ev = surface.evades(adv[pending])
        queries[pending] += 1
        success[pending] = ev
    return adv, {"success": success, "iterations": iters, "queries": queries}
