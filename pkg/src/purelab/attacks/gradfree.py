"""Query-only attacks: random noise sweeps, perturbation minimization,
benign mimicry, and random feature addition."""
from __future__ import annotations

import numpy as np

from ..rng import Rng
from .base import AttackSpec, AttackSurface


def salt_pepper(X: np.ndarray, lower: np.ndarray, upper: np.ndarray, spec: AttackSpec,
                surface: AttackSurface):
    """Noise-intensity sweep, repeated with independent noise draws.

    Each repeat fixes one noise realization (a flip-position variable and a
    salt-or-pepper coin per coordinate) and raises the intensity from
    intensity_step upward; a coordinate participates once the intensity
    passes its position variable, so the perturbation grows monotonically
    until the surface mislabels the candidate or the intensity reaches 1.
    Among successful repeats the least-perturbed candidate wins.
    """
    n, d = X.shape
    reps = spec.repeats
    rng = Rng(spec.seed).derive("salt-pepper")
    u_pos = rng.uniform((reps, n, d))
    coin = (rng.uniform((reps, n, d)) < 0.5).astype(np.float64)

    success_p = np.full((reps, n), np.inf)  # intensity at first evasion
    queries = np.zeros(n, dtype=np.int64)
    iters = np.zeros(n, dtype=np.int64)

    p = spec.intensity_step
    while p <= 1.0 + 1e-12:
        live = np.argwhere(~np.isfinite(success_p))
        if live.size == 0:
            break
        r_idx, s_idx = live[:, 0], live[:, 1]
        cand = np.where(u_pos[r_idx, s_idx] < p, coin[r_idx, s_idx], X[s_idx])
        cand = np.clip(cand, lower[s_idx], upper[s_idx])
        ev = surface.evades(cand)
        np.add.at(queries, s_idx, 1)
        np.add.at(iters, s_idx, 1)
        hit = np.flatnonzero(ev)
        success_p[r_idx[hit], s_idx[hit]] = p
        p += spec.intensity_step

    adv = X.astype(np.float64).copy()
    success = np.zeros(n, dtype=bool)
    for s in range(n):
        best_r, best_flips, best_cand = -1, None, None
        for r in range(reps):
            if not np.isfinite(success_p[r, s]):
                continue
            cand = np.where(u_pos[r, s] < success_p[r, s], coin[r, s], X[s])
            cand = np.clip(cand, lower[s], upper[s])
            flips = int(np.sum(cand != X[s]))
            if best_flips is None or flips < best_flips:
                best_r, best_flips, best_cand = r, flips, cand
        if best_cand is not None:
            adv[s] = best_cand
            success[s] = True
    return adv, {"success": success, "iterations": iters, "queries": queries}


def pointwise(X: np.ndarray, lower: np.ndarray, upper: np.ndarray, spec: AttackSpec,
              surface: AttackSurface):
    """Perturbation minimization on top of a salt_pepper seed.

    Starting from a successful noisy candidate, repeatedly revert the single
    perturbed coordinate whose reversion leaves the most benign-looking
    score, as long as the candidate keeps evading. On an additive-score
    pipeline this keeps exactly a minimum-cardinality evading flip set.
    Rows whose seed attack failed pass through unchanged.
    """
    seed_spec = AttackSpec(kind="salt_pepper", scenario=spec.scenario, seed=spec.seed,
                           repeats=spec.repeats, intensity_step=spec.intensity_step,
                           early_stop=spec.early_stop)
    adv, info = salt_pepper(X, lower, upper, seed_spec, surface)
    queries = info["queries"].copy()
    iters = np.zeros(X.shape[0], dtype=np.int64)

    for s in np.flatnonzero(info["success"]):
        cur = adv[s].copy()
        while True:
            flipped = np.flatnonzero(cur != X[s])
            if flipped.size == 0:
                break
            cands = np.repeat(cur[None, :], flipped.size, axis=0)
            cands[np.arange(flipped.size), flipped] = X[s, flipped]
            scores, labels = surface.query_verdicts(cands)
            queries[s] += flipped.size
            iters[s] += 1
            ok = labels == 0
            if not ok.any():
                break
            pick = np.flatnonzero(ok)[np.argmin(scores[ok])]
            cur[flipped[pick]] = X[s, flipped[pick]]
        adv[s] = cur
    return adv, {"success": info["success"].copy(), "iterations": iters, "queries": queries}


def random_add(X: np.ndarray, lower: np.ndarray, upper: np.ndarray, spec: AttackSpec,
               surface: AttackSurface):
    """Blind stand-in for obfuscation: random admissible feature additions.

    Each query sets a random subset of the addable coordinates, ramping the
    subset density over the query budget; the first evading candidate wins.
    """
    n, d = X.shape
    budget = spec.query_budget
    adv = X.astype(np.float64).copy()
    success = np.zeros(n, dtype=bool)
    queries = np.zeros(n, dtype=np.int64)
    rng = Rng(spec.seed).derive("random-add")
    addable = (X == 0.0) & (upper == 1.0)

    for q in range(budget):
        live = np.flatnonzero(~success)
        if live.size == 0:
            break
        density = (q + 1) / budget
        mask = rng.bernoulli((n, d), density)
        cand = np.where(mask & addable, 1.0, X)[live]
        cand = np.clip(cand, lower[live], upper[live])
        ev = surface.evades(cand)
        queries[live] += 1
        hit = live[ev]
        adv[hit] = cand[ev]
        success[hit] = True
    return adv, {"success": success, "iterations": queries.copy(), "queries": queries}


def mimicry(X: np.ndarray, lower: np.ndarray, upper: np.ndarray, spec: AttackSpec,
            benign_pool: np.ndarray, surface: AttackSurface | None = None):
    """Copy the union of the nearest benign feature sets, clipped to bounds.

    The target is the elementwise union of the n_guides pool rows closest in
    Hamming distance; bounds clipping keeps original features that the
    policy forbids deleting, which turns full mimicry partial under
    add-only manipulation. Needs no model access at all.
    """
    benign_pool = np.asarray(benign_pool, dtype=np.float64)
    if spec.n_guides > benign_pool.shape[0]:
        raise ValueError(f"asked for {spec.n_guides} guides, pool holds {benign_pool.shape[0]}")
    n = X.shape[0]
    adv = X.astype(np.float64).copy()
    if spec.n_guides > 0:
        for s in range(n):
            dist = np.sum(benign_pool != X[s], axis=1)
            guides = np.argsort(dist, kind="stable")[: spec.n_guides]
            target = benign_pool[guides].max(axis=0)
            adv[s] = np.clip(target, lower[s], upper[s])
    queries = np.zeros(n, dtype=np.int64)
    success = np.zeros(n, dtype=bool)
    if surface is not None:
        success = surface.evades(adv)
        queries += 1
    return adv, {"success": success, "iterations": np.zeros(n, dtype=np.int64), "queries": queries}
