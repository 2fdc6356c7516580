"""Evasion attack suite for binary-feature classifiers.

Every attack consumes malware rows plus box bounds and talks to the
defense only through an AttackSurface, which enforces what each threat
scenario is allowed to see.
"""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from .base import (SCENARIOS, AttackResult, AttackSpec, AttackSurface,
                   attack_loss, binarize, validate_adversarial)
from .ensemble import imax_ma, max_ma, stepwise_ma
from .gradfree import mimicry, pointwise, random_add, salt_pepper
from .gradient import bca, grosse, pgd

ATTACK_KINDS = ("pgd_l1", "pgd_l2", "pgd_linf", "rfgsm", "bca", "grosse",
                "salt_pepper", "pointwise", "max_ma", "imax_ma",
                "stepwise_ma", "mimicry", "random_add")

# attacks waged with knowledge of the bare detector (query-only and
# transfer attacks are exercised separately)
GREY_SUITE = ("pgd_l1", "pgd_l2", "pgd_linf", "rfgsm", "bca", "grosse",
              "salt_pepper", "pointwise", "max_ma", "imax_ma", "stepwise_ma")

_BATCH_FUNCS = {
    "pgd_l1": pgd, "pgd_l2": pgd, "pgd_linf": pgd, "rfgsm": pgd,
    "bca": bca, "grosse": grosse,
    "salt_pepper": salt_pepper, "pointwise": pointwise,
    "random_add": random_add,
    "max_ma": max_ma, "imax_ma": imax_ma, "stepwise_ma": stepwise_ma,
}

# step-size / iteration overrides for the adaptive scenario; other
# parameters carry over from the oblivious defaults
_WHITE_PGD = {
    "pgd_l1": {"iterations": 500},
    "pgd_l2": {"iterations": 200, "step_size": 0.05},
    "pgd_linf": {"iterations": 500, "step_size": 0.002},
    "rfgsm": {"iterations": 500, "step_size": 0.002},
}


def default_spec(kind: str, scenario: str = "grey", seed: int = 0) -> AttackSpec:
    """Canonical parameters for each attack under a given scenario."""
    if kind not in ATTACK_KINDS:
        raise ValueError(f"unknown attack kind {kind!r}")
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}")
    spec = AttackSpec(kind=kind, scenario=scenario, seed=seed)
    if kind == "pgd_l2":
        spec = replace(spec, step_size=0.5)
    if scenario == "white":
        if kind in _WHITE_PGD:
            spec = replace(spec, **_WHITE_PGD[kind])
        elif kind in ("max_ma", "imax_ma"):
            spec = replace(spec, members=tuple(
                default_spec(k, "white", seed + 1 + j)
                for j, k in enumerate(("pgd_l1", "pgd_l2", "pgd_linf"))))
        elif kind == "stepwise_ma":
            spec = replace(spec, members=tuple(
                default_spec(k, "white", seed + 1 + j)
                for j, k in enumerate(("pgd_l2", "pgd_linf"))))
    return spec


def run_attack(spec: AttackSpec, X: np.ndarray, bounds, surface: AttackSurface,
               benign_pool: np.ndarray | None = None) -> list[AttackResult]:
    """Run one attack over a batch of malware rows.

    bounds is the (lower, upper) pair matching X's shape. Returns one
    AttackResult per row; every adversarial output is validated against
    the bounds before being returned.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    lower, upper = bounds
    lower = np.broadcast_to(np.asarray(lower, dtype=np.float64), X.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=np.float64), X.shape)

    if spec.kind == "mimicry":
        if benign_pool is None:
            raise ValueError("mimicry requires a benign_pool")
        adv, info = mimicry(X, lower, upper, spec, benign_pool, surface)
    else:
        func = _BATCH_FUNCS.get(spec.kind)
        if func is None:
            raise ValueError(f"unknown attack kind {spec.kind!r}")
        adv, info = func(X, lower, upper, spec, surface)

    validate_adversarial(X, adv, lower, upper)
    results = []
    for i in range(X.shape[0]):
        results.append(AttackResult.build(
            X[i], adv[i], bool(info["success"][i]),
            int(info["queries"][i]), int(info["iterations"][i])))
    return results


__all__ = [
    "ATTACK_KINDS", "GREY_SUITE", "SCENARIOS",
    "AttackResult", "AttackSpec", "AttackSurface",
    "attack_loss", "binarize", "default_spec", "run_attack",
    "validate_adversarial",
    "pgd", "bca", "grosse", "salt_pepper", "pointwise", "random_add",
    "mimicry", "max_ma", "imax_ma", "stepwise_ma",
]
