"""Shared attack plumbing: threat-scenario surface, specs, results,
binarization and validity checks."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import nn
from ..data import check_bounds
from ..detector import DetectorModel
from ..errors import CapabilityError, InvariantViolation
from ..purifier import PurifierModel, binarize01, purify

SCENARIOS = ("black", "grey", "white")


class AttackSurface:
    """What a threat scenario lets the attacker touch.

    black: label/score queries against the deployed pipeline, nothing else.
    grey:  full knowledge of the bare detector, no purifier anywhere; the
           constructor refuses a purifier outright so no grey-box code path
           can ever read purifier parameters.
    white: gradients through the full composition, with the purifier's
           continuous (pre-binarization) output carrying the chain rule.

    query_label follows the deployed decision path (binarized purification
    when a purifier is present). Every query_* call counts toward .queries.
    """

    def __init__(self, scenario: str, det: DetectorModel, purifier: PurifierModel | None = None):
        if scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {scenario!r}")
        if scenario == "grey" and purifier is not None:
            raise CapabilityError("a grey-box attacker is oblivious to the purifier; "
                                  "refusing to attach one to the surface")
        self.scenario = scenario
        self.det = det
        self.purifier = purifier
        self.queries = 0

    # -- query access (all scenarios) --------------------------------------

    def query_score(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        self.queries += X.shape[0]
        if self.purifier is not None:
            X = purify(self.purifier, X)
        return self.det.score(X)

    def query_label(self, X: np.ndarray) -> np.ndarray:
        s = self.query_score(X)
        return (s >= self.det.threshold).astype(np.int64)

    def query_verdicts(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(scores, labels) in one query, like a scanner returning verdict
        plus confidence."""
        s = self.query_score(X)
        return s, (s >= self.det.threshold).astype(np.int64)

    def evades(self, X: np.ndarray) -> np.ndarray:
        """True where the deployed pipeline calls the sample benign."""
        return self.query_label(X) == 0

    # -- gradient access (grey and white only) ------------------------------

    def _require_gradients(self):
        if self.scenario == "black":
            raise CapabilityError("black-box scenario grants no gradient access")

    def loss(self, X: np.ndarray) -> np.ndarray:
        """Per-row attack objective: the cost of still looking malicious.

        Computed in logit space in grey/white mode so it stays informative
        when the detector saturates; the black-box value falls back to
        clamped cross entropy on queried scores.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if self.scenario == "black":
            s = np.clip(self.query_score(X), nn.BCE_EPS, 1.0 - nn.BCE_EPS)
            return -np.log(s)
        z = self._logits(X)
        return np.logaddexp(0.0, -z)

    def loss_and_grad(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(per-row loss, d loss / d input). Grey: bare detector; white:
        through the purifier's continuous output."""
        self._require_gradients()
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        h, ptape = self._through_purifier(X)
        _, tape = self.det.net.forward(h)
        z = tape.caches[-1][1]
        loss = np.logaddexp(0.0, -z[:, 0])
        # d/dz of softplus(-z) is -sigmoid(-z); stays nonzero on both tails
        dz = -nn.sigmoid(-z)
        _, dh = self.det.net.backward(tape, dz, at_preactivation=True)
        return loss, self._back_through_purifier(ptape, dh)

    def score_and_grad(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(per-row malicious score, d score / d input)."""
        self._require_gradients()
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        h, ptape = self._through_purifier(X)
        out, tape = self.det.net.forward(h)
        _, dh = self.det.net.backward(tape, np.ones_like(out))
        return out[:, 0], self._back_through_purifier(ptape, dh)

    # -- internals ----------------------------------------------------------

    def _logits(self, X: np.ndarray) -> np.ndarray:
        h = X
        if self.scenario == "white" and self.purifier is not None:
            h, _ = self.purifier.forward_continuous(X)
        _, tape = self.det.net.forward(h)
        return tape.caches[-1][1][:, 0]

    def _through_purifier(self, X: np.ndarray):
        if self.scenario == "white" and self.purifier is not None:
            return self.purifier.forward_continuous(X)
        return X, None

    def _back_through_purifier(self, ptape, dh: np.ndarray) -> np.ndarray:
        if self.scenario == "white" and self.purifier is not None:
            return self.purifier.input_gradient(ptape, dh)
        return dh


@dataclass
class AttackSpec:
    """One attack's identity and budget. Fields not used by a given kind
    are ignored by it."""

    kind: str
    scenario: str = "grey"
    iterations: int = 100
    step_size: float = 0.02
    seed: int = 0
    random_start: bool = False
    repeats: int = 10               # salt_pepper sweeps
    intensity_step: float = 0.001   # salt_pepper intensity increment
    query_budget: int = 10          # random_add
    n_guides: int = 35              # mimicry: dense benign guidance by default
    restarts: int = 5               # imax_ma
    members: tuple = ()             # ensembles: member AttackSpecs
    early_stop: bool | None = None  # None: oblivious scenarios stop at first evasion

    def stops_early(self) -> bool:
        if self.early_stop is not None:
            return self.early_stop
        return self.scenario != "white"


@dataclass
class AttackResult:
    original: np.ndarray
    adversarial: np.ndarray
    success: bool
    queries: int
    iterations_used: int
    flipped: int

    @staticmethod
    def build(x, adv, success, queries, iterations_used):
        return AttackResult(
            original=x,
            adversarial=adv,
            success=bool(success),
            queries=int(queries),
            iterations_used=int(iterations_used),
            flipped=int(np.sum(x != adv)),
        )


def binarize(V: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Continuous iterate -> admissible bits: round (0.5 rounds up), clip to box."""
    return np.clip(binarize01(V), lower, upper)


def validate_adversarial(x: np.ndarray, adv: np.ndarray, lower: np.ndarray,
                         upper: np.ndarray) -> None:
    """Reject anything non-binary or outside the manipulation box."""
    x = np.asarray(x, dtype=np.float64)
    adv = np.asarray(adv, dtype=np.float64)
    if adv.shape != x.shape:
        raise InvariantViolation("adversarial shape differs from original")
    if not np.all((adv == 0.0) | (adv == 1.0)):
        raise InvariantViolation("adversarial example has non-binary entries")
    check_bounds(adv, lower, upper)


def attack_loss(scenario: str, det: DetectorModel, x: np.ndarray,
                purifier: PurifierModel | None = None) -> np.ndarray:
    """Standalone attack objective for one scenario (see AttackSurface.loss).

    Passing a purifier with scenario "grey" raises CapabilityError: the
    oblivious attacker must not touch it, even for a loss value.
    """
    return AttackSurface(scenario, det, purifier).loss(x)
