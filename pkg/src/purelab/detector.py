"""Malware detector: a feed-forward classifier over binary feature vectors
with access to its internal representations, plus an adversarially trained
variant used as a hardening baseline."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .checkpoint import load_checkpoint, save_checkpoint
from .data import LabeledDataset, default_bounds
from .rng import Rng

logger = logging.getLogger(__name__)


@dataclass
class DetectorConfig:
    hidden: list[int] = field(default_factory=lambda: [200, 200])
    activation: str = "elu"
    epochs: int = 100
    batch_size: int = 128
    lr: float = 0.001
    threshold: float = 0.5
    feature_layer: int | None = None  # None: last hidden layer
    seed: int = 0


class DetectorModel:
    """Trained classifier: scores in [0,1], label 1 (malicious) when
    score >= threshold, ties counted as malicious."""

    def __init__(self, net: nn.LayeredNet, threshold: float, feature_layer: int, seed: int):
        self.net = net
        self.threshold = threshold
        self.feature_layer = feature_layer
        self.seed = seed
        self.history: list[dict] = []
        self.train_seconds: float = 0.0

    @property
    def dim(self) -> int:
        return self.net.in_dim

    def score(self, x: np.ndarray) -> np.ndarray | float:
        out, _ = self.net.forward(x)
        if np.asarray(x).ndim == 2:
            return out[:, 0]
        return float(out[0])

    def logits(self, x: np.ndarray) -> np.ndarray:
        _, tape = self.net.forward(x)
        z = tape.caches[-1][1]
        return z[:, 0] if np.asarray(x).ndim == 2 else float(z[0, 0])


def build_detector_net(d: int, config: DetectorConfig, rng: Rng) -> nn.LayeredNet:
    dims = [d] + list(config.hidden) + [1]
    acts = [config.activation] * len(config.hidden) + ["sigmoid"]
    return nn.mlp(dims, acts, rng)


def predict(model: DetectorModel, x: np.ndarray):
    """(score, label) for one vector, or (scores, labels) for a batch."""
    s = model.score(x)
    if np.isscalar(s):
        return s, int(s >= model.threshold)
    return s, (s >= model.threshold).astype(np.int64)


def internal_repr(model: DetectorModel, x: np.ndarray, n: int | None = None) -> np.ndarray:
    """Post-activation output of layer n (1-based); defaults to the model's
    feature layer. n equal to the depth returns the score vector."""
    n = model.feature_layer if n is None else n
    _, tape = model.net.forward(x)
    return model.net.layer_output(tape, n)


def internal_feature_distance(model: DetectorModel, a: np.ndarray, b: np.ndarray,
                              n: int | None = None) -> float:
    """Mean squared distance between internal representations of a and b."""
    n = model.feature_layer if n is None else n
    return nn.mse(internal_repr(model, a, n), internal_repr(model, b, n))


def feature_distance_gradient(model: DetectorModel, a: np.ndarray, b: np.ndarray,
                              n: int | None = None):
    """(distance, d distance / d b); a is treated as a constant."""
    n = model.feature_layer if n is None else n
    ra = internal_repr(model, a, n)
    _, tape_b = model.net.forward(b)
    rb = model.net.layer_output(tape_b, n)
    dist = nn.mse(ra, rb)
    grad = model.net.input_gradient_from_layer(tape_b, n, nn.mse_grad(ra, rb))
    return dist, grad


def _epoch_metrics(model: DetectorModel, ds: LabeledDataset) -> dict:
    scores, labels = predict(model, ds.X)
    return {
        "loss": nn.bce(scores, ds.y),
        "acc": float(np.mean(labels == ds.y)),
    }


def train_detector(train: LabeledDataset, val: LabeledDataset,
                   config: DetectorConfig) -> DetectorModel:
    """Minimize BCE with Adam; per-epoch validation metrics land in
    model.history, wall-clock training time in model.train_seconds."""
    return _train(train, val, config, adversarial=False)


def train_detector_adversarial(train: LabeledDataset, val: LabeledDataset,
                               config: DetectorConfig, at_iterations: int = 50,
                               at_step: float = 0.02, policy: str = "add-only") -> DetectorModel:
    """Hardening baseline: every malware row in a batch is replaced by a
    k-step sign-ascent adversarial version (random in-box start, randomized
    rounding) against the current parameters before the gradient step."""
    return _train(train, val, config, adversarial=True,
                  at_iterations=at_iterations, at_step=at_step, policy=policy)


def _train(train, val, config, adversarial, at_iterations=0, at_step=0.0, policy="add-only"):
    start = time.perf_counter()
    rng = Rng(config.seed).derive("detector-train")
    net = build_detector_net(train.dim, config, rng.derive("init"))
    feature_layer = config.feature_layer if config.feature_layer is not None else net.depth - 1
    if not 1 <= feature_layer <= net.depth:
        raise ValueError(f"feature_layer {feature_layer} out of range 1..{net.depth}")
    model = DetectorModel(net, config.threshold, feature_layer, config.seed)
    params = net.params()
    state = nn.AdamState(params, lr=config.lr)
    shuffle_rng = rng.derive("shuffle")
    at_rng = rng.derive("at-noise")

    for epoch in range(config.epochs):
        order = shuffle_rng.permutation(train.n)
        epoch_loss, batches = 0.0, 0
        for lo in range(0, train.n, config.batch_size):
            idx = order[lo : lo + config.batch_size]
            Xb = train.X[idx]
            yb = train.y[idx].astype(np.float64)
            if adversarial:
                Xb = Xb.copy()
                mal = yb == 1.0
                if mal.any():
                    Xb[mal] = _rfgsm_batch(net, Xb[mal], at_iterations, at_step, policy, at_rng)
            out, tape = net.forward(Xb)
            z = tape.caches[-1][1]
            upstream = nn.bce_grad_from_logits(z, yb.reshape(-1, 1))
            grads, _ = net.backward(tape, upstream, at_preactivation=True)
            nn.adam_step(state, params, grads)
            epoch_loss += nn.bce_from_logits(z, yb.reshape(-1, 1))
            batches += 1
        entry = {"epoch": epoch, "train_loss": epoch_loss / max(batches, 1)}
        if val.n:
            vm = _epoch_metrics(model, val)
            entry.update(val_loss=vm["loss"], val_acc=vm["acc"])
        model.history.append(entry)
        logger.debug("epoch %d: %s", epoch, entry)

    model.train_seconds = time.perf_counter() - start
    logger.info("trained %s detector in %.1fs (%d epochs)",
                "adversarial" if adversarial else "plain", model.train_seconds, config.epochs)
    return model


def _rfgsm_batch(net: nn.LayeredNet, X: np.ndarray, k: int, step: float,
                 policy: str, rng: Rng) -> np.ndarray:
    """Training-time evasion augmentation: k sign steps up the malicious BCE
    from a random in-box start, then randomized rounding back into the box."""
    lower, upper = default_bounds(X, policy)
    cur = lower + rng.uniform(X.shape) * (upper - lower)
    ones = np.ones((X.shape[0], 1))
    for _ in range(k):
        _, tape = net.forward(cur)
        z = tape.caches[-1][1]
        up = nn.bce_grad_from_logits(z, ones)
        _, g = net.backward(tape, up, at_preactivation=True)
        cur = np.clip(cur + step * np.sign(g), lower, upper)
    rounded = np.floor(cur) + (rng.uniform(X.shape) < (cur - np.floor(cur)))
    return np.clip(rounded, lower, upper)


# ---------------------------------------------------------------------------
# persistence


def save_detector(model: DetectorModel, path: str) -> None:
    meta = {"threshold": model.threshold, "feature_layer": model.feature_layer,
            "seed": model.seed}
    save_checkpoint(path, "detector", model.net.spec(), model.net.flat_params(), meta)


def load_detector(path: str) -> DetectorModel:
    doc = load_checkpoint(path, expect_type="detector")
    net = nn.LayeredNet.from_spec(doc["arch"])
    net.load_flat_params(doc["params"])
    meta = doc["meta"]
    return DetectorModel(net, meta["threshold"], meta["feature_layer"], meta["seed"])
