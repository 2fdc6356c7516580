"""Denoising front end for a frozen detector.

The purifier is an autoencoder trained to map manipulated samples back to
their clean forms. Its training corpus mixes three kinds of pairs:
gradient-ascent perturbed malware at a ladder of depths, benign samples
with random bit-flip noise, and untouched originals. The loss balances
input-space reconstruction against closeness of the frozen detector's
internal representations, so purified samples classify like the originals.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import nn
from .checkpoint import load_checkpoint, save_checkpoint
from .data import LabeledDataset, default_bounds
from .detector import DetectorModel, predict
from .errors import InvariantViolation
from .rng import Rng

logger = logging.getLogger(__name__)


@dataclass
class PurifierConfig:
    encoder_hidden: list[int] = field(default_factory=lambda: [600, 600])
    decoder_hidden: list[int] = field(default_factory=lambda: [600])
    attention_gate: bool = True
    alpha: float = 0.5
    beta: float = 0.5
    epochs: int = 100
    batch_size: int = 128
    lr: float = 0.001
    seed: int = 0

    def __post_init__(self):
        check_loss_weights(self.alpha, self.beta)


def check_loss_weights(alpha: float, beta: float) -> None:
    if not (0.0 <= alpha <= 1.0 and 0.0 <= beta <= 1.0):
        raise InvariantViolation("loss weights must lie in [0, 1]")
    if abs(alpha + beta - 1.0) > 1e-12:
        raise InvariantViolation(f"loss weights must sum to 1, got {alpha} + {beta}")


@dataclass
class DiversificationConfig:
    """Perturbed-malware generation: batch i gets ascent depth step*(i-1)."""

    batches: int = 6
    iterations: int = 10
    step_size: float = 0.01
    policy: str = "add-only"  # box the random start is drawn from
    seed: int = 0


@dataclass
class NoiseConfig:
    """Benign-side augmentation: flip each bit independently with rate eta."""

    eta: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise InvariantViolation("noise rate must lie in [0, 1]")


class PurifierModel:
    """Autoencoder with sigmoid layers and an optional per-latent gate.

    Outputs are continuous in (0,1); purify() binarizes them. passthrough
    models return their input untouched (test hook)."""

    def __init__(self, net: nn.LayeredNet, seed: int, passthrough: bool = False):
        self.net = net
        self.seed = seed
        self.passthrough = passthrough
        self.history: list[dict] = []
        self.train_seconds: float = 0.0

    @property
    def dim(self) -> int:
        return self.net.in_dim

    def forward_continuous(self, x: np.ndarray):
        """Pre-binarization output and tape; identity (tape None) in passthrough."""
        if self.passthrough:
            return np.asarray(x, dtype=np.float64).copy(), None
        return self.net.forward(x)

    def input_gradient(self, tape, upstream: np.ndarray) -> np.ndarray:
        if self.passthrough:
            return np.asarray(upstream, dtype=np.float64)
        _, dx = self.net.backward(tape, upstream)
        return dx


def build_purifier_net(d: int, config: PurifierConfig, rng: Rng) -> nn.LayeredNet:
    layers: list = []
    dims_in = d
    for width in config.encoder_hidden:
        layers.append(nn.DenseLayer(dims_in, width, "sigmoid", rng.derive(f"enc{len(layers)}")))
        dims_in = width
    if config.attention_gate:
        layers.append(nn.GateLayer(dims_in))
    for width in config.decoder_hidden:
        layers.append(nn.DenseLayer(dims_in, width, "sigmoid", rng.derive(f"dec{len(layers)}")))
        dims_in = width
    layers.append(nn.DenseLayer(dims_in, d, "sigmoid", rng.derive("out")))
    return nn.LayeredNet(layers)


def binarize01(v: np.ndarray) -> np.ndarray:
    """Round continuous values in [0,1] to bits; exact 0.5 counts as 1."""
    return (np.asarray(v, dtype=np.float64) >= 0.5).astype(np.float64)


def purify(model: PurifierModel, x: np.ndarray) -> np.ndarray:
    """Binary reconstruction of x (single vector or batch)."""
    if model.passthrough:
        return np.asarray(x, dtype=np.float64).copy()
    out, _ = model.net.forward(x)
    return binarize01(out)


def pipeline_predict(purifier: PurifierModel | None, det: DetectorModel, x: np.ndarray):
    """(score, label) of the defended pipeline; purifier None means bare detector."""
    if purifier is None:
        return predict(det, x)
    return predict(det, purify(purifier, x))


# ---------------------------------------------------------------------------
# training-pair generation


@dataclass
class DiversificationResult:
    adversarial: np.ndarray
    originals: np.ndarray
    batch_index: np.ndarray  # 1-based batch number per row
    depths: np.ndarray       # ascent depth used for each batch


def _rowwise_feature_grad(det: DetectorModel, originals: np.ndarray, cur: np.ndarray):
    """Per-row gradient of the internal-representation MSE w.r.t. cur."""
    n_layer = det.feature_layer
    _, ref_tape = det.net.forward(originals)
    ref = det.net.layer_output(ref_tape, n_layer)
    _, tape = det.net.forward(cur)
    rb = det.net.layer_output(tape, n_layer)
    upstream = 2.0 * (rb - ref) / ref.shape[-1]
    return det.net.input_gradient_from_layer(tape, n_layer, upstream)


def diversify_malware(X_mal: np.ndarray, det: DetectorModel,
                      cfg: DiversificationConfig) -> DiversificationResult:
    """Ladder of perturbed malware batches.

    Batch i (1-based) keeps depth k_i = step_size*(i-1); batch 1 passes
    through unperturbed. Perturbed batches start from a random continuous
    point inside the manipulation box and take `iterations` ascent steps on
    the detector feature distance, rounding back to bits after each step.
    """
    X_mal = np.asarray(X_mal, dtype=np.float64)
    n = X_mal.shape[0]
    if cfg.batches < 1:
        raise InvariantViolation("need at least one batch")
    if n < cfg.batches:
        raise InvariantViolation(f"{n} samples cannot fill {cfg.batches} batches")
    rng = Rng(cfg.seed).derive("diversify")
    order = rng.permutation(n)
    groups = np.array_split(order, cfg.batches)
    depths = np.array([cfg.step_size * i for i in range(cfg.batches)])

    adv_parts, orig_parts, batch_ids = [], [], []
    for i, idx in enumerate(groups, start=1):
        Xb = X_mal[idx]
        k = depths[i - 1]
        if i == 1 or k == 0.0 or cfg.iterations == 0:
            cur = Xb.copy()
        else:
            lower, upper = default_bounds(Xb, cfg.policy)
            cur = lower + rng.derive(f"start{i}").uniform(Xb.shape) * (upper - lower)
            for _ in range(cfg.iterations):
                g = _rowwise_feature_grad(det, Xb, cur)
                cur = binarize01(cur + k * g)
            cur = binarize01(cur)
        adv_parts.append(cur)
        orig_parts.append(Xb)
        batch_ids.append(np.full(len(idx), i, dtype=np.int64))

    return DiversificationResult(
        adversarial=np.vstack(adv_parts),
        originals=np.vstack(orig_parts),
        batch_index=np.concatenate(batch_ids),
        depths=depths,
    )


def inject_protective_noise(X_ben: np.ndarray, cfg: NoiseConfig) -> tuple[np.ndarray, np.ndarray]:
    """(noisy, originals): each bit flips independently with rate eta."""
    X_ben = np.asarray(X_ben, dtype=np.float64)
    mask = Rng(cfg.seed).derive("noise").bernoulli(X_ben.shape, cfg.eta)
    noisy = np.where(mask, 1.0 - X_ben, X_ben)
    return noisy, X_ben.copy()


# ---------------------------------------------------------------------------
# loss and training


def purifier_loss(model: PurifierModel, det: DetectorModel, corrupted: np.ndarray,
                  clean: np.ndarray, alpha: float, beta: float):
    """(total, reconstruction, prediction) loss terms on one batch.

    total = alpha * mse(clean, psi(corrupted))
          + beta  * mse(F(clean)|n, F(psi(corrupted))|n)
    """
    check_loss_weights(alpha, beta)
    out, _ = model.forward_continuous(corrupted)
    rec = nn.mse(clean, out)
    pre = nn.mse(
        internal_of(det, clean),
        internal_of(det, out),
    )
    return alpha * rec + beta * pre, rec, pre


def internal_of(det: DetectorModel, x: np.ndarray) -> np.ndarray:
    _, tape = det.net.forward(x)
    return det.net.layer_output(tape, det.feature_layer)


def train_purifier(adv_pairs, noisy_pairs, clean_pairs, det: DetectorModel,
                   config: PurifierConfig) -> PurifierModel:
    """Fit the autoencoder on (corrupted, clean) pairs; the detector stays frozen.

    Each epoch draws the three sources in equal parts (1:1:1), shuffles,
    and runs Adam on the weighted two-term loss. No labels enter anywhere:
    pair construction upstream is the only place classes matter.
    """
    sources = [_as_pair(p) for p in (adv_pairs, noisy_pairs, clean_pairs)]
    d = sources[0][0].shape[1]
    for corrupted, clean in sources:
        if corrupted.shape[0] == 0:
            raise InvariantViolation("empty training mix")
        if corrupted.shape != clean.shape or corrupted.shape[1] != d:
            raise InvariantViolation("pair matrices must share one feature dimension")

    start = time.perf_counter()
    rng = Rng(config.seed).derive("purifier-train")
    net = build_purifier_net(d, config, rng.derive("init"))
    model = PurifierModel(net, config.seed)
    params = net.params()
    state = nn.AdamState(params, lr=config.lr)
    det_frozen = det.net.flat_params().copy()
    n_each = min(src[0].shape[0] for src in sources)
    draw_rng = rng.derive("draw")

    for epoch in range(config.epochs):
        xs, ts = [], []
        for corrupted, clean in sources:
            take = draw_rng.permutation(corrupted.shape[0])[:n_each]
            xs.append(corrupted[take])
            ts.append(clean[take])
        Xe = np.vstack(xs)
        Te = np.vstack(ts)
        order = draw_rng.permutation(Xe.shape[0])
        epoch_rec, epoch_pre, batches = 0.0, 0.0, 0
        for lo in range(0, Xe.shape[0], config.batch_size):
            idx = order[lo : lo + config.batch_size]
            xb, tb = Xe[idx], Te[idx]
            out, tape = net.forward(xb)
            upstream = config.alpha * nn.mse_grad(tb, out)
            ref = internal_of(det, tb)
            _, det_tape = det.net.forward(out)
            got = det.net.layer_output(det_tape, det.feature_layer)
            feat_up = config.beta * nn.mse_grad(ref, got)
            upstream = upstream + det.net.input_gradient_from_layer(det_tape, det.feature_layer, feat_up)
            grads, _ = net.backward(tape, upstream)
            nn.adam_step(state, params, grads)
            epoch_rec += nn.mse(tb, out)
            epoch_pre += nn.mse(ref, got)
            batches += 1
        model.history.append({
            "epoch": epoch,
            "rec": epoch_rec / max(batches, 1),
            "pre": epoch_pre / max(batches, 1),
        })
        logger.debug("purifier epoch %d: %s", epoch, model.history[-1])

    if not np.array_equal(det.net.flat_params(), det_frozen):
        raise InvariantViolation("detector parameters changed during purifier training")
    model.train_seconds = time.perf_counter() - start
    logger.info("trained purifier in %.1fs (%d epochs)", model.train_seconds, config.epochs)
    return model


def _as_pair(p):
    corrupted, clean = p
    return np.asarray(corrupted, dtype=np.float64), np.asarray(clean, dtype=np.float64)


def build_purifier(train: LabeledDataset, det: DetectorModel, config: PurifierConfig,
                   div_cfg: DiversificationConfig, noise_cfg: NoiseConfig) -> PurifierModel:
    """Full recipe: perturb the malware class, noise the benign class, keep
    clean copies of both, then fit."""
    div = diversify_malware(train.malware().X, det, div_cfg)
    noisy = inject_protective_noise(train.benign().X, noise_cfg)
    clean = (train.X.copy(), train.X.copy())
    return train_purifier((div.adversarial, div.originals), noisy, clean, det, config)


# ---------------------------------------------------------------------------
# persistence


def save_purifier(model: PurifierModel, path: str) -> None:
    meta = {"seed": model.seed, "passthrough": model.passthrough}
    save_checkpoint(path, "purifier", model.net.spec(), model.net.flat_params(), meta)


def load_purifier(path: str) -> PurifierModel:
    doc = load_checkpoint(path, expect_type="purifier")
    net = nn.LayeredNet.from_spec(doc["arch"])
    net.load_flat_params(doc["params"])
    return PurifierModel(net, doc["meta"]["seed"], doc["meta"].get("passthrough", False))
