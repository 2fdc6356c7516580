"""Minimal feed-forward network machinery on numpy arrays.

Forward passes return an explicit tape (per-layer caches) and backward
passes consume one, so a single model can serve many concurrent callers
without hidden state. All math is float64.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import Rng

ACTIVATIONS = ("identity", "elu", "sigmoid")


def sigmoid(z: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return z
    if kind == "elu":
        return np.where(z > 0, z, np.expm1(z))
    if kind == "sigmoid":
        return sigmoid(z)
    raise ValueError(f"unknown activation {kind!r}")


def _activate_prime(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "identity":
        return np.ones_like(z)
    if kind == "elu":
        return np.where(z > 0, 1.0, np.exp(np.minimum(z, 0.0)))
    if kind == "sigmoid":
        s = sigmoid(z)
        return s * (1.0 - s)
    raise ValueError(f"unknown activation {kind!r}")


class DenseLayer:
    """Affine map x @ W + b followed by an elementwise activation."""

    kind = "dense"

    def __init__(self, in_dim: int, out_dim: int, activation: str, rng: Rng | None = None):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        if rng is None:
            self.W = np.zeros((in_dim, out_dim))
        else:
            self.W = rng.normal((in_dim, out_dim), scale=1.0 / np.sqrt(in_dim))
        self.b = np.zeros(out_dim)

    def params(self) -> list[np.ndarray]:
        return [self.W, self.b]

    def forward(self, x: np.ndarray):
        z = x @ self.W + self.b
        a = _activate(z, self.activation)
        return a, (x, z)

    def backward(self, cache, upstream: np.ndarray, at_preactivation: bool = False):
        x, z = cache
        dz = upstream if at_preactivation else upstream * _activate_prime(z, self.activation)
        dW = x.T @ dz
        db = dz.sum(axis=0)
        dx = dz @ self.W.T
        return [dW, db], dx

    def spec(self) -> dict:
        return {"kind": "dense", "in": self.in_dim, "out": self.out_dim, "activation": self.activation}


class GateLayer:
    """Learned per-dimension gate: y = x * sigmoid(g), gains squashed to (0, 1)."""

    kind = "gate"

    def __init__(self, dim: int):
        self.dim = dim
        self.g = np.zeros(dim)

    def params(self) -> list[np.ndarray]:
        return [self.g]

    def forward(self, x: np.ndarray):
        s = sigmoid(self.g)
        return x * s, (x, s)

    def backward(self, cache, upstream: np.ndarray, at_preactivation: bool = False):
        x, s = cache
        dg = (upstream * x * s * (1.0 - s)).sum(axis=0)
        dx = upstream * s
        return [dg], dx

    def spec(self) -> dict:
        return {"kind": "gate", "dim": self.dim}


@dataclass
class Tape:
    """Per-layer forward caches plus every post-activation output."""

    caches: list
    activations: list  # activations[i] is the output of layer i+1
    batched: bool


class LayeredNet:
    """A stack of layers with explicit-tape forward and backward passes."""

    def __init__(self, layers: list):
        self.layers = layers

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim if hasattr(self.layers[0], "in_dim") else self.layers[0].dim

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def forward(self, x: np.ndarray):
        """Run the net; returns (output, tape). Accepts one vector or a batch."""
        x = np.asarray(x, dtype=np.float64)
        batched = x.ndim == 2
        h = x if batched else x.reshape(1, -1)
        caches, acts = [], []
        for layer in self.layers:
            h, cache = layer.forward(h)
            caches.append(cache)
            acts.append(h)
        out = h if batched else h[0]
        return out, Tape(caches, acts, batched)

    def backward(self, tape: Tape, upstream: np.ndarray, at_preactivation: bool = False):
        """Gradients of a scalar loss given its gradient at the net output.

        With at_preactivation=True the upstream skips the final layer's
        activation derivative (caller already folded it in). Returns
        (param_grads, input_grad) with param_grads ordered like params().
        """
        up = np.asarray(upstream, dtype=np.float64)
        if not tape.batched:
            up = up.reshape(1, -1)
        grads_rev = []
        for i in range(self.depth - 1, -1, -1):
            layer_grads, up = self.layers[i].backward(
                tape.caches[i], up, at_preactivation=at_preactivation and i == self.depth - 1
            )
            grads_rev.append(layer_grads)
        param_grads = []
        for layer_grads in reversed(grads_rev):
            param_grads.extend(layer_grads)
        input_grad = up if tape.batched else up[0]
        return param_grads, input_grad

    def input_gradient_from_layer(self, tape: Tape, n: int, upstream: np.ndarray) -> np.ndarray:
        """Input gradient when the loss reads the output of layer n (1-based)."""
        if not 1 <= n <= self.depth:
            raise ValueError(f"layer index {n} out of range 1..{self.depth}")
        up = np.asarray(upstream, dtype=np.float64)
        if not tape.batched:
            up = up.reshape(1, -1)
        for i in range(n - 1, -1, -1):
            _, up = self.layers[i].backward(tape.caches[i], up)
        return up if tape.batched else up[0]

    def layer_output(self, tape: Tape, n: int) -> np.ndarray:
        """Post-activation output of layer n (1-based) from a finished tape."""
        if not 1 <= n <= self.depth:
            raise ValueError(f"layer index {n} out of range 1..{self.depth}")
        out = tape.activations[n - 1]
        return out if tape.batched else out[0]

    def spec(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]

    @staticmethod
    def from_spec(spec: list[dict]) -> "LayeredNet":
        layers = []
        for entry in spec:
            if entry["kind"] == "dense":
                layers.append(DenseLayer(entry["in"], entry["out"], entry["activation"]))
            elif entry["kind"] == "gate":
                layers.append(GateLayer(entry["dim"]))
            else:
                raise ValueError(f"unknown layer kind {entry['kind']!r}")
        return LayeredNet(layers)

    def flat_params(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def load_flat_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        offset = 0
        for p in self.params():
            p[...] = flat[offset : offset + p.size].reshape(p.shape)
            offset += p.size
        if offset != flat.size:
            raise ValueError(f"parameter vector has {flat.size} entries, model needs {offset}")


def mlp(dims: list[int], activations: list[str], rng: Rng) -> LayeredNet:
    """Dense stack: dims = [in, h1, ..., out], one activation per layer."""
    if len(activations) != len(dims) - 1:
        raise ValueError("need one activation per layer")
    layers = [
        DenseLayer(dims[i], dims[i + 1], activations[i], rng.derive(f"layer{i}"))
        for i in range(len(dims) - 1)
    ]
    return LayeredNet(layers)


# ---------------------------------------------------------------------------
# losses

BCE_EPS = 1e-7


def mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean squared error over all elements."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def mse_grad(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Gradient of mse(a, b) with respect to b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    return 2.0 * (b - a) / a.size


def bce(pred: np.ndarray, label: np.ndarray) -> float:
    """Binary cross entropy, predictions clamped away from {0, 1}."""
    p = np.clip(np.asarray(pred, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(label, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log1p(-p))))


def bce_grad(pred: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Gradient of bce with respect to the (clamped) predictions."""
    p = np.clip(np.asarray(pred, dtype=np.float64), BCE_EPS, 1.0 - BCE_EPS)
    y = np.asarray(label, dtype=np.float64)
    return (-(y / p) + (1.0 - y) / (1.0 - p)) / p.size


def bce_from_logits(z: np.ndarray, label: np.ndarray) -> float:
    """BCE evaluated from pre-sigmoid logits; exact even when sigmoid saturates."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    # softplus(z) - y*z written with logaddexp for stability
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def bce_grad_from_logits(z: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Gradient of bce_from_logits with respect to z; never underflows to zero
    until the logit magnitude exceeds the exp() range."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(label, dtype=np.float64)
    g = np.where(y >= 0.5, -sigmoid(-z), sigmoid(z))
    return g / z.size


# ---------------------------------------------------------------------------
# optimizer


class InvalidGradient(ValueError):
    """A gradient contained NaN or infinity."""


class AdamState:
    """Adam accumulators for one list of parameter arrays."""

    def __init__(self, params: list[np.ndarray], lr: float = 0.001,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
    """One bias-corrected Adam update, applied in place. Returns params."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and state must have matching lengths")
    for g in grads:
        if not np.all(np.isfinite(g)):
            raise InvalidGradient("non-finite gradient passed to adam_step")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params
