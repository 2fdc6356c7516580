"""Binary feature vectors: dataset container, sparse text I/O, synthetic
data generation, splits, and manipulation bounds."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DatasetFormatError, InvariantViolation
from .rng import Rng

BENIGN, MALICIOUS = 0, 1


def validate_binary(X: np.ndarray) -> np.ndarray:
    """Ensure every entry is exactly 0.0 or 1.0; returns the array."""
    X = np.asarray(X, dtype=np.float64)
    if not np.all((X == 0.0) | (X == 1.0)):
        raise InvariantViolation("feature values must be exactly 0 or 1")
    return X


@dataclass
class LabeledDataset:
    """Feature matrix of {0,1} values with one label (0 benign, 1 malicious) per row."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        self.X = validate_binary(self.X)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise InvariantViolation("X must be a 2-d matrix")
        if self.y.shape != (self.X.shape[0],):
            raise InvariantViolation("one label per row required")
        if not np.all((self.y == BENIGN) | (self.y == MALICIOUS)):
            raise InvariantViolation("labels must be 0 or 1")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.X[idx].copy(), self.y[idx].copy())

    def malware(self) -> "LabeledDataset":
        return self.subset(self.y == MALICIOUS)

    def benign(self) -> "LabeledDataset":
        return self.subset(self.y == BENIGN)


# ---------------------------------------------------------------------------
# sparse text format
#
# Line 1:  "#dim <d>"
# Then one sample per line:  "<label> <idx>:1 <idx>:1 ..."
# with 0-based feature indices in strictly increasing order.


def load_sparse(path: str) -> LabeledDataset:
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].startswith("#dim "):
        raise DatasetFormatError("first line must be '#dim <d>'")
    try:
        dim = int(lines[0][5:])
    except ValueError:
        raise DatasetFormatError(f"bad dimension header: {lines[0]!r}") from None
    if dim <= 0:
        raise DatasetFormatError("dimension must be positive")

    rows, labels = [], []
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(" ")
        if parts[0] not in ("0", "1"):
            raise DatasetFormatError(f"line {ln}: label must be 0 or 1, got {parts[0]!r}")
        labels.append(int(parts[0]))
        row = np.zeros(dim)
        prev = -1
        for tok in parts[1:]:
            if tok == "":
                raise DatasetFormatError(f"line {ln}: stray whitespace")
            idx_s, sep, val_s = tok.partition(":")
            if not sep or val_s != "1":
                raise DatasetFormatError(f"line {ln}: entries must look like '<idx>:1', got {tok!r}")
            try:
                idx = int(idx_s)
            except ValueError:
                raise DatasetFormatError(f"line {ln}: bad index {idx_s!r}") from None
            if idx < 0 or idx >= dim:
                raise DatasetFormatError(f"line {ln}: index {idx} outside 0..{dim - 1}")
            if idx <= prev:
                raise DatasetFormatError(f"line {ln}: indices must be strictly increasing")
            prev = idx
            row[idx] = 1.0
        rows.append(row)
    X = np.array(rows) if rows else np.zeros((0, dim))
    return LabeledDataset(X, np.array(labels, dtype=np.int64))


def save_sparse(dataset: LabeledDataset, path: str) -> None:
    """Write the canonical sparse text form; load_sparse round-trips it exactly."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"#dim {dataset.dim}\n")
        for i in range(dataset.n):
            present = np.flatnonzero(dataset.X[i])
            toks = [str(int(dataset.y[i]))] + [f"{j}:1" for j in present]
            fh.write(" ".join(toks) + "\n")


# ---------------------------------------------------------------------------
# synthetic corpus


@dataclass
class SyntheticSpec:
    """Desk-scale stand-in for a real binary-feature corpus.

    Half the signal features lean malicious, half lean benign; with
    noise_rate 0 and disjoint signal sets the classes are perfectly
    separable by a linear rule.
    """

    d: int = 500
    n_benign: int = 1000
    n_malicious: int = 1000
    signal_features: int = 40
    noise_rate: float = 0.05
    background_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.signal_features % 2 != 0:
            raise InvariantViolation("signal_features must be even")
        if self.signal_features > self.d:
            raise InvariantViolation("more signal features than dimensions")
        if not 0.0 <= self.noise_rate <= 0.5:
            raise InvariantViolation("noise_rate must be in [0, 0.5]")


def generate_synthetic(spec: SyntheticSpec) -> LabeledDataset:
    """Benign then malicious rows, deterministic in the spec seed."""
    rng = Rng(spec.seed).derive("synthetic")
    order = rng.permutation(spec.d)
    half = spec.signal_features // 2
    mal_signal = np.sort(order[:half])
    ben_signal = np.sort(order[half : spec.signal_features])

    def sample_class(n, own_signal, other_signal, rstream):
        X = (rstream.uniform((n, spec.d)) < spec.background_rate).astype(np.float64)
        X[:, own_signal] = (rstream.uniform((n, half)) < 1.0 - spec.noise_rate).astype(np.float64)
        X[:, other_signal] = (rstream.uniform((n, half)) < spec.noise_rate).astype(np.float64)
        return X

    Xb = sample_class(spec.n_benign, ben_signal, mal_signal, rng.derive("benign"))
    Xm = sample_class(spec.n_malicious, mal_signal, ben_signal, rng.derive("malicious"))
    X = np.vstack([Xb, Xm])
    y = np.concatenate([np.zeros(spec.n_benign, dtype=np.int64),
                        np.ones(spec.n_malicious, dtype=np.int64)])
    return LabeledDataset(X, y)


def synthetic_signal_features(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """(malicious-leaning, benign-leaning) signal index sets for a spec."""
    order = Rng(spec.seed).derive("synthetic").permutation(spec.d)
    half = spec.signal_features // 2
    return np.sort(order[:half]), np.sort(order[half : spec.signal_features])


# ---------------------------------------------------------------------------
# splits


@dataclass
class SplitSpec:
    train: float = 0.6
    val: float = 0.2
    test: float = 0.2
    seed: int = 0

    def __post_init__(self):
        for f in (self.train, self.val, self.test):
            if f < 0:
                raise InvariantViolation("split fractions must be non-negative")
        if abs(self.train + self.val + self.test - 1.0) > 1e-9:
            raise InvariantViolation("split fractions must sum to 1")


def split(dataset: LabeledDataset, spec: SplitSpec) -> tuple[LabeledDataset, LabeledDataset, LabeledDataset]:
    """Shuffle rows once and cut train/val/test; a partition of the input."""
    perm = Rng(spec.seed).derive("split").permutation(dataset.n)
    n_train = int(round(spec.train * dataset.n))
    n_val = int(round(spec.val * dataset.n))
    n_train = min(n_train, dataset.n)
    n_val = min(n_val, dataset.n - n_train)
    train_idx = perm[:n_train]
    val_idx = perm[n_train : n_train + n_val]
    test_idx = perm[n_train + n_val :]
    return dataset.subset(train_idx), dataset.subset(val_idx), dataset.subset(test_idx)


# ---------------------------------------------------------------------------
# manipulation bounds


BOUND_POLICIES = ("add-only", "free")


def default_bounds(x: np.ndarray, policy: str = "add-only") -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate (lower, upper) box an attacker may move x within.

    "add-only" permits setting features only (never removing), the usual
    constraint when adding code to a program is safe but deleting is not.
    "free" allows both directions.
    """
    x = np.asarray(x, dtype=np.float64)
    if policy == "add-only":
        return x.copy(), np.ones_like(x)
    if policy == "free":
        return np.zeros_like(x), np.ones_like(x)
    raise ValueError(f"unknown bounds policy {policy!r}")


def check_bounds(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> None:
    if np.any(lower > upper):
        raise InvariantViolation("bounds with lower > upper")
    if np.any(x < lower) or np.any(x > upper):
        raise InvariantViolation("sample outside its own bounds")
