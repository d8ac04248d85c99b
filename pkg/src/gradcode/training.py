"""Data partitioning, per-chunk gradients, coded worker outputs and the
master's Nesterov update."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np

LOSS_KINDS = ("squared", "softmax")


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: Optional[int] = None  # None for regression

    def __post_init__(self):
        x = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise ValueError(f"features {x.shape} and labels {y.shape} do not line up")
        if not np.isfinite(x).all() or not np.isfinite(y.astype(float)).all():
            raise ValueError("dataset contains non-finite entries")
        if self.n_classes is not None:
            y = y.astype(np.int64)
            if y.size and (y.min() < 0 or y.max() >= self.n_classes):
                raise ValueError(f"labels outside [0, {self.n_classes})")
        else:
            y = y.astype(float)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def N(self) -> int:
        return self.features.shape[0]

    @property
    def p(self) -> int:
        return self.features.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.features[rows], self.labels[rows], self.n_classes)


@dataclass(frozen=True)
class Partition:
    bounds: tuple  # (start, stop) per chunk

    @property
    def k(self) -> int:
        return len(self.bounds)

    @property
    def sizes(self) -> np.ndarray:
        return np.array([b - a for a, b in self.bounds], dtype=np.int64)

    def chunk(self, j: int) -> slice:
        a, b = self.bounds[j]
        return slice(a, b)


def partition(N: int, k: int) -> Partition:
    """Contiguous chunks; the first ``N mod k`` get one extra point."""
    if not 1 <= k <= N:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={N}")
    base, extra = divmod(N, k)
    bounds, start = [], 0
    for j in range(k):
        size = base + (1 if j < extra else 0)
        bounds.append((start, start + size))
        start += size
    return Partition(tuple(bounds))


@dataclass(frozen=True, eq=False)
class ModelState:
    beta: np.ndarray
    velocity: np.ndarray
    step_size: float
    momentum: float = 0.9

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError(f"step_size={self.step_size} must be positive")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum={self.momentum} must lie in [0, 1)")
        if np.shape(self.beta) != np.shape(self.velocity):
            raise ValueError("beta and velocity shapes differ")

    @classmethod
    def zeros(cls, shape, step_size: float, momentum: float = 0.9) -> "ModelState":
        return cls(np.zeros(shape), np.zeros(shape), step_size, momentum)

    @property
    def lookahead(self) -> np.ndarray:
        """Point where the next gradient must be evaluated."""
        return self.beta + self.momentum * self.velocity


def param_shape(data: Dataset) -> tuple:
    if data.n_classes is None:
        return (data.p,)
    return (data.p, data.n_classes)


def _check(loss: str, x: np.ndarray, beta: np.ndarray) -> None:
    if loss not in LOSS_KINDS:
        raise ValueError(f"unknown loss kind {loss!r}; expected one of {LOSS_KINDS}")
    if x.shape[0] == 0:
        raise ValueError("empty chunk")
    if beta.shape[0] != x.shape[1]:
        raise ValueError(f"beta has {beta.shape[0]} rows, features have {x.shape[1]} columns")


def _softmax_probs(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def loss_value(loss: str, x: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    """Summed loss over the given points."""
    _check(loss, x, beta)
    if loss == "squared":
        r = x @ beta - y
        return float(r @ r)
    scores = x @ beta
    z = scores - scores.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    return float((log_norm - z[np.arange(len(y)), y]).sum())


def partial_gradient(loss: str, x: np.ndarray, y: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Gradient of the summed loss over one chunk, same shape as ``beta``."""
    _check(loss, x, beta)
    if loss == "squared":
        return 2.0 * x.T @ (x @ beta - y)
    probs = _softmax_probs(x @ beta)
    probs[np.arange(len(y)), y] -= 1.0
    return x.T @ probs


def chunk_gradient(loss: str, data: Dataset, parts: Partition, j: int, beta) -> np.ndarray:
    s = parts.chunk(j)
    return partial_gradient(loss, data.features[s], data.labels[s], beta)


def worker_output(
    b_row: np.ndarray, partials: Union[Mapping[int, np.ndarray], np.ndarray]
) -> np.ndarray:
    """``c_i = sum_j B[i, j] g_j``, reading only the chunks in the row's support.

    ``partials`` maps chunk index to flattened gradient, or is a ``k x p`` array.
    """
    b_row = np.asarray(b_row)
    support = np.flatnonzero(b_row)
    if isinstance(partials, np.ndarray):
        if partials.shape[0] != b_row.size:
            raise ValueError(f"{partials.shape[0]} partials for a row of length {b_row.size}")
        return b_row[support] @ partials[support]
    missing = [int(j) for j in support if int(j) not in partials]
    extra = sorted(set(partials) - {int(j) for j in support})
    if missing or extra:
        raise ValueError(f"partials do not match row support: missing {missing}, extra {extra}")
    stacked = np.stack([np.ravel(partials[int(j)]) for j in support])
    return b_row[support] @ stacked


def master_step(state: ModelState, gradient: np.ndarray) -> ModelState:
    """Nesterov update; ``gradient`` must be taken at ``state.lookahead``."""
    gradient = np.asarray(gradient, dtype=float).reshape(state.beta.shape)
    if not np.isfinite(gradient).all():
        raise FloatingPointError("non-finite gradient")
    velocity = state.momentum * state.velocity - state.step_size * gradient
    beta = state.beta + velocity
    if not np.isfinite(beta).all():
        raise FloatingPointError("non-finite parameters")
    return replace(state, beta=beta, velocity=velocity)


def error_rate(data: Dataset, beta: np.ndarray) -> float:
    """Misclassification rate for classification, mean squared error for regression."""
    if data.n_classes is None:
        r = data.features @ beta - data.labels
        return float(r @ r / data.N)
    pred = np.argmax(data.features @ beta, axis=1)
    return float(np.mean(pred != data.labels))


def make_classification(
    N: int, p: int, n_classes: int, rng: np.random.Generator, separation: float = 1.0
) -> Dataset:
    """Gaussian blobs with unit covariance around random class centers."""
    centers = rng.normal(scale=separation, size=(n_classes, p))
    labels = rng.integers(0, n_classes, size=N)
    features = centers[labels] + rng.normal(size=(N, p))
    return Dataset(features, labels, n_classes)


def make_regression(N: int, p: int, rng: np.random.Generator, noise: float = 0.1) -> Dataset:
    beta = rng.normal(size=p)
    features = rng.normal(size=(N, p))
    labels = features @ beta + noise * rng.normal(size=N)
    return Dataset(features, labels)


def train_test_split(data: Dataset, test_fraction: float, rng: np.random.Generator):
    if not 0 < test_fraction < 1:
        raise ValueError(f"test_fraction={test_fraction} must lie in (0, 1)")
    order = rng.permutation(data.N)
    n_test = max(1, int(round(test_fraction * data.N)))
    return data.subset(np.sort(order[n_test:])), data.subset(np.sort(order[:n_test]))


def load_csv(path, classification: bool = True) -> Dataset:
    """Header row, then one row per point: feature columns followed by the label."""
    with open(Path(path), newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) < 2:
            raise ValueError(f"{path}: need a header with at least one feature and a label")
        rows = [r for r in reader if r]
    table = np.array(rows, dtype=float)
    if table.ndim != 2 or table.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    x, y = table[:, :-1], table[:, -1]
    if not classification:
        return Dataset(x, y)
    if not np.array_equal(y, np.round(y)):
        raise ValueError(f"{path}: classification labels must be integers")
    y = y.astype(np.int64)
    return Dataset(x, y, int(y.max()) + 1)
