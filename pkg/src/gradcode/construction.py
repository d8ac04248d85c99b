"""Balanced binary mask matrices and the straggler budget they support.

A mask is an ``n x k`` 0/1 array; row ``i`` lists the data chunks handed to
worker ``i``.  Columns are cyclic runs of ones, so row and column weights
stay within one of each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np


@dataclass(frozen=True)
class CodeParams:
    n: int
    k: int
    w: int
    s: int
    f: int

    def __post_init__(self):
        if self.s != (self.w * self.n) // self.k - 1 or self.f != self.n - self.s:
            raise ValueError(f"inconsistent code parameters {self}")
        if not 1 <= self.f <= self.n:
            raise ValueError(f"f={self.f} outside [1, {self.n}]")

    @property
    def alpha(self) -> float:
        """Fraction of the dataset each worker processes, ``w / k``."""
        return self.w / self.k


@dataclass(frozen=True, eq=False)
class MaskMatrix:
    entries: np.ndarray

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.int8)
        if entries.ndim != 2 or not np.isin(entries, (0, 1)).all():
            raise ValueError("mask must be a 2-D 0/1 array")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def k(self) -> int:
        return self.entries.shape[1]

    @property
    def row_weights(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    @property
    def column_weights(self) -> np.ndarray:
        return self.entries.sum(axis=0)

    @property
    def row_weight(self) -> int:
        """The common row weight ``w``; raises if rows are unequal."""
        weights = np.unique(self.row_weights)
        if weights.size != 1:
            raise ValueError(f"rows have unequal weights {weights.tolist()}")
        return int(weights[0])

    def support(self, row: int) -> np.ndarray:
        return np.flatnonzero(self.entries[row])

    def __eq__(self, other):
        if not isinstance(other, MaskMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def to_text(self) -> str:
        return "".join("".join(str(v) for v in row) + "\n" for row in self.entries)

    @classmethod
    def from_text(cls, text: str) -> "MaskMatrix":
        rows = [line.strip() for line in text.splitlines() if line.strip()]
        if not rows or len({len(r) for r in rows}) != 1:
            raise ValueError("mask text must be a non-empty rectangular 0/1 grid")
        return cls(np.array([[int(c) for c in r] for r in rows], dtype=np.int8))

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "MaskMatrix":
        return cls.from_text(Path(path).read_text())


def _cyclic_runs(n: int, k: int, d: int, t: int) -> np.ndarray:
    # column j covers rows jd + t, ..., (j+1)d - 1 + t (mod n)
    entries = np.zeros((n, k), dtype=np.int8)
    for j in range(k):
        rows = (np.arange(d) + j * d + t) % n
        entries[rows, j] = 1
    return entries


def row_balanced_mask(n: int, k: int, d: int, t: int = 0) -> MaskMatrix:
    """Mask with ``k`` columns of weight ``d``, each starting where the last ended.

    Rows in the cyclic window starting at ``t`` of length ``(k*d) mod n`` get
    weight ``ceil(k*d/n)``; all others get ``floor(k*d/n)``.
    """
    if n <= 0 or k <= 0:
        raise ValueError(f"dimensions must be positive, got n={n}, k={k}")
    if not 0 < d <= n:
        raise ValueError(f"column weight d={d} must satisfy 0 < d <= n={n}")
    if not 0 <= t < n:
        raise ValueError(f"offset t={t} must satisfy 0 <= t < n={n}")
    return MaskMatrix(_cyclic_runs(n, k, d, t))


def expected_row_weights(n: int, k: int, d: int, t: int = 0) -> np.ndarray:
    """Closed-form row weights of :func:`row_balanced_mask`."""
    total = k * d
    weights = np.full(n, total // n, dtype=np.int64)
    heavy = (t + np.arange(total % n)) % n
    weights[heavy] += 1
    return weights


@dataclass(frozen=True)
class MaskLayout:
    """Heavy/light column split used by :func:`mask_matrix`."""

    k_heavy: int
    d_heavy: int
    k_light: int
    d_light: int
    offset: int


def mask_layout(n: int, k: int, w: int) -> MaskLayout:
    if n <= 0 or k <= 0:
        raise ValueError(f"dimensions must be positive, got n={n}, k={k}")
    if w <= 0:
        raise ValueError(f"row weight w={w} must be positive")
    if w > k:
        raise ValueError(f"row weight w={w} exceeds column count k={k}")
    k_h = (n * w) % k
    d_h = -(-n * w // k)
    k_l = k - k_h
    d_l = n * w // k
    assert k_l > 0
    return MaskLayout(k_h, d_h, k_l, d_l, (k_h * d_h) % n)


def mask_matrix(n: int, k: int, w: int, require_stragglers: bool = False) -> MaskMatrix:
    """Column-balanced mask where every row has weight exactly ``w``.

    ``(n*w) mod k`` heavy columns of weight ``ceil(n*w/k)`` come first, then
    light columns of weight ``floor(n*w/k)`` shifted so their heavy rows line up
    with the light rows of the heavy block.
    """
    layout = mask_layout(n, k, w)
    if layout.d_light < 1:
        raise ValueError(f"n*w/k = {n * w}/{k} < 1: some column would be empty")
    if require_stragglers and layout.d_light < 2:
        raise ValueError(
            f"floor(n*w/k) = {layout.d_light} < 2: cannot tolerate any straggler"
        )
    heavy = _cyclic_runs(n, layout.k_heavy, layout.d_heavy, 0)
    light = _cyclic_runs(n, layout.k_light, layout.d_light, layout.offset)
    mask = MaskMatrix(np.hstack([heavy, light]))
    if not (mask.row_weights == w).all():
        raise AssertionError(f"mask rows not all weight {w}: {mask.row_weights}")
    return mask


def straggler_budget(n: int, k: int, w: int) -> CodeParams:
    """Largest tolerable straggler count ``s = floor(w*n/k) - 1`` and ``f = n - s``."""
    if n < 1 or k < 1:
        raise ValueError(f"dimensions must be positive, got n={n}, k={k}")
    if not 1 <= w <= k:
        raise ValueError(f"row weight w={w} must satisfy 1 <= w <= k={k}")
    s = (w * n) // k - 1
    if s < 0:
        raise ValueError(f"w*n/k = {w * n}/{k} < 1 gives a negative straggler budget")
    return CodeParams(n=n, k=k, w=w, s=s, f=n - s)
