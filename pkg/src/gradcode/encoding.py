"""Reed-Solomon encoding matrices over the complex roots of unity and their
O(f^2) online decoder.

Column ``j`` of the encoding matrix ``B`` holds the evaluations of a
polynomial ``t_j`` of degree below ``f`` at ``1, alpha, ..., alpha^(n-1)``.
``t_j`` vanishes on the mask zeros of column ``j`` and has ``t_j(0) = 1``, so
any ``f`` rows combine into the all-ones vector.

Double precision is adequate for ``n <= 128``; the Vandermonde systems
behind the decoder get ill-conditioned past that.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .construction import CodeParams, MaskMatrix, mask_matrix, straggler_budget

CONSTRUCTION_TOL = 1e-12
DECODE_TOL = 1e-8
MAX_SUPPORTED_N = 128


class DecodingError(ArithmeticError):
    """Recovered gradient failed a numerical sanity check."""


def primitive_root(n: int) -> complex:
    if n < 1:
        raise ValueError(f"n={n} must be positive")
    if n == 1:
        return 1 + 0j
    return cmath.exp(2j * cmath.pi / n)


def root_powers(n: int) -> np.ndarray:
    """``alpha**m`` for ``m = 0..n-1``, computed directly rather than by repeated products."""
    powers = np.exp(2j * np.pi * np.arange(n) / n)
    powers[0] = 1.0
    return powers


def vandermonde(n: int, f: int) -> np.ndarray:
    """The ``n x f`` evaluation matrix ``G[i, c] = alpha**(i*c)``."""
    exps = np.outer(np.arange(n), np.arange(f)) % n
    return root_powers(n)[exps]


@dataclass(frozen=True, eq=False)
class EncodingMatrix:
    params: CodeParams
    mask: MaskMatrix
    entries: np.ndarray
    coefficients: np.ndarray  # f x k, column j = ascending coefficients of t_j

    @property
    def n(self) -> int:
        return self.params.n

    @property
    def k(self) -> int:
        return self.params.k

    @property
    def f(self) -> int:
        return self.params.f

    @property
    def alpha(self) -> complex:
        return primitive_root(self.n)

    def rows(self, survivors: Sequence[int]) -> np.ndarray:
        return self.entries[np.asarray(survivors, dtype=int)]

    def to_text(self) -> str:
        p = self.params
        lines = [f"{p.n},{p.k},{p.w}"]
        for row in self.entries:
            lines.append(" ".join(f"{float(v.real)!r},{float(v.imag)!r}" for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "EncodingMatrix":
        lines = [line for line in text.splitlines() if line.strip()]
        n, k, w = (int(v) for v in lines[0].split(","))
        rows = []
        for line in lines[1:]:
            pairs = [tok.split(",") for tok in line.split()]
            rows.append([complex(float(re), float(im)) for re, im in pairs])
        entries = np.array(rows, dtype=complex)
        if entries.shape != (n, k):
            raise ValueError(f"expected {n}x{k} entries, found {entries.shape}")
        code = build_code(n, k, w)
        if not np.array_equal(entries != 0, code.mask.entries.astype(bool)):
            raise ValueError("entry support does not match the (n, k, w) mask")
        entries.setflags(write=False)
        return cls(code.params, code.mask, entries, code.coefficients)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "EncodingMatrix":
        return cls.from_text(Path(path).read_text())


def encoding_matrix(params: CodeParams, mask: Optional[MaskMatrix] = None) -> EncodingMatrix:
    n, k, f = params.n, params.k, params.f
    if mask is None:
        mask = mask_matrix(n, k, params.w)
    if mask.entries.shape != (n, k):
        raise ValueError(f"mask shape {mask.entries.shape} does not match ({n}, {k})")
    if n > MAX_SUPPORTED_N:
        raise ValueError(f"n={n} exceeds the supported envelope n <= {MAX_SUPPORTED_N}")

    powers = root_powers(n)
    entries = np.zeros((n, k), dtype=complex)
    coefficients = np.zeros((f, k), dtype=complex)
    rows = np.arange(n)
    for j in range(k):
        zeros = np.flatnonzero(mask.entries[:, j] == 0)
        if zeros.size >= f:
            raise ValueError(
                f"column {j} has {zeros.size} zeros; at most f-1 = {f - 1} allowed"
            )
        # t_j(alpha^i) = prod_r (alpha^i - alpha^r) / (-alpha^r) = prod_r (1 - alpha^(i-r))
        col = np.ones(n, dtype=complex)
        for r in zeros:
            col *= 1.0 - powers[(rows - r) % n]
        entries[:, j] = col
    # the columns sample polynomials of degree < f <= n at all n-th roots of
    # unity, so their coefficients are the normalized DFT of each column
    spectrum = np.fft.fft(entries, axis=0) / n
    coefficients[:] = spectrum[:f]
    entries.setflags(write=False)
    coefficients.setflags(write=False)
    return EncodingMatrix(params, mask, entries, coefficients)


def build_code(n: int, k: int, w: int) -> EncodingMatrix:
    """Straggler budget, mask and encoding matrix for ``(n, k, w)`` in one call."""
    params = straggler_budget(n, k, w)
    return encoding_matrix(params, mask_matrix(n, k, w))


@dataclass(frozen=True, eq=False)
class InverseTable:
    """``values[i - 1] = 1 / (1 - alpha**i)`` for ``i = 1..n-1``; index with ``table[i]``."""

    n: int
    values: np.ndarray

    def __getitem__(self, i: int) -> complex:
        if not 1 <= i < self.n:
            raise IndexError(f"table index {i} outside [1, {self.n - 1}]")
        return self.values[i - 1]


def inverse_table(n: int) -> InverseTable:
    if n < 1:
        raise ValueError(f"n={n} must be positive")
    values = 1.0 / (1.0 - root_powers(n)[1:])
    values.setflags(write=False)
    return InverseTable(n, values)


@dataclass
class OpCounter:
    multiplications: int = 0
    lookups: int = 0


@dataclass(frozen=True, eq=False)
class DecodingVector:
    survivors: tuple
    coeffs: np.ndarray = field(repr=False)


def decoding_vector(
    survivors: Sequence[int],
    table: InverseTable,
    f: Optional[int] = None,
    counter: Optional[OpCounter] = None,
) -> DecodingVector:
    """First row of the inverse of the survivors' Vandermonde matrix.

    ``coeffs[l] = prod_{j != l} 1 / (1 - alpha**(i_l - i_j))``, every factor read
    from ``table``: ``f*(f-1)`` lookups and as many complex multiplications.
    """
    idx = [int(i) for i in survivors]
    if f is not None and len(idx) != f:
        raise ValueError(f"expected {f} survivors, got {len(idx)}")
    if not idx:
        raise ValueError("need at least one survivor")
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate survivor indices in {idx}")
    n = table.n
    if any(not 0 <= i < n for i in idx):
        raise ValueError(f"survivor indices must lie in [0, {n})")

    values = table.values.tolist()
    coeffs = np.empty(len(idx), dtype=complex)
    mults = lookups = 0
    for l, i_l in enumerate(idx):
        acc = 1 + 0j
        for j, i_j in enumerate(idx):
            if j == l:
                continue
            factor = values[(i_l - i_j) % n - 1]
            lookups += 1
            acc *= factor
            mults += 1
        coeffs[l] = acc
    if counter is not None:
        counter.multiplications += mults
        counter.lookups += lookups
    coeffs.setflags(write=False)
    return DecodingVector(tuple(idx), coeffs)


def recover_gradient(
    coded_rows: np.ndarray,
    decoding: DecodingVector,
    tol: float = DECODE_TOL,
    reference: Optional[float] = None,
) -> np.ndarray:
    """Combine the survivors' coded outputs into the full (real) gradient.

    Rows of ``coded_rows`` must follow ``decoding.survivors`` order.  The exact
    result is real, so the imaginary part measures the decoding error; it must
    stay below ``tol`` times the largest real entry (or times ``reference``,
    when given and larger, e.g. the magnitude of the summed partials).
    """
    coded = np.asarray(coded_rows)
    squeeze = coded.ndim == 1
    if squeeze:
        coded = coded[:, None]
    if coded.shape[0] != len(decoding.survivors):
        raise ValueError(
            f"{coded.shape[0]} coded rows for {len(decoding.survivors)} survivors"
        )
    combined = decoding.coeffs @ coded
    real = combined.real
    scale = max(np.abs(real).max(initial=0.0), reference or 0.0, np.finfo(float).tiny)
    residual = np.abs(combined.imag).max(initial=0.0) / scale
    if not np.isfinite(residual) or residual > tol:
        raise DecodingError(f"imaginary residual {residual:.3e} exceeds {tol:.1e}")
    return real[0] if squeeze else real
