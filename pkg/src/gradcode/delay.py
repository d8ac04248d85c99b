"""Pareto worker delays, their order statistics, and the round-time model used
to pick the load fraction ``alpha = w/k``.

Per-round time for a scheme waiting on ``f`` of ``n`` workers is modelled as

    E[f-th smallest delay] + c_g * N * alpha  (+ c_m * f * (f - 1) if decoding online)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln

MODES = ("online", "offline")


@dataclass(frozen=True)
class DelayParams:
    t0: float
    xi: float
    c_g: float  # seconds per sample gradient
    c_m: float  # seconds per decode FLOP
    N: int
    n: int

    def __post_init__(self):
        if self.t0 <= 0 or self.xi <= 0:
            raise ValueError(f"need t0 > 0 and xi > 0, got t0={self.t0}, xi={self.xi}")
        if self.c_g < 0 or self.c_m < 0:
            raise ValueError("cost constants must be non-negative")
        if self.N < 1 or self.n < 1:
            raise ValueError("N and n must be positive")

    @property
    def compute_total(self) -> float:
        """``c_g * N``: time for one machine to process the whole dataset."""
        return self.c_g * self.N


@dataclass(frozen=True)
class TimeModel:
    mode: str
    params: DelayParams

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")


def sample_delay(params: DelayParams, rng, size=None):
    """Inverse-CDF Pareto draws ``t0 * u**(-1/xi)`` with ``u`` uniform on (0, 1]."""
    u = 1.0 - rng.random(size)
    return params.t0 * u ** (-1.0 / params.xi)


def pareto_cdf(t, params: DelayParams):
    t = np.asarray(t, dtype=float)
    return np.where(t >= params.t0, 1.0 - (params.t0 / np.maximum(t, params.t0)) ** params.xi, 0.0)


def order_stat_exact(n: int, f: int, params: DelayParams) -> float:
    """Exact mean of the ``f``-th smallest of ``n`` i.i.d. Pareto delays."""
    if not 1 <= f <= n:
        raise ValueError(f"need 1 <= f <= n, got f={f}, n={n}")
    m = n - f + 1
    inv = 1.0 / params.xi
    if m - inv <= 0:
        raise ValueError(
            f"mean of order statistic {f} of {n} is infinite for xi={params.xi}"
        )
    log_ratio = gammaln(m - inv) + gammaln(n + 1) - gammaln(m) - gammaln(n + 1 - inv)
    return params.t0 * math.exp(log_ratio)


def order_stat_asymptotic(alpha: float, params: DelayParams) -> float:
    """Large-``n`` limit ``t0 * alpha**(-1/xi)`` of the ``(1 - alpha) n``-th order statistic."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha={alpha} must lie in (0, 1]")
    return params.t0 * alpha ** (-1.0 / params.xi)


def f_of_alpha(alpha: float, n: int) -> int:
    """Workers needed at load ``alpha``: ``ceil((1 - alpha) n) + 1``, clamped to ``[1, n]``."""
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha={alpha} must lie in (0, 1]")
    x = (1.0 - alpha) * n
    # absorb representation error, e.g. (1 - 0.15) * 80 = 67.99999999999999
    c = math.ceil(x - 1e-9 * max(1.0, abs(x)))
    return min(max(c + 1, 1), n)


def alpha_of_f(f: int, n: int) -> float:
    """Smallest load fraction at which ``f`` returning workers suffice."""
    if not 1 <= f <= n:
        raise ValueError(f"need 1 <= f <= n, got f={f}, n={n}")
    return (n - f + 1) / n


def total_time(alpha: float, model: TimeModel) -> float:
    p = model.params
    t = order_stat_asymptotic(alpha, p) + p.compute_total * alpha
    if model.mode == "online":
        t += p.c_m * (1.0 - alpha) ** 2 * p.n**2
    return t


class OptimalAlpha(NamedTuple):
    alpha: float
    valid: bool


def optimal_alpha_offline(params: DelayParams) -> OptimalAlpha:
    """Stationary point ``(t0 / (c_g N xi))**(xi / (1 + xi))`` of the offline model.

    ``valid`` is False when the stationary point falls outside ``(0, 1]``;
    the value is returned unclamped.
    """
    if params.compute_total == 0:
        return OptimalAlpha(math.inf, False)
    ratio = params.t0 / (params.compute_total * params.xi)
    alpha = ratio ** (params.xi / (1.0 + params.xi))
    return OptimalAlpha(alpha, ratio <= 1.0)


def round_time(f: int, model: TimeModel) -> float:
    """Expected per-round time at integer ``f`` using the exact order statistic."""
    p = model.params
    t = order_stat_exact(p.n, f, p) + p.compute_total * alpha_of_f(f, p.n)
    if model.mode == "online":
        t += p.c_m * f * (f - 1)
    return t


def feasible_fs(params: DelayParams) -> range:
    # the f-th order statistic has finite mean iff n - f + 1 > 1/xi
    f_max = params.n
    while f_max >= 1 and params.n - f_max + 1 <= 1.0 / params.xi:
        f_max -= 1
    return range(1, f_max + 1)


def optimal_f(model: TimeModel) -> int:
    """Integer ``f`` minimizing :func:`round_time`; ties go to the smaller ``f``."""
    best_f, best_t = None, math.inf
    for f in feasible_fs(model.params):
        t = round_time(f, model)
        if t < best_t:
            best_f, best_t = f, t
    if best_f is None:
        raise ValueError(f"no f has a finite expected delay at xi={model.params.xi}")
    return best_f


def sweep(params: DelayParams, step: float = 1e-3) -> np.ndarray:
    """Rows ``(alpha, T_offline, T_online)`` over ``alpha`` in ``(0, 1]``."""
    count = int(round(1.0 / step))
    alphas = np.arange(1, count + 1) * (1.0 / count)
    offline = TimeModel("offline", params)
    online = TimeModel("online", params)
    return np.array([(a, total_time(a, offline), total_time(a, online)) for a in alphas])


def write_sweep_csv(rows: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["alpha", "T_offline", "T_online"])
        for a, off, on in rows:
            out.writerow([repr(float(a)), repr(float(off)), repr(float(on))])
