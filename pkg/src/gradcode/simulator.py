"""Discrete-event simulation of distributed gradient descent rounds.

Each round every worker finishes at ``Pareto delay + c_g * (samples it
processes)``.  The master waits for the scheme's ``wait_count`` earliest
finishers, builds a gradient from them and takes a Nesterov step.  Wall
clock is simulated; test-error evaluation is not charged to it.
"""

from __future__ import annotations

import csv
import io
import logging
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import SCHEMES, ExperimentConfig
from .delay import DelayParams, TimeModel, optimal_f, f_of_alpha, sample_delay
from .encoding import (
    DECODE_TOL,
    DecodingError,
    EncodingMatrix,
    InverseTable,
    build_code,
    decoding_vector,
    inverse_table,
    recover_gradient,
)
from .training import (
    Dataset,
    ModelState,
    Partition,
    chunk_gradient,
    error_rate,
    load_csv,
    loss_value,
    make_classification,
    make_regression,
    master_step,
    param_shape,
    partition,
    partial_gradient,
    train_test_split,
    worker_output,
)

log = logging.getLogger(__name__)

TRACE_HEADER = ("iter", "wall_clock", "train_loss", "test_error", "scheme", "seed")


@dataclass(frozen=True)
class Scheme:
    kind: str
    wait_count: int
    rescale: bool = True  # uncoded-fastest-f only: scale the partial sum by n / received

    def __post_init__(self):
        if self.kind not in SCHEMES:
            raise ValueError(f"unknown scheme {self.kind!r}; expected one of {SCHEMES}")
        if self.wait_count < 1:
            raise ValueError("wait_count must be positive")

    @classmethod
    def coded_rs(cls, code: EncodingMatrix) -> "Scheme":
        return cls("coded-rs", code.f)

    @classmethod
    def wait_all(cls, n: int) -> "Scheme":
        return cls("uncoded-wait-all", n)

    @classmethod
    def fastest(cls, f: int, rescale: bool = True) -> "Scheme":
        return cls("uncoded-fastest-f", f, rescale)


@dataclass(frozen=True, eq=False)
class RoundResult:
    worker_finish: np.ndarray
    survivors: tuple
    decode_time: float
    master_time: float
    gradient: np.ndarray


def worker_loads(scheme: Scheme, parts: Partition, code: Optional[EncodingMatrix], n: int) -> np.ndarray:
    """Samples each worker processes per round."""
    sizes = parts.sizes
    if scheme.kind == "coded-rs":
        if code is None:
            raise ValueError("coded-rs needs an encoding matrix")
        if parts.k != code.k:
            raise ValueError(f"partition has {parts.k} chunks, code expects {code.k}")
        return code.mask.entries.astype(np.int64) @ sizes
    if parts.k != n:
        raise ValueError(f"uncoded schemes need one chunk per worker, got {parts.k} for n={n}")
    return sizes


def select_survivors(finish: np.ndarray, count: int) -> np.ndarray:
    """The ``count`` earliest finishers (ties to the lower index), in index order."""
    order = np.argsort(finish, kind="stable")
    return np.sort(order[:count])


def modeled_decode_time(scheme: Scheme, c_m: float) -> float:
    if scheme.kind != "coded-rs":
        return 0.0
    f = scheme.wait_count
    return c_m * f * (f - 1)


def simulate_round(
    scheme: Scheme,
    code: Optional[EncodingMatrix],
    state: ModelState,
    data: Dataset,
    parts: Partition,
    delays: DelayParams,
    rng,
    loss: str = "softmax",
    table: Optional[InverseTable] = None,
    decode_time: str = "modeled",
    decode_tol: float = DECODE_TOL,
) -> RoundResult:
    n = delays.n
    loads = worker_loads(scheme, parts, code, n)
    finish = sample_delay(delays, rng, n) + delays.c_g * loads
    if scheme.wait_count > n:
        raise ValueError(f"cannot wait for {scheme.wait_count} of {n} workers")
    survivors = select_survivors(finish, scheme.wait_count)
    beta = state.lookahead
    cache = {}

    def partial(j):
        if j not in cache:
            cache[j] = chunk_gradient(loss, data, parts, j, beta).ravel()
        return cache[j]

    dec_time = modeled_decode_time(scheme, delays.c_m)
    if scheme.kind == "coded-rs":
        if len(survivors) < code.f:
            raise ValueError(f"only {len(survivors)} survivors, coded-rs needs {code.f}")
        if table is None:
            table = inverse_table(code.n)
        coded = np.stack(
            [worker_output(code.entries[i], {int(j): partial(int(j)) for j in code.mask.support(i)})
             for i in survivors]
        )
        start = time.perf_counter()
        decoding = decoding_vector(survivors, table, f=code.f)
        reference = float(np.abs(np.stack(list(cache.values()))).sum(axis=0).max())
        gradient = recover_gradient(coded, decoding, decode_tol, reference)
        if decode_time == "measured":
            dec_time = time.perf_counter() - start
    elif scheme.kind == "uncoded-wait-all":
        gradient = sum(partial(j) for j in range(parts.k))
    else:
        gradient = sum(partial(int(j)) for j in survivors)
        if scheme.rescale:
            gradient = gradient * (parts.k / len(survivors))

    master = float(finish[survivors].max()) + dec_time
    return RoundResult(finish, tuple(int(i) for i in survivors), dec_time, master,
                       np.asarray(gradient).reshape(beta.shape))


def sample_master_times(scheme: Scheme, loads: np.ndarray, delays: DelayParams, rng, rounds: int) -> np.ndarray:
    """Master times of ``rounds`` independent rounds, without the gradient work."""
    finish = sample_delay(delays, rng, (rounds, delays.n)) + delays.c_g * loads
    kth = np.sort(finish, axis=1)[:, scheme.wait_count - 1]
    return kth + modeled_decode_time(scheme, delays.c_m)


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    wall_clock: float
    train_loss: float
    test_error: float


@dataclass
class ExperimentTrace:
    scheme: str
    seed: int
    config: dict
    records: list = field(default_factory=list)
    round_times: list = field(default_factory=list)
    status: str = "ok"

    @property
    def final_test_error(self) -> Optional[float]:
        return self.records[-1].test_error if self.records else None

    @property
    def mean_round_time(self) -> Optional[float]:
        return statistics.fmean(self.round_times) if self.round_times else None

    def time_to_reach(self, target: float) -> Optional[float]:
        """First simulated time the test error drops to ``target`` or below."""
        for rec in self.records:
            if rec.test_error <= target:
                return rec.wall_clock
        return None

    def to_csv(self) -> str:
        buf = io.StringIO()
        out = csv.writer(buf, lineterminator="\n")
        out.writerow(TRACE_HEADER)
        for r in self.records:
            out.writerow([r.iter, repr(r.wall_clock), repr(r.train_loss), repr(r.test_error),
                          self.scheme, self.seed])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())


@dataclass(frozen=True, eq=False)
class RunSetup:
    """Everything a run needs, resolved from a config and seed."""

    train: Dataset
    test: Dataset
    delays: DelayParams
    code: EncodingMatrix
    f: int


def build_dataset(config: ExperimentConfig, rng) -> Dataset:
    d = config.data
    if d.kind == "classification":
        return make_classification(d.N, d.p, d.classes, rng, d.separation)
    if d.kind == "regression":
        return make_regression(d.N, d.p, rng, d.noise)
    return load_csv(d.path, classification=config.train.loss == "softmax")


def resolve_f(config: ExperimentConfig, delays: DelayParams) -> int:
    c = config.code
    if c.k is not None:
        return build_code(c.n, c.k, c.w).f
    if c.alpha is not None:
        return f_of_alpha(c.alpha, c.n)
    return optimal_f(TimeModel(config.delay.model, delays))


def code_for_f(n: int, f: int) -> EncodingMatrix:
    """Code with ``k = n`` chunks and ``w = n - f + 1``, which needs exactly ``f`` returners."""
    code = build_code(n, n, n - f + 1)
    assert code.f == f
    return code


def seed_streams(seed: int):
    data_seq, delay_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(data_seq), np.random.default_rng(delay_seq)


def prepare(config: ExperimentConfig, seed: int, c_g: Optional[float] = None) -> RunSetup:
    data_rng, _ = seed_streams(seed)
    data = build_dataset(config, data_rng)
    train, test = train_test_split(data, config.data.test_fraction, data_rng)
    n = config.code.n
    if train.N < n:
        raise ValueError(f"training set of {train.N} points is smaller than n={n}")
    if c_g is None:
        c_g = config.delay.c_g
    if c_g is None:
        c_g = calibrate_cg(train, config.train.loss).c_g
    dl = config.delay
    delays = DelayParams(dl.t0, dl.xi, c_g, dl.c_m, train.N, n)
    c = config.code
    if c.k is not None:
        code = build_code(c.n, c.k, c.w)
    else:
        code = code_for_f(n, resolve_f(config, delays))
    return RunSetup(train, test, delays, code, code.f)


def scheme_for(kind: str, setup: RunSetup, rescale: bool = True) -> Scheme:
    if kind == "coded-rs":
        return Scheme.coded_rs(setup.code)
    if kind == "uncoded-wait-all":
        return Scheme.wait_all(setup.delays.n)
    return Scheme.fastest(setup.f, rescale)


def run_experiment(
    config: ExperimentConfig,
    scheme: str,
    seed: int,
    setup: Optional[RunSetup] = None,
) -> ExperimentTrace:
    """Train until the simulated time budget runs out; one record per completed round."""
    if setup is None:
        setup = prepare(config, seed)
    _, delay_rng = seed_streams(seed)
    sch = scheme_for(scheme, setup, config.rescale_fastest_f)
    tr = config.train
    n = setup.delays.n
    parts = partition(setup.train.N, setup.code.k if sch.kind == "coded-rs" else n)
    table = inverse_table(n) if sch.kind == "coded-rs" else None
    state = ModelState.zeros(param_shape(setup.train), tr.step_size, tr.momentum)

    snapshot = config.to_dict()
    snapshot["resolved"] = {"f": setup.f, "k": setup.code.k, "w": setup.code.params.w,
                            "c_g": setup.delays.c_g}
    trace = ExperimentTrace(scheme, seed, snapshot)
    wall = 0.0
    it = 0
    while tr.max_iters is None or it < tr.max_iters:
        try:
            res = simulate_round(sch, setup.code, state, setup.train, parts, setup.delays,
                                 delay_rng, tr.loss, table, config.delay.decode_time,
                                 config.code.decode_tol)
        except DecodingError as exc:
            log.warning("seed %d, %s: %s", seed, scheme, exc)
            trace.status = "decode-failed"
            break
        if wall + res.master_time > tr.time_budget:
            break
        try:
            state = master_step(state, res.gradient)
        except FloatingPointError:
            trace.status = "diverged"
            break
        with np.errstate(over="ignore", invalid="ignore"):  # divergence is checked just below
            train_loss = loss_value(tr.loss, setup.train.features, setup.train.labels,
                                    state.beta) / setup.train.N
        if not np.isfinite(train_loss):
            trace.status = "diverged"
            break
        wall += res.master_time
        it += 1
        trace.round_times.append(res.master_time)
        trace.records.append(TraceRecord(it, wall, train_loss, error_rate(setup.test, state.beta)))
    return trace


@dataclass(frozen=True)
class Calibration:
    c_g: float
    spread: float  # relative interquartile range of per-sample timings
    status: str


def calibrate_cg(data: Dataset, loss: str, batch_size: Optional[int] = None,
                 repeats: int = 25) -> Calibration:
    """Median wall time per sample gradient, from repeated timed batches."""
    if data.N == 0:
        raise ValueError("empty dataset")
    batch = min(data.N, batch_size or 256)
    x, y = data.features[:batch], data.labels[:batch]
    beta = np.zeros(param_shape(data))
    partial_gradient(loss, x, y, beta)  # warm-up
    per_sample = []
    for _ in range(repeats):
        start = time.perf_counter()
        partial_gradient(loss, x, y, beta)
        per_sample.append((time.perf_counter() - start) / batch)
    med = statistics.median(per_sample)
    q = statistics.quantiles(per_sample, n=4)
    spread = (q[2] - q[0]) / med if med > 0 else float("inf")
    status = "ok"
    if spread > 0.5:
        status = "noisy"
        log.warning("gradient timing is noisy (relative IQR %.2f)", spread)
    return Calibration(med, spread, status)
