"""Experiment configuration: nested dataclasses stored as JSON.

Every key must be known; typos raise :class:`ConfigError` instead of being
silently ignored.  Example::

    {
      "code":  {"n": 40, "k": null, "w": null, "alpha": null},
      "data":  {"kind": "classification", "N": 2000, "p": 20, "classes": 3},
      "delay": {"t0": 0.001, "xi": 1.1, "c_g": 1e-06, "c_m": 1e-09},
      "train": {"loss": "softmax", "time_budget": 5.0},
      "schemes": ["coded-rs", "uncoded-wait-all"],
      "seeds": [0, 1]
    }

Leaving ``k``, ``w`` and ``alpha`` null picks ``f`` by minimizing the delay model.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union, get_args, get_origin, get_type_hints

from .construction import mask_layout, straggler_budget
from .delay import MODES
from .training import LOSS_KINDS

SCHEMES = ("coded-rs", "uncoded-wait-all", "uncoded-fastest-f")
DATA_KINDS = ("classification", "regression", "csv")
DECODE_TIMES = ("modeled", "measured")


class ConfigError(ValueError):
    pass


@dataclass
class CodeConfig:
    n: int = 40
    k: Optional[int] = None
    w: Optional[int] = None
    alpha: Optional[float] = None
    decode_tol: float = 1e-8  # imaginary residual, relative to the summed |partials|, that counts as breakdown


@dataclass
class DataConfig:
    kind: str = "classification"
    N: int = 2000
    p: int = 20
    classes: int = 3
    separation: float = 0.35
    noise: float = 0.1
    test_fraction: float = 0.2
    path: Optional[str] = None


@dataclass
class DelayConfig:
    t0: float = 0.001
    xi: float = 1.1
    c_g: Optional[float] = 1e-6  # null means calibrate on this machine
    c_m: float = 1e-9
    model: str = "online"
    decode_time: str = "modeled"


@dataclass
class TrainConfig:
    loss: str = "softmax"
    step_size: float = 1e-4
    momentum: float = 0.9
    time_budget: float = 5.0
    max_iters: Optional[int] = None


@dataclass
class ExperimentConfig:
    code: CodeConfig = field(default_factory=CodeConfig)
    data: DataConfig = field(default_factory=DataConfig)
    delay: DelayConfig = field(default_factory=DelayConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    schemes: list = field(default_factory=lambda: ["coded-rs", "uncoded-wait-all"])
    seeds: list = field(default_factory=lambda: [0])
    out_dir: str = "runs"
    rescale_fastest_f: bool = True

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        cfg = _build(cls, raw, "")
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_json(text)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json())

    def validate(self) -> None:
        c = self.code
        if c.n < 1:
            raise ConfigError(f"code.n={c.n} must be positive")
        if (c.k is None) != (c.w is None):
            raise ConfigError("code.k and code.w must be given together")
        if c.k is not None:
            try:
                straggler_budget(c.n, c.k, c.w)
                d_light = mask_layout(c.n, c.k, c.w).d_light
            except ValueError as exc:
                raise ConfigError(f"infeasible code: {exc}") from exc
            if d_light < 2:
                raise ConfigError(f"infeasible code: floor(n*w/k) = {d_light} < 2")
            if c.alpha is not None:
                raise ConfigError("give either code.k/code.w or code.alpha, not both")
        if c.decode_tol <= 0:
            raise ConfigError("code.decode_tol must be positive")
        if c.alpha is not None and not 0 < c.alpha <= 1:
            raise ConfigError(f"code.alpha={c.alpha} must lie in (0, 1]")

        d = self.data
        if d.kind not in DATA_KINDS:
            raise ConfigError(f"data.kind must be one of {DATA_KINDS}, got {d.kind!r}")
        if d.kind == "csv" and not d.path:
            raise ConfigError("data.path is required for csv data")
        if d.kind != "csv" and (d.N < 1 or d.p < 1):
            raise ConfigError("data.N and data.p must be positive")
        if not 0 < d.test_fraction < 1:
            raise ConfigError("data.test_fraction must lie in (0, 1)")

        dl = self.delay
        if dl.t0 <= 0 or dl.xi <= 0 or dl.c_m < 0 or (dl.c_g is not None and dl.c_g < 0):
            raise ConfigError("delay parameters must be positive (costs non-negative)")
        if dl.model not in MODES:
            raise ConfigError(f"delay.model must be one of {MODES}")
        if dl.decode_time not in DECODE_TIMES:
            raise ConfigError(f"delay.decode_time must be one of {DECODE_TIMES}")

        t = self.train
        if t.loss not in LOSS_KINDS:
            raise ConfigError(f"train.loss must be one of {LOSS_KINDS}")
        if (t.loss, d.kind) in (("softmax", "regression"), ("squared", "classification")):
            raise ConfigError(f"train.loss={t.loss!r} does not fit data.kind={d.kind!r}")
        if t.step_size <= 0 or not 0 <= t.momentum < 1:
            raise ConfigError("train.step_size must be positive and momentum in [0, 1)")
        if t.time_budget < 0:
            raise ConfigError("train.time_budget must be non-negative")
        if t.max_iters is not None and t.max_iters < 0:
            raise ConfigError("train.max_iters must be non-negative")

        if not self.schemes:
            raise ConfigError("no schemes")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ConfigError(f"unknown scheme(s) {unknown}; expected {SCHEMES}")
        if not self.seeds:
            raise ConfigError("no seeds")
        if not all(isinstance(s, int) and not isinstance(s, bool) for s in self.seeds):
            raise ConfigError("seeds must be integers")


def _build(cls, raw: Any, where: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{where or 'config'}: expected an object")
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        prefix = f"{where}." if where else ""
        raise ConfigError(f"unknown config key(s): {', '.join(prefix + u for u in unknown)}")
    kwargs = {}
    for name, value in raw.items():
        hint = hints[name]
        if dataclasses.is_dataclass(hint):
            kwargs[name] = _build(hint, value, f"{where}.{name}" if where else name)
        else:
            kwargs[name] = _coerce(value, hint, f"{where}.{name}" if where else name)
    return cls(**kwargs)


def _coerce(value, hint, where):
    args = get_args(hint)
    optional = get_origin(hint) is Union and type(None) in args
    if value is None:
        if not optional:
            raise ConfigError(f"{where} may not be null")
        return None
    base = next(a for a in args if a is not type(None)) if optional else hint
    base = get_origin(base) or base
    if base is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if base is bool and not isinstance(value, bool):
        raise ConfigError(f"{where} must be true or false")
    if base in (int, float) and (isinstance(value, bool) or not isinstance(value, base)):
        raise ConfigError(f"{where} must be a number of type {base.__name__}, got {value!r}")
    if base in (str, list) and not isinstance(value, base):
        raise ConfigError(f"{where} must be of type {base.__name__}, got {value!r}")
    return value


def apply_override(raw: dict, assignment: str) -> dict:
    """Apply ``dotted.key=value`` to a raw config dict; ``value`` is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, text = assignment.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    node = raw
    parts = key.strip().split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override {key!r} descends into a non-object")
    node[parts[-1]] = value
    return raw
