"""Flat ``key=value`` run configuration.

Every key has a typed default; unknown keys are rejected. Files use one
``key=value`` per line with ``#`` comments. Values given later (e.g. CLI
flags) override earlier ones.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError
from .scale import DimPolicy, ScaleFit

ABLATIONS = ("SE", "DS", "LE", "DI")
MODES = ("sage", "finetune", "fixed-dim")

# a fitted on the seven public benchmarks' snapshot counts at dim 200
# (see scale.reference_points); b fixed to e.
DEFAULT_SCALE_A = 183439.67

DEFAULTS = {
    "seed": 0,
    "mode": "sage",
    "ablate": "",
    "data": "",
    "out": "",
    "workers": 1,
    "verbose": False,
    "footprints": False,
    "dim.initial": "auto",
    "dim.initial_min": 100,
    "dim.initial_max": 200,
    "dim.fixed": 200,
    "scale.a": DEFAULT_SCALE_A,
    "scale.b": math.e,
    "scale.band": 0.2,
    "policy.r": 1.25,
    "policy.step": 10,
    "replay.k": 30,
    "replay.candidates": "all",
    "expand.epochs": 1,
    "expand.hidden": "none",
    "expand.lr": "",
    "expand.renormalize": False,
    "train.lr": 1e-4,
    "train.margin": 8.0,
    "train.alpha": 0.01,
    "train.max_epochs": 200,
    "train.patience": 3,
    "train.eval_interval": 5,
    "train.batch_size": 1024,
    "train.negatives": 1,
    "train.norm": "L2",
    "train.dwt_scope": "batch",
    "train.filter_negatives": False,
    "train.reset_optimizer": True,
    "eval.batch_size": 256,
}


def _coerce(key, value):
    default = DEFAULTS[key]
    if isinstance(value, str):
        value = value.strip()
    try:
        if isinstance(default, bool):
            if isinstance(value, bool):
                return value
            low = str(value).lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off", ""):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            if key == "scale.b" and str(value) == "e":
                return math.e
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: cannot parse {value!r} as {type(default).__name__}") from None
    return "" if value is None else str(value)


@dataclass
class TrainConfig:
    lr: float = 1e-4
    margin: float = 8.0
    alpha: float = 0.01
    max_epochs: int = 200
    patience: int = 3
    eval_interval: int = 5
    batch_size: int = 1024
    negatives: int = 1
    seed: int = 0
    norm: str = "L2"
    dwt_scope: str = "batch"
    filter_negatives: bool = False
    eval_batch_size: int = 256
    workers: int = 1
    verbose: bool = False

    def __post_init__(self):
        if not (self.lr > 0 and self.margin > 0 and self.alpha >= 0 and self.max_epochs >= 1):
            raise ConfigError(f"invalid training config {self}")
        if self.dwt_scope not in ("batch", "full"):
            raise ConfigError(f"train.dwt_scope must be 'batch' or 'full', got {self.dwt_scope!r}")


class RunConfig:
    """Resolved configuration: defaults, then file values, then overrides."""

    def __init__(self, values=None):
        self.values = dict(DEFAULTS)
        for k, v in (values or {}).items():
            self.set(k, v)

    def set(self, key, value):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        value = _coerce(key, value)
        if key == "mode" and value not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {value!r}")
        if key == "ablate":
            parts = [p.strip().upper() for p in value.split(",") if p.strip()]
            bad = [p for p in parts if p not in ABLATIONS]
            if bad:
                raise ConfigError(f"unknown ablation(s) {bad}; choose from {ABLATIONS}")
            value = ",".join(sorted(set(parts), key=ABLATIONS.index))
        self.values[key] = value
        return self

    def update(self, values):
        for k, v in values.items():
            self.set(k, v)
        return self

    def __getitem__(self, key):
        return self.values[key]

    def copy(self):
        return RunConfig(self.values)

    @classmethod
    def parse(cls, text):
        values = {}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
        return cls(values)

    @classmethod
    def from_file(cls, path, overrides=None):
        with open(path, encoding="utf-8") as fh:
            cfg = cls.parse(fh.read())
        return cfg.update(overrides or {})

    def dumps(self):
        lines = []
        for key in DEFAULTS:
            v = self.values[key]
            if isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{key}={v}")
        return "\n".join(lines) + "\n"

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @property
    def ablations(self):
        return frozenset(p for p in self.values["ablate"].split(",") if p)

    def train_config(self):
        v = self.values
        return TrainConfig(
            lr=v["train.lr"], margin=v["train.margin"], alpha=v["train.alpha"],
            max_epochs=v["train.max_epochs"], patience=v["train.patience"],
            eval_interval=v["train.eval_interval"], batch_size=v["train.batch_size"],
            negatives=v["train.negatives"], seed=v["seed"], norm=v["train.norm"],
            dwt_scope=v["train.dwt_scope"], filter_negatives=v["train.filter_negatives"],
            eval_batch_size=v["eval.batch_size"], workers=v["workers"], verbose=v["verbose"],
        )

    def scale_fit(self):
        return ScaleFit(a=self.values["scale.a"], b=self.values["scale.b"], band=self.values["scale.band"])

    def policy(self):
        return DimPolicy(r=self.values["policy.r"], step=self.values["policy.step"])

    def expand_lr(self):
        lr = self.values["expand.lr"]
        return self.values["train.lr"] if lr == "" else float(lr)

    def expand_hidden(self):
        h = self.values["expand.hidden"]
        return None if h in ("", "none") else int(h)

    def replay_candidates(self):
        c = self.values["replay.candidates"]
        return None if c in ("", "all") else int(c)
