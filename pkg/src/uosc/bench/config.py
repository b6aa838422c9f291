"""Experiment configuration and the flat ``key = value`` config file format.

Recognized keys (lists are comma separated; ``a:b`` and ``a:b:step`` are
inclusive ranges)::

    experiment   fig1 | fig2-m | fig2-s | fig-kappa | verify
    M1, m, s     integer lists
    r, n         integers
    kappa        float list
    topk         integer, entries kept per adjacency column
    trials       integer >= 1
    seed         integer
    algorithms   subset of MFC, IP_L1, IP_L2, TSC
    normalize    0 / 1, unit-norm columns before clustering
    theorems     subset of T1..T7 (verify only)
    p            1 or 2 (verify only)
    delta        failure probability used by the bounds (verify only)
    out          output directory
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

from ..directions import SOURCES
from ..exceptions import ParameterError
from ..io import read_keyvalues
from ..theory import THEOREMS

EXPERIMENTS = ("fig1", "fig2-m", "fig2-s", "fig-kappa", "verify")


@dataclass
class ExperimentConfig:
    experiment: str
    M1: list
    m: list
    r: int
    s: list
    n: int
    kappa: list
    topk: int = 8
    trials: int = 50
    seed: int = 0
    algorithms: list = field(default_factory=lambda: ["MFC", "TSC"])
    normalize: bool = True
    theorems: list = field(default_factory=lambda: ["T1", "T4", "T6"])
    p: int = 2
    delta: float = 0.01
    out: str = "results"

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ParameterError(f"unknown experiment {self.experiment!r}")
        if self.trials < 1:
            raise ParameterError(f"trials must be at least 1, got {self.trials}")
        if self.topk < 1:
            raise ParameterError(f"topk must be at least 1, got {self.topk}")
        for name in ("M1", "m", "s", "kappa", "algorithms"):
            if not getattr(self, name):
                raise ParameterError(f"{name} must be a nonempty list")
        bad = [a for a in self.algorithms if a not in SOURCES]
        if bad:
            raise ParameterError(f"unknown algorithms {bad}; choose from {list(SOURCES)}")
        bad = [t for t in self.theorems if t not in THEOREMS]
        if bad or not self.theorems:
            raise ParameterError(f"theorems must be a nonempty subset of {list(THEOREMS)}")
        if any(m < 2 for m in self.m):
            raise ParameterError("every m must be at least 2")
        if any(not 0 <= s < self.r for s in self.s):
            raise ParameterError(f"every s must satisfy 0 <= s < r = {self.r}")
        if any(k <= 0 for k in self.kappa):
            raise ParameterError("kappa values must be positive")
        if self.n < 1 or self.r < 1:
            raise ParameterError("n and r must be positive")
        if self.p not in (1, 2):
            raise ParameterError(f"p must be 1 or 2, got {self.p}")
        if not 0 < self.delta < 1:
            raise ParameterError(f"delta must lie in (0, 1), got {self.delta}")
        return self


def default_config(experiment):
    """Parameters of each experiment before any overrides."""
    if experiment == "fig1":
        return ExperimentConfig("fig1", [400], [2, 4, 6, 8, 10], 10, [8], 200, [2.0],
                                trials=10)
    if experiment == "fig2-m":
        return ExperimentConfig("fig2-m", [20, 50, 300], list(range(2, 11)), 10, [9], 100,
                                [2.0])
    if experiment == "fig2-s":
        return ExperimentConfig("fig2-s", [40], [5], 10, list(range(10)), 100, [2.0])
    if experiment == "fig-kappa":
        return ExperimentConfig("fig-kappa", [1], [4], 1, [0], 100,
                                [1 + 0.5 * i for i in range(15)], trials=20)
    if experiment == "verify":
        return ExperimentConfig("verify", [300], [2, 3], 3, [0, 1], 200, [1.5, 2.0],
                                trials=25, normalize=False)
    raise ParameterError(f"unknown experiment {experiment!r}; choose from {list(EXPERIMENTS)}")


def parse_int_list(text):
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ":" in part:
                bits = [int(b) for b in part.split(":")]
                if len(bits) not in (2, 3):
                    raise ValueError
                start, stop = bits[0], bits[1]
                step = bits[2] if len(bits) == 3 else 1
                if step == 0:
                    raise ValueError
                out.extend(range(start, stop + (1 if step > 0 else -1), step))
            else:
                out.append(int(part))
        except ValueError:
            raise ParameterError(f"cannot parse integer list {text!r}") from None
    return out


def parse_float_list(text):
    try:
        return [float(p) for p in str(text).split(",") if p.strip()]
    except ValueError:
        raise ParameterError(f"cannot parse number list {text!r}") from None


def parse_name_list(text):
    return [p.strip().upper() for p in str(text).split(",") if p.strip()]


def _int(text):
    try:
        return int(text)
    except ValueError:
        raise ParameterError(f"expected an integer, got {text!r}") from None


def _float(text):
    try:
        return float(text)
    except ValueError:
        raise ParameterError(f"expected a number, got {text!r}") from None


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ParameterError(f"expected a boolean, got {text!r}")


PARSERS = {
    "M1": parse_int_list, "m": parse_int_list, "s": parse_int_list,
    "r": _int, "n": _int, "topk": _int, "trials": _int, "seed": _int, "p": _int,
    "kappa": parse_float_list, "delta": _float,
    "algorithms": parse_name_list, "theorems": parse_name_list,
    "normalize": _bool, "out": str, "experiment": str,
}


def parse_overrides(pairs):
    """Convert raw string pairs to typed values, rejecting unknown keys."""
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for key, val in pairs.items():
        if key not in known:
            raise ParameterError(f"unknown config key {key!r}")
        out[key] = PARSERS[key](val)
    return out


def load_config_file(path):
    try:
        raw = read_keyvalues(path)
    except (OSError, ValueError) as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from None
    return parse_overrides(raw)


def build_config(experiment, file_values=None, overrides=None):
    """Defaults, then config-file values, then command-line overrides."""
    file_values = dict(file_values or {})
    exp = file_values.pop("experiment", None)
    if exp is not None and exp != experiment:
        raise ParameterError(f"config file is for {exp!r}, not {experiment!r}")
    cfg = default_config(experiment)
    cfg = replace(cfg, **file_values)
    cfg = replace(cfg, **{k: v for k, v in (overrides or {}).items() if v is not None})
    return cfg.validate()
