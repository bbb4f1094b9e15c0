"""Run configuration: JSON file plus command-line overrides, fully resolved.

Every field has a default, so an empty JSON object is a valid config. The
resolved config serializes back to JSON and parses to an identical value.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Optional

from ._json import ConfigError
from .matrix_oracle import DEFAULT_SCHEDULE
from .norm_certifier import (DEFAULT_RIDGE, DEFAULT_STAGES, DIVERGENCE_THRESHOLD, GROWTH_RATIO, PLATEAU,
                             SANDWICH_SLACK, Budget, Tolerances)
from .psd_engine import BOUNDARY_CAP, DEFAULT_PSD_TOL, STRATEGIES


@dataclass(frozen=True)
class SamplingConfig:
    strategy: str = "uniform_random"   # psd-check only; certify uses its own mixed pool
    size: int = 30
    stages: tuple = DEFAULT_STAGES
    seed: int = 0
    cap: Optional[float] = None        # None: the preset's cap, else 1e-8


@dataclass(frozen=True)
class ToleranceConfig:
    psd_tol: float = DEFAULT_PSD_TOL
    ridge: float = DEFAULT_RIDGE
    divergence_threshold: float = DIVERGENCE_THRESHOLD
    growth_ratio: float = GROWTH_RATIO
    plateau: float = PLATEAU
    sandwich_slack: float = SANDWICH_SLACK
    oracle_tol: float = 1e-10
    oracle_max_iter: int = 100_000


@dataclass(frozen=True)
class OracleConfig:
    schedule: tuple = DEFAULT_SCHEDULE
    adjoint_points: tuple = (0.0, 0.3, 0.5, -0.7)


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "rkhscert-out"


@dataclass(frozen=True)
class RunConfig:
    preset: Optional[str] = None
    spec: Optional[dict] = None        # OperatorSpec JSON, used when no preset is named
    kernel: Optional[dict] = None      # kernel JSON for psd-check
    points: Optional[str] = None       # PointSet CSV for psd-check
    filter: Optional[str] = None       # gallery name pattern
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_json(self):
        return _plain(asdict(self))

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, obj, path="$") -> "RunConfig":
        return _load(cls, obj, path)

    @classmethod
    def load(cls, file_path) -> "RunConfig":
        try:
            with open(file_path) as fh:
                obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON ({exc.msg} at line {exc.lineno})", "$") from exc
        return cls.from_json(obj)

    def budget(self, cap=None) -> Budget:
        s = self.sampling
        eff_cap = s.cap if s.cap is not None else (cap if cap is not None else BOUNDARY_CAP)
        return Budget(tuple(s.stages), s.seed, None, tuple(self.oracle.schedule), eff_cap)

    def certifier_tolerances(self) -> Tolerances:
        t = self.tolerances
        return Tolerances(t.psd_tol, t.ridge, t.divergence_threshold, t.growth_ratio, t.plateau, t.sandwich_slack)

    def with_overrides(self, seed=None, out=None, tol=None, stages=None, preset=None, filter=None) -> "RunConfig":
        cfg = self
        if seed is not None:
            cfg = replace(cfg, sampling=replace(cfg.sampling, seed=seed))
        if stages is not None:
            cfg = replace(cfg, sampling=replace(cfg.sampling, stages=tuple(stages)))
        if tol is not None:
            cfg = replace(cfg, tolerances=replace(cfg.tolerances, psd_tol=tol))
        if out is not None:
            cfg = replace(cfg, output=replace(cfg.output, dir=out))
        if preset is not None:
            cfg = replace(cfg, preset=preset)
        if filter is not None:
            cfg = replace(cfg, filter=filter)
        _validate(cfg)
        return cfg


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


_NESTED = {"sampling": SamplingConfig, "tolerances": ToleranceConfig, "oracle": OracleConfig,
           "output": OutputConfig}


def _check_type(name, value, default, path):
    p = f"{path}.{name}"
    if isinstance(default, bool):
        ok = isinstance(value, bool)
    elif isinstance(default, int):
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif isinstance(default, float):
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        value = float(value) if ok else value
    elif isinstance(default, str):
        ok = isinstance(value, str)
    elif isinstance(default, tuple):
        ok = isinstance(value, list) and all(isinstance(x, (int, float)) and not isinstance(x, bool)
                                             for x in value)
        value = tuple(value) if ok else value
    else:
        ok = True
    if not ok:
        raise ConfigError(f"expected {type(default).__name__}, got {type(value).__name__}", p)
    return value


_OPTIONAL = {"preset": str, "spec": dict, "kernel": dict, "points": str, "filter": str, "cap": float}


def _load(cls, obj, path):
    if not isinstance(obj, dict):
        raise ConfigError("expected an object", path)
    names = {f.name: f for f in fields(cls)}
    unknown = sorted(set(obj) - set(names))
    if unknown:
        raise ConfigError(f"unknown field {unknown[0]!r}", f"{path}.{unknown[0]}")
    kwargs = {}
    for name, value in obj.items():
        if name in _NESTED and cls is RunConfig:
            kwargs[name] = _load(_NESTED[name], value, f"{path}.{name}")
        elif name in _OPTIONAL:
            if value is not None:
                want = _OPTIONAL[name]
                ok = isinstance(value, (int, float)) and not isinstance(value, bool) if want is float \
                    else isinstance(value, want)
                if not ok:
                    raise ConfigError(f"expected {want.__name__} or null", f"{path}.{name}")
                value = float(value) if want is float else value
            kwargs[name] = value
        else:
            f = names[name]
            default = f.default if f.default is not f.default_factory else None
            kwargs[name] = _check_type(name, value, default, path)
    cfg = cls(**kwargs)
    if cls is RunConfig:
        _validate(cfg, path)
    return cfg


def _validate(cfg: RunConfig, path="$"):
    s = cfg.sampling
    if s.strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {s.strategy!r}", f"{path}.sampling.strategy")
    if s.size < 1:
        raise ConfigError("must be >= 1", f"{path}.sampling.size")
    st = list(s.stages)
    if not st or any(int(v) != v or v < 1 for v in st) or any(b <= a for a, b in zip(st, st[1:])):
        raise ConfigError("stage sizes must be positive integers, strictly increasing", f"{path}.sampling.stages")
    if s.seed < 0 or s.seed >= 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer", f"{path}.sampling.seed")
    if s.cap is not None and not 0 < s.cap < 1:
        raise ConfigError("cap must lie in (0, 1)", f"{path}.sampling.cap")
    t = cfg.tolerances
    for name in ("psd_tol", "oracle_tol"):
        if not getattr(t, name) > 0:
            raise ConfigError("must be positive", f"{path}.tolerances.{name}")
    if t.ridge < 0:
        raise ConfigError("must be non-negative", f"{path}.tolerances.ridge")
    sched = list(cfg.oracle.schedule)
    if not sched or any(int(v) != v or v < 1 for v in sched):
        raise ConfigError("truncation orders must be positive integers", f"{path}.oracle.schedule")
