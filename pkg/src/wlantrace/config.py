"""Run configuration shared by all CLI subcommands.

The file is YAML with one mapping per section. Missing keys fall back to
their defaults (and the fallback is logged), unknown keys and ill-typed
values are rejected with the offending ``section.key`` in the message.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

from .centrality import Measure
from .contact import ContactConfig
from .harness import REFERENCE_K, REFERENCE_POPULATION, REFERENCE_SEEDS, scaled_k
from .seir import SeirParams
from .synth import CampusSpec

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class IngestSection:
    ssid_filter: list[str] = field(default_factory=lambda: ["SecureNet"])
    ap_directory: Optional[str] = None


@dataclass(frozen=True)
class TrajectorySection:
    session_timeout: int = 3600
    max_terminal_stay: int = 7200
    default_walk: int = 300
    utc_offset: int = 0
    walk: Optional[str] = None


@dataclass(frozen=True)
class ContactSection:
    d_sym: int = 900
    d_env: int = 3000
    d_asym: int = 300


@dataclass(frozen=True)
class SeirSection:
    beta: float = 0.155
    sigma: float = 1 / 5.2
    gamma: float = 1 / 12.39
    initial_infected: Optional[int] = None  # None: 50 scaled to the population
    max_days: int = 300
    runs: int = 50


@dataclass(frozen=True)
class HarnessSection:
    k: Optional[int] = None  # None: 100 scaled to the population
    measures: list[str] = field(default_factory=lambda: [m.value for m in Measure])
    sweep_measure: str = "betweenness"
    sweep_step: float = 5.0
    sweep_infected_max: float = 20.0
    sweep_quarantine_max: float = 50.0
    turning_threshold: float = 1.0


@dataclass(frozen=True)
class AnalysisSection:
    p: float = 0.9
    k: int = 100
    measure: str = "betweenness"
    weeks: Optional[int] = None  # None: every calendar week that has data


@dataclass(frozen=True)
class PipelineSection:
    window: Optional[str] = None  # None: first calendar day with data
    weekly_window: Optional[str] = None  # None: first seven days from that day


SECTIONS = {
    "ingest": IngestSection,
    "trajectory": TrajectorySection,
    "contact": ContactSection,
    "seir": SeirSection,
    "harness": HarnessSection,
    "analysis": AnalysisSection,
    "pipeline": PipelineSection,
    "synth": CampusSpec,
}
SCALARS = {"seed": 0, "threads": 1}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    threads: int = 1
    ingest: IngestSection = IngestSection()
    trajectory: TrajectorySection = TrajectorySection()
    contact: ContactSection = ContactSection()
    seir: SeirSection = SeirSection()
    harness: HarnessSection = HarnessSection()
    analysis: AnalysisSection = AnalysisSection()
    pipeline: PipelineSection = PipelineSection()
    synth: CampusSpec = CampusSpec()

    # -- domain views -------------------------------------------------
    def contact_config(self) -> ContactConfig:
        return ContactConfig(self.contact.d_sym, self.contact.d_env, self.contact.d_asym)

    def seir_params(self, n: int = REFERENCE_POPULATION) -> SeirParams:
        """SEIR parameters for a graph with ``n`` vertices (used when seeds are scaled)."""
        s = self.seir
        seeds = s.initial_infected if s.initial_infected is not None else scaled_k(n, REFERENCE_SEEDS)
        return SeirParams(s.beta, s.sigma, s.gamma, seeds, s.max_days, s.runs, self.seed)

    def quarantine_k(self, n: int = REFERENCE_POPULATION) -> int:
        return self.harness.k if self.harness.k is not None else scaled_k(n, REFERENCE_K)

    # -- serialization ------------------------------------------------
    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True, default_flow_style=False)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, **dotted) -> "RunConfig":
        """Return a copy with ``section.key`` (or top-level) values replaced; None means keep."""
        data = self.to_dict()
        for key, value in dotted.items():
            if value is None:
                continue
            parts = key.split(".")
            target = data
            for p in parts[:-1]:
                target = target[p]
            if parts[-1] not in target:
                raise ConfigError(f"unknown config key {key!r}")
            target[parts[-1]] = value
        return from_dict(data, log_defaults=False)


def _check_type(name: str, value, tp):
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = typing.get_args(tp)
        if value is None and type(None) in args:
            return value
        tp = next(a for a in args if a is not type(None))
        origin = typing.get_origin(tp)
    if origin is list:
        if not isinstance(value, list) or not all(isinstance(x, str) for x in value):
            raise ConfigError(f"{name} must be a list of strings, got {value!r}")
        return list(value)
    if tp is bool or isinstance(value, bool):
        if tp is not bool or not isinstance(value, bool):
            raise ConfigError(f"{name} must be {tp.__name__}, got {value!r}")
        return value
    if tp is int:
        if not isinstance(value, int):
            raise ConfigError(f"{name} must be an integer, got {value!r}")
        return value
    if tp is float:
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{name} must be a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{name} must be a string, got {value!r}")
        return value
    raise ConfigError(f"{name}: unsupported type {tp}")


def _section(name: str, cls, raw, log_defaults: bool):
    if raw is None:
        if log_defaults:
            log.info("config section [%s] not set, using defaults", name)
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config section [{name}] must be a mapping")
    hints = typing.get_type_hints(cls)
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - set(fields))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(f'{name}.{k}' for k in unknown)}")
    kwargs = {}
    for key in fields:
        if key in raw:
            kwargs[key] = _check_type(f"{name}.{key}", raw[key], hints[key])
        elif log_defaults and raw:
            log.info("config key %s.%s not set, using default", name, key)
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (ValueError, TypeError) as e:
        raise ConfigError(f"invalid config [{name}]: {e}") from e


def from_dict(data: dict | None, log_defaults: bool = True) -> RunConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - set(SECTIONS) - set(SCALARS))
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    kwargs = {}
    for key, default in SCALARS.items():
        if key in data:
            kwargs[key] = _check_type(key, data[key], int)
        elif log_defaults:
            log.info("config key %s not set, using default %r", key, default)
    for name, cls in SECTIONS.items():
        kwargs[name] = _section(name, cls, data.get(name), log_defaults)
    cfg = RunConfig(**kwargs)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    try:
        cfg.contact_config()
    except ValueError as e:
        raise ConfigError(f"invalid config [contact]: {e}") from e
    try:
        cfg.seir_params()
    except ValueError as e:
        raise ConfigError(f"invalid config [seir]: {e}") from e
    for key in ("session_timeout", "max_terminal_stay", "default_walk"):
        if getattr(cfg.trajectory, key) < 0:
            raise ConfigError(f"trajectory.{key} must be >= 0")
    h = cfg.harness
    for name, value in [("harness.sweep_measure", h.sweep_measure), ("analysis.measure", cfg.analysis.measure),
                        *((f"harness.measures[{i}]", m) for i, m in enumerate(h.measures))]:
        if value not in {m.value for m in Measure}:
            raise ConfigError(f"{name} must be one of degree, closeness, betweenness; got {value!r}")
    if h.k is not None and h.k < 0:
        raise ConfigError("harness.k must be >= 0")
    if not 0 < h.sweep_step <= 100:
        raise ConfigError("harness.sweep_step must be in (0, 100]")
    for key in ("sweep_infected_max", "sweep_quarantine_max"):
        if not 0 <= getattr(h, key) <= 100:
            raise ConfigError(f"harness.{key} must be in [0, 100]")
    if h.turning_threshold <= 0:
        raise ConfigError("harness.turning_threshold must be > 0")
    a = cfg.analysis
    if not 0 < a.p < 1:
        raise ConfigError("analysis.p must be in (0, 1)")
    if a.k < 1:
        raise ConfigError("analysis.k must be >= 1")
    if a.weeks is not None and a.weeks < 1:
        raise ConfigError("analysis.weeks must be >= 1")


def load(path: str | Path | None) -> RunConfig:
    """Read a YAML config; ``None`` gives the all-default configuration."""
    if path is None:
        log.info("no config file given, using defaults")
        return from_dict({}, log_defaults=False)
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"config {path} is not valid YAML: {e}") from e
    if data is not None and not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return from_dict(data)
