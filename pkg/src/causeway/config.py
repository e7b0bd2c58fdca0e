"""Run configuration: one tree of sections, validated before any data is read.

Config files are YAML (JSON works too); sections mirror the pipeline stages.
Environment variables override only the remote endpoint settings
(``INSIGHT_REMOTE_URL``).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields

import yaml

from .errors import ConfigError

REMOTE_URL_ENV = "INSIGHT_REMOTE_URL"

# Corrective-action catalog: fnmatch pattern over the top cause's channel id
# -> action phrase. User config entries take precedence over these seeds.
DEFAULT_ACTIONS: dict[str, str] = {
    "occupancy*": "redistributing occupants or relaxing the zone cooling setpoint",
    "*temp*": "reviewing the zone temperature setpoint",
    "damper*": "reopening the damper slightly",
    "*water*": "checking the chilled-water loop for overdelivery",
    "*flow*": "checking the affected flow loop",
}
FALLBACK_ACTION = "inspecting the HVAC control settings for the affected zone"


@dataclass
class PreprocessConfig:
    interval: float = 3600.0            # seconds of the resampling grid
    max_ffill_gap: int = 2              # interior gaps this long are forward-filled
    max_missing_fraction: float = 0.20  # strictly-greater fractions are excluded


@dataclass
class AnomalyConfig:
    target_channel: str = "energy"
    z_threshold: float = 3.0
    merge_adjacent: bool = True


@dataclass
class WindowConfig:
    window_length: int = 24             # w intervals; the window [t_a - w, t_a] has w+1 points
    lag: int = 3
    lag_selection: str = "fixed"        # "fixed" | "bic"
    p_max: int = 6
    alpha: float = 0.05
    include_intercept: bool = False

    def max_effective_lag(self) -> int:
        return self.p_max if self.lag_selection == "bic" else self.lag


@dataclass
class PruneConfig:
    factor: float = 1.5


@dataclass
class RemoteConfig:
    url: str | None = None
    max_tokens: int = 256
    timeout_seconds: float = 30.0
    retries: int = 2                    # retries after the first attempt
    backoff_seconds: float = 0.5        # doubled after each failed attempt
    fallback_to_template: bool = True


@dataclass
class RunConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    anomaly: AnomalyConfig = field(default_factory=AnomalyConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    prune: PruneConfig = field(default_factory=PruneConfig)
    rank_k: int = 3
    remote: RemoteConfig = field(default_factory=RemoteConfig)
    aliases: dict[str, str] = field(default_factory=dict)      # channel id -> prose name
    actions: dict[str, str] = field(default_factory=dict)      # pattern -> action phrase


def _fail(path: str, message: str):
    raise ConfigError(f"{path}: {message}")


def validate(cfg: RunConfig) -> RunConfig:
    """Check every invariant, reporting the first offending field by path."""
    p = cfg.preprocess
    if not p.interval > 0:
        _fail("preprocess.interval", "must be > 0")
    if p.max_ffill_gap < 0:
        _fail("preprocess.max_ffill_gap", "must be >= 0")
    if not 0.0 <= p.max_missing_fraction <= 1.0:
        _fail("preprocess.max_missing_fraction", "must be in [0, 1]")

    a = cfg.anomaly
    if not a.target_channel:
        _fail("anomaly.target_channel", "must be a non-empty channel id")
    if not a.z_threshold > 0:
        _fail("anomaly.z_threshold", "must be > 0")

    w = cfg.window
    if w.lag_selection not in ("fixed", "bic"):
        _fail("window.lag_selection", "must be 'fixed' or 'bic'")
    if w.lag < 1:
        _fail("window.lag", "must be >= 1")
    if w.lag > w.p_max:
        _fail("window.lag", f"must be <= window.p_max ({w.p_max})")
    if not 0.0 < w.alpha < 1.0:
        _fail("window.alpha", "must be in (0, 1)")
    if w.window_length <= 2 * w.max_effective_lag() + 5:
        _fail("window.window_length",
              f"must exceed 2*lag+5 (= {2 * w.max_effective_lag() + 5} for the configured lag)")

    if not cfg.prune.factor > 0:
        _fail("prune.factor", "must be > 0")
    if cfg.rank_k < 1:
        _fail("rank_k", "must be >= 1")

    r = cfg.remote
    if r.timeout_seconds <= 0:
        _fail("remote.timeout_seconds", "must be > 0")
    if r.retries < 0:
        _fail("remote.retries", "must be >= 0")
    if r.backoff_seconds < 0:
        _fail("remote.backoff_seconds", "must be >= 0")
    if r.max_tokens < 1:
        _fail("remote.max_tokens", "must be >= 1")
    return cfg


_SECTIONS = {
    "preprocess": PreprocessConfig,
    "anomaly": AnomalyConfig,
    "window": WindowConfig,
    "prune": PruneConfig,
    "remote": RemoteConfig,
}


def _build_section(cls, doc: dict, path: str):
    known = {f.name for f in fields(cls)}
    for key in doc:
        if key not in known:
            _fail(f"{path}.{key}", "unknown field")
    try:
        return cls(**doc)
    except TypeError as exc:
        _fail(path, str(exc))


def from_dict(doc: dict) -> RunConfig:
    """Build a validated RunConfig from a plain config tree."""
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config root: must be a mapping of sections")
    cfg = RunConfig()
    for key, value in doc.items():
        if key in _SECTIONS:
            if not isinstance(value, dict):
                _fail(key, "must be a mapping")
            setattr(cfg, key, _build_section(_SECTIONS[key], value, key))
        elif key == "rank_k":
            cfg.rank_k = value
        elif key in ("aliases", "actions"):
            if not isinstance(value, dict):
                _fail(key, "must be a mapping")
            setattr(cfg, key, {str(k): str(v) for k, v in value.items()})
        else:
            _fail(key, "unknown section")
    _apply_env(cfg)
    return validate(cfg)


def load(path: str | None) -> RunConfig:
    """Load and validate a config file; a missing path yields the defaults."""
    if path is None:
        cfg = RunConfig()
        _apply_env(cfg)
        return validate(cfg)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path!r} is not valid YAML: {exc}") from exc
    return from_dict(doc)


def _apply_env(cfg: RunConfig):
    url = os.environ.get(REMOTE_URL_ENV)
    if url:
        cfg.remote.url = url


def action_for(channel: str, actions: dict[str, str]) -> str:
    """Resolve the corrective action for a channel; user entries win over seeds."""
    from fnmatch import fnmatch

    for pattern, phrase in actions.items():
        if fnmatch(channel, pattern):
            return phrase
    for pattern, phrase in DEFAULT_ACTIONS.items():
        if fnmatch(channel, pattern):
            return phrase
    return FALLBACK_ACTION
