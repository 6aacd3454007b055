"""Experiment configuration files (TOML).

Every section and key is optional; unknown keys anywhere are rejected. A
full example with the defaults spelled out lives in ``configs/default.toml``.

    [canvas]   height, width, channels, max_level
    [prior]    correlation_length, prior_seed, mean_scale
    [gate]     tau, rho_max, window
    [upsample] gamma
    [run]      modes, master_seed, renoise_seed, baseline_steps
    [cost]     a, c
    [[schedule.<mode>]]  level, steps, t_start, t_end, gated, renoise
"""

import hashlib
import json
from dataclasses import dataclass, field, replace

import tomli

from .cost_model import ModelCost
from .errors import ConfigurationError, FrescoError
from .schedule import Stage, StageSchedule, baseline_schedule, bottleneck_schedule, fresco_schedule
from .toy_diffusion import BASELINE, BOTTLENECK, FRESCO, MODE_ALIASES, RUN_MODES, resolve_mode
from .variance_gate import GateConfig

MAX_SIDE = 64
MAX_CHANNELS = 8


class ConfigFileNotFound(FrescoError, FileNotFoundError):
    exit_code = 3


class ConfigSyntaxError(FrescoError, ValueError):
    exit_code = 4


class ConfigValueError(ConfigurationError):
    exit_code = 5


_SCHEMA = {
    "canvas": {"height": int, "width": int, "channels": int, "max_level": int},
    "prior": {"correlation_length": float, "prior_seed": int, "mean_scale": float},
    "gate": {"tau": float, "rho_max": float, "window": int},
    "upsample": {"gamma": float},
    "run": {"modes": list, "master_seed": int, "renoise_seed": int, "baseline_steps": int},
    "cost": {"a": float, "c": float},
    "schedule": {name: list for name in (*MODE_ALIASES, *RUN_MODES)},
}
_STAGE_KEYS = {"level": int, "steps": int, "t_start": float, "t_end": float, "gated": bool, "renoise": str}


@dataclass(frozen=True)
class ExperimentConfig:
    height: int = 32
    width: int = 32
    channels: int = 1
    max_level: int = 2
    correlation_length: float = 0.0
    prior_seed: int = 0
    mean_scale: float = 0.0
    gate: GateConfig = field(default_factory=GateConfig)
    gamma: float = 1.0
    modes: tuple = (BASELINE, BOTTLENECK, FRESCO)
    master_seed: int = 7
    renoise_seed: int = 0
    baseline_steps: int = 50
    cost: ModelCost = field(default_factory=ModelCost.dit_like)
    schedules: dict = field(default_factory=dict)

    @property
    def dims(self):
        return (self.height, self.width, self.channels)

    def schedule_for(self, mode):
        mode = resolve_mode(mode)
        if mode in self.schedules:
            return self.schedules[mode]
        if mode == BASELINE:
            return baseline_schedule(self.baseline_steps)
        if mode == FRESCO:
            return fresco_schedule(self.max_level)
        return bottleneck_schedule(self.max_level)

    def to_dict(self):
        return {
            "canvas": {"height": self.height, "width": self.width, "channels": self.channels, "max_level": self.max_level},
            "prior": {"correlation_length": self.correlation_length, "prior_seed": self.prior_seed, "mean_scale": self.mean_scale},
            "gate": {"tau": self.gate.tau, "rho_max": self.gate.rho_max, "window": self.gate.window},
            "upsample": {"gamma": self.gamma},
            "run": {"modes": list(self.modes), "master_seed": self.master_seed, "renoise_seed": self.renoise_seed,
                    "baseline_steps": self.baseline_steps},
            "cost": {"a": self.cost.a, "c": self.cost.c},
            "schedule": {m: self.schedule_for(m).to_list() for m in (BASELINE, FRESCO, BOTTLENECK)},
        }

    def digest(self):
        """SHA-256 of the resolved configuration, excluding run-time overrides of the seed."""
        data = self.to_dict()
        data["run"].pop("master_seed")
        text = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def with_overrides(self, **kwargs):
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})


def _typed(value, kind, key):
    if kind is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, bool):
        raise ConfigValueError(f"{key}: expected integer, got boolean")
    if not isinstance(value, kind):
        raise ConfigValueError(f"{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _section(data, name):
    raw = data.get(name, {})
    if not isinstance(raw, dict):
        raise ConfigValueError(f"{name}: expected a table")
    schema = _SCHEMA[name]
    out = {}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigValueError(f"{name}.{key}: unknown key")
        if name == "schedule":
            out[key] = value
        else:
            out[key] = _typed(value, schema[key], f"{name}.{key}")
    return out


def _parse_schedule(mode, items):
    if not isinstance(items, list) or not items:
        raise ConfigValueError(f"schedule.{mode}: expected a non-empty array of stage tables")
    stages = []
    for i, item in enumerate(items):
        key = f"schedule.{mode}[{i}]"
        if not isinstance(item, dict):
            raise ConfigValueError(f"{key}: expected a table")
        kwargs = {}
        for k, v in item.items():
            if k not in _STAGE_KEYS:
                raise ConfigValueError(f"{key}.{k}: unknown key")
            kwargs[k] = _typed(v, _STAGE_KEYS[k], f"{key}.{k}")
        for required in ("level", "steps", "t_start", "t_end"):
            if required not in kwargs:
                raise ConfigValueError(f"{key}.{required}: missing")
        try:
            stages.append(Stage(**kwargs))
        except ConfigurationError as exc:
            raise ConfigValueError(f"{key}: {exc}") from exc
    try:
        return StageSchedule(tuple(stages))
    except ConfigurationError as exc:
        raise ConfigValueError(f"schedule.{mode}: {exc}") from exc


def config_from_dict(data):
    unknown = set(data) - set(_SCHEMA)
    if unknown:
        raise ConfigValueError(f"{sorted(unknown)[0]}: unknown section")
    canvas, prior, gate, up, run, cost, sched = (_section(data, n) for n in _SCHEMA)
    kwargs = {}
    kwargs.update(canvas)
    kwargs.update(prior)
    if "gamma" in up:
        kwargs["gamma"] = up["gamma"]
    for k in ("master_seed", "renoise_seed", "baseline_steps"):
        if k in run:
            kwargs[k] = run[k]
    if "modes" in run:
        try:
            kwargs["modes"] = tuple(resolve_mode(m) for m in run["modes"])
        except (ConfigurationError, TypeError) as exc:
            raise ConfigValueError(f"run.modes: {exc}") from exc
    try:
        defaults = GateConfig()
        kwargs["gate"] = GateConfig(gate.get("tau", defaults.tau), gate.get("rho_max", defaults.rho_max),
                                    gate.get("window", defaults.window))
    except ConfigurationError as exc:
        raise ConfigValueError(str(exc)) from exc
    if cost:
        base = ModelCost.dit_like()
        try:
            kwargs["cost"] = ModelCost(cost.get("a", base.a), cost.get("c", base.c))
        except ConfigurationError as exc:
            raise ConfigValueError(f"cost: {exc}") from exc
    schedules = {}
    for m, items in sched.items():
        mode = resolve_mode(m)
        if mode in schedules:
            raise ConfigValueError(f"schedule.{m}: {mode} schedule given twice")
        schedules[mode] = _parse_schedule(m, items)
    kwargs["schedules"] = schedules
    cfg = ExperimentConfig(**kwargs)
    validate_config(cfg)
    return cfg


def validate_config(cfg):
    for key in ("height", "width"):
        v = getattr(cfg, key)
        if not 1 <= v <= MAX_SIDE:
            raise ConfigValueError(f"canvas.{key}: must be in [1, {MAX_SIDE}], got {v}")
    if not 1 <= cfg.channels <= MAX_CHANNELS:
        raise ConfigValueError(f"canvas.channels: must be in [1, {MAX_CHANNELS}], got {cfg.channels}")
    if cfg.max_level < 0:
        raise ConfigValueError("canvas.max_level: must be >= 0")
    size = 1 << cfg.max_level
    if cfg.height % size or cfg.width % size:
        raise ConfigValueError(
            f"canvas.max_level: {cfg.height}x{cfg.width} is not divisible by 2^{cfg.max_level} = {size}"
        )
    if cfg.correlation_length < 0:
        raise ConfigValueError("prior.correlation_length: must be >= 0")
    if cfg.gamma < 0:
        raise ConfigValueError("upsample.gamma: must be >= 0")
    if cfg.baseline_steps < 1:
        raise ConfigValueError("run.baseline_steps: must be >= 1")
    for name in ("master_seed", "renoise_seed", "prior_seed"):
        if not 0 <= getattr(cfg, name) < 2**64:
            raise ConfigValueError(f"{name}: must be an unsigned 64-bit integer")
    for mode in (BASELINE, FRESCO, BOTTLENECK):
        sched = cfg.schedule_for(mode)
        if sched.max_level > cfg.max_level:
            raise ConfigValueError(f"schedule.{mode}: level {sched.max_level} exceeds canvas.max_level {cfg.max_level}")
    return cfg


def parse_config(path):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except FileNotFoundError as exc:
        raise ConfigFileNotFound(f"{path}: no such config file") from exc
    try:
        data = tomli.loads(raw.decode("utf-8"))
    except (tomli.TOMLDecodeError, UnicodeDecodeError) as exc:
        raise ConfigSyntaxError(f"{path}: {exc}") from exc
    return config_from_dict(data)
