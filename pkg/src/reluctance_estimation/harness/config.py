"""Flat ``section.key = value`` experiment configuration.

Lines starting with ``#`` and blank lines are ignored.  A config file only
needs the keys it changes; everything else comes from the base preset.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from pathlib import Path

from ..actuator_sim import ActuatorParams, DriveWaveform, NoiseSpec
from ..errors import ConfigurationError
from ..filter_core import VALVE_FILTER, FilterConfig
from ..integral_estimator import IntegralConfig
from ..observability import DEFAULT_CAP, DEFAULT_REL_TOL

PRESETS = ("valve", "relay")

_INT_KEYS = {"actuator.turns", "waveform.n_cycles", "obs.cap"}


@dataclass(frozen=True)
class ExperimentConfig:
    actuator: ActuatorParams
    filter: FilterConfig
    waveform: DriveWaveform
    noise: NoiseSpec
    seeds: tuple = (0,)
    split_time: float = 20e-3
    dt_sim: float = 1e-6
    lambda0: float = 0.0
    obs_rel_tol: float = DEFAULT_REL_TOL
    obs_cap: int = DEFAULT_CAP
    name: str = "custom"

    def __post_init__(self):
        if len(self.seeds) < 1:
            raise ConfigurationError("at least one seed is required")
        if not 0.0 < self.split_time <= self.waveform.duration:
            raise ConfigurationError(
                f"split_time {self.split_time!r} outside the simulated duration {self.waveform.duration!r}")
        if not self.dt_sim > 0:
            raise ConfigurationError(f"sim.dt must be > 0, got {self.dt_sim!r}")
        if not 0.0 < self.obs_rel_tol < 1.0 or self.obs_cap < 3:
            raise ConfigurationError("obs.rel_tol must be in (0, 1) and obs.cap >= 3")
        self.waveform.samples_per_period(self.filter.delta)

    @property
    def delta(self) -> float:
        return self.filter.delta

    @property
    def integral(self) -> IntegralConfig:
        return IntegralConfig.from_filter(self.filter, self.lambda0)


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Key/value pairs of a config file, values still as strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigurationError(f"{source}:{lineno}: empty key or value")
        if key in out:
            raise ConfigurationError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def parse_seeds(text: str) -> tuple:
    """``"0-19"``, ``"3"`` or ``"1, 4, 9"`` (non-negative integers)."""
    seeds = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                lo, hi = (int(x) for x in part.split("-", 1))
                if hi < lo:
                    raise ConfigurationError(f"empty seed range {part!r}")
                seeds.extend(range(lo, hi + 1))
            else:
                seeds.append(int(part))
    except ValueError:
        raise ConfigurationError(f"experiment.seeds: cannot parse {text!r}") from None
    if not seeds:
        raise ConfigurationError("experiment.seeds is empty")
    return tuple(seeds)


def _number(key, value):
    try:
        x = int(value) if key in _INT_KEYS else float(value)
    except ValueError:
        raise ConfigurationError(f"{key}: not a number: {value!r}") from None
    if isinstance(x, float) and not math.isfinite(x):
        raise ConfigurationError(f"{key}: must be finite, got {value!r}")
    return x


def _section(dc, prefix, values):
    names = {f.name for f in fields(dc)}
    changes = {}
    for key, value in values.items():
        if key.startswith(prefix + "."):
            name = key[len(prefix) + 1:]
            if name not in names:
                raise ConfigurationError(f"unknown key {key!r}")
            changes[name] = _number(key, value)
    return replace(dc, **changes) if changes else dc


def apply_overrides(base: ExperimentConfig, values: dict) -> ExperimentConfig:
    """Config with ``values`` (from :func:`parse_config_text`) layered on ``base``."""
    known = {"actuator", "filter", "waveform", "noise", "sim", "integral", "experiment", "obs"}
    for key in values:
        if key.split(".", 1)[0] not in known or "." not in key:
            raise ConfigurationError(f"unknown key {key!r}")
    scalars = {
        "sim.dt": "dt_sim",
        "integral.lambda0": "lambda0",
        "experiment.split_time": "split_time",
        "obs.rel_tol": "obs_rel_tol",
        "obs.cap": "obs_cap",
    }
    changes = {}
    for key, value in values.items():
        if key in scalars:
            changes[scalars[key]] = _number(key, value)
        elif key == "experiment.seeds":
            changes["seeds"] = parse_seeds(value)
        elif key == "experiment.name":
            changes["name"] = value
        elif key.split(".", 1)[0] in ("sim", "integral", "experiment", "obs"):
            raise ConfigurationError(f"unknown key {key!r}")
    try:
        return replace(
            base,
            actuator=_section(base.actuator, "actuator", values),
            filter=_section(base.filter, "filter", values),
            waveform=_section(base.waveform, "waveform", values),
            noise=_section(base.noise, "noise", values),
            **changes,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from None


_DEFAULT = ExperimentConfig(ActuatorParams(), VALVE_FILTER, DriveWaveform(), NoiseSpec())


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("reluctance_estimation").joinpath("presets").joinpath(f"{name}.cfg").read_text("utf-8")
    return apply_overrides(replace(_DEFAULT, name=name), parse_config_text(text, f"{name}.cfg"))


def load_config(path=None, preset: str = "valve") -> ExperimentConfig:
    """Preset, optionally overridden by a config file."""
    cfg = load_preset(preset)
    if path is None:
        return cfg
    path = Path(path)
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {str(path)!r}: {exc.strerror}") from None
    return apply_overrides(cfg, parse_config_text(text, str(path)))


def to_text(cfg: ExperimentConfig) -> str:
    """Round-trippable config text (every key, floats via repr)."""
    lines = [f"experiment.name = {cfg.name}"]
    for prefix, dc in (("actuator", cfg.actuator), ("filter", cfg.filter),
                       ("waveform", cfg.waveform), ("noise", cfg.noise)):
        for key, value in asdict(dc).items():
            lines.append(f"{prefix}.{key} = {value!r}")
    lines += [
        f"sim.dt = {cfg.dt_sim!r}",
        f"integral.lambda0 = {cfg.lambda0!r}",
        f"experiment.seeds = {', '.join(str(s) for s in cfg.seeds)}",
        f"experiment.split_time = {cfg.split_time!r}",
        f"obs.rel_tol = {cfg.obs_rel_tol!r}",
        f"obs.cap = {cfg.obs_cap!r}",
    ]
    return "\n".join(lines) + "\n"


def with_seeds(cfg: ExperimentConfig, seeds) -> ExperimentConfig:
    return replace(cfg, seeds=tuple(int(s) for s in seeds))


__all__ = [
    "ExperimentConfig",
    "PRESETS",
    "parse_config_text",
    "parse_seeds",
    "apply_overrides",
    "load_preset",
    "load_config",
    "to_text",
    "with_seeds",
]
