"""Harness configuration: defaults, TOML files, and flag overrides.

A config file holds optional [vehicle], [lqr], [chain], [idm], [sim],
[metrics], and [remote] tables plus top-level run defaults (planner, mode,
scenarios, out, seed, jobs, endpoint, agent_cap). Unknown tables or keys are
rejected. Command-line flags win over the file; the file wins over built-in
defaults.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .chain import ChainConfig
from .dynamics import LqrConfig, VehicleParams
from .metrics import MetricParams
from .simulate import SimMode, SimulationConfig
from .traffic import IdmParams


class ConfigError(ValueError):
    """Raised for malformed config files or overrides."""


@dataclass(frozen=True)
class RemoteSettings:
    temperature: float = 0.0
    top_p: float = 0.75
    max_tokens: int = 4096
    timeout: float = 10.0


@dataclass(frozen=True)
class Settings:
    vehicle: VehicleParams = VehicleParams()
    lqr: LqrConfig = LqrConfig()
    chain: ChainConfig = ChainConfig()
    idm: IdmParams = IdmParams()
    sim: SimulationConfig = SimulationConfig()
    metrics: MetricParams = MetricParams()
    remote: RemoteSettings = RemoteSettings()
    agent_cap: int = 32


_SECTION_FIELDS = {
    "vehicle": "vehicle",
    "lqr": "lqr",
    "chain": "chain",
    "idm": "idm",
    "sim": "sim",
    "metrics": "metrics",
    "remote": "remote",
}
_RUN_KEYS = {"planner", "mode", "scenarios", "out", "seed", "jobs", "endpoint", "agent_cap"}


def _coerce(current: Any, value: Any, path: str) -> Any:
    """Coerce a TOML value onto the type of the current field value."""
    if isinstance(current, enum.Enum):
        try:
            return type(current)(value)
        except ValueError:
            raise ConfigError(
                f"{path}: '{value}' is not one of {sorted(m.value for m in type(current))}"
            ) from None
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected a boolean")
        return value
    if isinstance(current, float) or current is None:
        if value is None:
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        return float(value)
    if isinstance(current, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer")
        return value
    if isinstance(current, str):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
        return value
    raise ConfigError(f"{path}: unsupported override")


def _apply_table(instance: Any, table: Mapping[str, Any], path: str) -> Any:
    names = {f.name for f in dataclasses.fields(instance)}
    updates = {}
    for key, value in table.items():
        if key not in names:
            raise ConfigError(f"{path}.{key}: unknown key")
        updates[key] = _coerce(getattr(instance, key), value, f"{path}.{key}")
    return replace(instance, **updates)


def apply_settings(settings: Settings, data: Mapping[str, Any], source: str) -> tuple[Settings, dict]:
    """Merge a decoded config mapping into settings; returns run defaults too."""
    run: dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTION_FIELDS:
            if not isinstance(value, Mapping):
                raise ConfigError(f"{source}.{key}: expected a table")
            current = getattr(settings, _SECTION_FIELDS[key])
            settings = replace(
                settings,
                **{_SECTION_FIELDS[key]: _apply_table(current, value, f"{source}.{key}")},
            )
        elif key in _RUN_KEYS:
            if key == "agent_cap":
                settings = replace(
                    settings, agent_cap=_coerce(settings.agent_cap, value, f"{source}.agent_cap")
                )
            else:
                run[key] = value
        else:
            raise ConfigError(f"{source}.{key}: unknown key")
    return settings, run


def load_settings(path: str | Path | None) -> tuple[Settings, dict]:
    """Settings plus run defaults from a TOML file (defaults when no file)."""
    settings = Settings()
    if path is None:
        return settings, {}
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML ({exc})") from exc
    return apply_settings(settings, data, path.name)


@dataclass(frozen=True)
class HarnessConfig:
    """One resolved run: where the scenarios are, what to do with them."""

    scenario_dir: Path
    output_dir: Path
    planner: str
    mode: SimMode
    seed: int = 0
    jobs: int = 1
    endpoint: str | None = None
    settings: Settings = Settings()
