"""
Tracker configuration.

Precedence, lowest first: built-in defaults, environment
(``FIXCAM_<SECTION>__<KEY>``), TOML config file, CLI flags.
"""

import os
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict, TomlConfigSettingsSource

from .errors import ConfigError
from .tracking.association import AssociationWeights
from .tracking.fingerprint import FingerprintConfig
from .tracking.kalman import NoiseConfig

ENV_PREFIX = "FIXCAM_"


class LifecycleConfig(BaseModel):
    """Track birth/death and output policy."""

    model_config = ConfigDict(frozen=True, allow_inf_nan=False, extra="forbid")

    timeout: int = Field(default=30, gt=0, description="Frames without update before deletion (T)")
    min_confidence: float = Field(default=0.0, description="Detections below are dropped")
    report_coasting: bool = Field(default=True, description="Report predicted-only tracks")


class TrackerConfig(BaseSettings):
    """All tracker settings, one section per module."""

    model_config = SettingsConfigDict(
        env_prefix=ENV_PREFIX,
        env_nested_delimiter="__",
        extra="forbid",
        frozen=True,
    )

    tracker: LifecycleConfig = Field(default_factory=LifecycleConfig)
    association: AssociationWeights = Field(default_factory=AssociationWeights)
    fingerprint: FingerprintConfig = Field(default_factory=FingerprintConfig)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)


class ConfigAudit(BaseModel):
    """Where each effective setting came from."""

    sources: dict[str, str] = Field(default_factory=dict)

    def keys_from(self, source: str) -> list[str]:
        return sorted(k for k, v in self.sources.items() if v == source)


# CLI flag -> dotted config key
CLI_KEYS: dict[str, str] = {
    "alpha": "association.alpha",
    "beta": "association.beta",
    "gate": "association.gate",
    "timeout": "tracker.timeout",
    "buffer": "fingerprint.buffer_frames",
    "min_conf": "tracker.min_confidence",
}


def load_config(
    path: Path | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> tuple[TrackerConfig, ConfigAudit]:
    """
    Build the effective configuration.

    Args:
        path: Optional TOML config file
        overrides: Dotted keys (``"association.alpha"``) to values, highest precedence

    Raises:
        ConfigError: unreadable file, unknown key or out-of-range value
    """
    file_values: dict[str, Any] = {}
    if path is not None:
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        try:
            file_values = TomlConfigSettingsSource(TrackerConfig, toml_file=path)()
        except Exception as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from exc

    cli_values: dict[str, Any] = {}
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set_dotted(cli_values, dotted, value)

    merged = _deep_merge(file_values, cli_values)
    try:
        config = TrackerConfig(**merged)
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"invalid configuration: {problems}") from exc

    return config, _audit(file_values, cli_values)


def _set_dotted(target: dict[str, Any], dotted: str, value: Any) -> None:
    *parents, leaf = dotted.split(".")
    node = target
    for part in parents:
        node = node.setdefault(part, {})
    node[leaf] = value


def _deep_merge(base: Mapping[str, Any], top: Mapping[str, Any]) -> dict[str, Any]:
    out = dict(base)
    for key, value in top.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), Mapping):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def _flatten(values: Mapping[str, Any], prefix: str = "") -> set[str]:
    keys = set()
    for key, value in values.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, Mapping):
            keys |= _flatten(value, f"{dotted}.")
        else:
            keys.add(dotted)
    return keys


def _audit(file_values: Mapping[str, Any], cli_values: Mapping[str, Any]) -> ConfigAudit:
    from_file = _flatten(file_values)
    from_cli = _flatten(cli_values)
    env = {k.upper() for k in os.environ}
    sources: dict[str, str] = {}
    for section, info in TrackerConfig.model_fields.items():
        model = info.annotation
        assert model is not None and issubclass(model, BaseModel)
        for leaf in model.model_fields:
            dotted = f"{section}.{leaf}"
            if dotted in from_cli:
                sources[dotted] = "cli"
            elif dotted in from_file:
                sources[dotted] = "file"
            elif f"{ENV_PREFIX}{section}__{leaf}".upper() in env:
                sources[dotted] = "env"
            else:
                sources[dotted] = "default"
    return ConfigAudit(sources=sources)
