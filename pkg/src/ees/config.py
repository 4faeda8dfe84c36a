"""Layered run configuration.

Resolution order, lowest to highest precedence:

    built-in defaults  <  config file  <  command-line flags  <  EES_* environment

The config file is flat ``key = value`` text; ``#`` starts a comment.
Environment variables use the upper-cased key with the ``EES_`` prefix
(``EES_THRESHOLD=0.3``). Thresholds accept a scalar or a comma list, one
value per level.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Mapping

from .errors import ConfigError

ENV_PREFIX = "EES_"

DEFAULTS: dict[str, Any] = {
    "layers": 3,
    "threshold": "0.4",
    "window_cap": 32,
    "predictor": "mean_pool_identity",
    "checkpoint": None,
    "essential": "max_error",
    "emit_embeddings": False,
    "seed": 0,
    "hidden": 16,
    "learning_rate": 1e-2,
}

_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def parse_config_file(path: str | Path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.strip()!r}")
        key, _, value = stripped.partition("=")
        values[key.strip().lower()] = value.strip()
    return values


def _coerce(key: str, value: Any) -> Any:
    if value is None:
        return None
    template = DEFAULTS.get(key)
    if isinstance(template, bool):
        if isinstance(value, bool):
            return value
        text = str(value).strip().lower()
        if text in _BOOL_TRUE:
            return True
        if text in _BOOL_FALSE:
            return False
        raise ConfigError(f"config key {key!r}: cannot parse boolean from {value!r}")
    if isinstance(template, int) and not isinstance(template, bool):
        try:
            return int(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: cannot parse integer from {value!r}") from exc
    if isinstance(template, float):
        try:
            return float(value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config key {key!r}: cannot parse float from {value!r}") from exc
    return value


def resolve_config(
    *,
    config_file: str | Path | None = None,
    flags: Mapping[str, Any] | None = None,
    env: Mapping[str, str] | None = None,
) -> dict[str, Any]:
    """Merge the four layers into one flat dict (see module docstring)."""
    merged: dict[str, Any] = dict(DEFAULTS)
    if config_file is not None:
        for key, value in parse_config_file(config_file).items():
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r} in {config_file}")
            merged[key] = _coerce(key, value)
    if flags:
        for key, value in flags.items():
            if key in DEFAULTS and value is not None:
                merged[key] = _coerce(key, value)
    environment = os.environ if env is None else env
    for key in DEFAULTS:
        env_key = ENV_PREFIX + key.upper()
        if env_key in environment:
            merged[key] = _coerce(key, environment[env_key])
    return merged


def parse_thresholds(raw: str | float, layers: int) -> list[float]:
    """A scalar applies to every level; a comma list must match the level count."""
    if isinstance(raw, (int, float)):
        return [float(raw)] * layers
    parts = [p.strip() for p in str(raw).split(",") if p.strip()]
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"cannot parse thresholds from {raw!r}") from exc
    if len(values) == 1:
        return values * layers
    if len(values) != layers:
        raise ConfigError(f"expected 1 or {layers} thresholds, got {len(values)}")
    return values
