from dataclasses import fields, replace
from typing import Any, Dict, Optional

import yaml

from fddkit.engine.channel_model import PathParameters
from fddkit.engine.errors import ConfigError, FddkitError
from fddkit.engine.scenario_harness import (
    ArraySettings,
    DownlinkSettings,
    SageSettings,
    ScenarioConfig,
    SweepSettings,
)
from fddkit.utilities.messenger import Messenger
from fddkit.utilities.path_resolver import PathResolver

SECTIONS = {
    "array": ArraySettings,
    "sage": SageSettings,
    "downlink": DownlinkSettings,
    "sweep": SweepSettings,
}
PATH_KEYS = ("gain", "delay", "azimuth", "elevation")
OPTIONAL_NUMBERS = {"num_pilots", "num_clusters", "spacing", "num_paths", "snr", "min_residual_reduction"}
INTEGER_KEYS = {
    "num_paths", "num_pilots", "num_clusters", "seed", "rows", "cols", "max_iterations",
    "refinement_levels", "constellation_order", "freq_steps", "trials", "drops", "cdf_points",
}


class ConfigLoader:
    """Reads YAML scenario documents into :class:`ScenarioConfig`; unknown keys are errors"""

    def __init__(self):
        self.messenger = Messenger()

    def load(self, name_or_path: Optional[str] = None) -> ScenarioConfig:
        """Load a config file or a preset by name; the user config or the default preset when empty"""
        path = PathResolver.resolve_config(name_or_path)
        if path is None:
            presets = ", ".join(PathResolver.list_presets()) or "none"
            raise ConfigError(f"No configuration file or preset named '{name_or_path}' (presets: {presets})")
        self.messenger.note(f"Using configuration {path}")
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
        return self.loads(text, source=path)

    def loads(self, text: str, source: str = "<string>") -> ScenarioConfig:
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as e:
            raise ConfigError(f"{source} is not valid YAML: {e}") from e
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{source} must contain a mapping at the top level")
        return self.parse(data)

    def parse(self, data: Dict[str, Any]) -> ScenarioConfig:
        values = self._convert(ScenarioConfig, data, "")
        try:
            return ScenarioConfig(**values)
        except (FddkitError, TypeError) as e:
            raise ConfigError(str(e)) from e

    def _convert(self, target, data: Dict[str, Any], prefix: str) -> Dict[str, Any]:
        if not isinstance(data, dict):
            raise ConfigError(f"'{prefix.rstrip('.')}' must be a mapping")
        known = {f.name for f in fields(target)}
        unknown = sorted(set(data) - known)
        if unknown:
            names = ", ".join(f"{prefix}{key}" for key in unknown)
            raise ConfigError(f"Unknown configuration key(s): {names}")
        values: Dict[str, Any] = {}
        for key, raw in data.items():
            path = f"{prefix}{key}"
            if key in SECTIONS and target is ScenarioConfig:
                section = SECTIONS[key]
                try:
                    values[key] = section(**self._convert(section, raw or {}, f"{path}."))
                except FddkitError as e:
                    raise ConfigError(f"{path}: {e}") from e
            elif key == "paths":
                values[key] = self._paths(raw, path)
            else:
                values[key] = self._scalar(key, raw, path)
        return values

    def _scalar(self, key: str, raw: Any, path: str) -> Any:
        if raw is None:
            if key in OPTIONAL_NUMBERS:
                return None
            raise ConfigError(f"'{path}' must not be empty")
        try:
            if key == "generator":
                return str(raw)
            if key == "estimators":
                items = raw.split(",") if isinstance(raw, str) else list(raw)
                return tuple(str(item).strip().lower() for item in items if str(item).strip())
            if key == "antennas":
                return tuple((int(rows), int(cols)) for rows, cols in raw)
            if key == "snrs":
                return tuple(float(snr) for snr in raw)
            if key in INTEGER_KEYS:
                if isinstance(raw, float) and not raw.is_integer():
                    raise ValueError("expected an integer")
                return int(raw)
            return float(raw)
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid value for '{path}': {raw!r} ({e})") from e

    def _paths(self, raw: Any, path: str):
        if not isinstance(raw, list):
            raise ConfigError(f"'{path}' must be a list of paths")
        paths = []
        for index, item in enumerate(raw):
            item_path = f"{path}[{index}]"
            if not isinstance(item, dict):
                raise ConfigError(f"'{item_path}' must be a mapping")
            unknown = sorted(set(item) - set(PATH_KEYS))
            if unknown:
                raise ConfigError(f"Unknown configuration key(s): {', '.join(f'{item_path}.{k}' for k in unknown)}")
            missing = [key for key in PATH_KEYS if key not in item]
            if missing:
                raise ConfigError(f"'{item_path}' is missing {', '.join(missing)}")
            try:
                gain = item["gain"]
                gain = complex(float(gain[0]), float(gain[1])) if isinstance(gain, (list, tuple)) else complex(gain)
                paths.append(PathParameters(gain, float(item["delay"]), float(item["azimuth"]),
                                            float(item["elevation"])))
            except (TypeError, ValueError, IndexError) as e:
                raise ConfigError(f"Invalid path '{item_path}': {e}") from e
        return tuple(paths)

    @staticmethod
    def override(config: ScenarioConfig, seed: Optional[int] = None, trials: Optional[int] = None,
                 freq_min: Optional[float] = None, freq_max: Optional[float] = None,
                 freq_steps: Optional[int] = None, estimators: Optional[str] = None) -> ScenarioConfig:
        """Apply command-line flags on top of a loaded configuration"""
        sweep_changes = {
            key: value for key, value in (
                ("trials", trials), ("freq_min", freq_min), ("freq_max", freq_max), ("freq_steps", freq_steps),
            ) if value is not None
        }
        if estimators is not None:
            sweep_changes["estimators"] = tuple(
                item.strip().lower() for item in estimators.split(",") if item.strip())
        try:
            updated = replace(config, sweep=replace(config.sweep, **sweep_changes))
            if seed is not None:
                updated = replace(updated, seed=seed)
            return updated
        except FddkitError as e:
            raise ConfigError(str(e)) from e


__all__ = ["ConfigLoader"]
