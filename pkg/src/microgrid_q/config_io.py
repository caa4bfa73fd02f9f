"""Load and save GridConfig as TOML.

Keys are exactly the GridConfig field names. ``demand_transition`` may be a
list of rows or a flat row-major list. Omitted keys take the defaults of the
two-microgrid setup (demands 8/10/12, capacities 5, Poisson mean 2, gamma 0.9).
"""

from __future__ import annotations

import dataclasses
import math
import sys
from pathlib import Path

from .core import ConfigError, GridConfig, validate_config

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FIELDS = tuple(f.name for f in dataclasses.fields(GridConfig))


def config_from_mapping(data: dict) -> GridConfig:
    unknown = sorted(set(data) - set(FIELDS))
    if unknown:
        raise ConfigError([f"unknown key {k!r}" for k in unknown])
    data = dict(data)
    matrix = data.get("demand_transition")
    if matrix is not None and matrix and not isinstance(matrix[0], (list, tuple)):
        n = math.isqrt(len(matrix))
        if n * n != len(matrix):
            raise ConfigError([f"flat demand_transition has {len(matrix)} entries, not a square"])
        data["demand_transition"] = [matrix[i * n:(i + 1) * n] for i in range(n)]
    try:
        config = GridConfig(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError([str(exc)]) from exc
    return validate_config(config)


def load_config(path: str | Path) -> GridConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    return config_from_mapping(data)


def dumps_config(config: GridConfig) -> str:
    rows = ",\n    ".join("[" + ", ".join(repr(float(p)) for p in row) + "]"
                          for row in config.demand_transition)
    return "\n".join([
        f"demand_levels = [{', '.join(str(int(x)) for x in config.demand_levels)}]",
        f"demand_transition = [\n    {rows},\n]",
        f"solar_capacity = {int(config.solar_capacity)}",
        f"wind_capacity = {int(config.wind_capacity)}",
        f"max_prod = {int(config.max_prod)}",
        f"gen_mean_solar = {float(config.gen_mean_solar)!r}",
        f"gen_mean_wind = {float(config.gen_mean_wind)!r}",
        f"gamma = {float(config.gamma)!r}",
        f"cost_weight_c = {float(config.cost_weight_c)!r}",
        f'reward_mode = "{config.reward_mode.value}"',
        "",
    ])


def save_config(config: GridConfig, path: str | Path) -> None:
    Path(path).write_text(dumps_config(config))
