"""Backend selection for the simulation hot loops.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
pure-Python ``_pykernels`` module is used. Set ``MICROGRID_Q_BACKEND=python``
to force the fallback. Both produce bit-identical results for the same seed.
"""

from __future__ import annotations

import os
from types import ModuleType
from typing import NamedTuple

import numpy as np

from . import _pykernels
from .core import GridConfig, reward_table
from .rng import cumulative_row, poisson_cdf_table

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def get_backend(name: str | None = None) -> ModuleType:
    name = name or os.environ.get("MICROGRID_Q_BACKEND", "auto")
    if name == "python":
        return _pykernels
    if name in ("cython", "c"):
        if _ckernels is None:
            raise ImportError("compiled kernels are not built; run `pip install -e .`")
        return _ckernels
    if name == "auto":
        return _ckernels if _ckernels is not None else _pykernels
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _ckernels is not None else [])


class KernelModel(NamedTuple):
    """Flat arrays describing one config, shared by every backend."""

    sc: int
    wc: int
    mp: int
    demand_levels: np.ndarray
    demand_cum: np.ndarray
    demand_fallback: np.ndarray
    solar_cdf: np.ndarray
    wind_cdf: np.ndarray
    rewards: np.ndarray
    gamma: float


def kernel_model(config: GridConfig) -> KernelModel:
    rows = [cumulative_row(row) for row in config.demand_transition]
    return KernelModel(
        sc=int(config.solar_capacity),
        wc=int(config.wind_capacity),
        mp=int(config.max_prod),
        demand_levels=np.asarray(config.demand_levels, dtype=np.int64),
        demand_cum=np.ascontiguousarray([cum for cum, _ in rows], dtype=float),
        demand_fallback=np.asarray([fb for _, fb in rows], dtype=np.int64),
        solar_cdf=poisson_cdf_table(config.gen_mean_solar),
        wind_cdf=poisson_cdf_table(config.gen_mean_wind),
        rewards=np.ascontiguousarray(reward_table(config)),
        gamma=float(config.gamma),
    )
