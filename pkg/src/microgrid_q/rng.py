"""Seeded random streams shared by the Python and compiled backends.

Every stream is a numpy ``PCG64`` bit generator. Both backends consume raw
64-bit outputs from the same generator object, so a stream advanced partly in
Python and partly in the extension stays on one well-defined sequence.

Conversions are fixed here rather than delegated to numpy samplers:

* uniform double: ``(x >> 11) * 2**-53`` on a raw 64-bit output ``x``
* bounded integer in ``[0, n)``: ``floor(u * n)`` for one uniform ``u``
* categorical / Poisson: inversion against a precomputed cumulative table,
  one uniform per draw

Child seeds are derived from a master seed with ``numpy.random.SeedSequence``
using the key as ``spawn_key``, which is platform independent.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

ALGORITHM_ID = "PCG64"
_TWO_NEG_53 = 1.0 / 9007199254740992.0
SEED_MASK = (1 << 64) - 1


def derive_seed(master: int, *key: int) -> int:
    """Split a 64-bit child seed off ``master`` for the given integer key."""
    seq = np.random.SeedSequence(int(master) & SEED_MASK, spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(1, np.uint64)[0])


class RngStream:
    """Single-owner random stream; do not share one stream between workers."""

    algorithm_id = ALGORITHM_ID

    def __init__(self, seed: int):
        self.seed = int(seed) & SEED_MASK
        self.bit_generator = np.random.PCG64(self.seed)
        self._raw = self.bit_generator.random_raw

    def spawn(self, *key: int) -> RngStream:
        return RngStream(derive_seed(self.seed, *key))

    def next_uint64(self) -> int:
        return self._raw()

    def next_double(self) -> float:
        return (self._raw() >> 11) * _TWO_NEG_53

    def next_below(self, n: int) -> int:
        return int(self.next_double() * n)

    def state(self) -> dict:
        return self.bit_generator.state


def cumulative_row(row: Sequence[float]) -> tuple[np.ndarray, int]:
    """Running sums of a probability row plus the fallback index.

    The fallback (last index with positive mass) absorbs uniforms that land
    past the final partial sum because of rounding.
    """
    cum = np.empty(len(row))
    total = 0.0
    for j, p in enumerate(row):
        total += float(p)
        cum[j] = total
    positive = [j for j, p in enumerate(row) if p > 0]
    return cum, positive[-1] if positive else len(row) - 1


def poisson_cdf_table(mean: float) -> np.ndarray:
    """Cumulative Poisson probabilities F(0), F(1), ... until F reaches 1.

    The table stops once the pmf underflows or the sum stops changing; a
    uniform beyond the last entry maps to ``len(table)``.
    """
    if mean < 0:
        raise ValueError("Poisson mean must be nonnegative")
    if mean == 0:
        return np.array([1.0])
    pmf = math.exp(-mean)
    total = pmf
    values = [total]
    k = 0
    while total < 1.0 and k < 10_000:
        k += 1
        pmf = pmf * mean / k
        new_total = total + pmf
        if new_total == total and k > mean:
            break
        total = new_total
        values.append(total)
    return np.array(values)


def invert_cdf(u: float, cum: np.ndarray, fallback: int) -> int:
    for j in range(len(cum)):
        if u < cum[j]:
            return j
    return fallback
