"""Quasi-random and space-filling sampling over mixed design spaces.

Sobol' sequences use the published Joe-Kuo direction numbers via scipy's
engine; scrambling is keyed by an explicit seed so every sample set is
reproducible. Independent sample streams with different seeds may run
concurrently; a single stream is generated in one shot and has no shared
state.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .seeds import derive_rng
from .space import (
    MixedDesignSpace,
    MixedPoint,
    MixedSample,
    SpaceError,
    arrays_to_points,
)

SOBOL_MAX_DIM = 21201


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class UnitSample:
    """Rows of points in [0, 1)^d, ordered by generation index."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def sobol_unit(dim: int, n: int, skip: int = 0, scramble_seed=None) -> UnitSample:
    """First `n` points of the `dim`-dimensional Sobol' sequence after `skip`.

    With scramble_seed=None the raw sequence is returned (point 0 is the
    origin, point 1 is all-0.5); otherwise Owen-style scrambling keyed by the
    seed is applied.
    """
    if dim < 1:
        raise SamplingError("dim must be >= 1")
    if dim > SOBOL_MAX_DIM:
        raise SamplingError(f"dim {dim} exceeds available direction numbers ({SOBOL_MAX_DIM})")
    if n < 1:
        raise SamplingError("n must be >= 1")
    if scramble_seed is None:
        engine = qmc.Sobol(d=dim, scramble=False)
    else:
        engine = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(scramble_seed))
    if skip:
        engine.fast_forward(skip)
    with warnings.catch_warnings():
        # n is often not a power of two here; unbalanced sets are fine for
        # our estimators.
        warnings.simplefilter("ignore", UserWarning)
        values = engine.random(n)
    return UnitSample(values)


def unit_to_mixed(u, space: MixedDesignSpace) -> MixedPoint:
    """Map one unit-cube row to a mixed point.

    Quantitative variables scale affinely into their bounds; qualitative
    variables take level floor(u * l) + 1 (clamped to l), so each level has
    probability exactly 1/l under uniform u.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (space.d,):
        raise SamplingError(f"expected {space.d} coordinates, got {u.shape}")
    xs = space.lower + u[: space.q] * (space.upper - space.lower)
    ts = np.minimum(np.floor(u[space.q :] * space.levels).astype(np.int64) + 1,
                    space.levels)
    return MixedPoint(tuple(map(float, xs)), tuple(map(int, ts)))


def unit_sample_to_mixed(sample: UnitSample, space: MixedDesignSpace) -> MixedSample:
    """Vectorized unit_to_mixed over all rows."""
    u = sample.values
    if u.shape[1] != space.d:
        raise SamplingError(f"expected {space.d} columns, got {u.shape[1]}")
    xq = space.lower + u[:, : space.q] * (space.upper - space.lower)
    xt = np.minimum(
        np.floor(u[:, space.q :] * space.levels).astype(np.int64) + 1,
        space.levels,
    )
    return MixedSample(space, xq, xt)


def initial_doe(space: MixedDesignSpace, n: int, seed: int) -> list[MixedPoint]:
    """Space-filling design of n distinct points.

    Qualitative columns are balanced (per-variable level counts differ by at
    most one, so every level of the largest variable appears once n is at
    least its level count); quantitative columns are Latin-hypercube
    stratified. Deterministic per (space, n, seed).
    """
    if space.m:
        l_max = int(space.levels.max())
        if n < l_max:
            raise SamplingError(
                f"n={n} below the largest qualitative level count {l_max}"
            )
        if space.q == 0 and space.qualitative_cardinality() < n:
            raise SamplingError("qualitative cardinality smaller than requested n")
    if n < 1:
        raise SamplingError("n must be >= 1")
    rng = derive_rng(seed, "doe")
    xq = np.empty((n, space.q), dtype=float)
    for i, v in enumerate(space.quantitative):
        strata = rng.permutation(n)
        u = (strata + rng.random(n)) / n
        xq[:, i] = v.lower + u * (v.upper - v.lower)
    xt = np.empty((n, space.m), dtype=np.int64)
    for j, v in enumerate(space.qualitative):
        reps = -(-n // v.num_levels)
        col = np.tile(np.arange(1, v.num_levels + 1), reps)[:n]
        rng.shuffle(col)
        xt[:, j] = col
    _repair_duplicates(xq, xt, rng)
    return arrays_to_points(xq, xt)


def _repair_duplicates(xq: np.ndarray, xt: np.ndarray, rng: np.random.Generator,
                       max_rounds: int = 2000) -> None:
    """Swap qualitative entries within columns until all rows are distinct.

    Within-column swaps preserve per-level counts, so balance and coverage
    survive the repair.
    """
    n, m = xt.shape
    for _ in range(max_rounds):
        keys = [tuple(xq[i]) + tuple(xt[i]) for i in range(n)]
        seen: dict[tuple, int] = {}
        dup = -1
        for i, k in enumerate(keys):
            if k in seen:
                dup = i
                break
            seen[k] = i
        if dup < 0:
            return
        if m == 0:
            raise SamplingError("duplicate quantitative rows in DOE")
        j = int(rng.integers(m))
        other = int(rng.integers(n))
        xt[dup, j], xt[other, j] = xt[other, j], xt[dup, j]
    raise SamplingError("could not remove duplicate DOE rows")
