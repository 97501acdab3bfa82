"""Mixed-variable design spaces, points, datasets, and their serialization.

A design space is an ordered block of quantitative (bounded real) variables
followed by an ordered block of qualitative (categorical) variables. Level
indices are 1-based opaque labels: they are never fed to a kernel as numbers.
All types here are immutable after construction and safe to share across
concurrent readers.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

MAX_QUALITATIVE_CARDINALITY = 1_000_000_000


class SpaceError(ValueError):
    """Invalid design-space declaration or query."""


class PointValidationError(ValueError):
    """Base class for point-against-space validation failures."""


class DimensionMismatchError(PointValidationError):
    pass


class BoundViolationError(PointValidationError):
    pass


class LevelOutOfRangeError(PointValidationError):
    pass


class DatasetError(ValueError):
    """Inconsistent dataset contents."""


@dataclass(frozen=True)
class QuantVar:
    name: str
    lower: float
    upper: float


@dataclass(frozen=True)
class QualVar:
    name: str
    num_levels: int


@dataclass(frozen=True)
class MixedDesignSpace:
    """Ordered declaration of quantitative bounds and qualitative level counts."""

    quantitative: tuple[QuantVar, ...] = ()
    qualitative: tuple[QualVar, ...] = ()

    def __post_init__(self):
        for v in self.quantitative:
            if not (math.isfinite(v.lower) and math.isfinite(v.upper)):
                raise SpaceError(f"non-finite bounds for {v.name!r}")
            if not v.lower < v.upper:
                raise SpaceError(f"lower must be < upper for {v.name!r}")
        for v in self.qualitative:
            if v.num_levels < 2:
                raise SpaceError(f"{v.name!r} needs at least 2 levels")
        names = [v.name for v in self.quantitative] + [v.name for v in self.qualitative]
        if len(set(names)) != len(names):
            raise SpaceError("variable names must be unique")
        if self.q + self.m == 0:
            raise SpaceError("space must declare at least one variable")

    @classmethod
    def create(
        cls,
        quantitative: Iterable = (),
        qualitative: Iterable = (),
    ) -> "MixedDesignSpace":
        """Build from (name, lower, upper) and (name, num_levels) tuples."""
        qv = tuple(v if isinstance(v, QuantVar) else QuantVar(v[0], float(v[1]), float(v[2]))
                   for v in quantitative)
        tv = tuple(v if isinstance(v, QualVar) else QualVar(v[0], int(v[1]))
                   for v in qualitative)
        return cls(qv, tv)

    @property
    def q(self) -> int:
        return len(self.quantitative)

    @property
    def m(self) -> int:
        return len(self.qualitative)

    @property
    def d(self) -> int:
        return self.q + self.m

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.quantitative) + tuple(v.name for v in self.qualitative)

    @cached_property
    def lower(self) -> np.ndarray:
        a = np.array([v.lower for v in self.quantitative], dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def upper(self) -> np.ndarray:
        a = np.array([v.upper for v in self.quantitative], dtype=float)
        a.flags.writeable = False
        return a

    @cached_property
    def levels(self) -> np.ndarray:
        a = np.array([v.num_levels for v in self.qualitative], dtype=np.int64)
        a.flags.writeable = False
        return a

    def qualitative_cardinality(self) -> int:
        """Number of distinct qualitative combinations; errors beyond 10^9."""
        card = 1
        for v in self.qualitative:
            card *= v.num_levels
            if card > MAX_QUALITATIVE_CARDINALITY:
                raise SpaceError(
                    f"qualitative cardinality exceeds {MAX_QUALITATIVE_CARDINALITY}"
                )
        return card

    def to_dict(self) -> dict:
        return {
            "quantitative": [
                {"name": v.name, "lower": v.lower, "upper": v.upper}
                for v in self.quantitative
            ],
            "qualitative": [
                {"name": v.name, "num_levels": v.num_levels} for v in self.qualitative
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MixedDesignSpace":
        return cls.create(
            [(v["name"], v["lower"], v["upper"]) for v in d.get("quantitative", [])],
            [(v["name"], v["num_levels"]) for v in d.get("qualitative", [])],
        )


@dataclass(frozen=True)
class MixedPoint:
    """One design: real values for the quantitative block, 1-based level
    indices for the qualitative block."""

    quantitative: tuple[float, ...] = ()
    qualitative: tuple[int, ...] = ()

    @classmethod
    def of(cls, quantitative: Sequence[float] = (), qualitative: Sequence[int] = ()):
        return cls(tuple(float(x) for x in quantitative),
                   tuple(int(t) for t in qualitative))


def validate(point: MixedPoint, space: MixedDesignSpace) -> None:
    """Raise a typed error unless `point` is well-formed for `space`.

    Checks sizes first, then bounds, then level ranges; error messages name
    the offending variable. Never raises anything outside
    PointValidationError for malformed input.
    """
    if len(point.quantitative) != space.q or len(point.qualitative) != space.m:
        raise DimensionMismatchError(
            f"point has ({len(point.quantitative)}, {len(point.qualitative)}) "
            f"coordinates, space expects ({space.q}, {space.m})"
        )
    for v, x in zip(space.quantitative, point.quantitative):
        if not (math.isfinite(x) and v.lower <= x <= v.upper):
            raise BoundViolationError(
                f"{v.name}={x!r} outside [{v.lower}, {v.upper}]"
            )
    for v, t in zip(space.qualitative, point.qualitative):
        if not 1 <= t <= v.num_levels:
            raise LevelOutOfRangeError(
                f"{v.name}={t!r} not in 1..{v.num_levels}"
            )


def points_to_arrays(points: Sequence[MixedPoint], space: MixedDesignSpace):
    """Pack points into float (n, q) and int (n, m) coordinate matrices."""
    n = len(points)
    xq = np.empty((n, space.q), dtype=float)
    xt = np.empty((n, space.m), dtype=np.int64)
    for i, p in enumerate(points):
        xq[i] = p.quantitative
        xt[i] = p.qualitative
    return xq, xt


def arrays_to_points(xq: np.ndarray, xt: np.ndarray) -> list[MixedPoint]:
    return [
        MixedPoint(tuple(map(float, xq[i])), tuple(map(int, xt[i])))
        for i in range(len(xq))
    ]


def enumerate_qualitative(space: MixedDesignSpace, limit: int = 1_000_000) -> np.ndarray:
    """Full factorial of the qualitative block in lexicographic order, (N, m)."""
    card = space.qualitative_cardinality()
    if card > limit:
        raise SpaceError(f"cardinality {card} exceeds enumeration limit {limit}")
    grids = np.meshgrid(*[np.arange(1, l + 1) for l in space.levels], indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)


@dataclass(frozen=True)
class MixedSample:
    """A batch of mixed points stored column-blocked for vectorized evaluation."""

    space: MixedDesignSpace
    xq: np.ndarray  # (n, q) float
    xt: np.ndarray  # (n, m) int, 1-based levels

    def __post_init__(self):
        if self.xq.shape[1] != self.space.q or self.xt.shape[1] != self.space.m:
            raise DimensionMismatchError("sample width does not match space")
        if len(self.xq) != len(self.xt):
            raise DimensionMismatchError("sample blocks have different lengths")

    def __len__(self) -> int:
        return len(self.xq)

    def point(self, i: int) -> MixedPoint:
        return MixedPoint(tuple(map(float, self.xq[i])), tuple(map(int, self.xt[i])))

    def points(self) -> list[MixedPoint]:
        return arrays_to_points(self.xq, self.xt)


@dataclass(frozen=True)
class MixedEvaluator:
    """A deterministic response function over a mixed design space.

    `fn` receives column-blocked batches (xq (n, q) float, xt (n, m) int) and
    returns (n,) for a single response or (n, p) for p responses. Evaluators
    must either be safe for concurrent invocation or set serial=True, in
    which case runners invoke them from a single thread.
    """

    space: MixedDesignSpace
    fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    n_outputs: int = 1
    tag: str = "direct"
    serial: bool = False

    def matrix(self, xq: np.ndarray, xt: np.ndarray) -> np.ndarray:
        """Evaluate a batch; result is always (n, n_outputs)."""
        y = np.asarray(self.fn(np.asarray(xq, dtype=float),
                               np.asarray(xt, dtype=np.int64)), dtype=float)
        if y.ndim == 1:
            y = y[:, None]
        if y.shape != (len(xq), self.n_outputs):
            raise DatasetError(f"evaluator returned shape {y.shape}")
        return y

    def vector(self, xq: np.ndarray, xt: np.ndarray) -> np.ndarray:
        if self.n_outputs != 1:
            raise DatasetError("vector() requires a single-response evaluator")
        return self.matrix(xq, xt)[:, 0]

    def at_points(self, points: Sequence[MixedPoint]) -> np.ndarray:
        xq, xt = points_to_arrays(points, self.space)
        return self.matrix(xq, xt)

    def column(self, k: int, tag: str | None = None) -> "MixedEvaluator":
        """Single-response view of output column k."""
        if not 0 <= k < self.n_outputs:
            raise DatasetError(f"no output column {k}")
        parent = self
        return MixedEvaluator(
            space=self.space,
            fn=lambda xq, xt: parent.matrix(xq, xt)[:, k],
            n_outputs=1,
            tag=tag if tag is not None else f"{self.tag}[{k}]",
            serial=self.serial,
        )


@dataclass(frozen=True)
class Dataset:
    """Evaluated sample: points plus an (n, p) response matrix."""

    space: MixedDesignSpace
    inputs: tuple[MixedPoint, ...]
    outputs: np.ndarray

    def __post_init__(self):
        out = np.asarray(self.outputs, dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        out = out.copy()
        out.flags.writeable = False
        object.__setattr__(self, "outputs", out)
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if len(self.inputs) < 1:
            raise DatasetError("dataset needs at least one row")
        if out.shape[0] != len(self.inputs):
            raise DatasetError("outputs rows must match number of inputs")
        for p in self.inputs:
            validate(p, self.space)
        seen: dict[MixedPoint, np.ndarray] = {}
        for p, y in zip(self.inputs, out):
            prev = seen.get(p)
            if prev is not None and not np.array_equal(prev, y):
                raise DatasetError(f"identical inputs with different outputs: {p}")
            seen[p] = y

    @classmethod
    def from_arrays(cls, space, xq, xt, outputs) -> "Dataset":
        return cls(space, tuple(arrays_to_points(np.asarray(xq, float),
                                                 np.asarray(xt, np.int64))), outputs)

    @property
    def n(self) -> int:
        return len(self.inputs)

    @property
    def p(self) -> int:
        return self.outputs.shape[1]

    @cached_property
    def xq(self) -> np.ndarray:
        a, _ = points_to_arrays(self.inputs, self.space)
        a.flags.writeable = False
        return a

    @cached_property
    def xt(self) -> np.ndarray:
        _, a = points_to_arrays(self.inputs, self.space)
        a.flags.writeable = False
        return a

    def response(self, k: int = 0) -> "Dataset":
        """Single-response slice keeping the same inputs."""
        return Dataset(self.space, self.inputs, self.outputs[:, k])


@dataclass(frozen=True)
class StandardizeTransform:
    """Invertible record of the input/output scaling applied by standardize()."""

    space: MixedDesignSpace
    out_center: np.ndarray
    out_scale: np.ndarray
    degenerate: tuple[bool, ...]

    @cached_property
    def unit_space(self) -> MixedDesignSpace:
        return MixedDesignSpace.create(
            [(v.name, 0.0, 1.0) for v in self.space.quantitative],
            [(v.name, v.num_levels) for v in self.space.qualitative],
        )

    def xq_to_unit(self, xq: np.ndarray) -> np.ndarray:
        return (np.asarray(xq, float) - self.space.lower) / (self.space.upper - self.space.lower)

    def xq_from_unit(self, u: np.ndarray) -> np.ndarray:
        return self.space.lower + np.asarray(u, float) * (self.space.upper - self.space.lower)

    def outputs_to_std(self, y: np.ndarray) -> np.ndarray:
        return (np.asarray(y, float) - self.out_center) / self.out_scale

    def outputs_from_std(self, y: np.ndarray) -> np.ndarray:
        return np.asarray(y, float) * self.out_scale + self.out_center

    def invert(self, dataset: Dataset) -> Dataset:
        xu, xt = points_to_arrays(dataset.inputs, dataset.space)
        return Dataset.from_arrays(
            self.space, self.xq_from_unit(xu), xt,
            self.outputs_from_std(dataset.outputs),
        )

    def to_dict(self) -> dict:
        return {
            "space": self.space.to_dict(),
            "out_center": self.out_center.tolist(),
            "out_scale": self.out_scale.tolist(),
            "degenerate": list(self.degenerate),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StandardizeTransform":
        return cls(
            MixedDesignSpace.from_dict(d["space"]),
            np.asarray(d["out_center"], float),
            np.asarray(d["out_scale"], float),
            tuple(bool(b) for b in d["degenerate"]),
        )


def standardize(dataset: Dataset) -> tuple[Dataset, StandardizeTransform]:
    """Map quantitative inputs to [0, 1] by their bounds and each output column
    to zero mean / unit sample variance.

    Constant output columns are left unchanged and flagged as degenerate
    (with a warning) so the transform stays invertible.
    """
    if dataset.n < 2:
        raise DatasetError("standardize needs n >= 2")
    center = dataset.outputs.mean(axis=0)
    scale = dataset.outputs.std(axis=0, ddof=1)
    degenerate = scale == 0.0
    if degenerate.any():
        cols = [str(k) for k in np.nonzero(degenerate)[0]]
        warnings.warn(f"constant output column(s) {', '.join(cols)}: identity scaling")
        center = np.where(degenerate, 0.0, center)
        scale = np.where(degenerate, 1.0, scale)
    transform = StandardizeTransform(
        dataset.space, center, scale, tuple(bool(b) for b in degenerate)
    )
    xq, xt = points_to_arrays(dataset.inputs, dataset.space)
    std = Dataset.from_arrays(
        transform.unit_space,
        transform.xq_to_unit(xq),
        xt,
        transform.outputs_to_std(dataset.outputs),
    )
    return std, transform


# ---------------------------------------------------------------------------
# Serialization: JSON space schema, CSV dataset schema
# ---------------------------------------------------------------------------

def space_to_json(space: MixedDesignSpace, path) -> None:
    Path(path).write_text(json.dumps(space.to_dict(), indent=2) + "\n")


def space_from_json(path) -> MixedDesignSpace:
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpaceError(f"malformed space JSON {path}: {exc}") from exc
    return MixedDesignSpace.from_dict(d)


def csv_header(space: MixedDesignSpace, p: int) -> list[str]:
    return (
        [f"x_{v.name}" for v in space.quantitative]
        + [f"t_{v.name}" for v in space.qualitative]
        + [f"y_{k + 1}" for k in range(p)]
    )


def dataset_to_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(csv_header(dataset.space, dataset.p))
        for point, y in zip(dataset.inputs, dataset.outputs):
            writer.writerow(
                [repr(x) for x in point.quantitative]
                + [str(t) for t in point.qualitative]
                + [repr(float(v)) for v in y]
            )


def dataset_from_csv(path, space: MixedDesignSpace) -> Dataset:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetError(f"{path}: empty file")
    header = rows[0]
    expected_xt = [f"x_{v.name}" for v in space.quantitative] + [
        f"t_{v.name}" for v in space.qualitative
    ]
    if header[: space.d] != expected_xt:
        raise DatasetError(
            f"{path}: header {header[:space.d]} does not match space columns {expected_xt}"
        )
    p = len(header) - space.d
    if p < 1 or header[space.d :] != [f"y_{k + 1}" for k in range(p)]:
        raise DatasetError(f"{path}: missing or misnamed response columns")
    points, outputs = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DatasetError(f"{path}:{lineno}: expected {len(header)} fields")
        try:
            xs = [float(v) for v in row[: space.q]]
            ts = [int(v) for v in row[space.q : space.d]]
            ys = [float(v) for v in row[space.d :]]
        except ValueError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from exc
        points.append(MixedPoint(tuple(xs), tuple(ts)))
        outputs.append(ys)
    return Dataset(space, tuple(points), np.asarray(outputs, dtype=float))
