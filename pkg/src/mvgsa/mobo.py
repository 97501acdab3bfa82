"""Multi-objective Bayesian optimization over qualitative combinatorial spaces.

Two frameworks share the same machinery: a vanilla loop that refits one LVGP
per objective each iteration and scores every unevaluated candidate, and a
two-stage sensitivity-aware loop that first searches only the high-TSI
(focus) variables through a reduced surrogate, then restricts the candidate
set to the focus combinations found Pareto-optimal.

Acquisition is expected improvement on a random-weight augmented-Tchebycheff
scalarization (ParEGO style): each iteration draws a weight vector from the
uniform simplex, objectives are normalized to [0, 1] by the archive range,
and the per-objective GP predictions are propagated through the scalarization
with the independent-Gaussian active-branch rule. Exposed as plain functions
so an alternative scalarization (e.g. hypervolume EI) can slot in later.

Candidates are enumerated, never optimized continuously: the target design
spaces are purely combinatorial. Ties always break toward the lowest
lexicographic candidate index, making traces reproducible. Per-iteration
candidate scoring is read-only over the fitted models and could run in
parallel; the outer loop is inherently sequential.
"""

from __future__ import annotations

import csv
import hashlib
import time
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr

from . import gsa as _gsa
from . import lvgp as _lvgp
from .sampling import initial_doe, sobol_unit, unit_sample_to_mixed
from .seeds import child_seed, derive_rng, derive_seed_sequence
from .space import (
    Dataset,
    MixedDesignSpace,
    MixedEvaluator,
    MixedPoint,
    SpaceError,
    enumerate_qualitative,
)

_SQRT_2PI = np.sqrt(2.0 * np.pi)


class BoAbort(RuntimeError):
    """Optimization aborted; carries the partial trace."""

    def __init__(self, message: str, trace: "BoTrace"):
        super().__init__(message)
        self.trace = trace


# ---------------------------------------------------------------------------
# Acquisition primitives
# ---------------------------------------------------------------------------

def expected_improvement(mean, sd, incumbent_best, direction: str = "max"):
    """Closed-form EI of a Gaussian prediction over the incumbent.

    Degenerates to max(improvement, 0) at sd = 0. Vectorized over mean/sd.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    if np.any(sd < 0):
        raise ValueError("sd must be nonnegative")
    delta = mean - incumbent_best if direction == "max" else incumbent_best - mean
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        u = np.where(sd > 0, delta / np.where(sd > 0, sd, 1.0), 0.0)
        dense = delta * ndtr(u) + sd * np.exp(-0.5 * u * u) / _SQRT_2PI
    out = np.where(sd > 0, dense, np.maximum(delta, 0.0))
    return float(out) if out.ndim == 0 else out


def pareto_filter(values: np.ndarray, directions: Sequence[str] | None = None) -> np.ndarray:
    """Boolean mask of the nondominated rows; exactly tied vectors all stay."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return np.zeros(0, dtype=bool)
    signed = values * _signs(directions, values.shape[1])
    n = len(signed)
    mask = np.ones(n, dtype=bool)
    for i in range(n):
        ge = (signed >= signed[i]).all(axis=1)
        gt = (signed > signed[i]).any(axis=1)
        if np.any(ge & gt):
            mask[i] = False
    return mask


def _signs(directions, p: int) -> np.ndarray:
    if directions is None:
        return np.ones(p)
    if len(directions) != p:
        raise ValueError("one direction per objective required")
    return np.array([1.0 if d == "max" else -1.0 for d in directions])


def hypervolume_2d(values: np.ndarray, ref: Sequence[float]) -> float:
    """Dominated hypervolume of a 2-objective maximization set w.r.t. `ref`."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[1] != 2:
        raise ValueError("hypervolume_2d needs (n, 2) values")
    keep = (values[:, 0] > ref[0]) & (values[:, 1] > ref[1])
    pts = values[keep]
    if len(pts) == 0:
        return 0.0
    order = np.lexsort((-pts[:, 1], -pts[:, 0]))
    hv = 0.0
    cur = float(ref[1])
    for i in order:
        y1, y2 = pts[i]
        if y2 > cur:
            hv += (y1 - ref[0]) * (y2 - cur)
            cur = y2
    return hv


def mo_acquisition(means, sds, archive_values, weights, rho: float = 0.05):
    """Random-weight augmented-Tchebycheff EI against an evaluated archive.

    All arrays are maximization-oriented. Objectives are normalized to [0, 1]
    by the archive range (a degenerate range normalizes by 1) and turned into
    shortfalls c_k = 1 - y_k; the scalarized merit is the ParEGO achievement

        s(y) = -( max_k w_k c_k + rho * sum_k w_k c_k ).

    Minimizing the weighted worst shortfall reaches every Pareto-optimal
    point (extreme and interior alike) as the weights sweep the simplex;
    rewarding the best single objective instead would leave interior front
    members with zero improvement for every weight vector. Candidate
    predictions propagate through s with the active max branch:
    sd_s^2 = ((1+rho) w_k* sd_k*)^2 + sum_{k != k*} (rho w_k sd_k)^2.
    Returns EI against the archive's best scalarized value, per candidate.
    """
    scalar_input = np.asarray(means).ndim == 1
    means = np.atleast_2d(np.asarray(means, dtype=float))
    sds = np.atleast_2d(np.asarray(sds, dtype=float))
    archive_values = np.asarray(archive_values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if archive_values.ndim != 2 or len(archive_values) == 0:
        raise ValueError("nonempty archive required")
    lo = archive_values.min(axis=0)
    rng = archive_values.max(axis=0) - lo
    rng = np.where(rng == 0.0, 1.0, rng)
    hi = lo + rng

    def scalarize(y):
        wc = weights * (hi - y) / rng
        return -(wc.max(axis=1) + rho * wc.sum(axis=1))

    incumbent = float(scalarize(archive_values).max())
    wc = weights * (hi - means) / rng
    kstar = wc.argmax(axis=1)
    s_mean = -(wc.max(axis=1) + rho * wc.sum(axis=1))
    coef = np.broadcast_to(rho * weights, wc.shape).copy()
    coef[np.arange(len(coef)), kstar] += weights[kstar]
    s_sd = np.sqrt(((coef * sds / rng) ** 2).sum(axis=1))
    ei = expected_improvement(s_mean, s_sd, incumbent)
    return float(ei[0]) if scalar_input else ei


# ---------------------------------------------------------------------------
# Archive and trace
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArchiveEntry:
    point: MixedPoint
    values: tuple[float, ...]
    iteration: int


class ParetoArchive:
    """Evaluated designs with incremental nondominated-front bookkeeping."""

    def __init__(self, directions: Sequence[str] = ("max", "max")):
        self.directions = tuple(directions)
        self._signs = _signs(self.directions, len(self.directions))
        self.entries: list[ArchiveEntry] = []
        self._signed: list[np.ndarray] = []
        self._nondominated: list[bool] = []

    def __len__(self) -> int:
        return len(self.entries)

    def add(self, point: MixedPoint, values, iteration: int) -> bool:
        """Insert an evaluated design; returns True if it joins the front."""
        v = np.asarray(values, dtype=float) * self._signs
        dominated = False
        for i, flag in enumerate(self._nondominated):
            if not flag:
                continue
            other = self._signed[i]
            if (other >= v).all() and (other > v).any():
                dominated = True
                break
        if not dominated:
            for i, flag in enumerate(self._nondominated):
                if flag:
                    other = self._signed[i]
                    if (v >= other).all() and (v > other).any():
                        self._nondominated[i] = False
        self.entries.append(ArchiveEntry(point, tuple(map(float, values)), iteration))
        self._signed.append(v)
        self._nondominated.append(not dominated)
        return not dominated

    @property
    def front_mask(self) -> np.ndarray:
        return np.asarray(self._nondominated, dtype=bool)

    def front(self) -> list[ArchiveEntry]:
        return [e for e, keep in zip(self.entries, self._nondominated) if keep]

    def values_array(self) -> np.ndarray:
        return np.asarray([e.values for e in self.entries], dtype=float)

    def front_recomputed(self) -> np.ndarray:
        """From-scratch nondominated mask, for consistency checks."""
        return pareto_filter(self.values_array(), self.directions)

    def front_hash(self) -> str:
        parts = sorted(
            f"{e.point.quantitative}|{e.point.qualitative}|"
            f"{np.asarray(e.values).tobytes().hex()}"
            for e in self.front()
        )
        return hashlib.sha256("\n".join(parts).encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    stage: str
    point: MixedPoint
    acquisition: float | None
    objectives: tuple[float, ...]
    front_hash: str
    seed: int
    wall_time: float


@dataclass
class BoTrace:
    """Seeded, iteration-stamped record of every evaluation of a BO run."""

    records: list[TraceRecord]
    seed: int
    meta: dict = field(default_factory=dict)

    @property
    def n_evaluations(self) -> int:
        return len(self.records)

    def points(self) -> list[MixedPoint]:
        return [r.point for r in self.records]

    def objectives_array(self) -> np.ndarray:
        return np.asarray([r.objectives for r in self.records], dtype=float)

    def evals_to_front(self, oracle_points: Sequence[MixedPoint]) -> int | None:
        """Total evaluations when the last oracle front member was evaluated."""
        remaining = {(p.quantitative, p.qualitative) for p in oracle_points}
        for k, r in enumerate(self.records, start=1):
            remaining.discard((r.point.quantitative, r.point.qualitative))
            if not remaining:
                return k
        return None

    def replay_matches(self, evaluator: MixedEvaluator) -> bool:
        y = evaluator.at_points(self.points())
        return bool(np.array_equal(y, self.objectives_array()))

    def to_csv(self, path, include_wall_time: bool = False) -> None:
        """Write the trace; wall times are volatile, so they are only
        included on request (manifest reruns must reproduce the file)."""
        space_names = self.meta.get("space_names")
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            q = len(self.records[0].point.quantitative) if self.records else 0
            m = len(self.records[0].point.qualitative) if self.records else 0
            if space_names is None:
                space_names = [f"v{i+1}" for i in range(q + m)]
            p = len(self.records[0].objectives) if self.records else 0
            header = (
                ["iteration", "stage"]
                + [f"x_{n}" for n in space_names[:q]]
                + [f"t_{n}" for n in space_names[q:]]
                + ["acquisition"]
                + [f"y_{k+1}" for k in range(p)]
                + ["front_hash", "seed"]
            )
            if include_wall_time:
                header.append("wall_time")
            writer.writerow(header)
            for r in self.records:
                row = (
                    [r.iteration, r.stage]
                    + [repr(x) for x in r.point.quantitative]
                    + list(r.point.qualitative)
                    + ["" if r.acquisition is None else repr(r.acquisition)]
                    + [repr(v) for v in r.objectives]
                    + [r.front_hash, r.seed]
                )
                if include_wall_time:
                    row.append(repr(r.wall_time))
                writer.writerow(row)


# ---------------------------------------------------------------------------
# Focus selection
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FocusRule:
    """How to pick focus variables from per-objective Sobol' indices.

    relative_tsi (default): focus if TSI >= value * that objective's max TSI
    on any objective. top_k: the `value` highest variables by max TSI.
    tsi_threshold: focus if TSI >= value on any objective.
    """

    mode: str = "relative_tsi"
    value: float = 0.5


@dataclass(frozen=True)
class FocusSelection:
    indices: tuple[int, ...]
    variables: tuple[str, ...]
    source: tuple[_gsa.SobolIndices, ...]
    rule: FocusRule

    def __post_init__(self):
        d = len(self.source[0].variables)
        if not 1 <= len(self.indices) <= d - 1:
            raise ValueError("focus selection must keep between 1 and d-1 variables")


def select_focus(indices_per_objective: Sequence[_gsa.SobolIndices],
                 rule: FocusRule = FocusRule()) -> FocusSelection:
    """Pick the focus variables driving the two-stage search.

    Guarantees 1 <= |focus| <= d-1: if the rule selects everything, the
    weakest variable is dropped (lowest max TSI, then lowest max MSI, then
    highest index); if it selects nothing, the single max-TSI variable wins.
    """
    if not indices_per_objective:
        raise ValueError("at least one objective's indices required")
    names = indices_per_objective[0].variables
    d = len(names)
    if d < 2:
        raise ValueError("need at least two variables to select a focus subset")
    T = np.stack([ind.tsi_clamped for ind in indices_per_objective])
    M = np.stack([ind.msi_clamped for ind in indices_per_objective])

    if rule.mode == "relative_tsi":
        thresh = rule.value * T.max(axis=1, keepdims=True)
        selected = (T >= thresh).any(axis=0)
    elif rule.mode == "tsi_threshold":
        selected = (T >= rule.value).any(axis=0)
    elif rule.mode == "top_k":
        k = max(1, min(int(rule.value), d - 1))
        order = np.lexsort((np.arange(d), -T.max(axis=0)))
        selected = np.zeros(d, dtype=bool)
        selected[order[:k]] = True
    else:
        raise ValueError(f"unknown focus rule {rule.mode!r}")

    if not selected.any():
        selected[int(T.max(axis=0).argmax())] = True
    if selected.all():
        t_score = T.max(axis=0)
        m_score = M.max(axis=0)
        worst = min(range(d), key=lambda i: (t_score[i], m_score[i], -i))
        selected[worst] = False
    idx = tuple(int(i) for i in np.nonzero(selected)[0])
    return FocusSelection(idx, tuple(names[i] for i in idx),
                          tuple(indices_per_objective), rule)


# ---------------------------------------------------------------------------
# Shared BO state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoConfig:
    """Knobs of both frameworks; the defaults match the acceptance studies.

    Refits warm-start from the previous optimum; fresh multi-starts are
    added every `anchor_every` iterations (and whenever no warm solution
    exists) to escape stale local optima without paying for full restarts
    at every step.
    """

    fit_starts: int = 2
    fit_max_iters: int = 50
    warm_start: bool = True
    anchor_every: int = 5
    anchor_max_n: int = 250
    rho: float = 0.05
    gsa_n_base: int = 2**13
    gsa_fit_starts: int = 4
    gsa_fit_max_iters: int = 150
    focus_rule: FocusRule = FocusRule()
    stagnation_patience: int = 25
    nonfocus_enumeration_limit: int = 10_000
    nugget: float = 1e-8


class BoState:
    """Evaluated archive, trace bookkeeping, and model cache for one run."""

    def __init__(self, evaluator: MixedEvaluator, space: MixedDesignSpace | None,
                 seed: int, config: BoConfig,
                 directions: Sequence[str] | None = None,
                 oracle_front: Sequence[MixedPoint] | None = None):
        self.evaluator = evaluator
        self.space = space if space is not None else evaluator.space
        if self.space.q != 0:
            raise SpaceError("BO candidate enumeration requires an all-qualitative space")
        self.seed = seed
        self.config = config
        self.p = evaluator.n_outputs
        self.directions = tuple(directions) if directions else ("max",) * self.p
        self.signs = _signs(self.directions, self.p)
        self.candidates = enumerate_qualitative(self.space)
        self.row_of = {tuple(map(int, row)): i for i, row in enumerate(self.candidates)}
        self.evaluated = np.zeros(len(self.candidates), dtype=bool)
        self.points: list[MixedPoint] = []
        self.Y = np.empty((0, self.p))
        self.archive = ParetoArchive(self.directions)
        self.records: list[TraceRecord] = []
        self.meta: dict = {"space_names": list(self.space.names)}
        self.models: list[_lvgp.LvgpModel | None] = [None] * self.p
        self._t0 = time.perf_counter()
        self.oracle_keys = (
            {p.qualitative for p in oracle_front} if oracle_front is not None else None
        )

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, xt_row: np.ndarray, stage: str, iteration: int,
                 acquisition: float | None) -> None:
        key = tuple(map(int, xt_row))
        row = self.row_of[key]
        if self.evaluated[row]:
            raise RuntimeError(f"candidate {key} evaluated twice")
        self.evaluated[row] = True
        point = MixedPoint((), key)
        y = self.evaluator.matrix(np.empty((1, 0)), np.asarray([xt_row]))[0]
        self.points.append(point)
        self.Y = np.vstack([self.Y, y])
        self.archive.add(point, y, iteration)
        self.records.append(TraceRecord(
            iteration=iteration, stage=stage, point=point,
            acquisition=acquisition, objectives=tuple(map(float, y)),
            front_hash=self.archive.front_hash(), seed=self.seed,
            wall_time=time.perf_counter() - self._t0,
        ))

    def evaluate_doe(self, doe: Sequence[MixedPoint]) -> None:
        for p in doe:
            self.evaluate(np.asarray(p.qualitative, dtype=np.int64), "doe", 0, None)

    def oracle_done(self) -> bool:
        if self.oracle_keys is None:
            return False
        return self.oracle_keys <= {p.qualitative for p in self.points}

    def unevaluated_rows(self) -> np.ndarray:
        return np.nonzero(~self.evaluated)[0]

    # -- model fitting --------------------------------------------------------

    def fit_models(self, stage: str, iteration: int) -> list[_lvgp.LvgpModel]:
        # fresh restarts stop paying off once the warm optimum is fed by
        # plenty of data; past anchor_max_n rows refits are warm-only
        anchored = (iteration % max(1, self.config.anchor_every) == 1
                    and len(self.points) <= self.config.anchor_max_n)
        xq = np.empty((len(self.points), 0))
        xt = np.asarray([p.qualitative for p in self.points], dtype=np.int64)
        models = []
        for k in range(self.p):
            data = Dataset.from_arrays(self.space, xq, xt, self.Y[:, k])
            warm = ()
            if self.config.warm_start and self.models[k] is not None:
                warm = (self.models[k].theta,)
            starts = self.config.fit_starts if (anchored or not warm) else 0
            cfg = _lvgp.FitConfig(starts=starts,
                                  max_iters=self.config.fit_max_iters,
                                  nugget=self.config.nugget,
                                  seed=child_seed(self.seed, "fit", stage, iteration, k))
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    model = _lvgp.fit(data, cfg, warm_starts=warm)
            except (_lvgp.FitError, _lvgp.FactorizationError) as exc:
                raise BoAbort(f"surrogate fit failed at {stage} iteration {iteration}: {exc}",
                              self.trace()) from exc
            models.append(model)
        self.models = models
        return models

    def predict_signed(self, models, xt_rows: np.ndarray):
        """Per-candidate maximization-oriented means and sds, (c, p) each."""
        xq = np.empty((len(xt_rows), 0))
        means = np.empty((len(xt_rows), self.p))
        sds = np.empty((len(xt_rows), self.p))
        for k, model in enumerate(models):
            mean, sd = model.posterior_mean_sd(xq, xt_rows)
            means[:, k] = mean * self.signs[k]
            sds[:, k] = sd
        return means, sds

    def weights(self, tag: str, iteration: int) -> np.ndarray:
        return derive_rng(self.seed, "weights", tag, iteration).dirichlet(np.ones(self.p))

    def trace(self) -> BoTrace:
        return BoTrace(list(self.records), self.seed, dict(self.meta))


# ---------------------------------------------------------------------------
# Vanilla framework
# ---------------------------------------------------------------------------

def _resolve_doe(space: MixedDesignSpace, doe, seed: int) -> list[MixedPoint]:
    if isinstance(doe, int):
        return initial_doe(space, doe, child_seed(seed, "doe"))
    return list(doe)


def vanilla_bo(evaluator: MixedEvaluator, doe, budget: int, seed: int,
               space: MixedDesignSpace | None = None,
               oracle_front: Sequence[MixedPoint] | None = None,
               config: BoConfig = BoConfig(),
               directions: Sequence[str] | None = None) -> BoTrace:
    """Plain multi-objective BO: refit, score all unevaluated candidates,
    evaluate the argmax; stop at `budget` adaptive evaluations, when the
    supplied oracle front is fully evaluated, or when candidates run out.
    """
    state = BoState(evaluator, space, seed, config, directions, oracle_front)
    state.meta["framework"] = "vanilla"
    state.evaluate_doe(_resolve_doe(state.space, doe, seed))
    _bo_loop(state, budget, stage="bo", candidate_mask=None)
    state.meta["oracle_found_at"] = (
        state.trace().evals_to_front([MixedPoint((), k) for k in state.oracle_keys])
        if state.oracle_keys is not None else None
    )
    return state.trace()


def _bo_loop(state: BoState, budget: int, stage: str,
             candidate_mask: np.ndarray | None,
             stagnation_patience: int | None = None) -> int:
    """Shared acquisition loop; returns the number of evaluations spent."""
    spent = 0
    last_front = state.archive.front_hash()
    stagnant = 0
    for it in range(1, budget + 1):
        if state.oracle_done():
            break
        allowed = ~state.evaluated
        if candidate_mask is not None:
            allowed &= candidate_mask
        rows = np.nonzero(allowed)[0]
        if len(rows) == 0:
            state.meta[f"{stage}_exhausted"] = True
            break
        models = state.fit_models(stage, it)
        w = state.weights(stage, it)
        means, sds = state.predict_signed(models, state.candidates[rows])
        acq = mo_acquisition(means, sds, state.Y * state.signs, w, rho=state.config.rho)
        best = int(np.argmax(acq))
        state.evaluate(state.candidates[rows[best]], stage, it, float(acq[best]))
        spent += 1
        if stagnation_patience is not None:
            h = state.archive.front_hash()
            stagnant = 0 if h != last_front else stagnant + 1
            last_front = h
            if stagnant >= stagnation_patience:
                state.meta[f"{stage}_stagnated"] = True
                break
    return spent


# ---------------------------------------------------------------------------
# Two-stage framework
# ---------------------------------------------------------------------------

@dataclass
class Stage1Result:
    trace: BoTrace
    optimal_combos: tuple[tuple[int, ...], ...]
    state: BoState
    focus_indices: tuple[int, ...]


def _focus_spaces(space: MixedDesignSpace, focus: Sequence[int]):
    focus = tuple(sorted(focus))
    if not 1 <= len(focus) <= space.m - 1:
        raise ValueError("focus must keep between 1 and m-1 qualitative variables")
    if any(not 0 <= j < space.m for j in focus):
        raise ValueError("focus indices out of range")
    nonfocus = tuple(i for i in range(space.m) if i not in focus)
    fs = MixedDesignSpace.create(
        qualitative=[(space.qualitative[j].name, space.qualitative[j].num_levels)
                     for j in focus])
    return focus, nonfocus, fs


def _nonfocus_completions(space: MixedDesignSpace, nonfocus, seed: int,
                          limit: int) -> np.ndarray:
    """All non-focus level combinations, or a scrambled-Sobol subsample of
    `limit` when the full enumeration is too large."""
    sub = MixedDesignSpace.create(
        qualitative=[(space.qualitative[j].name, space.qualitative[j].num_levels)
                     for j in nonfocus])
    card = 1
    for j in nonfocus:
        card *= space.qualitative[j].num_levels
    if card <= limit:
        return enumerate_qualitative(sub)
    unit = sobol_unit(len(nonfocus), limit,
                      scramble_seed=derive_seed_sequence(seed, "nonfocus-subsample"))
    xt = unit_sample_to_mixed(unit, sub).xt
    _, keep = np.unique(xt, axis=0, return_index=True)
    return xt[np.sort(keep)]


def _assemble_rows(m: int, focus, nonfocus, combo: np.ndarray,
                   completions: np.ndarray) -> np.ndarray:
    rows = np.empty((len(completions), m), dtype=np.int64)
    rows[:, list(focus)] = combo
    rows[:, list(nonfocus)] = completions
    return rows


def _build_focus_table(state: BoState, models, focus, nonfocus,
                       completions: np.ndarray):
    """Best-case predicted outputs per evaluated focus combination.

    For each focus combination present in the evaluated data, the output per
    objective is the max (maximization-oriented) posterior mean over all
    non-focus completions.
    """
    combos = sorted({tuple(int(p.qualitative[j]) for j in focus) for p in state.points})
    grid = np.vstack([
        _assemble_rows(state.space.m, focus, nonfocus, np.asarray(c), completions)
        for c in combos
    ])
    xq = np.empty((len(grid), 0))
    signed = np.empty((len(combos), state.p))
    for k, model in enumerate(models):
        pred = model.posterior_mean(xq, grid) * state.signs[k]
        signed[:, k] = pred.reshape(len(combos), len(completions)).max(axis=1)
    return np.asarray(combos, dtype=np.int64), signed


def stage1(evaluator: MixedEvaluator, doe, focus: FocusSelection | Sequence[int],
           iters: int, seed: int,
           space: MixedDesignSpace | None = None,
           config: BoConfig = BoConfig(),
           directions: Sequence[str] | None = None,
           oracle_front: Sequence[MixedPoint] | None = None,
           state: BoState | None = None) -> Stage1Result:
    """First stage of the sensitivity-aware framework.

    Each iteration: refit the full-space surrogates; tabulate best-case
    predicted outputs for every evaluated focus combination; fit reduced
    surrogates on that table; propose a focus combination by acquisition
    over every combination that still has an unevaluated completion;
    complete the chosen combination through the full-space surrogates;
    evaluate. Afterwards the full-space models are refit once and the
    Pareto-optimal focus combinations of the final table are returned.
    """
    focus_idx = tuple(focus.indices) if isinstance(focus, FocusSelection) else tuple(focus)
    if state is None:
        state = BoState(evaluator, space, seed, config, directions, oracle_front)
        state.evaluate_doe(_resolve_doe(state.space, doe, seed))
    focus_idx, nonfocus, focus_space = _focus_spaces(state.space, focus_idx)
    state.meta["focus_variables"] = [state.space.names[i] for i in focus_idx]
    completions = _nonfocus_completions(state.space, nonfocus, seed,
                                        config.nonfocus_enumeration_limit)
    all_combos = enumerate_qualitative(focus_space)
    ac_models: list[_lvgp.LvgpModel | None] = [None] * state.p

    def open_combos():
        """Combos with at least one unevaluated completion, in lex order.

        Already-evaluated combos stay proposable: exploitation hammers a
        good combo with new completions, and the no-repeat rule lives at
        the full-point level.
        """
        out = []
        for row in all_combos:
            full = _assemble_rows(state.space.m, focus_idx, nonfocus, row, completions)
            if any(not state.evaluated[state.row_of[tuple(map(int, r))]]
                   for r in full):
                out.append(row)
        return out

    for it in range(1, iters + 1):
        if state.oracle_done():
            break
        models = state.fit_models("stage1", it)
        combos, table_signed = _build_focus_table(state, models, focus_idx,
                                                  nonfocus, completions)
        combo_points = [MixedPoint((), tuple(map(int, c))) for c in combos]

        candidates = open_combos()
        if not candidates:
            state.meta["stage1_exhausted"] = True
            break
        cand = np.asarray(candidates, dtype=np.int64)
        w = state.weights("stage1", it)

        chosen = cand[0]
        if len(combos) >= 2:
            anchored = it % max(1, config.anchor_every) == 1
            try:
                for k in range(state.p):
                    data = Dataset(focus_space, tuple(combo_points),
                                   table_signed[:, k] * state.signs[k])
                    warm = (ac_models[k].theta,) if (config.warm_start and ac_models[k]) else ()
                    cfg = _lvgp.FitConfig(
                        starts=config.fit_starts if (anchored or not warm) else 0,
                        max_iters=config.fit_max_iters,
                        nugget=config.nugget,
                        seed=child_seed(seed, "ac-fit", it, k))
                    with warnings.catch_warnings():
                        warnings.simplefilter("ignore")
                        ac_models[k] = _lvgp.fit(data, cfg, warm_starts=warm)
                means = np.empty((len(cand), state.p))
                sds = np.empty((len(cand), state.p))
                for k in range(state.p):
                    mean, sd = ac_models[k].posterior_mean_sd(
                        np.empty((len(cand), 0)), cand)
                    means[:, k] = mean * state.signs[k]
                    sds[:, k] = sd
                acq = mo_acquisition(means, sds, table_signed, w, rho=config.rho)
                chosen = cand[int(np.argmax(acq))]
            except (_lvgp.FitError, _lvgp.FactorizationError):
                chosen = cand[0]

        full = _assemble_rows(state.space.m, focus_idx, nonfocus, chosen, completions)
        open_rows = np.asarray([r for r in full
                                if not state.evaluated[state.row_of[tuple(map(int, r))]]])
        means, sds = state.predict_signed(models, open_rows)
        acq2 = mo_acquisition(means, sds, state.Y * state.signs, w, rho=config.rho)
        best = int(np.argmax(acq2))
        state.evaluate(open_rows[best], "stage1", it, float(acq2[best]))

    models = state.fit_models("stage1-final", iters + 1)
    combos, table_signed = _build_focus_table(state, models, focus_idx,
                                              nonfocus, completions)
    mask = pareto_filter(table_signed)
    optimal = tuple(tuple(map(int, c)) for c in combos[mask])
    state.meta["stage1_optimal_combos"] = [list(c) for c in optimal]
    return Stage1Result(state.trace(), optimal, state, focus_idx)


def stage2(evaluator: MixedEvaluator, optimal_combos, archive: BoState,
           budget: int, seed: int,
           focus_indices: Sequence[int] | None = None,
           oracle_front: Sequence[MixedPoint] | None = None,
           config: BoConfig | None = None) -> BoTrace:
    """Second stage: vanilla loop restricted to candidates whose focus
    coordinates belong to the stage-1 optimal set.

    Stops when the oracle front is contained, at budget, when the reduced set
    is exhausted (flagged), or on front stagnation when no oracle is given.
    """
    state = archive
    state.evaluator = evaluator
    config = config if config is not None else state.config
    if focus_indices is None:
        focus_indices = tuple(
            state.space.names.index(n) for n in state.meta.get("focus_variables", ()))
    if oracle_front is not None:
        state.oracle_keys = {p.qualitative for p in oracle_front}
    if not optimal_combos:
        raise ValueError("stage 2 needs a nonempty optimal focus set")
    focus_cols = list(focus_indices)
    opt = {tuple(map(int, c)) for c in optimal_combos}
    reduced = np.asarray([
        tuple(map(int, row[focus_cols])) in opt for row in state.candidates
    ])
    state.meta["stage2_candidates"] = int(reduced.sum())
    _bo_loop(state, budget, stage="stage2", candidate_mask=reduced,
             stagnation_patience=(None if state.oracle_keys is not None
                                  else config.stagnation_patience))
    return state.trace()


def gsa_focus_from_doe(evaluator: MixedEvaluator, doe, seed: int,
                       space: MixedDesignSpace | None = None,
                       config: BoConfig = BoConfig(),
                       directions: Sequence[str] | None = None,
                       oracle_front: Sequence[MixedPoint] | None = None
                       ) -> tuple[FocusSelection, BoState]:
    """Evaluate the DOE, fit one surrogate per objective, run metamodel GSA,
    and select the focus variables."""
    state = BoState(evaluator, space, seed, config, directions, oracle_front)
    state.evaluate_doe(_resolve_doe(state.space, doe, seed))
    xq = np.empty((len(state.points), 0))
    xt = np.asarray([p.qualitative for p in state.points], dtype=np.int64)
    indices = []
    for k in range(state.p):
        data = Dataset.from_arrays(state.space, xq, xt, state.Y[:, k])
        cfg = _lvgp.FitConfig(starts=config.gsa_fit_starts,
                              max_iters=config.gsa_fit_max_iters,
                              nugget=config.nugget,
                              seed=child_seed(seed, "gsa-fit", k))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            model = _lvgp.fit(data, cfg)
        state.models[k] = model
        indices.append(_gsa.metamodel_indices(model, n_base=config.gsa_n_base,
                                              seed=child_seed(seed, "gsa", k)))
    focus = select_focus(indices, config.focus_rule)
    state.meta["gsa_tsi"] = [ind.tsi_clamped.tolist() for ind in indices]
    return focus, state


def sensitivity_aware_bo(evaluator: MixedEvaluator, doe_n: int, stage1_iters: int,
                         budget: int, seed: int,
                         space: MixedDesignSpace | None = None,
                         oracle_front: Sequence[MixedPoint] | None = None,
                         config: BoConfig = BoConfig(),
                         directions: Sequence[str] | None = None) -> BoTrace:
    """Full two-stage pipeline: DOE, metamodel GSA, focus selection, focus
    search, then restricted search. Every trace record carries its stage tag;
    the whole run is deterministic per seed."""
    focus, state = gsa_focus_from_doe(evaluator, doe_n, seed, space, config,
                                      directions, oracle_front)
    state.meta["framework"] = "sensitivity-aware"
    s1_iters = min(stage1_iters, budget)
    result = stage1(evaluator, doe_n, focus, s1_iters, seed, config=config,
                    state=state)
    spent = sum(1 for r in state.records if r.stage == "stage1")
    remaining = budget - spent
    if remaining > 0 and not state.oracle_done():
        stage2(evaluator, result.optimal_combos, state, remaining, seed,
               focus_indices=result.focus_indices, config=config)
    # The stage-1 optimal set can miss the true front when the reduced space
    # was built from a misled focus selection; spend any leftover budget on
    # the full candidate set rather than stranding it.
    remaining = budget - sum(1 for r in state.records if r.stage in ("stage1", "stage2"))
    if remaining > 0 and not state.oracle_done() and (
            state.meta.get("stage2_exhausted") or state.meta.get("stage2_stagnated")):
        _bo_loop(state, remaining, stage="fallback", candidate_mask=None,
                 stagnation_patience=(None if state.oracle_keys is not None
                                      else config.stagnation_patience))
    state.meta["oracle_found_at"] = (
        state.trace().evals_to_front([MixedPoint((), k) for k in state.oracle_keys])
        if state.oracle_keys is not None else None
    )
    return state.trace()
