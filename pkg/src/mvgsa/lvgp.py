"""Latent variable Gaussian process for mixed design spaces.

Each qualitative variable's levels are embedded as learned 2-D latent
coordinates inside a Gaussian kernel:

    c(h, h') = exp(-sum_i phi_i (x_i - x'_i)^2 - sum_j ||z_j - z'_j||^2)

with h = [x; z(t_1); ...; z(t_m)]. The latent scale is absorbed into the
coordinates, so only the quantitative variables carry scale parameters phi.
Hyperparameters and latent coordinates are estimated by maximum likelihood
with the constant mean and process variance profiled out analytically;
optimization is multi-start L-BFGS-B with analytic gradients.

Identifiability pinning: per variable, level 1 sits at the origin and level 2
on the non-negative first axis. Without this the likelihood is invariant
under rigid motions of each latent plane and the MLE is a continuum.

Fitting runs its starts sequentially but each start has an independent
derived seed, so the result is identical to any parallel schedule. A fitted
model is immutable and safe for concurrent prediction.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.linalg.lapack import dpotrf, dpotri
from scipy.optimize import minimize

from .seeds import derive_rng
from .space import (
    Dataset,
    LevelOutOfRangeError,
    MixedDesignSpace,
    MixedEvaluator,
    MixedPoint,
    StandardizeTransform,
    points_to_arrays,
    standardize,
    validate,
)

NUGGET_MAX = 1e-2
NUGGET_MIN = 1e-12
_SIGMA2_FLOOR = 1e-14
_LN10 = math.log(10.0)


class FitError(RuntimeError):
    """Raised when no optimization start produced a usable model."""


class FactorizationError(RuntimeError):
    """Correlation matrix not factorizable even at the maximum nugget."""


@dataclass(frozen=True)
class LatentMap:
    """Per qualitative variable: an (l_j, 2) matrix of latent coordinates,
    row r-1 holding the embedding of level r."""

    coords: tuple[np.ndarray, ...]

    def __post_init__(self):
        frozen = []
        for z in self.coords:
            z = np.asarray(z, dtype=float)
            if z.ndim != 2 or z.shape[1] != 2 or z.shape[0] < 2:
                raise ValueError("each latent block must be (l_j >= 2, 2)")
            if not np.all(np.isfinite(z)):
                raise ValueError("latent coordinates must be finite")
            if z[0, 0] != 0.0 or z[0, 1] != 0.0:
                raise ValueError("level 1 must be pinned to the origin")
            if z[1, 1] != 0.0 or z[1, 0] < 0.0:
                raise ValueError("level 2 must be pinned to the non-negative first axis")
            z = z.copy()
            z.flags.writeable = False
            frozen.append(z)
        object.__setattr__(self, "coords", tuple(frozen))

    @property
    def num_levels(self) -> tuple[int, ...]:
        return tuple(z.shape[0] for z in self.coords)

    def vector_for(self, j: int, level: int) -> np.ndarray:
        z = self.coords[j]
        if not 1 <= level <= z.shape[0]:
            raise LevelOutOfRangeError(f"variable {j}: unknown level {level}")
        return z[level - 1]


@dataclass(frozen=True)
class LvgpHyperparams:
    phi_log10: np.ndarray  # (q,)
    mu: float
    sigma2: float
    nugget: float

    def __post_init__(self):
        p = np.asarray(self.phi_log10, dtype=float)
        p.flags.writeable = False
        object.__setattr__(self, "phi_log10", p)
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")
        if not NUGGET_MIN <= self.nugget <= NUGGET_MAX:
            raise ValueError(f"nugget must lie in [{NUGGET_MIN}, {NUGGET_MAX}]")

    @property
    def phi(self) -> np.ndarray:
        return 10.0 ** self.phi_log10


def to_latent(point: MixedPoint, latent_map: LatentMap) -> np.ndarray:
    """Transformed coordinates [x; z(t_1); ...; z(t_m)] in declared order."""
    if len(point.qualitative) != len(latent_map.coords):
        raise LevelOutOfRangeError("point and latent map disagree on m")
    parts = [np.asarray(point.quantitative, dtype=float)]
    for j, level in enumerate(point.qualitative):
        parts.append(latent_map.vector_for(j, level))
    return np.concatenate(parts) if parts else np.empty(0)


def correlation(h1, h2, phi) -> float:
    """Gaussian correlation between two transformed points.

    The first len(phi) entries are quantitative, the rest are consecutive
    2-D latent blocks (unit scale). Always in (0, 1], and 1 iff h1 == h2.
    """
    h1 = np.asarray(h1, dtype=float)
    h2 = np.asarray(h2, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if h1.shape != h2.shape:
        raise ValueError("points must have equal length")
    q = len(phi)
    if (len(h1) - q) % 2:
        raise ValueError("latent block must consist of 2-D pairs")
    if np.any(phi <= 0):
        raise ValueError("phi must be positive")
    dq = h1[:q] - h2[:q]
    dz = h1[q:] - h2[q:]
    return float(np.exp(-(phi * dq * dq).sum() - (dz * dz).sum()))


# ---------------------------------------------------------------------------
# Likelihood machinery
# ---------------------------------------------------------------------------

class _ParamLayout:
    """Packing of (log10 phi, free latent coordinates) into one vector.

    Free coordinates per variable: the first-axis position of level 2,
    then both components of levels 3..l. Level 1 and the second component
    of level 2 are pinned at zero.
    """

    def __init__(self, q: int, level_counts: Sequence[int],
                 phi_log_range: tuple[float, float], latent_box: float):
        self.q = q
        self.level_counts = tuple(int(l) for l in level_counts)
        self.phi_log_range = phi_log_range
        self.latent_box = latent_box
        self.n_latent_free = sum(1 + 2 * (l - 2) for l in self.level_counts)
        self.n_params = q + self.n_latent_free

    def bounds(self) -> list[tuple[float, float]]:
        lo, hi = self.phi_log_range
        out: list[tuple[float, float]] = [(lo, hi)] * self.q
        for l in self.level_counts:
            out.append((0.0, self.latent_box))
            out.extend([(-self.latent_box, self.latent_box)] * (2 * (l - 2)))
        return out

    def unpack(self, theta: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
        phi_log10 = theta[: self.q]
        coords = []
        pos = self.q
        for l in self.level_counts:
            z = np.zeros((l, 2))
            z[1, 0] = theta[pos]
            pos += 1
            if l > 2:
                z[2:] = theta[pos : pos + 2 * (l - 2)].reshape(l - 2, 2)
                pos += 2 * (l - 2)
            coords.append(z)
        return phi_log10, coords

    def pack(self, phi_log10: np.ndarray, coords: Sequence[np.ndarray]) -> np.ndarray:
        parts = [np.asarray(phi_log10, dtype=float)]
        for z in coords:
            parts.append([z[1, 0]])
            parts.append(np.asarray(z[2:], dtype=float).ravel())
        return np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in parts])

    def pack_grad(self, phi_grad: np.ndarray, coord_grads: Sequence[np.ndarray]) -> np.ndarray:
        parts = [phi_grad]
        for g in coord_grads:
            parts.append([g[1, 0]])
            parts.append(g[2:].ravel())
        return np.concatenate([np.atleast_1d(np.asarray(p, dtype=float)) for p in parts])


def _level_sqdist(z: np.ndarray) -> np.ndarray:
    """Squared latent distances between all level pairs of one variable."""
    diff = z[:, None, :] - z[None, :, :]
    return np.einsum("abc,abc->ab", diff, diff)


class _Workspace:
    """Cached per-dataset structures and reusable buffers for repeated
    likelihood evaluations.

    Latent squared distances are gathered from a per-level table through a
    precomputed flat pair index instead of broadcasting over (n, n, 2); all
    O(n^2) temporaries live in preallocated buffers. The kernel buffer is
    shared: callers must copy it if they need it past the next evaluation.
    """

    def __init__(self, xq: np.ndarray, xt: np.ndarray, y: np.ndarray,
                 level_counts: Sequence[int]):
        n = self.n = len(y)
        self.y = y
        self.ones = np.ones(n)
        self.t0 = [xt[:, j].astype(np.int64) - 1 for j in range(xt.shape[1])]
        self.level_counts = tuple(int(l) for l in level_counts)
        self.dxsq = [
            (xq[:, i, None] - xq[None, :, i]) ** 2 for i in range(xq.shape[1])
        ]
        # flat index into the (l_j, l_j) level-pair distance table
        self.pair_idx = [
            (t[:, None] * l + t[None, :]).ravel()
            for t, l in zip(self.t0, self.level_counts)
        ]
        self._B = np.empty((n, n))
        self._K = np.empty((n, n))
        self._C = np.empty((n, n))
        self._T1 = np.empty((n, n))
        self._T2 = np.empty(n * n)

    def kernel(self, phi: np.ndarray, coords: Sequence[np.ndarray]) -> np.ndarray:
        B = self._B
        B.fill(0.0)
        for i, dx in enumerate(self.dxsq):
            np.multiply(dx, phi[i], out=self._T1)
            B += self._T1
        for j, idx in enumerate(self.pair_idx):
            dlev = _level_sqdist(coords[j])
            np.take(dlev.ravel(), idx, out=self._T2)
            B += self._T2.reshape(self.n, self.n)
        np.negative(B, out=B)
        return np.exp(B, out=self._K)

    def chol(self, K: np.ndarray, nugget: float):
        """Cholesky of K + nugget*I, escalating the nugget x10 up to NUGGET_MAX."""
        n = self.n
        ng = nugget
        while True:
            np.copyto(self._C, K)
            self._C.flat[:: n + 1] += ng
            L, info = dpotrf(self._C, lower=1, overwrite_a=0, clean=1)
            if info == 0:
                return L, ng
            if ng >= NUGGET_MAX:
                raise FactorizationError(
                    f"correlation matrix not positive definite at nugget {ng:g}"
                )
            ng = min(ng * 10.0, NUGGET_MAX)

    def inverse_from_chol(self, L: np.ndarray) -> np.ndarray:
        """Symmetric inverse from the Cholesky factor (in the T1 buffer)."""
        inv, info = dpotri(L, lower=1, overwrite_c=0)
        if info != 0:
            raise FactorizationError("inverse from Cholesky factor failed")
        out = self._T1
        np.copyto(out, inv)
        out += inv.T
        out.flat[:: self.n + 1] -= np.diag(inv)
        return out


def _chol_with_escalation(K: np.ndarray, nugget: float):
    """Standalone Cholesky with nugget escalation (no workspace buffers)."""
    n = len(K)
    ng = nugget
    while True:
        try:
            L = np.linalg.cholesky(K + ng * np.eye(n))
            return L, ng
        except np.linalg.LinAlgError:
            if ng >= NUGGET_MAX:
                raise FactorizationError(
                    f"correlation matrix not positive definite at nugget {ng:g}"
                )
            ng = min(ng * 10.0, NUGGET_MAX)


def _profiled_nll(L: np.ndarray, y: np.ndarray, ones: np.ndarray, penalty: float):
    """Negative log-likelihood at the profiled mean and variance.

    Returns (nll, mu, sigma2, alpha, b) where alpha = C^-1 (y - mu 1) and
    b = C^-1 1; nll == penalty flags a degenerate (near-zero) variance.
    """
    n = len(y)
    rhs = np.column_stack([y, ones])
    sol = cho_solve((L, True), rhs)
    a, b = sol[:, 0], sol[:, 1]
    s11 = ones @ b
    mu = (ones @ a) / s11
    alpha = a - mu * b
    sigma2 = ((y - mu) @ alpha) / n
    if not np.isfinite(sigma2) or sigma2 < _SIGMA2_FLOOR:
        return penalty, mu, sigma2, alpha, b
    logdet = 2.0 * np.log(np.diag(L)).sum()
    nll = 0.5 * n * np.log(sigma2) + 0.5 * logdet
    return float(nll), float(mu), float(sigma2), alpha, b


def neg_log_likelihood(dataset: Dataset, latent_map: LatentMap, phi,
                       nugget: float = 1e-8, penalty: float = 1e10) -> float:
    """Profiled negative log-likelihood of the data as given (no rescaling).

    mu and sigma2 are profiled analytically; the returned value omits the
    n/2*log(2*pi*e) constant, identically for every call. Degenerate variance
    (e.g. identical outputs) yields `penalty`. Raises FactorizationError if
    the correlation matrix cannot be factorized even after nugget escalation.
    """
    if dataset.p != 1:
        raise FitError("single-response dataset required")
    if dataset.n < 2:
        raise FitError("need n >= 2")
    ws = _Workspace(dataset.xq, dataset.xt, dataset.outputs[:, 0],
                    [v.num_levels for v in dataset.space.qualitative])
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    K = ws.kernel(phi, latent_map.coords)
    L, _ = ws.chol(K, nugget)
    nll, *_ = _profiled_nll(L, ws.y, ws.ones, penalty)
    return nll


def _nll_and_grad(theta: np.ndarray, ws: _Workspace, layout: _ParamLayout,
                  nugget: float, penalty: float):
    phi_log10, coords = layout.unpack(theta)
    phi = 10.0 ** phi_log10
    K = ws.kernel(phi, coords)
    try:
        L, _ = ws.chol(K, nugget)
    except FactorizationError:
        return penalty, np.zeros(layout.n_params), False
    nll, mu, sigma2, alpha, _ = _profiled_nll(L, ws.y, ws.ones, penalty)
    if nll == penalty:
        return penalty, np.zeros(layout.n_params), False

    # d(nll)/dtheta = 0.5 * sum_ab (Cinv - alpha alpha^T / sigma2) * dC,
    # with dC = K o (-dB); the nugget diagonal is theta-independent.
    E = ws.inverse_from_chol(L)                       # T1 <- Cinv
    np.multiply(alpha[:, None], alpha[None, :], out=ws._C)
    ws._C *= 1.0 / sigma2
    E -= ws._C                                        # T1 <- G
    E *= K                                            # T1 <- G o K

    phi_grad = np.array([
        -0.5 * _LN10 * phi[i] * float(np.einsum("ab,ab->", E, ws.dxsq[i]))
        for i in range(layout.q)
    ])
    s = E.sum(axis=1)
    coord_grads = []
    for j, t0 in enumerate(ws.t0):
        l = ws.level_counts[j]
        zl = coords[j][t0]
        T = zl * s[:, None] - E @ zl
        acc = np.column_stack([
            np.bincount(t0, weights=T[:, 0], minlength=l),
            np.bincount(t0, weights=T[:, 1], minlength=l),
        ])
        coord_grads.append(-2.0 * acc)
    return nll, layout.pack_grad(phi_grad, coord_grads), True


@dataclass(frozen=True)
class FitConfig:
    """Multi-start MLE settings.

    With explore_iters > 0 the optimization is two-phase: every start runs
    for explore_iters iterations, then only the keep_top best continue to
    max_iters. That trades the strict more-starts-never-hurts guarantee of
    the default full-depth mode for the ability to afford many starts on
    large datasets.
    """

    starts: int = 8
    max_iters: int = 200
    seed: int = 0
    latent_box: float = 10.0
    phi_log_range: tuple[float, float] = (-3.0, 3.0)
    nugget: float = 1e-8
    degenerate_penalty: float = 1e10
    explore_iters: int = 0
    keep_top: int = 2

    def __post_init__(self):
        if not NUGGET_MIN <= self.nugget <= NUGGET_MAX:
            raise ValueError(f"nugget must lie in [{NUGGET_MIN}, {NUGGET_MAX}]")
        if self.starts < 0:
            raise ValueError("starts must be >= 0")
        if self.keep_top < 1:
            raise ValueError("keep_top must be >= 1")


@dataclass(frozen=True)
class LvgpModel:
    """Fitted surrogate with its factorized correlation matrix.

    Training inputs are kept on the [0,1] scale, outputs standardized; the
    recorded transform maps predictions back to the raw scale. Immutable.
    """

    space: MixedDesignSpace
    transform: StandardizeTransform
    latent_map: LatentMap
    params: LvgpHyperparams
    xq_unit: np.ndarray
    xt: np.ndarray
    y_std: np.ndarray
    y_raw: np.ndarray
    chol: np.ndarray
    cinv: np.ndarray
    weights: np.ndarray       # C^-1 (y - mu 1)
    cinv_ones: np.ndarray     # C^-1 1
    nll: float
    n_free_params: int
    config: FitConfig

    def __post_init__(self):
        for name in ("xq_unit", "xt", "y_std", "y_raw", "chol", "cinv",
                     "weights", "cinv_ones"):
            a = np.asarray(getattr(self, name))
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def n(self) -> int:
        return len(self.y_std)

    @cached_property
    def _s11(self) -> float:
        return float(np.ones(self.n) @ self.cinv_ones)

    @cached_property
    def _l_inv_ones(self) -> np.ndarray:
        v = solve_triangular(self.chol, np.ones(self.n), lower=True)
        v.flags.writeable = False
        return v

    @property
    def theta(self) -> np.ndarray:
        layout = _ParamLayout(self.space.q, self.latent_map.num_levels,
                              self.config.phi_log_range, self.config.latent_box)
        return layout.pack(self.params.phi_log10, self.latent_map.coords)

    # -- kernel helpers ----------------------------------------------------

    def _cross_corr(self, xq_unit: np.ndarray, xt: np.ndarray) -> np.ndarray:
        phi = self.params.phi
        B = np.zeros((len(xq_unit), self.n))
        for i in range(self.space.q):
            B += phi[i] * (xq_unit[:, i, None] - self.xq_unit[None, :, i]) ** 2
        for j in range(self.space.m):
            dlev = _level_sqdist(self.latent_map.coords[j])
            B += dlev[xt[:, j] - 1][:, self.xt[:, j] - 1]
        return np.exp(-B)

    def _unit_inputs(self, points: Sequence[MixedPoint]):
        for p in points:
            validate(p, self.space)
        xq, xt = points_to_arrays(points, self.space)
        return self.transform.xq_to_unit(xq), xt

    # -- prediction ---------------------------------------------------------

    def predict(self, point: MixedPoint) -> tuple[float, float]:
        """Posterior mean and variance (raw output scale) at one point."""
        mean, var = self.predict_batch([point])
        return float(mean[0]), float(var[0])

    def predict_batch(self, points: Sequence[MixedPoint]):
        """Vectorized predict; element-for-element identical to predict().

        The reductions run through einsum so each row's arithmetic is
        independent of the batch size.
        """
        xq_unit, xt = self._unit_inputs(points)
        Kb = self._cross_corr(xq_unit, xt)
        mean_std = self.params.mu + np.einsum("bi,i->b", Kb, self.weights)
        q1 = np.einsum("bi,ij,bj->b", Kb, self.cinv, Kb)
        q2 = np.einsum("bi,i->b", Kb, self.cinv_ones)
        var_std = self.params.sigma2 * (
            1.0 + self.params.nugget - q1 + (1.0 - q2) ** 2 / self._s11
        )
        var_std = np.maximum(var_std, 0.0)
        scale = self.transform.out_scale[0]
        center = self.transform.out_center[0]
        return mean_std * scale + center, var_std * scale * scale

    def posterior_mean(self, xq_raw: np.ndarray, xt: np.ndarray) -> np.ndarray:
        """Fast batched posterior mean (raw scale) on column-blocked arrays."""
        Kb = self._cross_corr(self.transform.xq_to_unit(xq_raw), np.asarray(xt, np.int64))
        mean_std = self.params.mu + Kb @ self.weights
        return mean_std * self.transform.out_scale[0] + self.transform.out_center[0]

    def posterior_mean_sd(self, xq_raw: np.ndarray, xt: np.ndarray):
        """Fast batched posterior mean and standard deviation (raw scale).

        BLAS-backed; may differ from predict_batch in the last bits but is
        run-to-run deterministic.
        """
        Kb = self._cross_corr(self.transform.xq_to_unit(xq_raw), np.asarray(xt, np.int64))
        mean_std = self.params.mu + Kb @ self.weights
        v = solve_triangular(self.chol, Kb.T, lower=True)
        q1 = np.einsum("ib,ib->b", v, v)
        q2 = self._l_inv_ones @ v
        var_std = self.params.sigma2 * (
            1.0 + self.params.nugget - q1 + (1.0 - q2) ** 2 / self._s11
        )
        var_std = np.maximum(var_std, 0.0)
        scale = self.transform.out_scale[0]
        return (mean_std * scale + self.transform.out_center[0],
                np.sqrt(var_std) * abs(scale))

    def as_evaluator(self, tag: str = "metamodel") -> MixedEvaluator:
        return MixedEvaluator(
            space=self.space,
            fn=lambda xq, xt: self.posterior_mean(xq, xt),
            n_outputs=1,
            tag=tag,
        )

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        xq_raw = self.transform.xq_from_unit(self.xq_unit)
        return {
            "space": self.space.to_dict(),
            "transform": self.transform.to_dict(),
            "latent_map": [z.tolist() for z in self.latent_map.coords],
            "hyperparams": {
                "phi_log10": self.params.phi_log10.tolist(),
                "mu": self.params.mu,
                "sigma2": self.params.sigma2,
                "nugget": self.params.nugget,
            },
            "training": {
                "xq": xq_raw.tolist(),
                "xt": self.xt.tolist(),
                "y": self.y_raw.tolist(),
            },
            "nll": self.nll,
            "config": {
                "starts": self.config.starts,
                "max_iters": self.config.max_iters,
                "seed": self.config.seed,
                "latent_box": self.config.latent_box,
                "phi_log_range": list(self.config.phi_log_range),
                "nugget": self.config.nugget,
                "degenerate_penalty": self.config.degenerate_penalty,
            },
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "LvgpModel":
        space = MixedDesignSpace.from_dict(d["space"])
        transform = StandardizeTransform.from_dict(d["transform"])
        latent_map = LatentMap(tuple(np.asarray(z, float) for z in d["latent_map"]))
        hp = d["hyperparams"]
        params = LvgpHyperparams(np.asarray(hp["phi_log10"], float),
                                 float(hp["mu"]), float(hp["sigma2"]), float(hp["nugget"]))
        cfg = d["config"]
        config = FitConfig(starts=cfg["starts"], max_iters=cfg["max_iters"],
                           seed=cfg["seed"], latent_box=cfg["latent_box"],
                           phi_log_range=tuple(cfg["phi_log_range"]),
                           nugget=cfg["nugget"],
                           degenerate_penalty=cfg["degenerate_penalty"])
        xq_raw = np.asarray(d["training"]["xq"], float)
        xt = np.asarray(d["training"]["xt"], np.int64)
        y_raw = np.asarray(d["training"]["y"], float)
        xq_unit = transform.xq_to_unit(xq_raw)
        y_std = transform.outputs_to_std(y_raw[:, None])[:, 0]
        return _assemble_model(space, transform, latent_map, params,
                               xq_unit, xt, y_std, y_raw,
                               float(d["nll"]), config)

    @classmethod
    def load(cls, path) -> "LvgpModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _assemble_model(space, transform, latent_map, params, xq_unit, xt,
                    y_std, y_raw, nll, config) -> LvgpModel:
    """Rebuild factorization and weight vector from primary quantities."""
    ws = _Workspace(xq_unit, xt, y_std,
                    [v.num_levels for v in space.qualitative])
    K = ws.kernel(params.phi, latent_map.coords)
    L = np.linalg.cholesky(K + params.nugget * np.eye(ws.n))
    rhs = np.column_stack([y_std, ws.ones])
    sol = cho_solve((L, True), rhs)
    b = sol[:, 1]
    alpha = sol[:, 0] - params.mu * b
    cinv = cho_solve((L, True), np.eye(ws.n))
    layout = _ParamLayout(space.q, latent_map.num_levels,
                          config.phi_log_range, config.latent_box)
    return LvgpModel(
        space=space, transform=transform, latent_map=latent_map, params=params,
        xq_unit=xq_unit, xt=xt, y_std=y_std, y_raw=y_raw,
        chol=L, cinv=cinv, weights=alpha, cinv_ones=b,
        nll=nll, n_free_params=layout.n_params, config=config,
    )


def fit(dataset: Dataset, config: FitConfig = FitConfig(),
        warm_starts: Sequence[np.ndarray] = ()) -> LvgpModel:
    """Maximum-likelihood fit of an LVGP to a single-response dataset.

    Runs `config.starts` box-constrained L-BFGS-B optimizations (one from
    zero latents and mid-range phi, the rest from seeded random starts; any
    `warm_starts` thetas are prepended) and keeps the best. Reproducible
    given config.seed.
    """
    if dataset.p != 1:
        raise FitError("single-response dataset required; fit one model per response")
    if dataset.n < 2:
        raise FitError("need n >= 2")
    std, transform = standardize(dataset)
    y_std = std.outputs[:, 0]
    xq_unit, xt = std.xq, std.xt

    layout = _ParamLayout(dataset.space.q,
                          [v.num_levels for v in dataset.space.qualitative],
                          config.phi_log_range, config.latent_box)
    if dataset.n < layout.n_params:
        warnings.warn(
            f"n={dataset.n} below free parameter count {layout.n_params}; "
            "the fit may be underdetermined"
        )

    if transform.degenerate[0]:
        # Constant response: nothing to learn. Degenerate flat model.
        warnings.warn("constant response; returning a degenerate flat model")
        mid = 0.5 * (config.phi_log_range[0] + config.phi_log_range[1])
        phi_log10, coords = layout.unpack(
            np.concatenate([np.full(layout.q, mid), np.zeros(layout.n_latent_free)])
        )
        params = LvgpHyperparams(phi_log10, float(y_std.mean()),
                                 float(np.finfo(float).tiny), config.nugget)
        return _assemble_model(dataset.space, transform, LatentMap(tuple(coords)),
                               params, xq_unit, xt, y_std,
                               dataset.outputs[:, 0], float("nan"), config)

    ws = _Workspace(xq_unit, xt, y_std,
                    [v.num_levels for v in dataset.space.qualitative])
    mid = 0.5 * (config.phi_log_range[0] + config.phi_log_range[1])

    def start_theta(k: int) -> np.ndarray:
        if k == 0:
            # Near-zero latents with a deterministic stagger: the exact
            # all-zeros configuration is a stationary point (all latent
            # gradients vanish by symmetry) and would pin the optimizer.
            lat = []
            for l in layout.level_counts:
                lat.append(0.05)
                for r in range(3, l + 1):
                    lat.append(0.05 * (r - 1))
                    lat.append(0.025 * (r - 2) * (-1) ** r)
            return np.concatenate([np.full(layout.q, mid),
                                   np.asarray(lat, dtype=float)])
        if k == 1:
            # Main-effect start: place each level along the first axis by its
            # mean standardized response relative to level 1. Usually lands
            # in the right basin when level effects are roughly additive.
            lat = []
            for j, l in enumerate(layout.level_counts):
                means = np.zeros(l)
                for r in range(l):
                    rows = ws.t0[j] == r
                    if rows.any():
                        means[r] = y_std[rows].mean()
                v = np.clip(means - means[0], -3.0, 3.0)
                sign = 1.0 if v[1] >= 0 else -1.0
                lat.append(max(abs(v[1]), 0.05))
                for r in range(2, l):
                    lat.append(sign * v[r])
                    lat.append(0.05 * (r - 1))
            return np.concatenate([np.full(layout.q, mid),
                                   np.asarray(lat, dtype=float)])
        rng = derive_rng(config.seed, "fit-start", k)
        lo, hi = config.phi_log_range
        phi0 = rng.uniform(max(lo, -1.5), min(hi, 1.5), size=layout.q)
        lat = []
        for l in layout.level_counts:
            lat.append(rng.uniform(0.0, 2.0, size=1))
            lat.append(rng.uniform(-2.0, 2.0, size=2 * (l - 2)))
        return np.concatenate([phi0, *lat]) if lat or layout.q else np.empty(0)

    thetas = [np.asarray(t, dtype=float) for t in warm_starts]
    thetas += [start_theta(k) for k in range(config.starts)]
    if not thetas:
        raise FitError("starts=0 requires at least one warm start")
    bounds = layout.bounds()

    def objective(theta):
        val, grad, _ = _nll_and_grad(theta, ws, layout, config.nugget,
                                     config.degenerate_penalty)
        return val, grad

    lo_b = np.array([b[0] for b in bounds])
    hi_b = np.array([b[1] for b in bounds])

    def local_run(theta0, maxiter):
        res = minimize(objective, np.clip(theta0, lo_b, hi_b), jac=True,
                       method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": maxiter})
        valid = np.isfinite(res.fun) and res.fun < 0.5 * config.degenerate_penalty
        return float(res.fun), res.x.copy(), res.message, valid

    if config.explore_iters > 0 and len(thetas) > config.keep_top:
        probes = [local_run(t, config.explore_iters) for t in thetas]
        probes.sort(key=lambda r: r[0])
        thetas = [x for _f, x, _m, valid in probes[: config.keep_top] if valid]
        if not thetas:
            raise FitError(f"all exploration starts failed: "
                           f"{[(f, m) for f, _x, m, _v in probes]}")

    best = None
    diagnostics = []
    for theta0 in thetas:
        fun, x, message, valid = local_run(theta0, config.max_iters)
        diagnostics.append((fun, message, valid))
        if valid and (best is None or fun < best[0]):
            best = (fun, x)
    if best is None:
        raise FitError(f"all starts failed: {diagnostics}")

    nll_best, theta_best = best
    phi_log10, coords = layout.unpack(theta_best)
    K = ws.kernel(10.0 ** phi_log10, coords)
    L, nugget_eff = ws.chol(K, config.nugget)
    _, mu, sigma2, _, _ = _profiled_nll(L, y_std, ws.ones, config.degenerate_penalty)
    sigma2 = max(sigma2, _SIGMA2_FLOOR)
    params = LvgpHyperparams(phi_log10, mu, sigma2, nugget_eff)
    return _assemble_model(dataset.space, transform, LatentMap(tuple(coords)),
                           params, xq_unit, xt, y_std, dataset.outputs[:, 0],
                           nll_best, config)


def relative_rmse(model: LvgpModel, dataset: Dataset) -> float:
    """Holdout RMSE of the posterior mean divided by the holdout response std."""
    pred = model.posterior_mean(dataset.xq, dataset.xt)
    y = dataset.outputs[:, 0]
    denom = y.std()
    if denom == 0:
        denom = 1.0
    return float(np.sqrt(np.mean((pred - y) ** 2)) / denom)
