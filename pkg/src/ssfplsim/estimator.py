"""Penalized profile least squares for the sparse semi-functional partial linear
single-index model.

For a fixed direction ``theta`` and bandwidth ``h`` the response and the scalar
covariates are profiled with ``(I - W_{h,theta})``, which leaves an approximately
linear model.  Its SCAD-penalized least-squares path is computed by coordinate
descent, and the triple ``(theta, h, lambda)`` with the smallest BIC wins.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np
from scipy import linalg

from .exceptions import (
    DegenerateProjection,
    EmptyNeighborhood,
    NoFeasibleFit,
    NumericalDivergence,
    SingularDesign,
)
from .functional import (
    BSplineBasis,
    Direction,
    FunctionalSample,
    calibrate_direction,
    gram_matrix,
)
from .scad import _penalty, _threshold
from .smoothing import bandwidths_from_projections, profile_transform, weight_matrix

__all__ = [
    "ProfiledDesign",
    "LambdaSchedule",
    "FitConfig",
    "FitResult",
    "LinearFit",
    "build_profiled_design",
    "profiled_ols",
    "coordinate_descent_scad",
    "penalized_objective",
    "bic_score",
    "direction_candidates",
    "refine_candidates",
    "fit_ssfplsim",
    "fit_sparse_linear",
]

log = logging.getLogger(__name__)

RSS_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ProfiledDesign:
    y_tilde: np.ndarray
    x_tilde: np.ndarray
    theta: Direction | None = None
    h: float | None = None

    def __post_init__(self):
        y = np.asarray(self.y_tilde, dtype=float)
        x = np.asarray(self.x_tilde, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim != 1 or x.shape[0] != y.shape[0]:
            raise ValueError("y_tilde must be a vector with as many rows as x_tilde")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("profiled design contains non-finite values")
        object.__setattr__(self, "y_tilde", y)
        object.__setattr__(self, "x_tilde", x)

    @property
    def n(self) -> int:
        return self.x_tilde.shape[0]

    @property
    def p(self) -> int:
        return self.x_tilde.shape[1]


@dataclass(frozen=True)
class LambdaSchedule:
    """Per-coefficient SCAD levels ``lambda_j = base_lambda * sigma_j``."""

    base_lambda: float
    per_coefficient: np.ndarray

    def __post_init__(self):
        per = np.asarray(self.per_coefficient, dtype=float)
        if np.any(per < 0) or not np.all(np.isfinite(per)):
            raise ValueError("per-coefficient levels must be finite and non-negative")
        object.__setattr__(self, "per_coefficient", per)

    @classmethod
    def from_sigma(cls, base_lambda: float, sigma) -> "LambdaSchedule":
        return cls(float(base_lambda), float(base_lambda) * np.asarray(sigma, dtype=float))


@dataclass(frozen=True)
class FitConfig:
    """Tuning of :func:`fit_ssfplsim`.

    ``lambdas`` overrides the geometric path (values are base levels, e.g.
    ``(0.0,)`` for plain profiled least squares).  ``true_support`` (0-based)
    is only used for the oracle baseline in simulations.
    """

    a: float = 3.7
    h_count: int = 8
    h_low: float = 0.05
    h_high: float = 0.5
    lambda_count: int = 50
    lambda_ratio: float = 1e-3
    lambdas: tuple[float, ...] | None = None
    tol: float = 1e-6
    max_iter: int = 1000
    leave_one_out: bool = False
    ridge: float = 1e-8
    ridge_cond: float = 1e10
    seed_values: tuple[float, ...] = (-1.0, 0.0, 1.0)
    calibration: str = "gauss6"
    refine: bool = False
    refine_step: float = 0.5
    baselines: bool = False
    true_support: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.h_count < 1 or self.lambda_count < 1:
            raise ValueError("grid sizes must be positive")
        if not 0 < self.lambda_ratio < 1:
            raise ValueError("lambda_ratio must lie in (0, 1)")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter at least 1")


@dataclass(frozen=True, eq=False)
class FitResult:
    beta_hat: np.ndarray
    theta_hat: Direction
    selected: tuple[int, ...]
    h_hat: float
    lambda_hat: float
    bic: float
    objective_value: float
    iterations: int
    converged: bool = True
    candidates_evaluated: int = 0
    pairs_failed: int = 0
    baselines: dict | None = field(default=None)

    def __post_init__(self):
        beta = np.asarray(self.beta_hat, dtype=float)
        object.__setattr__(self, "beta_hat", beta)
        nz = tuple(int(j) for j in np.flatnonzero(beta))
        if tuple(self.selected) != nz:
            raise ValueError("selected set must equal the support of beta_hat")


@dataclass(frozen=True, eq=False)
class LinearFit:
    """Sparse linear model (no functional part): ``y = intercept + x' beta``."""

    intercept: float
    beta_hat: np.ndarray
    selected: tuple[int, ...]
    lambda_hat: float
    bic: float

    def predict(self, x) -> np.ndarray:
        return self.intercept + np.atleast_2d(np.asarray(x, dtype=float)) @ self.beta_hat


# --------------------------------------------------------------------------
# numba kernels, all in standardized coordinates with 1/n scaling:
#   G = Z'Z / n, c = Z'y / n, yy = y'y / n


@numba.njit(cache=True)
def _objective(b, c, r, yy, lam, a):
    # 1/2 RSS/n + sum P(|b_j|), using r = c - G b so that b'Gb = b'c - b'r
    rss = yy - 2.0 * (b @ c) + (b @ c - b @ r)
    pen = 0.0
    for j in range(b.size):
        if b[j] != 0.0:
            pen += _penalty(abs(b[j]), lam[j], a)
    return 0.5 * rss + pen


@numba.njit(cache=True)
def _cd(G, c, yy, lam, a, b, tol, max_iter, trace):
    p = b.size
    r = c - G @ b
    it = 0
    converged = False
    while it < max_iter:
        it += 1
        maxd = 0.0
        for j in range(p):
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            z = b[j] + r[j] / gjj
            new = _threshold(z, gjj, lam[j], a)
            d = new - b[j]
            if d != 0.0:
                b[j] = new
                # G is symmetric; walk row j for contiguous access
                for k in range(p):
                    r[k] -= G[j, k] * d
                ad = abs(d)
                if ad > maxd:
                    maxd = ad
        if it <= trace.size:
            trace[it - 1] = _objective(b, c, r, yy, lam, a)
        if not np.isfinite(maxd):
            break
        if maxd < tol:
            converged = True
            break
    # fresh residual correlation for the final objective
    r = c - G @ b
    return it, converged, _objective(b, c, r, yy, lam, a)


@numba.njit(cache=True)
def _rss_over_n(G, c, yy, b):
    s = yy - 2.0 * (b @ c)
    idx = np.flatnonzero(b)
    for i in idx:
        for k in idx:
            s += b[i] * G[i, k] * b[k]
    return s


@numba.njit(cache=True)
def _scad_path(G, c, yy, sigma, lambdas, a, tol, max_iter, n, rss_floor, betas, bics, objs, iters, conv):
    # Walks the path from the largest level down with warm starts.  ``rss_floor``
    # is the least-squares RSS/n: a model with df nonzeros cannot score below
    # n log(rss_floor) + df log n, so the walk stops once the current df makes
    # that bound exceed the best BIC seen on this path.  This assumes df does not
    # fall further down the path.  Skipped levels get +inf.
    p = c.size
    b = np.zeros(p)
    empty = np.zeros(0)
    lam = np.empty(p)
    logn = math.log(n)
    floor_term = n * math.log(max(rss_floor, 1e-12 / n))
    best = np.inf
    for k in range(lambdas.size):
        for j in range(p):
            lam[j] = lambdas[k] * sigma[j]
        it, ok, obj = _cd(G, c, yy, lam, a, b, tol, max_iter, empty)
        betas[k, :] = b
        rss = n * _rss_over_n(G, c, yy, b)
        if rss < 1e-12:
            rss = 1e-12
        df = 0
        for j in range(p):
            if b[j] != 0.0:
                df += 1
        bics[k] = n * math.log(rss / n) + df * logn
        objs[k] = obj
        iters[k] = it
        conv[k] = ok
        if bics[k] < best:
            best = bics[k]
        # the margin keeps rounding from cutting off exact BIC ties, which the
        # tie-break resolves towards the smaller level further down the path
        if floor_term + df * logn > best + 1e-9 * (1.0 + abs(best)):
            for m in range(k + 1, lambdas.size):
                bics[m] = np.inf
                objs[m] = np.inf
            return k + 1
    return lambdas.size


# --------------------------------------------------------------------------
# public building blocks


def build_profiled_design(
    sample: FunctionalSample, x, y, theta: Direction, h: float, leave_one_out: bool = False
) -> ProfiledDesign:
    """Profile ``y`` and ``x`` along ``theta`` with bandwidth ``h``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if not (x.shape[0] == y.shape[0] == sample.n):
        raise ValueError("sample, x and y must have the same number of rows")
    try:
        w = weight_matrix(theta, h, sample, leave_one_out)
    except EmptyNeighborhood as exc:
        raise EmptyNeighborhood(exc.index, h, f"empty neighborhood at row {exc.index} for h={h}") from exc
    return ProfiledDesign(profile_transform(y, w), profile_transform(x, w), theta, float(h))


def _factor(gram: np.ndarray, ridge: float, ridge_cond: float | None, n: int, p: int):
    """Cholesky factor of ``gram`` plus the ridge actually used.

    With ``ridge_cond`` set the ridge is only added when the system is
    ill-conditioned or ``p >= n``; otherwise ``ridge`` is always added and
    ``ridge == 0`` on a singular system raises :class:`SingularDesign`.
    """
    scale = max(float(np.max(np.diag(gram))), np.finfo(float).tiny)

    def chol(mat):
        try:
            cf = linalg.cho_factor(mat, lower=False, check_finite=False)
        except linalg.LinAlgError:
            return None, 0.0
        anorm = np.max(np.sum(np.abs(mat), axis=0))
        rcond, _ = linalg.lapack.dpocon(cf[0], anorm)
        return cf, float(rcond)

    if ridge_cond is None:
        used = float(ridge)
        cf, rcond = chol(gram + used * np.eye(p)) if used else chol(gram)
        if cf is None or (used == 0 and rcond < 1e-14):
            raise SingularDesign("profiled normal equations are singular; use ridge > 0")
        return cf, used
    cf, rcond = (None, 0.0) if p >= n else chol(gram)
    if cf is not None and rcond * ridge_cond >= 1.0:
        return cf, 0.0
    used = float(ridge) * scale
    cf, rcond = chol(gram + used * np.eye(p))
    if cf is None:
        raise SingularDesign("profiled normal equations are singular even with ridge")
    return cf, used


def _ols_from_gram(gram, xty, yty, n, ridge, ridge_cond=None):
    p = gram.shape[0]
    cf, used = _factor(gram, ridge, ridge_cond, n, p)
    beta = linalg.cho_solve(cf, xty, check_finite=False)
    inv_diag = np.diag(linalg.cho_solve(cf, np.eye(p), check_finite=False))
    rss = max(yty - 2.0 * beta @ xty + beta @ gram @ beta, 0.0)
    df = min(p, n - 1)
    s2 = rss / (n - df)
    return beta, np.sqrt(s2 * np.maximum(inv_diag, 0.0)), used


def profiled_ols(d: ProfiledDesign, ridge: float = 0.0):
    """Least squares on the profiled design and standard errors of the coefficients.

    Returns ``(beta, sigma_hat)``.
    """
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    xt, yt = d.x_tilde, d.y_tilde
    beta, sigma, _ = _ols_from_gram(xt.T @ xt, xt.T @ yt, yt @ yt, d.n, ridge)
    return beta, sigma


def _standardize(xt: np.ndarray):
    scale = np.sqrt(np.mean(xt * xt, axis=0))
    live = scale > 1e-12 * max(float(np.max(scale, initial=0.0)), 1e-300)
    return np.where(live, scale, 1.0), live


def penalized_objective(d: ProfiledDesign, beta, schedule: LambdaSchedule, a: float = 3.7) -> float:
    """Profile least-squares objective with SCAD penalty, in standardized coefficients.

    ``1/2 ||y~ - X~ beta||^2 + n * sum_j P_{s_j lambda_j}(s_j |beta_j|)`` where
    ``s_j`` is the root mean square of column ``j`` of ``X~``.
    """
    beta = np.asarray(beta, dtype=float)
    resid = d.y_tilde - d.x_tilde @ beta
    scale, _ = _standardize(d.x_tilde)
    pen = 0.0
    for j, bj in enumerate(beta):
        if bj != 0.0:
            pen += _penalty(abs(bj) * scale[j], schedule.per_coefficient[j] * scale[j], a)
    return 0.5 * float(resid @ resid) + d.n * pen


def coordinate_descent_scad(
    d: ProfiledDesign,
    schedule: LambdaSchedule,
    a: float = 3.7,
    init=None,
    tol: float = 1e-6,
    max_iter: int = 1000,
    trace: bool = False,
):
    """Minimise the penalized profile objective over ``beta`` by cyclic coordinate descent.

    Columns are standardized to unit second moment for the descent (levels
    rescale accordingly) and coefficients are returned on the original scale.
    Returns ``(beta, objective, iterations, converged)`` and, with
    ``trace=True``, the objective after every full cycle as a fifth element.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    n, p = d.n, d.p
    scale, live = _standardize(d.x_tilde)
    z = d.x_tilde / scale
    z[:, ~live] = 0.0
    G = z.T @ z / n
    c = z.T @ d.y_tilde / n
    yy = float(d.y_tilde @ d.y_tilde) / n
    lam = np.asarray(schedule.per_coefficient, dtype=float) * scale
    if init is None:
        b = np.zeros(p)
    else:
        b = np.asarray(init, dtype=float) * scale
        if b.shape != (p,) or not np.all(np.isfinite(b)):
            raise ValueError("init must be a finite vector of length p")
        b = np.where(live, b, 0.0)
    tr = np.full(max_iter if trace else 0, np.nan)
    it, converged, obj = _cd(G, c, yy, lam, float(a), b, float(tol), int(max_iter), tr)
    if not np.isfinite(obj) or not np.all(np.isfinite(b)):
        raise NumericalDivergence("coordinate descent objective became non-finite")
    beta = b / scale
    out = (beta, n * obj, int(it), bool(converged))
    if trace:
        return out + (n * tr[: min(it, tr.size)],)
    return out


def bic_score(d: ProfiledDesign, beta) -> float:
    """``n log(RSS/n) + df log n`` with ``df`` the number of nonzero coefficients."""
    beta = np.asarray(beta, dtype=float)
    resid = d.y_tilde - d.x_tilde @ beta
    rss = max(float(resid @ resid), RSS_FLOOR)
    df = int(np.count_nonzero(beta))
    return d.n * math.log(rss / d.n) + df * math.log(d.n)


# --------------------------------------------------------------------------
# candidate directions


def direction_candidates(basis: BSplineBasis, config: FitConfig | None = None) -> list[Direction]:
    """Calibrated directions with seed coefficients in ``config.seed_values``.

    Seeds are enumerated lexicographically; the zero seed and sign duplicates
    (seeds whose first nonzero entry is negative) are skipped.
    """
    config = config or FitConfig()
    if basis.dimension < 2:
        raise ValueError("basis dimension must be at least 2")
    gram = gram_matrix(basis, config.calibration)
    out, seen = [], set()
    for seed in itertools.product(sorted(set(config.seed_values)), repeat=basis.dimension):
        nz = [s for s in seed if s != 0]
        if not nz or nz[0] < 0:
            continue
        theta = calibrate_direction(seed, basis, config.calibration, gram=gram)
        key = tuple(np.round(theta.coefficients, 12))
        if key in seen:
            continue
        seen.add(key)
        out.append(theta)
    return out


def refine_candidates(
    best: Direction, basis: BSplineBasis, step: float = 0.5, rule: str = "gauss6"
) -> list[Direction]:
    """Perturb each coefficient of ``best`` by ``+-step`` (relative to its largest
    entry) and recalibrate."""
    gram = gram_matrix(basis, rule)
    alpha = np.asarray(best.coefficients, dtype=float)
    unit = alpha / np.max(np.abs(alpha))
    out = []
    for j in range(alpha.size):
        for sgn in (-1.0, 1.0):
            trial = unit.copy()
            trial[j] += sgn * step
            if not np.any(trial):
                continue
            out.append(calibrate_direction(trial, basis, rule, gram=gram))
    return out


# --------------------------------------------------------------------------
# the search


@dataclass
class _PairBest:
    key: tuple
    cand: int
    h: float
    lam: float
    bic: float
    obj: float
    iters: int
    converged: bool
    beta: np.ndarray  # original scale


def _lambda_grid(lam_max: float, config: FitConfig) -> np.ndarray:
    if config.lambdas is not None:
        return np.asarray(sorted(config.lambdas, reverse=True), dtype=float)
    if not lam_max > 0:
        return np.zeros(1)
    return lam_max * np.geomspace(1.0, config.lambda_ratio, config.lambda_count)


def _fit_profiled_gram(G, c, yy, n, live, config: FitConfig):
    """SCAD path with BIC on a standardized Gram system; returns the best step."""
    G = np.ascontiguousarray(G)
    c = np.ascontiguousarray(c)
    p = c.size
    sigma = np.zeros(p)
    beta_ols = np.zeros(p)
    if live.any():
        idx = np.flatnonzero(live)
        bo, so, _ = _ols_from_gram(
            n * G[np.ix_(idx, idx)], n * c[idx], n * yy, n, config.ridge, config.ridge_cond
        )
        sigma[idx] = so
        beta_ols[idx] = bo
    rss_ols = _rss_over_n(G, c, yy, beta_ols)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(live & (sigma > 0), np.abs(c) / sigma, 0.0)
    lam_max = float(np.max(ratio, initial=0.0))
    lambdas = _lambda_grid(lam_max, config)
    L = lambdas.size
    betas = np.zeros((L, p))
    bics = np.empty(L)
    objs = np.empty(L)
    iters = np.zeros(L, dtype=np.int64)
    conv = np.zeros(L, dtype=np.bool_)
    G = np.where(np.outer(live, live), G, 0.0)
    c = np.where(live, c, 0.0)
    done = _scad_path(G, c, float(yy), sigma, lambdas, float(config.a), float(config.tol),
                      int(config.max_iter), float(n), float(rss_ols), betas, bics, objs, iters, conv)
    if not np.all(np.isfinite(objs[:done])):
        raise NumericalDivergence("coordinate descent objective became non-finite")
    # smallest BIC, ties to the smaller lambda
    order = np.lexsort((lambdas, bics))
    k = int(order[0])
    return lambdas[k], bics[k], n * objs[k], int(iters.sum()), bool(conv[k]), betas[k]


def _evaluate_pair(u, Dabs, A, h, config: FitConfig):
    n, q = A.shape
    r = Dabs / h
    K = np.where(r < 1.0, 1.0 - r * r, 0.0)
    if config.leave_one_out:
        np.fill_diagonal(K, 0.0)
    tot = K.sum(axis=1)
    if np.any(tot <= 0):
        raise EmptyNeighborhood(int(np.flatnonzero(tot <= 0)[0]), h)
    At = A - (K / tot[:, None]) @ A
    scale, live = _standardize(At[:, :-1])
    At[:, :-1] /= scale
    M = At.T @ At / n
    G, c, yy = M[:-1, :-1], M[:-1, -1], float(M[-1, -1])
    lam, bic, obj, iters, conv, b = _fit_profiled_gram(G, c, yy, n, live, config)
    return lam, bic, obj, iters, conv, np.where(live, b / scale, 0.0)


def _better(a: _PairBest, b: _PairBest | None) -> bool:
    if b is None:
        return True
    return (a.bic, a.lam, a.h, a.key) < (b.bic, b.lam, b.h, b.key)


def _search(candidates, sample, A, config, start_index=0):
    w = sample.grid.weights
    thetas = np.vstack([t.curve.values for t in candidates])
    U = sample.values @ (thetas * w).T
    best, failed, evaluated = None, 0, 0
    for ci, theta in enumerate(candidates):
        u = U[:, ci]
        try:
            hs = bandwidths_from_projections(u, config.h_count, config.h_low, config.h_high)
        except DegenerateProjection:
            failed += config.h_count
            continue
        Dabs = np.abs(u[:, None] - u[None, :])
        for h in hs:
            evaluated += 1
            try:
                lam, bic, obj, iters, conv, beta = _evaluate_pair(u, Dabs, A, float(h), config)
            except EmptyNeighborhood:
                failed += 1
                continue
            cand = _PairBest(theta.key, start_index + ci, float(h), float(lam), float(bic),
                             float(obj), iters, conv, beta)
            if _better(cand, best):
                best = cand
    return best, failed, evaluated


def fit_ssfplsim(
    sample: FunctionalSample,
    x,
    y,
    basis: BSplineBasis,
    config: FitConfig | None = None,
    candidates: Sequence[Direction] | None = None,
) -> FitResult:
    """Estimate ``(beta, theta)`` and select variables by minimising BIC over
    directions x bandwidths x penalty levels."""
    config = config or FitConfig()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = sample.n
    if x.shape[0] != n or y.shape != (n,):
        raise ValueError("sample, x and y must have the same number of rows")
    if n < 10:
        raise ValueError("need at least 10 observations")
    if basis.grid != sample.grid:
        raise ValueError("basis and sample must share the grid")
    if candidates is None:
        candidates = direction_candidates(basis, config)
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidate directions")
    A = np.column_stack([x, y])

    best, failed, evaluated = _search(candidates, sample, A, config)
    if config.refine and best is not None:
        by_key = {t.key: t for t in candidates}
        extra = [t for t in refine_candidates(by_key[best.key], basis, config.refine_step,
                                              config.calibration) if t.key not in by_key]
        if extra:
            b2, f2, e2 = _search(extra, sample, A, config, start_index=len(candidates))
            failed += f2
            evaluated += e2
            if b2 is not None and _better(b2, best):
                best = b2
            candidates = candidates + extra
    if best is None:
        raise NoFeasibleFit(f"all {evaluated} (direction, bandwidth) pairs failed")

    theta_hat = next(t for t in candidates if t.key == best.key)
    beta = best.beta
    baselines = None
    if config.baselines:
        d = build_profiled_design(sample, x, y, theta_hat, best.h, config.leave_one_out)
        beta_ols, _ = profiled_ols(d, ridge=config.ridge if d.p >= n else 0.0)
        baselines = {"beta_ols": beta_ols}
        if config.true_support is not None:
            idx = np.asarray(sorted(config.true_support), dtype=int)
            sub = ProfiledDesign(d.y_tilde, d.x_tilde[:, idx], theta_hat, best.h)
            b_or, _ = profiled_ols(sub)
            beta_or = np.zeros(d.p)
            beta_or[idx] = b_or
            baselines["beta_oracle"] = beta_or
    return FitResult(
        beta_hat=beta,
        theta_hat=theta_hat,
        selected=tuple(int(j) for j in np.flatnonzero(beta)),
        h_hat=best.h,
        lambda_hat=best.lam,
        bic=best.bic,
        objective_value=best.obj,
        iterations=best.iters,
        converged=best.converged,
        candidates_evaluated=evaluated,
        pairs_failed=failed,
        baselines=baselines,
    )


def fit_sparse_linear(x, y, config: FitConfig | None = None) -> LinearFit:
    """SCAD-penalized linear regression with intercept, tuned by the same BIC.

    Serves as the scalar-only baseline: profiling with the flat smoother
    ``W = 11'/n`` reduces to centering.
    """
    config = config or FitConfig()
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    xm, ym = x.mean(axis=0), y.mean()
    xt, yt = x - xm, y - ym
    scale, live = _standardize(xt)
    z = xt / scale
    G, c, yy = z.T @ z / n, z.T @ yt / n, float(yt @ yt) / n
    lam, bic, _, _, _, b = _fit_profiled_gram(G, c, yy, n, live, config)
    beta = np.where(live, b / scale, 0.0)
    return LinearFit(float(ym - xm @ beta), beta, tuple(int(j) for j in np.flatnonzero(beta)),
                     float(lam), float(bic))
