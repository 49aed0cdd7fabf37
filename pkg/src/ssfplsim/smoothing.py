"""Nadaraya-Watson smoothing along a projection direction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateProjection, EmptyNeighborhood
from .functional import Curve, Direction, FunctionalSample, project

__all__ = [
    "WeightMatrix",
    "kernel_k",
    "nw_weights",
    "weight_matrix",
    "loo_weights",
    "weights_from_projections",
    "smooth_projections",
    "profile_transform",
    "bandwidth_grid",
    "bandwidths_from_projections",
]


def _check_bandwidth(h) -> float:
    h = float(h)
    if not (h > 0 and np.isfinite(h)):
        raise ValueError(f"bandwidth must be positive and finite, got {h}")
    return h


def kernel_k(u):
    """Unnormalised one-sided Epanechnikov kernel ``1 - u^2`` on ``[0, 1)``."""
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0):
        raise ValueError("kernel argument must be non-negative")
    out = np.where(arr < 1.0, 1.0 - arr * arr, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    entries: np.ndarray
    theta: Direction | None
    h: float

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def weights_from_projections(u_query, u_sample, h: float) -> np.ndarray:
    """NW weight rows for projected queries against projected sample points.

    ``u_query`` may be a scalar or a vector; the result has shape
    ``(len(u_query), len(u_sample))`` (or ``(len(u_sample),)`` for a scalar).
    Raises :class:`EmptyNeighborhood` naming the first empty row.
    """
    h = _check_bandwidth(h)
    scalar = np.ndim(u_query) == 0
    uq = np.atleast_1d(np.asarray(u_query, dtype=float))
    us = np.asarray(u_sample, dtype=float)
    r = np.abs(uq[:, None] - us[None, :]) / h
    k = np.where(r < 1.0, 1.0 - r * r, 0.0)
    tot = k.sum(axis=1)
    empty = np.flatnonzero(tot <= 0)
    if empty.size:
        raise EmptyNeighborhood("query" if scalar else int(empty[0]), h)
    w = k / tot[:, None]
    return w[0] if scalar else w


def smooth_projections(u_query, u_sample, values, h: float):
    """NW smooth of ``values`` at each query; returns ``(estimates, feasible)``.

    Queries with an empty neighborhood get ``nan`` and ``feasible=False``.
    """
    h = _check_bandwidth(h)
    uq = np.atleast_1d(np.asarray(u_query, dtype=float))
    r = np.abs(uq[:, None] - np.asarray(u_sample, dtype=float)[None, :]) / h
    k = np.where(r < 1.0, 1.0 - r * r, 0.0)
    tot = k.sum(axis=1)
    feasible = tot > 0
    out = np.full(uq.size, np.nan)
    out[feasible] = (k[feasible] @ np.asarray(values, dtype=float)) / tot[feasible]
    return out, feasible


def nw_weights(theta: Direction, h: float, chi: Curve, sample: FunctionalSample) -> np.ndarray:
    """Weights ``w_{n,h,theta}(chi, X_i)``, ``i = 1..n``."""
    return weights_from_projections(project(chi, theta), project(sample, theta), h)


def weight_matrix(theta: Direction, h: float, sample: FunctionalSample,
                  leave_one_out: bool = False) -> WeightMatrix:
    """Smoothing matrix with rows ``nw_weights(theta, h, X_i, sample)``.

    Self-weights are kept unless ``leave_one_out``, in which case row ``i``
    smooths over ``j != i`` only (and may then be empty).
    """
    u = project(sample, theta)
    if not leave_one_out:
        return WeightMatrix(weights_from_projections(u, u, h), theta, float(h))
    return WeightMatrix(loo_weights(u, h), theta, float(h))


def loo_weights(u, h: float) -> np.ndarray:
    """Leave-one-out NW weight matrix of the projections ``u``."""
    h = _check_bandwidth(h)
    u = np.asarray(u, dtype=float)
    r = np.abs(u[:, None] - u[None, :]) / h
    k = np.where(r < 1.0, 1.0 - r * r, 0.0)
    np.fill_diagonal(k, 0.0)
    tot = k.sum(axis=1)
    empty = np.flatnonzero(tot <= 0)
    if empty.size:
        raise EmptyNeighborhood(int(empty[0]), h)
    return k / tot[:, None]


def profile_transform(a, w) -> np.ndarray:
    """``(I - W) A`` for a vector or an ``(n, q)`` matrix ``A``."""
    wm = np.asarray(w.entries if isinstance(w, WeightMatrix) else w, dtype=float)
    a = np.asarray(a, dtype=float)
    if a.shape[0] != wm.shape[1]:
        raise ValueError(f"row mismatch: A has {a.shape[0]} rows, W is {wm.shape}")
    return a - wm @ a


def _pairwise_distances(u: np.ndarray) -> np.ndarray:
    iu = np.triu_indices(u.size, k=1)
    return np.abs(u[iu[0]] - u[iu[1]])


def bandwidths_from_projections(
    u: np.ndarray, count: int, low: float = 0.05, high: float = 0.5
) -> np.ndarray:
    """Quantiles of the positive pairwise distances at ``count`` levels in ``[low, high]``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    u = np.asarray(u, dtype=float)
    if u.size < 2:
        raise ValueError("need at least two observations")
    d = _pairwise_distances(u)
    d = d[d > 0]
    if d.size == 0:
        raise DegenerateProjection("all projected pairwise distances are zero")
    levels = np.linspace(low, high, count) if count > 1 else np.array([low])
    return np.quantile(d, levels)


def bandwidth_grid(theta: Direction, sample: FunctionalSample, count: int) -> list[float]:
    """Candidate bandwidths for direction ``theta`` (distance quantiles, 5% to 50%)."""
    return [float(h) for h in bandwidths_from_projections(project(sample, theta), count)]
