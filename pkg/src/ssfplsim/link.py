"""Kernel estimate of the single-index link and point prediction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimator import FitResult
from .exceptions import EmptyNeighborhood
from .functional import Curve, FunctionalSample, project
from .smoothing import smooth_projections, weights_from_projections

__all__ = ["LinkModel", "estimate_link", "estimate_link_many", "predict", "predict_many"]


@dataclass(frozen=True, eq=False)
class LinkModel:
    """A fitted model together with the training data needed for smoothing.

    ``link_h`` overrides the bandwidth used for the link (defaults to the
    fitted ``h_hat``).
    """

    fit: FitResult
    training_sample: FunctionalSample
    training_x: np.ndarray
    training_y: np.ndarray
    link_h: float | None = None

    def __post_init__(self):
        x = np.asarray(self.training_x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.training_y, dtype=float)
        if not (x.shape[0] == y.shape[0] == self.training_sample.n):
            raise ValueError("training data must have consistent row counts")
        if x.shape[1] != self.fit.beta_hat.size:
            raise ValueError("training x does not match the fitted coefficients")
        object.__setattr__(self, "training_x", x)
        object.__setattr__(self, "training_y", y)

    @property
    def bandwidth(self) -> float:
        return float(self.link_h if self.link_h is not None else self.fit.h_hat)

    @property
    def partial_residuals(self) -> np.ndarray:
        return self.training_y - self.training_x @ self.fit.beta_hat

    @property
    def training_index(self) -> np.ndarray:
        return project(self.training_sample, self.fit.theta_hat)


def _smooth(model: LinkModel, u_query, widen: bool):
    h = model.bandwidth
    u_train = model.training_index
    while True:
        try:
            w = weights_from_projections(u_query, u_train, h)
            break
        except EmptyNeighborhood:
            if not widen:
                raise
            h *= 1.5
    return w @ model.partial_residuals


def estimate_link(model: LinkModel, chi: Curve, widen: bool = False) -> float:
    """``m_hat(<theta_hat, chi>)``: weighted average of the partial residuals.

    With ``widen=True`` an empty neighborhood is handled by growing the
    bandwidth (prediction only); by default it raises :class:`EmptyNeighborhood`.
    """
    return float(_smooth(model, project(chi, model.fit.theta_hat), widen))


def estimate_link_many(model: LinkModel, sample: FunctionalSample, widen: bool = False):
    """Link estimates at every curve of ``sample``.

    Returns ``(values, feasible)``; rows with an empty neighborhood are ``nan``
    and flagged ``False`` unless ``widen`` is set.
    """
    u = project(sample, model.fit.theta_hat)
    out, feasible = smooth_projections(u, model.training_index, model.partial_residuals,
                                       model.bandwidth)
    if widen:
        for i in np.flatnonzero(~feasible):
            out[i] = _smooth(model, float(u[i]), True)
        feasible = np.ones_like(feasible)
    return out, feasible


def predict(model: LinkModel, x, chi: Curve, widen: bool = False) -> float:
    """``x' beta_hat + m_hat(<theta_hat, chi>)``."""
    x = np.asarray(x, dtype=float)
    if x.shape != model.fit.beta_hat.shape:
        raise ValueError(f"x must have length {model.fit.beta_hat.size}")
    return float(x @ model.fit.beta_hat) + estimate_link(model, chi, widen)


def predict_many(model: LinkModel, x, sample: FunctionalSample, widen: bool = False):
    """Vectorised :func:`predict`; returns ``(predictions, feasible)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, feasible = estimate_link_many(model, sample, widen)
    return x @ model.fit.beta_hat + m, feasible
