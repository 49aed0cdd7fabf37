"""SCAD penalty and its exact univariate thresholding rule.

The penalty (Fan and Li) with level ``lam`` and shape ``a > 2`` is::

    P(t) = lam * t                                   0 <= t <= lam
         = -(t^2 - 2 a lam t + lam^2) / (2 (a - 1))  lam < t <= a lam
         = (a + 1) lam^2 / 2                         t > a lam
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

__all__ = ["ScadParams", "scad_value", "scad_derivative", "scad_univariate_min"]


@dataclass(frozen=True)
class ScadParams:
    lam: float
    a: float = 3.7

    def __post_init__(self):
        if not self.a > 2:
            raise ValueError(f"SCAD shape parameter must exceed 2, got {self.a}")
        if not self.lam >= 0:
            raise ValueError(f"SCAD level must be non-negative, got {self.lam}")


@numba.njit(cache=True)
def _penalty(t, lam, a):
    if t <= lam:
        return lam * t
    if t <= a * lam:
        return -(t * t - 2.0 * a * lam * t + lam * lam) / (2.0 * (a - 1.0))
    return 0.5 * (a + 1.0) * lam * lam


@numba.njit(cache=True)
def _quad_obj(b, z, w, lam, a):
    d = b - z
    return 0.5 * w * d * d + _penalty(abs(b), lam, a)


@numba.njit(cache=True)
def _threshold(z, w, lam, a):
    # global minimiser of w/2 (b - z)^2 + P(|b|); the objective is quadratic on
    # each of [0, lam], [lam, a lam], [a lam, inf) so the minimum is at a clipped
    # stationary point or a breakpoint of one of them
    if lam <= 0.0:
        return z
    az = abs(z)
    if az == 0.0:
        return 0.0
    al = a * lam

    best = 0.0
    best_val = _quad_obj(0.0, az, w, lam, a)

    c = az - lam / w
    if c < 0.0:
        c = 0.0
    elif c > lam:
        c = lam
    v = _quad_obj(c, az, w, lam, a)
    if v < best_val:
        best, best_val = c, v

    curv = w - 1.0 / (a - 1.0)
    if curv > 0.0:
        c = (w * az * (a - 1.0) - al) / (w * (a - 1.0) - 1.0)
        if c < lam:
            c = lam
        elif c > al:
            c = al
        v = _quad_obj(c, az, w, lam, a)
        if v < best_val:
            best, best_val = c, v
    else:
        for c in (lam, al):
            v = _quad_obj(c, az, w, lam, a)
            if v < best_val:
                best, best_val = c, v

    c = az if az > al else al
    v = _quad_obj(c, az, w, lam, a)
    if v < best_val:
        best, best_val = c, v

    return best if z > 0.0 else -best


def scad_value(t, p: ScadParams):
    """Penalty value at ``t >= 0`` (scalar or array)."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0):
        raise ValueError("SCAD penalty is defined for t >= 0")
    lam, a = p.lam, p.a
    mid = -(arr * arr - 2.0 * a * lam * arr + lam * lam) / (2.0 * (a - 1.0))
    out = np.where(arr <= lam, lam * arr, np.where(arr <= a * lam, mid, 0.5 * (a + 1.0) * lam * lam))
    return float(out) if out.ndim == 0 else out


def scad_derivative(t, p: ScadParams):
    """Derivative of the penalty for ``t > 0``."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr <= 0):
        raise ValueError("SCAD derivative is only defined for t > 0")
    lam, a = p.lam, p.a
    if lam == 0:
        out = np.zeros_like(arr)
    else:
        out = np.where(arr <= lam, lam, np.maximum(a * lam - arr, 0.0) / (a - 1.0))
    return float(out) if out.ndim == 0 else out


def scad_univariate_min(z: float, weight: float, p: ScadParams) -> float:
    """Minimiser of ``weight/2 * (z - b)^2 + P(|b|)`` over ``b``."""
    if not weight > 0:
        raise ValueError("weight must be positive")
    return float(_threshold(float(z), float(weight), float(p.lam), float(p.a)))
