"""Affine-invariant geometry of unit-determinant positive definite matrices.

Points of the projective space are stored as their determinant-one
representatives. Distances carry an explicit ``scale`` because the metric is
only fixed up to a constant; ``DEFAULT_SCALE = 1/sqrt(2)`` puts the 2x2 case
at curvature -1, where ``d(I, diag(l, 1/l)) = |log l|``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrix_core import (
    adjoint,
    det,
    frobenius_norm,
    herm,
    herm_eigen,
    invsqrtm,
    matrix_function,
    sqrtm,
)

DEFAULT_SCALE = 1.0 / np.sqrt(2.0)
DET_TOL = 1e-10
DET_REJECT = 1e-6

__all__ = [
    "DEFAULT_SCALE",
    "TangentVec",
    "as_spd",
    "as_unit_det",
    "as_group_element",
    "project",
    "theta",
    "theta_inverse",
    "group_act",
    "distance",
    "distance_to_identity_eigen",
    "log_map",
    "exp_map",
    "whiten",
]


def as_spd(X):
    """Validate positive definite matrices; returns the Hermitian part."""
    X = herm(X)
    w = herm_eigen(X).eigenvalues
    if np.any(w[..., 0] <= 0):
        raise ValueError("matrix is not positive definite")
    return X


def as_unit_det(X):
    """Validate and renormalize determinant-one positive definite matrices.

    Small determinant drift (relative error up to 1e-6) is removed by
    dividing by ``det^(1/d)``; anything further off is rejected.
    """
    X = as_spd(X)
    dt = det(X)
    if np.any(np.abs(dt - 1.0) > DET_REJECT):
        raise ValueError(f"determinant too far from 1: {dt}")
    return X / (dt ** (1.0 / X.shape[-1]))[..., None, None]


def as_group_element(G, unit_det: bool = False):
    G = np.asarray(G)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("group elements are square matrices")
    dt = np.linalg.det(G)
    if dt == 0 or not np.isfinite(dt):
        raise ValueError("group element is singular")
    if unit_det and abs(dt - 1.0) > DET_TOL:
        raise ValueError(f"expected a unit-determinant group element, det = {dt}")
    return G


@dataclass(frozen=True)
class TangentVec:
    """Tangent vector ``mat`` at the unit-determinant point ``base``."""

    base: np.ndarray
    mat: np.ndarray

    def __post_init__(self):
        tr = np.trace(np.linalg.solve(self.base, self.mat), axis1=-2, axis2=-1)
        if np.any(np.abs(tr) > 1e-10 * np.maximum(1.0, frobenius_norm(self.mat))):
            raise ValueError("tangent vector leaves the determinant-one slice")

    def __mul__(self, t: float) -> "TangentVec":
        return TangentVec(self.base, t * self.mat)

    __rmul__ = __mul__


def project(X):
    """Determinant-one representative ``det(X)^(-1/d) X``."""
    X = herm(X)
    d = X.shape[-1]
    return X * (det(X) ** (-1.0 / d))[..., None, None]


def theta(X):
    """Split ``X`` into ``(project(X), log det X)``."""
    X = herm(X)
    return project(X), np.log(det(X))


def theta_inverse(x, t):
    d = np.shape(x)[-1]
    return herm(x) * np.exp(np.asarray(t) / d)[..., None, None]


def group_act(G, X, *, unit_det_point: bool = False):
    """Congruence action ``G X G*``.

    With ``unit_det_point=True`` the input is a point of the projective space
    and ``G`` must have determinant one so that the result stays there.
    """
    G = np.asarray(G)
    if unit_det_point:
        dets = np.linalg.det(G)
        if np.any(np.abs(dets - 1.0) > DET_TOL):
            raise ValueError("acting on a unit-determinant point needs det G = 1")
    return herm(G @ np.asarray(X) @ adjoint(G))


def whiten(x, Y):
    """``x^(-1/2) Y x^(-1/2)`` for a single base point ``x``."""
    s = invsqrtm(x)
    return herm(s @ Y @ s)


def distance(x, y, scale: float = DEFAULT_SCALE):
    """``scale * ||log(x^(-1/2) y x^(-1/2))||_F``; broadcasts over stacks."""
    x, y = herm(x), herm(y)
    s = invsqrtm(x)
    w = herm_eigen(herm(s @ y @ s)).eigenvalues
    out = scale * np.sqrt(np.sum(np.log(w) ** 2, axis=-1))
    # identical inputs are at distance exactly zero, not rounding noise
    return np.where(np.all(x == y, axis=(-2, -1)), 0.0, out)


def distance_to_identity_eigen(x, scale: float = DEFAULT_SCALE):
    """Distance to the identity from the spectrum alone.

    The log-determinant correction vanishes on unit-determinant points, so
    only the eigenvalue logs of ``x`` are needed.
    """
    w = herm_eigen(x).eigenvalues
    lw = np.log(w)
    d = lw.shape[-1]
    sq = np.sum(lw ** 2, axis=-1) - np.sum(lw, axis=-1) ** 2 / d
    return scale * np.sqrt(np.maximum(sq, 0.0))


def log_map(x, y) -> TangentVec:
    """Riemannian logarithm ``x^(1/2) log(x^(-1/2) y x^(-1/2)) x^(1/2)``."""
    x = herm(x)
    r = sqrtm(x)
    ri = invsqrtm(x)
    inner = matrix_function(herm(ri @ y @ ri), np.log, positive=True)
    return TangentVec(x, herm(r @ inner @ r))


def exp_map(x, v: TangentVec):
    """Riemannian exponential ``x^(1/2) exp(x^(-1/2) v x^(-1/2)) x^(1/2)``."""
    x = herm(x)
    if not isinstance(v, TangentVec):
        raise TypeError("exp_map needs a TangentVec")
    if v.base.shape != x.shape or not np.allclose(v.base, x, rtol=1e-12, atol=1e-14):
        raise ValueError("tangent vector is based at a different point")
    r = sqrtm(x)
    ri = invsqrtm(x)
    inner = matrix_function(herm(ri @ v.mat @ ri), np.exp)
    return herm(r @ inner @ r)


def tangent_norm(v: TangentVec, scale: float = DEFAULT_SCALE):
    """Metric norm ``scale * ||x^(-1/2) v x^(-1/2)||_F``."""
    ri = invsqrtm(v.base)
    return scale * frobenius_norm(ri @ v.mat @ ri)
