"""Gaussian, Wishart and projective Wishart sampling, plus stabilizer groups."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import as_spd, project
from .matrix_core import (
    adjoint,
    cholesky,
    field_constant,
    herm,
    invsqrtm,
    matrix_function,
    matrix_to_json,
    sqrtm,
)
from .rng import RngStream

__all__ = [
    "WishartParams",
    "sample_gaussian",
    "sample_wishart",
    "sample_projective_wishart",
    "sample_stabilizer",
    "conjugate_stabilizer",
    "random_spd",
]

UNITARY_TOL = 1e-10


@dataclass(frozen=True)
class WishartParams:
    """Covariance ``sigma``, degrees of freedom ``n`` and field ('real' or 'complex')."""

    sigma: np.ndarray
    n: int
    field: str = "real"

    def __post_init__(self):
        field_constant(self.field)
        sigma = np.asarray(self.sigma)
        if self.field == "real" and np.iscomplexobj(sigma):
            if np.any(sigma.imag):
                raise ValueError("a real-field covariance must be real")
            sigma = sigma.real
        if self.field == "complex":
            sigma = sigma.astype(complex)
        object.__setattr__(self, "sigma", as_spd(sigma))
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"degrees of freedom must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def d(self) -> int:
        return self.sigma.shape[-1]

    @property
    def k(self) -> int:
        return field_constant(self.field)

    @property
    def sigma_bar(self) -> np.ndarray:
        return project(self.sigma)

    def to_dict(self) -> dict:
        return {"d": self.d, "n": self.n, "field": self.field, "sigma": matrix_to_json(self.sigma)}


def _check_n(p: WishartParams):
    if p.n < p.d:
        raise ValueError(f"need n >= d for positive definite samples (n={p.n}, d={p.d})")


def sample_gaussian(sigma, field: str, rng: RngStream, size=None):
    """Centered Gaussian vectors ``Y = L Z`` with ``L = cholesky(sigma)``.

    Returns shape ``size + (d,)`` (or ``(d,)`` when ``size`` is None).
    """
    sigma = np.asarray(sigma)
    if field == "complex":
        sigma = sigma.astype(complex)
    L = cholesky(sigma)
    d = L.shape[-1]
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    Z = rng.normal(shape + (d,), field)
    return Z @ L.T


def sample_wishart(p: WishartParams, rng: RngStream, size=None):
    """Sum of ``n`` outer products ``Y_i Y_i*`` of Gaussian vectors.

    The adjoint (not the plain transpose) is used so that complex samples
    are Hermitian.
    """
    _check_n(p)
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    Y = sample_gaussian(p.sigma, p.field, rng, shape + (p.n,))
    X = herm(np.swapaxes(Y, -1, -2) @ Y.conj())
    return X


def sample_projective_wishart(p: WishartParams, rng: RngStream, size=None):
    """Determinant-one representatives of Wishart samples."""
    return project(sample_wishart(p, rng, size))


def sample_stabilizer(field: str, d: int, rng: RngStream, size=None):
    """Haar-random elements of SO(d) (real) or SU(d) (complex).

    QR of a Gaussian matrix with the diagonal of R made positive, then the
    last column is rotated by the conjugate determinant phase.
    """
    if d < 2:
        raise ValueError("stabilizer sampling needs d >= 2")
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    G = rng.normal(shape + (d, d), field)
    Q, R = np.linalg.qr(G)
    diag = np.diagonal(R, axis1=-2, axis2=-1)
    Q = Q * (diag / np.abs(diag))[..., None, :]
    dt = np.linalg.det(Q)
    Q[..., :, -1] = Q[..., :, -1] * np.conj(dt)[..., None]
    return Q


def conjugate_stabilizer(R, sigma):
    """``sigma^(1/2) R sigma^(-1/2)``, an element fixing ``sigma`` under congruence."""
    R = np.asarray(R)
    d = R.shape[-1]
    err = np.linalg.norm(R @ adjoint(R) - np.eye(d), axis=(-2, -1))
    if np.any(err > UNITARY_TOL) or np.any(np.abs(np.linalg.det(R) - 1.0) > UNITARY_TOL):
        raise ValueError("expected a special orthogonal/unitary matrix")
    return sqrtm(sigma) @ R @ invsqrtm(sigma)


def random_spd(d: int, field: str, rng: RngStream, spread: float = 0.5):
    """Random positive definite matrix ``exp(H)`` with ``H`` a scaled Gaussian Hermitian matrix."""
    G = rng.normal((d, d), field)
    H = herm(G) * spread
    return matrix_function(H, np.exp)
