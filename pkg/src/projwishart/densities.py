"""Closed-form densities of Wishart and projective Wishart laws.

All values are natural logs. Densities on the unit-determinant slice are
taken with respect to the invariant volume ``nu``, fixed here as the
Riemannian volume of the affine-invariant metric at the chosen distance
scale. In the 2x2 case at the default scale the slice is the hyperbolic
plane (real) or hyperbolic 3-space (complex) of curvature -1, and in polar
coordinates around any point ``d nu = A_k sinh(r)^k dr d(omega)`` with
``A_1 = 2 pi`` and ``A_2 = 4 pi``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate

from .geometry import DEFAULT_SCALE, distance, project, theta_inverse
from .matrix_core import adjoint, herm, invsqrtm, logdet, sqrtm
from .rng import RngStream
from .sampling import WishartParams, sample_stabilizer

__all__ = [
    "DensityValue",
    "RadialLaw",
    "wishart_logdensity_invariant",
    "projective_logdensity_trace",
    "projective_logdensity_cosh",
    "radial_law",
    "normalize_density_2d",
    "sphere_area",
    "log_cosh",
    "log_sinh",
    "sample_invariant_volume",
    "sample_invariant_volume_total",
]

TAIL_TOL = 1e-12
CDF_STEP = 0.05
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(12)


@dataclass(frozen=True)
class DensityValue:
    log_value: np.ndarray | float
    normalized: bool = False

    def __float__(self):
        return float(self.log_value)


def log_cosh(r):
    """``log(cosh(r))`` without overflow, accurate to ``r^2 / 2`` near zero."""
    r = np.abs(np.asarray(r, dtype=float))
    # cosh(r) - 1 = 2 sinh(r/2)^2 is exact to rounding for small r
    small = np.log1p(2.0 * np.sinh(0.5 * np.minimum(r, 1.0)) ** 2)
    large = r + np.log1p(0.5 * np.expm1(-2.0 * r))
    return np.where(r < 1.0, small, large)


def log_sinh(r):
    """``log(sinh(r))`` for ``r >= 0``; ``-inf`` at zero."""
    r = np.asarray(r, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(r > 0, r + np.log(-np.expm1(-2.0 * np.maximum(r, 1e-300))) - np.log(2.0), -np.inf)


def _trace_sigma_inv(sigma, x):
    s = invsqrtm(sigma)
    return np.real(np.trace(s @ herm(x) @ s, axis1=-2, axis2=-1))


def _exp_rate(p: WishartParams) -> float:
    # real: exp(-tr/2); complex: exp(-tr), the circular complex Gaussian convention
    return 0.5 if p.field == "real" else 1.0


def wishart_logdensity_invariant(X, p: WishartParams) -> DensityValue:
    """Unnormalized Wishart log-density with respect to the invariant measure
    on the full cone: ``(k n / 2) log det X - rate * tr(sigma^-1 X)``.
    """
    if p.n < p.d:
        raise ValueError("need n >= d")
    val = 0.5 * p.k * p.n * logdet(X) - _exp_rate(p) * _trace_sigma_inv(p.sigma, X)
    return DensityValue(val, False)


def projective_logdensity_trace(x, p: WishartParams) -> DensityValue:
    """Unnormalized projective log-density ``(d k n / 2) (log 2 - log tr(sigma^-1 x))``.

    Valid in every dimension.
    """
    if p.n < p.d:
        raise ValueError("need n >= d")
    tr = _trace_sigma_inv(p.sigma, x)
    return DensityValue(0.5 * p.d * p.k * p.n * (np.log(2.0) - np.log(tr)), False)


def projective_logdensity_cosh(x, p: WishartParams) -> DensityValue:
    """2x2 only: ``-k n log cosh(d(x, sigma_bar))`` at the default scale."""
    if p.d != 2:
        raise ValueError("the cosh form holds for 2x2 matrices only")
    r = distance(p.sigma_bar, x, DEFAULT_SCALE)
    return DensityValue(-p.k * p.n * log_cosh(r), False)


def sphere_area(k: int) -> float:
    """Area of the unit sphere in the ``k+1``-dimensional tangent space."""
    return {1: 2.0 * np.pi, 2: 4.0 * np.pi}[k]


def _integrate_halfline(f, tol=TAIL_TOL):
    """Integrate a decaying function over [0, inf) with interval doubling."""
    total, _ = integrate.quad(f, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13, limit=200)
    lo, hi = 1.0, 2.0
    while True:
        piece, _ = integrate.quad(f, lo, hi, epsabs=1e-15, epsrel=1e-13, limit=200)
        total += piece
        if abs(piece) < tol * max(abs(total), 1e-300) or hi > 1e4:
            return total
        lo, hi = hi, 2.0 * hi


@dataclass(frozen=True)
class RadialLaw:
    """Law of ``r = d(x, sigma_bar)`` for 2x2 projective Wishart samples.

    The unnormalized density is ``sinh(r)^k cosh(r)^(-k n)``; ``Z`` is its
    integral over ``[0, inf)``. ``n`` may be any real number above 1.
    """

    k: int
    n: float

    def __post_init__(self):
        if self.k not in (1, 2):
            raise ValueError("k must be 1 (real) or 2 (complex)")
        if not self.n > 1:
            raise ValueError(f"radial law is not integrable for n = {self.n}")

    def _log_kernel(self, r):
        return self.k * log_sinh(r) - self.k * self.n * log_cosh(r)

    @cached_property
    def Z(self) -> float:
        return _integrate_halfline(lambda r: float(np.exp(self._log_kernel(r))))

    @cached_property
    def log_Z(self) -> float:
        return float(np.log(self.Z))

    def logpdf(self, r):
        r = np.asarray(r, dtype=float)
        out = self._log_kernel(np.maximum(r, 0.0)) - self.log_Z
        return np.where(r < 0, -np.inf, out)

    def pdf(self, r):
        return np.exp(self.logpdf(r))

    def cdf(self, r):
        """Cumulative probability by composite Gauss-Legendre quadrature.

        The integration knots are the sorted query points merged with a grid
        of spacing ``CDF_STEP``, so no panel is longer than that.
        """
        r = np.asarray(r, dtype=float)
        flat = np.clip(r.ravel(), 0.0, None)
        if flat.size == 0:
            return np.zeros(r.shape)
        grid = np.arange(0.0, flat.max() + CDF_STEP, CDF_STEP)
        knots = np.unique(np.concatenate([grid, flat]))
        a, b = knots[:-1], knots[1:]
        half = 0.5 * (b - a)
        mid = 0.5 * (b + a)
        t = mid[:, None] + half[:, None] * _GL_NODES[None, :]
        panels = half * (np.exp(self._log_kernel(t) - self.log_Z) @ _GL_WEIGHTS)
        cum = np.concatenate([[0.0], np.cumsum(panels)])
        vals = cum[np.searchsorted(knots, flat)]
        return np.minimum(vals, 1.0).reshape(r.shape)

    def expect(self, g) -> float:
        """``E[g(r)]`` by quadrature."""
        return _integrate_halfline(lambda t: g(t) * float(np.exp(self.logpdf(t))))

    def mean(self) -> float:
        return self.expect(lambda t: t)

    def mode(self) -> float:
        from scipy.optimize import minimize_scalar

        res = minimize_scalar(lambda t: -float(self._log_kernel(t)), bounds=(1e-9, 20.0),
                              method="bounded", options={"xatol": 1e-12})
        return float(res.x)


def radial_law(p: WishartParams) -> RadialLaw:
    if p.d != 2:
        raise ValueError("the radial law is derived for 2x2 matrices only")
    return RadialLaw(p.k, p.n)


def normalize_density_2d(p: WishartParams, scale: float = DEFAULT_SCALE) -> float:
    """Constant ``c`` making ``c * cosh(d(x, sigma_bar))^(-k n)`` a probability
    density with respect to the Riemannian volume at distance ``scale``.

    The cosh argument is always the default-scale distance; changing ``scale``
    only rescales the reference volume by ``(scale * sqrt 2)^(k + 1)``.
    """
    law = radial_law(p)
    a = scale / DEFAULT_SCALE
    return 1.0 / (sphere_area(p.k) * a ** (p.k + 1) * law.Z)


def _radial_proposal_logpdf(r, k):
    # Gamma(k + 1, 1): matches the r^k behaviour of the shell volume at 0
    from scipy.special import gammaln

    return k * np.log(r) - r - gammaln(k + 1)


def sample_invariant_volume(center, field: str, rng: RngStream, size: int,
                            scale: float = DEFAULT_SCALE):
    """Importance sample for integrals against ``nu`` on the 2x2 slice.

    Points are ``c^(1/2) R diag(e^r, e^-r) R* c^(1/2)`` with ``r`` from a
    Gamma(k+1, 1) proposal and ``R`` Haar on SO(2)/SU(2), so the orbit of
    the diagonal matrix is the full sphere of radius ``r`` around ``center``.

    Returns
    -------
    points : ndarray, shape (size, 2, 2)
    log_q : ndarray, shape (size,)
        Log-density of each point with respect to ``nu`` (at ``scale``), so
        ``mean(g(points) * exp(-log_q))`` estimates ``integral g d nu``.
    """
    center = herm(center)
    if center.shape != (2, 2):
        raise ValueError("the invariant-volume sampler covers 2x2 matrices only")
    k = 1 if field == "real" else 2
    r = np.sum(-np.log(rng.uniform((size, k + 1))), axis=-1)
    R = sample_stabilizer(field, 2, rng, size)
    D = np.zeros((size, 2, 2), dtype=complex if field == "complex" else float)
    D[:, 0, 0] = np.exp(r)
    D[:, 1, 1] = np.exp(-r)
    c = sqrtm(project(center))
    pts = herm(c @ R @ D @ adjoint(R) @ c)
    a = scale / DEFAULT_SCALE
    log_shell = np.log(sphere_area(k)) + (k + 1) * np.log(a) + k * log_sinh(r)
    log_q = _radial_proposal_logpdf(r, k) - log_shell
    return pts, log_q


def sample_invariant_volume_total(center, field: str, rng: RngStream, size: int,
                                  logdet_range=(-1.0, 1.0), scale: float = DEFAULT_SCALE):
    """Importance sample for ``nu_tot = nu x Lebesgue`` on the full 2x2 cone.

    The log-determinant coordinate is uniform on ``logdet_range``.
    """
    lo, hi = logdet_range
    x, log_q = sample_invariant_volume(center, field, rng, size, scale)
    t = lo + (hi - lo) * rng.uniform(size)
    return theta_inverse(x, t), log_q - np.log(hi - lo)
