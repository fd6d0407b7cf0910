"""Dense kernels for small symmetric and Hermitian matrices.

Every function accepts a single matrix of shape ``(d, d)`` or a stack of
shape ``(..., d, d)``. Real input stays real; complex input is treated as
Hermitian.
"""

from __future__ import annotations

import json
from typing import Callable, NamedTuple

import numpy as np

__all__ = [
    "EigenDecomp",
    "NumericalError",
    "herm",
    "adjoint",
    "is_complex",
    "field_constant",
    "herm_eigen",
    "matrix_function",
    "cholesky",
    "det",
    "frobenius_norm",
    "matrix_to_json",
    "matrix_from_json",
]

JACOBI_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100
POSITIVITY_FLOOR = 1e-13


class NumericalError(ArithmeticError):
    """Raised when a kernel cannot produce a trustworthy answer."""


class EigenDecomp(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def adjoint(A):
    """Conjugate transpose over the last two axes."""
    A = np.asarray(A)
    At = np.swapaxes(A, -1, -2)
    return At.conj() if np.iscomplexobj(At) else At


def herm(A):
    """Return ``(A + A*) / 2``, with an exactly real diagonal."""
    A = np.asarray(A)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {A.shape}")
    if not np.iscomplexobj(A):
        A = A.astype(float, copy=False)
    H = 0.5 * (A + adjoint(A))
    if np.iscomplexobj(H):
        idx = np.arange(H.shape[-1])
        H[..., idx, idx] = H[..., idx, idx].real
    return H


def is_complex(A) -> bool:
    return bool(np.iscomplexobj(A))


def field_constant(field: str) -> int:
    """1 for the real field, 2 for the complex field."""
    if field == "real":
        return 1
    if field == "complex":
        return 2
    raise ValueError(f"unknown field {field!r}; expected 'real' or 'complex'")


def _offdiag_norm(A):
    d = A.shape[-1]
    mask = ~np.eye(d, dtype=bool)
    return np.sqrt(np.sum(np.abs(A[..., mask]) ** 2, axis=-1))


def herm_eigen(A, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> EigenDecomp:
    """Cyclic Jacobi eigendecomposition of Hermitian matrices.

    Parameters
    ----------
    A : ndarray, shape (..., d, d)
        Symmetric or Hermitian matrices. The input is re-symmetrized first.
    tol : float
        Sweeps stop once the off-diagonal Frobenius mass of every matrix in
        the stack is below ``tol * max(1, ||A||_F)``.
    max_sweeps : int
        Iteration cap.

    Returns
    -------
    EigenDecomp
        Eigenvalues ascending along the last axis and eigenvectors as columns,
        so that ``A = V diag(w) V*``.

    Raises
    ------
    NumericalError
        If the off-diagonal mass is still above tolerance after
        ``max_sweeps`` sweeps.
    """
    A = herm(A).copy()
    d = A.shape[-1]
    batch = A.shape[:-2]
    A = A.reshape((-1, d, d))
    cplx = np.iscomplexobj(A)
    V = np.zeros_like(A)
    V[:, np.arange(d), np.arange(d)] = 1.0
    scale = np.maximum(1.0, np.sqrt(np.sum(np.abs(A) ** 2, axis=(-2, -1))))
    thresh = tol * scale

    todo = np.nonzero(_offdiag_norm(A) > thresh)[0]
    sweeps = 0
    while todo.size:
        if sweeps >= max_sweeps:
            off = _offdiag_norm(A[todo]) / scale[todo]
            raise NumericalError(
                f"Jacobi did not converge in {max_sweeps} sweeps; "
                f"max residual off-diagonal mass {float(np.max(off)):.3e}"
            )
        # converged matrices drop out of later sweeps; each matrix sees the
        # same rotation sequence regardless of its neighbours in the stack
        Ab, Vb = A[todo], V[todo]
        for p in range(d - 1):
            for q in range(p + 1, d):
                _rotate(Ab, Vb, p, q, cplx)
        A[todo], V[todo] = Ab, Vb
        todo = todo[_offdiag_norm(Ab) > thresh[todo]]
        sweeps += 1

    w = np.real(A[:, np.arange(d), np.arange(d)])
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    V = np.take_along_axis(V, order[:, None, :], axis=-1)
    return EigenDecomp(w.reshape(batch + (d,)), V.reshape(batch + (d, d)))


def _rotate(A, V, p, q, cplx):
    """Annihilate A[:, p, q] in place for every matrix of the stack."""
    apq = A[:, p, q]
    mag = np.abs(apq)
    app = np.real(A[:, p, p])
    aqq = np.real(A[:, q, q])
    # entries below the rounding level of the diagonal are dropped, not rotated
    negligible = mag <= 2.0 ** -64 * (np.abs(app) + np.abs(aqq)) + 1e-300
    if np.any(negligible):
        A[negligible, p, q] = 0.0
        A[negligible, q, p] = 0.0
    active = ~negligible
    if not np.any(active):
        return
    safe = np.where(active, mag, 1.0)
    # phase that makes the (p, q) entry real and nonnegative
    w = np.conj(apq) / safe if cplx else np.sign(apq) + (~active)
    tau = (aqq - app) / (2.0 * safe)
    t = np.where(tau >= 0, 1.0, -1.0) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
    t = np.where(active, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    w = np.where(active, w, 1.0)

    cw = c * w
    sw = s * w
    # columns: A <- A G with G = diag-phase * rotation
    colp = A[:, :, p].copy()
    colq = A[:, :, q]
    A[:, :, p] = c[:, None] * colp - sw[:, None] * colq
    A[:, :, q] = s[:, None] * colp + cw[:, None] * colq
    # rows: A <- G* A
    rowp = A[:, p, :].copy()
    rowq = A[:, q, :]
    wc = np.conj(w) if cplx else w
    A[:, p, :] = c[:, None] * rowp - (s * wc)[:, None] * rowq
    A[:, q, :] = s[:, None] * rowp + (c * wc)[:, None] * rowq
    A[:, p, q] = 0.0
    A[:, q, p] = 0.0
    if cplx:
        A[:, p, p] = A[:, p, p].real
        A[:, q, q] = A[:, q, q].real

    vp = V[:, :, p].copy()
    vq = V[:, :, q]
    V[:, :, p] = c[:, None] * vp - sw[:, None] * vq
    V[:, :, q] = s[:, None] * vp + cw[:, None] * vq


def _reconstruct(V, w):
    return herm((V * w[..., None, :]) @ adjoint(V))


def matrix_function(A, f: Callable[[np.ndarray], np.ndarray], *, positive: bool = False,
                    eig: EigenDecomp | None = None):
    """Apply a scalar function to the spectrum: ``V diag(f(w)) V*``.

    Parameters
    ----------
    A : ndarray, shape (..., d, d)
    f : callable
        Vectorized real function of the eigenvalues.
    positive : bool
        Require every eigenvalue to exceed ``1e-13 * max eigenvalue``
        (needed for log and negative or fractional powers).
    eig : EigenDecomp, optional
        Precomputed decomposition of ``A``.
    """
    if eig is None:
        eig = herm_eigen(A)
    w, V = eig
    if positive:
        top = np.max(w, axis=-1, keepdims=True)
        if np.any(top <= 0) or np.any(w <= POSITIVITY_FLOOR * top):
            raise ValueError("matrix function requires a positive definite argument")
    with np.errstate(invalid="ignore", divide="ignore"):
        fw = np.asarray(f(w), dtype=float)
    if not np.all(np.isfinite(fw)):
        raise ValueError("matrix function is undefined on part of the spectrum")
    return _reconstruct(V, fw)


def logm(A):
    return matrix_function(A, np.log, positive=True)


def expm(A):
    return matrix_function(A, np.exp)


def sqrtm(A):
    return matrix_function(A, np.sqrt, positive=True)


def invsqrtm(A):
    return matrix_function(A, lambda w: 1.0 / np.sqrt(w), positive=True)


def powm(A, alpha: float):
    return matrix_function(A, lambda w: w ** alpha, positive=True)


def cholesky(A):
    """Lower Cholesky factor with positive real diagonal.

    Raises ``ValueError`` for input that is not positive definite.
    """
    A = herm(A)
    try:
        return np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise ValueError("matrix is not positive definite (non-positive pivot)") from exc


def det(A):
    """Real determinant of Hermitian matrices.

    Uses the Cholesky diagonal when the whole stack is positive definite and
    the product of eigenvalues otherwise.
    """
    A = herm(A)
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return np.prod(herm_eigen(A).eigenvalues, axis=-1)
    diag = np.real(np.diagonal(L, axis1=-2, axis2=-1))
    return np.prod(diag, axis=-1) ** 2


def logdet(A):
    """Log-determinant of positive definite matrices via Cholesky."""
    L = cholesky(A)
    return 2.0 * np.sum(np.log(np.real(np.diagonal(L, axis1=-2, axis2=-1))), axis=-1)


def frobenius_norm(A):
    A = np.asarray(A)
    return np.sqrt(np.sum(np.abs(A) ** 2, axis=(-2, -1)))


def matrix_to_json(A) -> dict:
    """Serialize one matrix as ``{dim, field, re, im}``.

    Python's float repr is the shortest string that round-trips, so the
    encoding is bit-exact.
    """
    A = np.asarray(A)
    d = A.shape[-1]
    if A.shape != (d, d):
        raise ValueError(f"expected a single square matrix, got shape {A.shape}")
    out = {"dim": d, "field": "complex" if np.iscomplexobj(A) else "real"}
    out["re"] = [float(v) for v in np.real(A).ravel()]
    if np.iscomplexobj(A):
        out["im"] = [float(v) for v in np.imag(A).ravel()]
    return out


def matrix_from_json(obj) -> np.ndarray:
    if isinstance(obj, str):
        obj = json.loads(obj)
    try:
        d = int(obj["dim"])
        field = obj["field"]
        re = np.asarray(obj["re"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed matrix record: {exc}") from exc
    if re.size != d * d:
        raise ValueError(f"matrix record has {re.size} entries, expected {d * d}")
    if field == "real":
        return re.reshape(d, d)
    if field == "complex":
        im = np.asarray(obj.get("im", np.zeros(d * d)), dtype=float)
        if im.size != d * d:
            raise ValueError("imaginary part has the wrong size")
        return (re + 1j * im).reshape(d, d)
    raise ValueError(f"unknown field {field!r}")
