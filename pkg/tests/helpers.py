"""Random test inputs shared by several test modules."""

import numpy as np

from projwishart.sampling import sample_stabilizer

FIELDS = ["real", "complex"]


def random_unit_det(d, field, rng, size=None, spread=0.6):
    """Random determinant-one positive definite matrices ``exp(H)``, trace H = 0."""
    shape = () if size is None else (size,)
    G = rng.normal(shape + (d, d), field) * spread
    H = 0.5 * (G + np.swapaxes(G, -1, -2).conj())
    idx = np.arange(d)
    tr = np.trace(H, axis1=-2, axis2=-1).real / d
    H[..., idx, idx] = H[..., idx, idx].real - tr[..., None]
    w, V = np.linalg.eigh(H)
    X = (V * np.exp(w)[..., None, :]) @ np.swapaxes(V, -1, -2).conj()
    return 0.5 * (X + np.swapaxes(X, -1, -2).conj())


def random_unit_det_group(d, field, rng, size=None, spread=0.8):
    """Random group elements ``R exp(H)`` with determinant one.

    ``R`` is Haar on SO(d) or SU(d) and ``H`` is traceless Hermitian, so the
    product is a general (non-Hermitian) unit-determinant matrix whose
    condition number stays moderate. Rounding in the congruence action grows
    like ``cond(G)**2 * eps``, which fixed absolute tolerances cannot absorb
    for arbitrarily ill-conditioned draws.
    """
    return sample_stabilizer(field, d, rng, size) @ random_unit_det(d, field, rng, size=size, spread=spread)


def exact_det(M):
    """Determinant of the stored floating-point entries in exact rational arithmetic.

    Used where a floating-point determinant would itself carry an error of
    order ``cond * eps``. Complex entries are handled as pairs of fractions.
    """
    from fractions import Fraction
    from itertools import permutations

    M = np.asarray(M)
    d = M.shape[0]
    ent = [[(Fraction(float(np.real(v))), Fraction(float(np.imag(v)))) for v in row] for row in M]
    total_re, total_im = Fraction(0), Fraction(0)
    for perm in permutations(range(d)):
        inversions = sum(perm[i] > perm[j] for i in range(d) for j in range(i + 1, d))
        re, im = Fraction(1), Fraction(0)
        for i, j in enumerate(perm):
            a, b = ent[i][j]
            re, im = re * a - im * b, re * b + im * a
        sign = -1 if inversions % 2 else 1
        total_re += sign * re
        total_im += sign * im
    return complex(total_re, total_im) if np.iscomplexobj(M) else float(total_re)
