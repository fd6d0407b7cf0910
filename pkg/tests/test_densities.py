import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate, optimize, special

from helpers import random_unit_det, random_unit_det_group
from projwishart.densities import (
    DensityValue,
    RadialLaw,
    log_cosh,
    log_sinh,
    normalize_density_2d,
    projective_logdensity_cosh,
    projective_logdensity_trace,
    radial_law,
    sample_invariant_volume,
    sample_invariant_volume_total,
    sphere_area,
    wishart_logdensity_invariant,
)
from projwishart.geometry import DEFAULT_SCALE, distance, group_act, project, theta
from projwishart.rng import RngStream
from projwishart.sampling import WishartParams, random_spd, sample_projective_wishart
from projwishart.verification import ks_1samp

E = np.e
fields = st.sampled_from(["real", "complex"])
seeds = st.integers(0, 2**32)

RADIAL_CASES = [(1, 2), (1, 3), (1, 5), (1, 10), (2, 2), (2, 4), (2, 5), (2, 8), (1, 2.5), (2, 1.5)]


# --- independent oracles for the radial law -----------------------------------


def beta_oracle_cdf(r, k, n):
    """tanh(r)^2 follows Beta((k + 1)/2, k (n - 1)/2) under the radial law."""
    return special.betainc((k + 1) / 2, k * (n - 1) / 2, np.tanh(r) ** 2)


def eigenvalue_oracle_pdf(r_grid, k, n):
    """Radial density rebuilt from the joint eigenvalue law of a 2x2 Wishart matrix.

    With Sigma = I the eigenvalues l1 > l2 of W have joint density
    proportional to (l1 l2)^((n-3)/2) e^(-(l1+l2)/2) |l1 - l2| (real) or
    (l1 l2)^(n-2) e^(-(l1+l2)) (l1 - l2)^2 (complex). Substituting
    l1 = b e^r, l2 = b e^-r (Jacobian 2b) and integrating b out numerically
    gives the density of r = d(pi(W), I) at the default scale.
    """

    def log_joint(l1, l2):
        if k == 1:
            return (n - 3) / 2 * np.log(l1 * l2) - (l1 + l2) / 2 + np.log(abs(l1 - l2))
        return (n - 2) * np.log(l1 * l2) - (l1 + l2) + 2 * np.log(abs(l1 - l2))

    def marginal(r):
        # b = s / cosh(r) puts the peak of the b-integrand at a fixed scale
        c = np.cosh(r)

        def f(s):
            b = s / c
            with np.errstate(all="ignore"):
                v = np.exp(log_joint(b * np.exp(r), b * np.exp(-r))) * 2 * b / c
            return v if np.isfinite(v) else 0.0
        return integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]

    # beyond r = 40 the mass is below 1e-30 for every case tested here
    total = integrate.quad(marginal, 0, 40, epsabs=0, epsrel=1e-11, limit=400)[0]
    return np.array([marginal(r) for r in r_grid]) / total


@pytest.mark.parametrize("k,n", [(1, 3), (1, 5), (1, 10), (2, 2), (2, 5)])
def test_radial_pdf_matches_eigenvalue_substitution_oracle(k, n):
    r = np.linspace(0.01, 4.0, 25)
    law = RadialLaw(k, n)
    oracle = eigenvalue_oracle_pdf(r, k, n)
    assert np.allclose(law.pdf(r), oracle, rtol=1e-7, atol=1e-12)


@pytest.mark.parametrize("k,n", RADIAL_CASES)
def test_radial_cdf_matches_beta_oracle(k, n):
    r = np.concatenate([np.linspace(0, 6, 121), [0.0123, 2.5e-4, 10.0]])
    law = RadialLaw(k, n)
    assert np.max(np.abs(law.cdf(r) - beta_oracle_cdf(r, k, n))) <= 1e-10


@pytest.mark.parametrize("k,n", RADIAL_CASES)
def test_radial_normalizer_matches_beta_function(k, n):
    # Z = B((k+1)/2, k(n-1)/2) / 2 from the same substitution
    Z = special.beta((k + 1) / 2, k * (n - 1) / 2) / 2
    assert RadialLaw(k, n).Z == pytest.approx(Z, rel=1e-10)


@pytest.mark.parametrize("n", [2, 3, 5, 10, 50])
def test_real_radial_normalizer_closed_form(n):
    law = RadialLaw(1, n)
    assert 1 / law.Z == pytest.approx(n - 1, rel=1e-10)
    r = np.linspace(0, 5, 11)
    assert np.allclose(law.pdf(r), (n - 1) * np.sinh(r) * np.cosh(r) ** (-n), rtol=1e-10, atol=1e-300)
    assert np.allclose(law.cdf(r), 1 - np.cosh(r) ** (1 - n), atol=1e-12)


@pytest.mark.parametrize("k,n", RADIAL_CASES)
def test_radial_pdf_integrates_to_one(k, n):
    law = RadialLaw(k, n)
    total = integrate.quad(law.pdf, 0, np.inf, epsabs=1e-13, limit=200)[0]
    assert abs(total - 1) <= 1e-8


@pytest.mark.parametrize("n", [2, 3, 5, 10])
def test_real_radial_mode(n):
    assert RadialLaw(1, n).mode() == pytest.approx(np.arctanh(1 / np.sqrt(n)), abs=1e-7)


def test_radial_pdf_at_zero_and_negative():
    law = RadialLaw(2, 3)
    assert law.pdf(0.0) == 0.0 and law.pdf(-1.0) == 0.0
    assert law.logpdf(0.0) == -np.inf


def test_radial_law_rejects_non_integrable():
    for k, n in [(1, 1), (2, 1), (1, 0.5), (3, 5)]:
        with pytest.raises(ValueError):
            RadialLaw(k, n)
    with pytest.raises(ValueError):
        radial_law(WishartParams(np.eye(3), 4))


def test_radial_median_decreases_with_n():
    medians = []
    for n in [3, 5, 10, 50]:
        law = RadialLaw(1, n)
        medians.append(optimize.brentq(lambda r: law.cdf(np.array([r]))[0] - 0.5, 1e-9, 10))
    assert all(b < a for a, b in zip(medians, medians[1:]))


@pytest.mark.parametrize("field,n", [("real", 5), ("complex", 3)])
def test_radial_law_against_million_sample_histogram(field, n):
    sigma = random_spd(2, field, RngStream(30))
    p = WishartParams(sigma, n, field)
    x = sample_projective_wishart(p, RngStream(31), 1_000_000)
    r = distance(p.sigma_bar, x)
    D, pval = ks_1samp(r, radial_law(p).cdf)
    assert pval >= 0.01
    assert D <= 1.628 / np.sqrt(r.size)  # the alpha = 0.01 critical value


def test_log_cosh_and_log_sinh_are_stable():
    r = np.array([0.0, 1e-3, 1.0, 50.0])
    # cosh(r) - 1 = 2 sinh(r/2)^2 keeps the reference accurate near zero
    assert np.allclose(log_cosh(r), np.log1p(2 * np.sinh(r / 2) ** 2), rtol=1e-13, atol=0)
    assert log_cosh(1e-8) == pytest.approx(0.5e-16, rel=1e-8)
    assert log_cosh(800.0) == pytest.approx(800 - np.log(2))
    assert np.isfinite(log_sinh(800.0))
    assert log_sinh(1.0) == pytest.approx(np.log(np.sinh(1.0)))
    assert log_sinh(0.0) == -np.inf


# --- Wishart density ---------------------------------------------------------


def test_wishart_density_examples():
    p = WishartParams(np.eye(2), 3)
    assert float(wishart_logdensity_invariant(np.eye(2), p)) == pytest.approx(-1.0)
    for n in [2, 5]:
        p = WishartParams(np.eye(2), n)
        assert float(wishart_logdensity_invariant(2 * np.eye(2), p)) == pytest.approx(n / 2 * np.log(4) - 2)
    val = wishart_logdensity_invariant(np.eye(2), p)
    assert isinstance(val, DensityValue) and not val.normalized


def test_complex_wishart_density_uses_rate_one():
    p = WishartParams(np.eye(2), 3, "complex")
    # (k n / 2) log det X - tr X with k = 2
    X = np.diag([2.0, 3.0]).astype(complex)
    assert float(wishart_logdensity_invariant(X, p)) == pytest.approx(3 * np.log(6.0) - 5.0)


@given(d=st.integers(2, 4), field=fields, seed=seeds)
def test_wishart_density_invariance_ratio(d, field, seed):
    rng = RngStream(seed)
    sigma = random_spd(d, field, rng)
    X = random_spd(d, field, rng) * 2.0
    G = random_unit_det_group(d, field, rng)
    p = WishartParams(sigma, d + 2, field)
    pg = WishartParams(group_act(G, sigma), d + 2, field)
    lhs = float(wishart_logdensity_invariant(group_act(G, X), pg))
    rhs = float(wishart_logdensity_invariant(X, p))
    assert abs(lhs - rhs) <= 1e-9 * max(1.0, abs(rhs))


# --- projective densities ----------------------------------------------------


def test_trace_form_examples():
    p = WishartParams(np.eye(2), 5)
    assert float(projective_logdensity_trace(np.eye(2), p)) == pytest.approx(0.0, abs=1e-15)
    x = np.diag([E, 1 / E])
    assert float(projective_logdensity_trace(x, p)) == pytest.approx(-5 * np.log(np.cosh(1.0)), abs=1e-14)


def test_cosh_form_examples():
    p = WishartParams(np.diag([4.0, 1.0]), 5)
    assert float(projective_logdensity_cosh(p.sigma_bar, p)) == 0.0
    p = WishartParams(np.eye(2), 5)
    assert float(projective_logdensity_cosh(np.diag([E, 1 / E]), p)) == pytest.approx(-5 * np.log(np.cosh(1.0)))
    with pytest.raises(ValueError):
        projective_logdensity_cosh(np.eye(3), WishartParams(np.eye(3), 4))


@given(d=st.integers(2, 4), field=fields, seed=seeds)
def test_trace_form_invariance(d, field, seed):
    rng = RngStream(seed)
    sigma = random_spd(d, field, rng)
    x = random_unit_det(d, field, rng)
    G = random_unit_det_group(d, field, rng)
    p = WishartParams(sigma, d + 1, field)
    pg = WishartParams(group_act(G, sigma), d + 1, field)
    moved = project(group_act(G, x))
    assert abs(float(projective_logdensity_trace(moved, pg)) - float(projective_logdensity_trace(x, p))) <= 1e-10 * d * 10


@pytest.mark.parametrize("field", ["real", "complex"])
def test_trace_minus_cosh_is_constant_and_sigma_free(field):
    rng = RngStream(32)
    offsets = []
    for _ in range(10):
        sigma = random_spd(2, field, rng, spread=1.0)
        p = WishartParams(sigma, 4, field)
        x = random_unit_det(2, field, rng, size=1000, spread=1.5)
        diff = projective_logdensity_trace(x, p).log_value - projective_logdensity_cosh(x, p).log_value
        assert np.ptp(diff) <= 1e-9
        offsets.append(diff.mean() - 0.5 * p.k * p.n * np.log(np.real(np.linalg.det(sigma))))
        # the cosh form as a function of r is the same function for every sigma
        r = distance(p.sigma_bar, x)
        assert np.max(np.abs(projective_logdensity_cosh(x, p).log_value + p.k * p.n * log_cosh(r))) <= 1e-12
    # sigma enters only through the additive offset (k n / 2) log det(sigma)
    assert np.max(np.abs(offsets)) <= 1e-9


def test_trace_form_offset_for_scaled_sigma():
    x = random_unit_det(2, "real", RngStream(33), size=20)
    p1 = WishartParams(np.diag([2.0, 0.5]), 5)
    p2 = WishartParams(9.0 * np.diag([2.0, 0.5]), 5)
    d1 = projective_logdensity_trace(x, p1).log_value
    d2 = projective_logdensity_trace(x, p2).log_value
    assert np.allclose(d2 - d1, 5 * np.log(9.0), atol=1e-12)


@pytest.mark.parametrize("field", ["real", "complex"])
def test_densities_agree_for_nearly_equidistant_samples(field):
    p = WishartParams(random_spd(2, field, RngStream(34)), 5, field)
    x = sample_projective_wishart(p, RngStream(35), 20_000)
    r = distance(p.sigma_bar, x)
    order = np.argsort(r)
    a, b = order[:-1], order[1:]
    close = np.abs(r[a] - r[b]) < 1e-3
    f = projective_logdensity_trace(x, p).log_value
    lipschitz = p.k * p.n  # |d/dr (k n log cosh r)| <= k n
    assert close.sum() > 1000
    assert np.all(np.abs(f[a] - f[b])[close] <= lipschitz * np.abs(r[a] - r[b])[close] + 1e-9)


# --- invariant volume and normalization ----------------------------------------


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2 * np.pi)
    assert sphere_area(2) == pytest.approx(4 * np.pi)


@pytest.mark.parametrize("field,exact", [
    ("real", lambda R: 2 * np.pi * (np.cosh(R) - 1)),
    ("complex", lambda R: np.pi * (np.sinh(2 * R) - 2 * R)),
])
def test_invariant_volume_of_geodesic_ball(field, exact):
    """Monte Carlo volume of a ball against the hyperbolic closed forms."""
    R = 1.5
    center = random_unit_det(2, field, RngStream(36))
    pts, log_q = sample_invariant_volume(center, field, RngStream(37), 200_000)
    vals = (distance(center, pts) < R) * np.exp(-log_q)
    est, se = vals.mean(), vals.std() / np.sqrt(vals.size)
    assert abs(est - exact(R)) <= 4 * se
    assert abs(est / exact(R) - 1) <= 0.01


@pytest.mark.parametrize("field,n", [("real", 5), ("complex", 3)])
def test_normalized_density_integrates_to_one(field, n):
    p = WishartParams(random_spd(2, field, RngStream(38)), n, field)
    c = normalize_density_2d(p)
    # proposal centered away from sigma_bar so the check is not circular
    center = random_unit_det(2, field, RngStream(39), spread=0.2)
    pts, log_q = sample_invariant_volume(center, field, RngStream(40), 400_000)
    vals = c * np.exp(projective_logdensity_cosh(pts, p).log_value - log_q)
    est, se = vals.mean(), vals.std() / np.sqrt(vals.size)
    assert abs(est - 1) <= 0.01
    assert abs(est - 1) <= 4 * se


def test_normalizing_constant_follows_distance_scale():
    p = WishartParams(np.eye(2), 5)
    c1 = normalize_density_2d(p)
    c2 = normalize_density_2d(p, scale=2 * DEFAULT_SCALE)
    assert c2 == pytest.approx(c1 / 2 ** 2, rel=1e-14)
    pc = WishartParams(np.eye(2), 4, "complex")
    assert normalize_density_2d(pc, scale=3 * DEFAULT_SCALE) == pytest.approx(normalize_density_2d(pc) / 27, rel=1e-14)
    # re-derived by Monte Carlo against the rescaled volume
    pts, log_q = sample_invariant_volume(np.eye(2), "real", RngStream(41), 200_000, scale=2 * DEFAULT_SCALE)
    est = np.mean(c2 * np.exp(projective_logdensity_cosh(pts, p).log_value - log_q))
    assert abs(est - 1) <= 0.01


def test_total_volume_invariant_under_group():
    """Integral of a fixed bump against nu_tot, before and after a group action."""
    field = "real"
    c0 = np.diag([1.5, 1 / 1.5])

    def bump(X):
        x, t = theta(X)
        rr = distance(c0, x)
        return np.clip(1 - rr ** 2, 0, None) * np.clip(1 - (t / 0.5) ** 2, 0, None)

    def integral(G, stream):
        pts, log_q = sample_invariant_volume_total(np.eye(2), field, RngStream(42, stream), 200_000)
        vals = bump(group_act(G, pts)) * np.exp(-log_q)
        return vals.mean(), vals.std() / np.sqrt(vals.size)

    base, base_se = integral(np.eye(2), 0)
    for i, G in enumerate(random_unit_det_group(2, field, RngStream(43), size=3)):
        # keep the pulled-back bump inside the proposal's log-det window
        val, se = integral(G, i + 1)
        assert abs(val - base) <= 3 * np.hypot(se, base_se)


def test_total_volume_sampler_log_density():
    pts, log_q = sample_invariant_volume_total(np.eye(2), "complex", RngStream(44), 1000, logdet_range=(-2, 2))
    _, t = theta(pts)
    assert t.min() >= -2 and t.max() <= 2
    pts2, log_q2 = sample_invariant_volume(np.eye(2), "complex", RngStream(44), 1000)
    assert np.allclose(log_q, log_q2 - np.log(4.0))
