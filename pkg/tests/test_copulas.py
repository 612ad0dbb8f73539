import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import kendalltau, multivariate_normal

from brbvs import copulas
from brbvs.copulas import (
    COPULA_CODES, CopulaDomainError, bvn_cdf, cdf, conditional_sample, density, eta_from_theta,
    get_family, h1, h2, kendall_tau, theta_from_eta,
)

# one interior parameter per family, away from independence
THETA = {"AMH": 0.6, "C0": 2.0, "FGM": 0.7, "F": 5.0, "GAL": 1.5, "N": 0.6, "G0": 2.0, "J0": 2.5, "PL": 4.0}
units = st.floats(0.02, 0.98)


def test_clayton_cdf_closed_form():
    assert cdf("C0", 0.5, 0.5, 1.0) == pytest.approx(1 / 3, abs=1e-14)


def test_fgm_independence():
    u = np.linspace(0.05, 0.95, 7)
    assert np.allclose(cdf("FGM", u[:, None], u[None, :], 0.0), u[:, None] * u[None, :], atol=1e-15)
    assert np.allclose(h1("FGM", 0.3, u, 0.0), u, atol=1e-15)


@pytest.mark.parametrize("code", COPULA_CODES)
def test_boundaries(code):
    th = THETA[code]
    assert cdf(code, 0.37, 1.0, th) == 0.37
    assert cdf(code, 1.0, 0.37, th) == 0.37
    assert cdf(code, 0.0, 0.37, th) == 0.0
    assert h1(code, 0.4, 1.0, th) == 1.0


def test_clayton_h1_by_hand():
    assert h1("C0", 0.5, 0.5, 1.0) == pytest.approx(4 / 9, abs=1e-14)
    fd = (cdf("C0", 0.5 + 1e-6, 0.5, 1.0) - cdf("C0", 0.5 - 1e-6, 0.5, 1.0)) / 2e-6
    assert fd == pytest.approx(4 / 9, abs=1e-8)


@pytest.mark.parametrize("code", COPULA_CODES)
def test_h_functions_match_fd(code):
    th = THETA[code]
    u = np.linspace(0.05, 0.95, 11)
    u1, u2 = np.meshgrid(u, u, indexing="ij")
    e = 1e-6
    fd1 = (cdf(code, u1 + e, u2, th) - cdf(code, u1 - e, u2, th)) / (2 * e)
    fd2 = (cdf(code, u1, u2 + e, th) - cdf(code, u1, u2 - e, th)) / (2 * e)
    assert np.max(np.abs(h1(code, u1, u2, th) - fd1)) < 1e-6
    assert np.max(np.abs(h2(code, u1, u2, th) - fd2)) < 1e-6


@pytest.mark.parametrize("code", COPULA_CODES)
def test_density_matches_fd_of_h(code):
    th = THETA[code]
    u = np.linspace(0.1, 0.9, 9)
    u1, u2 = np.meshgrid(u, u, indexing="ij")
    e = 1e-5
    fd = (h1(code, u1, u2 + e, th) - h1(code, u1, u2 - e, th)) / (2 * e)
    assert np.max(np.abs(density(code, u1, u2, th) - fd)) < 1e-5 * max(1.0, np.max(fd))


def test_clayton_density_by_2d_fd():
    e = 1e-4
    c = cdf
    fd = (c("C0", .5 + e, .5 + e, 2.) - c("C0", .5 + e, .5 - e, 2.) - c("C0", .5 - e, .5 + e, 2.)
          + c("C0", .5 - e, .5 - e, 2.)) / (4 * e * e)
    # hand derivative: (1+t) (uv)^(-t-1) (u^-t + v^-t - 1)^(-1/t-2)
    exact = 3.0 * 0.25 ** (-3) * (4 + 4 - 1) ** (-2.5)
    assert density("C0", 0.5, 0.5, 2.0) == pytest.approx(exact, rel=1e-12)
    assert fd == pytest.approx(exact, rel=1e-5)


@pytest.mark.parametrize("code,theta", [("G0", 1.0), ("N", 0.0), ("PL", 1.0), ("F", 0.0), ("AMH", 0.0)])
def test_independence_density(code, theta):
    u = np.linspace(0.05, 0.95, 7)
    assert np.allclose(density(code, u[:, None], u[None, :], theta), 1.0, atol=1e-10)


@pytest.mark.parametrize("code,t0", [("F", 0.0), ("PL", 1.0)])
def test_removable_singularity_is_continuous(code, t0):
    u1, u2 = 0.3, 0.8
    band = copulas._SERIES_BAND
    for side in (-1, 1):
        inside = copulas.derivatives(code, u1, u2, t0 + side * band * 0.999)
        outside = copulas.derivatives(code, u1, u2, t0 + side * band * 1.001)
        for a, b in zip(inside, outside):
            assert abs(float(a) - float(b)) < 1e-5 * max(1.0, abs(float(b)))


def test_theta_link_examples():
    assert theta_from_eta("C0", 1.2) == pytest.approx(3.32012, abs=1e-5)
    assert theta_from_eta("N", 0.0) == 0.0
    assert theta_from_eta("PL", 0.0) == 1.0


@pytest.mark.parametrize("code", COPULA_CODES)
@given(eta=st.floats(-5, 5))
@settings(max_examples=30, deadline=None)
def test_theta_link_round_trip(code, eta):
    th = theta_from_eta(code, eta)
    assert get_family(code).in_range(th)
    assert eta_from_theta(code, th) == pytest.approx(eta, abs=1e-10)


def test_out_of_range_theta_rejected():
    with pytest.raises(CopulaDomainError):
        cdf("C0", 0.5, 0.5, -1.0)
    with pytest.raises(CopulaDomainError):
        cdf("G0", 0.5, 0.5, 0.5)
    with pytest.raises(CopulaDomainError):
        kendall_tau("AMH", 1.5)
    with pytest.raises(ValueError):
        get_family("T")


@pytest.mark.parametrize("code", COPULA_CODES)
@given(a=units, b=units, c=units, d=units)
@settings(max_examples=40, deadline=None)
def test_two_increasing(code, a, b, c, d):
    u_lo, u_hi = min(a, b), max(a, b)
    v_lo, v_hi = min(c, d), max(c, d)
    th = THETA[code]
    mass = cdf(code, u_hi, v_hi, th) - cdf(code, u_lo, v_hi, th) - cdf(code, u_hi, v_lo, th) + cdf(code, u_lo, v_lo, th)
    assert mass >= -1e-12


def test_bvn_against_scipy():
    rng = np.random.default_rng(0)
    for r in (-0.95, -0.5, 0.0, 0.3, 0.93, 0.99):
        pts = rng.normal(size=(20, 2)) * 1.5
        ref = multivariate_normal(cov=[[1, r], [r, 1]]).cdf(pts)
        assert np.max(np.abs(bvn_cdf(pts[:, 0], pts[:, 1], r) - ref)) < 1e-8


def test_kendall_tau_closed_forms_against_integration():
    # the numeric route integrates h-functions; compare it with the closed forms
    for code, th in (("C0", 2.0), ("G0", 2.0), ("FGM", 0.7), ("AMH", 0.6)):
        num = copulas._numeric_tau(get_family(code), th)
        assert num == pytest.approx(kendall_tau(code, th), abs=1e-6)


@pytest.mark.parametrize("code", ["F", "J0", "PL", "GAL", "N"])
def test_kendall_tau_against_samples(code):
    rng = np.random.default_rng(11)
    u = rng.uniform(size=20_000)
    v = conditional_sample(code, u, rng.uniform(size=u.size), THETA[code])
    assert kendalltau(u, v)[0] == pytest.approx(kendall_tau(code, THETA[code]), abs=0.015)


def test_clayton_conditional_limits():
    assert copulas.clayton_conditional(0.3, 1.0, 3.3) == 1.0
    assert copulas.clayton_conditional(0.3, 0.42, 1e-12) == pytest.approx(0.42)
    # inverse of the h-function
    u2 = copulas.clayton_conditional(0.3, 0.42, 3.3)
    assert h1("C0", 0.3, u2, 3.3) == pytest.approx(0.42, abs=1e-12)


def test_frank_conditional_sample():
    u2 = conditional_sample("F", 0.3, 0.7, 5.0)
    assert abs(h1("F", 0.3, u2, 5.0) - 0.7) < 1e-10
