import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from brbvs.margins import (
    LINK_CODES, FunctionBaseline, LinkDomainError, MarginModel, MonotoneBaseline, SplineBasis,
    baseline_coefficients, baseline_jacobian, get_link, link_eval, link_inverse, raw_from_coefficients,
)
from brbvs.simulate import baseline_survival

BASIS = SplineBasis.from_times(np.exp(np.linspace(-2, 1.5, 50)))


def test_link_values():
    assert link_inverse("PO", 0.0) == 0.5
    assert link_inverse("PH", 0.0) == pytest.approx(np.exp(-1), abs=1e-15)
    assert link_inverse("probit", 0.0) == 0.5
    assert link_eval("probit", link_inverse("probit", 1.3)) == pytest.approx(1.3, abs=1e-10)


@pytest.mark.parametrize("code", LINK_CODES)
def test_link_domain(code):
    with pytest.raises(LinkDomainError):
        link_eval(code, 1.0)
    with pytest.raises(LinkDomainError):
        link_eval(code, 0.0)


@pytest.mark.parametrize("code", LINK_CODES)
def test_derivatives_match_fd(code):
    lk = get_link(code)
    eta = np.linspace(-4, 3, 71)
    h = 1e-6
    assert np.max(np.abs(lk.dG(eta) - (lk.G(eta + h) - lk.G(eta - h)) / (2 * h))) < 1e-7
    assert np.allclose(lk.log_neg_dG(eta), np.log(-lk.dG(eta)), atol=1e-12)
    fd = (lk.log_neg_dG(eta + h) - lk.log_neg_dG(eta - h)) / (2 * h)
    assert np.max(np.abs(lk.dlog_neg_dG(eta) - fd)) < 1e-6


def test_get_link_case_insensitive():
    assert get_link("po").code == "PO"
    assert get_link("Probit").code == "probit"
    with pytest.raises(ValueError):
        get_link("logit")


@given(raw=arrays(float, 11, elements=st.floats(-6, 3)))
@settings(max_examples=50, deadline=None)
def test_baseline_monotone_for_any_raw(raw):
    bl = MonotoneBaseline(BASIS, raw)
    t = np.exp(np.linspace(-4, 3, 200))  # includes extrapolation on both sides
    eta = bl.eta(t)
    assert np.all(np.diff(eta) >= -1e-12)
    assert np.all(bl.deta_dt(t) >= 0)


def test_baseline_raw_round_trip_and_jacobian():
    rng = np.random.default_rng(0)
    raw = rng.normal(size=8)
    assert np.allclose(raw_from_coefficients(baseline_coefficients(raw)), raw, atol=1e-12)
    h = 1e-6
    fd = np.column_stack([
        (baseline_coefficients(raw + h * e) - baseline_coefficients(raw - h * e)) / (2 * h)
        for e in np.eye(8)
    ])
    assert np.allclose(baseline_jacobian(raw), fd, atol=1e-8)


def test_basis_linear_extrapolation():
    lo, hi = BASIS.bounds
    x = np.array([hi + 0.5, hi + 1.0, hi + 1.5])
    b, db = BASIS.design(np.exp(x))
    coef = np.arange(BASIS.n_coef, dtype=float) ** 1.5
    assert np.allclose(np.diff(b @ coef, 2), 0.0, atol=1e-10)
    assert np.allclose(db @ coef, (db @ coef)[0])


def _model(link, beta=()):
    raw = np.concatenate([[-2.0], np.full(BASIS.n_coef - 1, np.log(0.4))])
    return MarginModel(get_link(link), MonotoneBaseline(BASIS, raw), np.asarray(beta, float), ("a", "b")[:len(beta)])


@pytest.mark.parametrize("code", LINK_CODES)
def test_survival_decreasing_and_density_fd(code):
    m = _model(code, (0.4, -0.7))
    x = np.array([0.3, 1.1])
    t = np.exp(np.linspace(-2.5, 2.0, 60))
    s = m.survival(t, np.tile(x, (t.size, 1)))
    assert np.all((s > 0) & (s < 1))
    assert np.all(np.diff(s) < 0)
    h = 1e-6 * t
    X = np.tile(x, (t.size, 1))
    fd = -(m.survival(t + h, X) - m.survival(t - h, X)) / (2 * h)
    assert np.max(np.abs(m.density(t, X) - fd)) < 1e-5


def test_zero_effects_calibrated_baseline():
    # PO baseline with eta(1) = 0 gives S(1|x) = 0.5 for every x
    m = MarginModel(get_link("PO"), FunctionBaseline(np.log, lambda t: 1.0 / t), np.zeros(2), ("a", "b"))
    X = np.random.default_rng(1).normal(size=(5, 2))
    assert np.allclose(m.survival(np.ones(5), X), 0.5)


def test_flat_baseline_has_zero_density():
    m = MarginModel(get_link("PH"), FunctionBaseline(lambda t: np.zeros_like(t), lambda t: np.zeros_like(t)))
    assert np.all(m.density(np.linspace(0.5, 2, 5)) == 0.0)


def test_ph_margin_reproduces_generator_transform():
    # eta(t) = log(-log S0(t)) with the simulator's S0 and a Table-scale effect
    def eta0(t):
        return np.log(-np.log(baseline_survival(t)))

    def deta0(t, h=1e-6):
        return (eta0(t + h) - eta0(t - h)) / (2 * h)

    beta = np.array([-1.5, 1.7])
    m = MarginModel(get_link("PH"), FunctionBaseline(eta0, deta0), beta, ("x1", "x2"))
    t = np.array([0.2, 0.8, 1.5, 3.0])
    X = np.array([[1.0, 0.0], [0.5, -0.3], [-1.0, 0.2], [0.0, 1.0]])
    direct = np.exp(-np.exp(np.log(-np.log(baseline_survival(t))) + X @ beta))
    assert np.allclose(m.survival(t, X), direct, atol=1e-8)
    # with beta = 0 the density is -dS0/dt
    m0 = MarginModel(get_link("PH"), FunctionBaseline(eta0, deta0))
    fd = -(baseline_survival(t + 1e-6) - baseline_survival(t - 1e-6)) / 2e-6
    assert np.allclose(m0.density(t), fd, rtol=1e-6)
