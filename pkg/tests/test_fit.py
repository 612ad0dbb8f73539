import json
import math
from types import SimpleNamespace

import numpy as np
import pytest
from scipy.stats import kendalltau

from brbvs import copulas
from brbvs.data import Dataset
from brbvs.fit import (
    FitOptions, FittedModel, aic, bic, criterion, fit_margin, fit_model, format_summary, kaplan_meier, summarize,
)
from brbvs.likelihood import JointLikelihood, ModelSpec
from brbvs.simulate import SimConfig, generate


@pytest.fixture(scope="module")
def scenario_a():
    return generate(SimConfig(n=500, p=3, scenario="A", seed=21)).data


@pytest.fixture(scope="module")
def fitted(scenario_a):
    spec = ModelSpec("C0", ("PH", "PO"), ("x1", "x2"), ("x1", "x3"))
    return fit_model(spec, scenario_a)


def _stub(loglik, edf, n, converged=True):
    return SimpleNamespace(loglik=loglik, edf=edf, n=n, converged=converged)


def test_information_criteria_definitions():
    assert aic(_stub(-100.0, 5.0, 10)) == 210.0
    assert bic(_stub(-100.0, 5.0, math.exp(2))) == pytest.approx(210.0)
    assert criterion(_stub(-100.0, 5.0, 10), "aic") == 210.0
    assert criterion(_stub(-100.0, 5.0, 10, converged=False), "AIC") == math.inf
    assert criterion(None, "BIC") == math.inf


def test_kaplan_meier_hand_example():
    t, s = kaplan_meier([1, 2, 2, 3, 4], [1, 1, 0, 1, 0])
    assert np.allclose(t, [1, 2, 3])
    assert np.allclose(s, [0.8, 0.8 * 0.75, 0.8 * 0.75 * 0.5])


def test_scenario_a_fit(fitted):
    assert fitted.converged and fitted.max_abs_gradient < 1e-4
    lo, hi = fitted.eigen_range
    assert lo > 0 and hi > lo
    b1, b2 = fitted.coefficients("beta1"), fitted.coefficients("beta2")
    assert np.all(np.abs(b1 - [-1.5, 1.7]) < 0.4)
    assert np.all(np.abs(b2 - [-1.5, -1.3]) < 0.4)
    assert fitted.kendall_tau == pytest.approx(copulas.kendall_tau("C0", fitted.theta_hat))
    n_par = fitted.delta.size
    assert n_par - 11 <= fitted.edf <= n_par + 1e-9  # shrinkage only touches baseline increments


def test_theta_interval_contains_estimate(fitted):
    lo, hi = fitted.theta_ci
    assert lo < fitted.theta_hat < hi


def test_duplicated_data_same_estimates(scenario_a, fitted):
    d = scenario_a
    dd = d.subset(np.concatenate([np.arange(d.n), np.arange(d.n)]))
    # the same bases and twice the ridge keep the penalised objective exactly doubled
    bases = JointLikelihood(fitted.spec, d).bases
    fm2 = fit_model(fitted.spec, dd, FitOptions(ridge=2e-4), bases=bases)
    assert np.allclose(fm2.coefficients("beta1"), fitted.coefficients("beta1"), atol=1e-6)
    assert np.allclose(fm2.coefficients("beta2"), fitted.coefficients("beta2"), atol=1e-6)
    assert fm2.loglik == pytest.approx(2 * fitted.loglik, abs=1e-5)


def test_kendall_tau_matches_uncensored_pairs():
    res = generate(SimConfig(n=1500, p=3, scenario="A", seed=5))
    t1, t2 = res.t_true[:, 0], res.t_true[:, 1]
    nan = np.full(t1.size, np.nan)
    codes = np.array(["U"] * t1.size)
    d = Dataset(t1, nan, t2, nan, codes, codes, res.data.X, res.data.names)
    fm = fit_model(ModelSpec("C0", ("PH", "PO"), ("x1", "x2"), ("x1", "x3")), d)
    # dependence lives on the survival scale u = S(T|x), taken from the generator's uniforms
    assert abs(copulas.kendall_tau("C0", fm.theta_hat) - kendalltau(res.u[:, 0], res.u[:, 1])[0]) < 0.05


def test_summary_round_trip_and_format(fitted):
    rep = summarize(fitted)
    back = json.loads(json.dumps(rep))
    assert back == rep
    text = format_summary(rep)
    assert text.startswith("COPULA: Clayton")
    assert "MARGIN 1: survival with -log(-log) link" in text
    assert "MARGIN 2: survival with -logit link" in text
    assert "Largest absolute gradient value" in text and "Eigenvalue range: [" in text
    se = fitted.standard_errors()
    s = fitted.blocks["beta1"]
    row = rep["equations"]["eta1"][0]
    assert row["se"] == pytest.approx(se[s][0])
    assert row["z"] == pytest.approx(fitted.delta[s][0] / se[s][0])


def test_hand_built_z_values():
    spec = ModelSpec("C0", ("PH", "PO"), ("a",), ())
    blocks = {"base1": slice(0, 0), "beta1": slice(0, 1), "base2": slice(1, 1), "beta2": slice(1, 1), "beta3": slice(1, 2)}
    info = np.array([[4.0, 0.0], [0.0, 25.0]])
    report = SimpleNamespace(converged=True, grad_norm=0.0, iterations=1, message="")
    fm = FittedModel(
        spec=spec, n=10, delta=np.array([1.0, 0.5]), loglik=-3.0, info=info, penalized_info=info, edf=2.0,
        report=report, theta=np.full(10, np.exp(0.5)), kendall_tau=0.0, theta_ci=None, blocks=blocks,
        labels={"beta1": ["a"], "beta2": [], "beta3": ["(Intercept)"]},
    )
    rep = summarize(fm)
    assert rep["equations"]["eta1"][0]["se"] == pytest.approx(0.5)
    assert rep["equations"]["eta1"][0]["z"] == pytest.approx(2.0)
    assert rep["equations"]["eta3"][0]["z"] == pytest.approx(2.5)
    assert rep["equations"]["eta1"][0]["p"] == pytest.approx(0.0455003, abs=1e-6)


def test_column_permutation_invariance(scenario_a, fitted):
    d = scenario_a
    perm = d.with_covariates(d.X[:, ::-1], d.names[::-1])
    spec = ModelSpec("C0", ("PH", "PO"), ("x2", "x1"), ("x3", "x1"))
    fm = fit_model(spec, perm)
    assert fm.loglik == pytest.approx(fitted.loglik, abs=1e-6)
    assert aic(fm) == pytest.approx(aic(fitted), abs=1e-6)
    assert fm.theta_hat == pytest.approx(fitted.theta_hat, abs=1e-6)
    assert np.allclose(fm.coefficients("beta1")[::-1], fitted.coefficients("beta1"), atol=1e-6)
    assert np.allclose(fm.coefficients("beta2")[::-1], fitted.coefficients("beta2"), atol=1e-6)


def test_fit_margin_recovers_effect(scenario_a):
    model, rep, edf = fit_margin(scenario_a, 1, "PH", ("x1", "x2"))
    assert rep.converged
    assert np.all(np.abs(rep.x[-2:] - [-1.5, 1.7]) < 0.4)
    assert 0 < edf <= model.n_params


def test_small_sample_warning(scenario_a):
    with pytest.warns(UserWarning, match="recommended"):
        fit_model(ModelSpec("C0", ("PH", "PO"), ("x1",), ("x1",)), scenario_a.subset(np.arange(150)))


def test_start_values_stay_finite_when_least_squares_overshoots():
    # this dataset's KM curve ends early and the unclamped start put S(t_max) at exp(-e^7.6)
    cfg = SimConfig(n=600, p=5, seed=5026, effects1=(("x1", -1.5), ("x2", 1.7), ("x4", 1.0)),
                    effects2=(("x1", -1.5), ("x3", -1.3), ("x4", -1.0)))
    d = generate(cfg).data
    model, rep, _ = fit_margin(d, 1, "PH", ("x1", "x2", "x3", "x4"))
    assert rep.converged and np.isfinite(rep.value)
