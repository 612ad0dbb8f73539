"""Penalised maximum-likelihood fitting, information criteria and summaries."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import norm

from . import copulas
from .data import Dataset
from .likelihood import JointLikelihood, LikelihoodError, MarginLikelihood, ModelSpec
from .margins import SplineBasis, get_link, raw_from_coefficients
from .optimizer import OptimOptions, OptimReport, maximize


class FitError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitOptions:
    ridge: float = 1e-4  # on the raw baseline increments
    optim: OptimOptions = field(default_factory=OptimOptions)
    eta3_grid: int = 11
    z_level: float = 0.95


_ETA3_RANGE = {"log": (-2.0, 3.0), "log1": (-2.0, 3.0), "tanh": (-1.5, 1.5), "identity": (-10.0, 10.0)}


@dataclass
class FittedModel:
    spec: ModelSpec
    n: int
    delta: np.ndarray
    loglik: float  # unpenalised
    info: np.ndarray  # observed information, unpenalised
    penalized_info: np.ndarray
    edf: float
    report: OptimReport
    theta: np.ndarray  # per unit
    kendall_tau: float
    theta_ci: tuple[float, float] | None
    blocks: dict
    labels: dict

    @property
    def converged(self) -> bool:
        return self.report.converged

    @property
    def max_abs_gradient(self) -> float:
        return self.report.grad_norm

    @property
    def eigen_range(self) -> tuple[float, float]:
        ev = np.linalg.eigvalsh(self.penalized_info)
        return float(ev.min()), float(ev.max())

    @property
    def theta_hat(self) -> float | np.ndarray:
        if not self.spec.eta3:
            return float(self.theta[0])
        return self.theta

    def coefficients(self, block: str) -> np.ndarray:
        return self.delta[self.blocks[block]]

    def standard_errors(self) -> np.ndarray:
        try:
            cov = np.linalg.inv(self.penalized_info)
        except np.linalg.LinAlgError:
            return np.full(self.delta.size, np.nan)
        with np.errstate(invalid="ignore"):
            return np.sqrt(np.diag(cov))


# ---------------------------------------------------------------------------
# starting values


def kaplan_meier(times, events) -> tuple[np.ndarray, np.ndarray]:
    """Product-limit survival just after each distinct event time."""
    times = np.asarray(times, float)
    events = np.asarray(events, bool)
    ev_times = np.unique(times[events])
    surv = np.empty(ev_times.size)
    s = 1.0
    for i, t in enumerate(ev_times):
        at_risk = np.sum(times >= t)
        s *= 1.0 - np.sum((times == t) & events) / at_risk
        surv[i] = s
    return ev_times, surv


def _baseline_start(basis: SplineBasis, link, lower, upper, codes) -> np.ndarray:
    link = get_link(link)
    mid = np.where(codes == "I", 0.5 * (lower + np.nan_to_num(upper)), lower)
    events = codes != "R"
    ev_t, ev_s = kaplan_meier(mid, events)
    keep = (ev_s > 0.01) & (ev_s < 0.99) & (ev_t > 0)
    if keep.sum() >= 3:
        t, s = ev_t[keep], ev_s[keep]
    else:
        t = np.quantile(mid[mid > 0], [0.25, 0.5, 0.75])
        s = np.array([0.75, 0.5, 0.25])
    B, _ = basis.design(t)
    y = link.g(s)
    k = basis.n_coef
    # small ridge keeps unsupported coefficients near a linear trend
    A = np.vstack([B, 1e-3 * np.diff(np.eye(k), 2, axis=0)])
    alpha = np.linalg.lstsq(A, np.concatenate([y, np.zeros(k - 2)]), rcond=None)[0]
    # the least-squares curve can overshoot beyond the last KM point; spline values are
    # convex combinations of coefficients, so clipping keeps the start inside S in [0.005, 0.995]
    alpha = np.clip(alpha, *np.sort(link.g(np.array([0.995, 0.005]))))
    alpha = np.maximum.accumulate(alpha)
    return raw_from_coefficients(alpha)


def _penalty(n_params: int, base_slices, ridge: float) -> np.ndarray:
    S = np.zeros(n_params)
    for s in base_slices:
        S[s.start + 1:s.stop] = ridge
    return S


def _run(model, S, x0, options: OptimOptions) -> OptimReport:
    def fun(x):
        try:
            return model.loglik(x) - 0.5 * float(np.sum(S * x * x))
        except LikelihoodError:
            return -np.inf

    return maximize(
        fun,
        lambda x: model.gradient(x) - S * x,
        lambda x: model.hessian(x) - np.diag(S),
        x0,
        options,
    )


def fit_margin(
    d: Dataset, margin: int, link, covariates=(), basis: SplineBasis | None = None,
    options: FitOptions | None = None, n_knots: int = 8, degree: int = 2,
) -> tuple[MarginLikelihood, OptimReport, float]:
    """Copula-free fit of one margin; returns (model, report, edf)."""
    opt = options or FitOptions()
    model = MarginLikelihood.from_dataset(d, margin, link, covariates, basis, n_knots, degree)
    lower, upper, codes = d.margin_times(margin)
    x0 = np.concatenate([_baseline_start(model.basis, link, lower, upper, codes), np.zeros(len(covariates))])
    S = _penalty(model.n_params, model.base_slices, opt.ridge)
    rep = _run(model, S, x0, opt.optim)
    info = -model.hessian(rep.x)
    edf = _edf(info, S)
    return model, rep, edf


def _edf(info, S) -> float:
    try:
        return float(np.trace(np.linalg.solve(info + np.diag(S), info)))
    except np.linalg.LinAlgError:
        return float(info.shape[0])


def _start(L: JointLikelihood, d: Dataset, opt: FitOptions) -> np.ndarray:
    sl = L.layout.slices
    x0 = np.zeros(L.n_params)
    for m, (bs, bt, covs) in enumerate(((sl["base1"], sl["beta1"], L.spec.eta1), (sl["base2"], sl["beta2"], L.spec.eta2))):
        lower, upper, codes = d.margin_times(m + 1)
        link = L.spec.links[m]
        raw0 = _baseline_start(L.bases[m], link, lower, upper, codes)
        x0[bs] = raw0
        try:
            model, rep, _ = fit_margin(d, m + 1, link, covs, L.bases[m], opt)
            if np.all(np.isfinite(rep.x)):
                x0[bs] = rep.x[: L.bases[m].n_coef]
                x0[bt] = rep.x[L.bases[m].n_coef:]
        except (LikelihoodError, FloatingPointError):
            pass
    lo, hi = _ETA3_RANGE[L.family.link]
    i3 = sl["beta3"].start
    best, best_val = 0.5 * (lo + hi), -np.inf
    for e in np.linspace(lo, hi, opt.eta3_grid):
        x0[i3] = e
        try:
            val = L.loglik(x0)
        except LikelihoodError:
            continue
        if val > best_val:
            best, best_val = e, val
    x0[i3] = best
    return x0


def fit_model(
    spec: ModelSpec, d: Dataset, options: FitOptions | None = None, start=None,
    bases: tuple[SplineBasis, SplineBasis] | None = None,
) -> FittedModel:
    opt = options or FitOptions()
    L = JointLikelihood(spec, d, bases)
    if d.n < 10 * L.n_params:
        warnings.warn(
            f"{d.n} units for {L.n_params} parameters; at least {10 * L.n_params} are recommended",
            stacklevel=2,
        )
    x0 = np.asarray(start, float) if start is not None else _start(L, d, opt)
    S = _penalty(L.n_params, L.base_slices, opt.ridge)
    try:
        rep = _run(L, S, x0, opt.optim)
    except (LikelihoodError, FloatingPointError) as exc:
        raise FitError(f"fit failed: {exc}") from exc
    delta = rep.x
    info = -(rep.hessian + np.diag(S))  # report carries the penalised Hessian
    pinfo = info + np.diag(S)
    theta = L.theta(delta)
    if spec.eta3:  # average over units
        tau = float(np.mean([copulas.kendall_tau(L.family, t) for t in theta]))
    else:
        tau = copulas.kendall_tau(L.family, theta[0])
    labels = {
        "beta1": list(spec.eta1),
        "beta2": list(spec.eta2),
        "beta3": ["(Intercept)"] + list(spec.eta3),
    }
    fm = FittedModel(
        spec=spec, n=d.n, delta=delta, loglik=L.loglik(delta), info=info, penalized_info=pinfo,
        edf=_edf(info, S), report=rep, theta=theta, kendall_tau=tau, theta_ci=None,
        blocks=L.layout.slices, labels=labels,
    )
    fm.theta_ci = _theta_ci(fm, L.family, opt.z_level)
    return fm


def _theta_ci(fm: FittedModel, family, level: float):
    if fm.spec.eta3:
        return None
    i = fm.blocks["beta3"].start
    se = fm.standard_errors()[i]
    if not np.isfinite(se):
        return None
    z = norm.ppf(0.5 + level / 2)
    e = fm.delta[i]
    a, b = copulas.theta_from_eta(family, np.array([e - z * se, e + z * se]))
    return float(min(a, b)), float(max(a, b))


def aic(fm: FittedModel) -> float:
    return -2.0 * fm.loglik + 2.0 * fm.edf


def bic(fm: FittedModel) -> float:
    return -2.0 * fm.loglik + math.log(fm.n) * fm.edf


def criterion(fm: FittedModel | None, measure: str) -> float:
    """AIC or BIC; failed or non-converged fits score +inf."""
    if fm is None or not fm.converged:
        return math.inf
    return aic(fm) if measure.upper() == "AIC" else bic(fm)


# ---------------------------------------------------------------------------
# summaries

_LINK_LABEL = {"PH": "-log(-log) link", "PO": "-logit link", "probit": "-probit link"}
_EQUATIONS = (("eta1", "beta1"), ("eta2", "beta2"), ("eta3", "beta3"))


def summarize(fm: FittedModel) -> dict:
    se = fm.standard_errors()
    tables = {}
    for eq, block in _EQUATIONS:
        s = fm.blocks[block]
        rows = []
        for name, est, err in zip(fm.labels[block], fm.delta[s], se[s]):
            z = est / err if err > 0 else float("nan")
            rows.append({
                "name": name,
                "estimate": float(est),
                "se": float(err),
                "z": float(z),
                "p": float(2.0 * norm.sf(abs(z))) if np.isfinite(z) else float("nan"),
            })
        tables[eq] = rows
    lo, hi = fm.eigen_range
    theta = fm.theta_hat
    return {
        "copula": fm.spec.copula,
        "copula_name": copulas.get_family(fm.spec.copula).name,
        "links": list(fm.spec.links),
        "equations": tables,
        "theta": float(theta) if np.isscalar(theta) else [float(np.min(theta)), float(np.max(theta))],
        "theta_ci": list(fm.theta_ci) if fm.theta_ci else None,
        "kendall_tau": fm.kendall_tau,
        "n": fm.n,
        "loglik": fm.loglik,
        "edf": fm.edf,
        "aic": aic(fm),
        "bic": bic(fm),
        "convergence": {
            "converged": fm.converged,
            "iterations": fm.report.iterations,
            "max_abs_gradient": fm.max_abs_gradient,
            "eigen_range": [lo, hi],
            "info_positive_definite": bool(lo > 0),
            "message": fm.report.message,
        },
    }


def format_summary(report: dict) -> str:
    out = [f"COPULA: {report['copula_name']}"]
    for i, link in enumerate(report["links"]):
        out.append(f"MARGIN {i + 1}: survival with {_LINK_LABEL[link]}")
    for eq, rows in report["equations"].items():
        out.append("")
        out.append(f"EQUATION {eq[-1]}")
        out.append(f"{'':<16}{'Estimate':>12}{'Std. Error':>12}{'z value':>10}{'Pr(>|z|)':>12}")
        for r in rows:
            out.append(f"{r['name']:<16}{r['estimate']:>12.5g}{r['se']:>12.5g}{r['z']:>10.3f}{r['p']:>12.3g}")
    out.append("")
    th = report["theta"]
    if isinstance(th, list):
        out.append(f"theta range = ({th[0]:.3g}, {th[1]:.3g})  tau = {report['kendall_tau']:.3g}")
    else:
        ci = report["theta_ci"]
        ci_txt = f"({ci[0]:.3g},{ci[1]:.3g})" if ci else ""
        out.append(f"theta = {th:.3g}{ci_txt}  tau = {report['kendall_tau']:.3g}")
    out.append(f"n = {report['n']}  total edf = {report['edf']:.3g}")
    conv = report["convergence"]
    out.append(f"Largest absolute gradient value: {conv['max_abs_gradient']:.6e}")
    verdict = "positive definite" if conv["info_positive_definite"] else "not positive definite"
    out.append(f"Observed information is {verdict}")
    lo, hi = conv["eigen_range"]
    out.append(f"Eigenvalue range: [{lo:.7g},{hi:.7g}]")
    out.append(f"Iterations: {conv['iterations']}")
    return "\n".join(out)
