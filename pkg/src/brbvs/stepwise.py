"""Link selection and stepwise covariate selection by AIC or BIC."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .algorithm import resolve_threads
from .data import Dataset
from .fit import FitError, FitOptions, criterion, fit_margin, fit_model
from .likelihood import LikelihoodError, ModelSpec
from .margins import LINK_CODES

SCHEMA_VERSION = 1


class StepwiseError(RuntimeError):
    pass


def _measure(measure: str) -> str:
    m = str(measure).upper()
    if m not in ("AIC", "BIC"):
        raise ValueError(f"measure must be AIC or BIC, got {measure!r}")
    return m


@dataclass
class LinkSelection:
    links: tuple[str, str]
    values: dict[int, dict[str, float]]  # margin -> link -> criterion
    measure: str

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "measure": self.measure,
            "links": list(self.links),
            "values": {str(k): v for k, v in self.values.items()},
        }


def select_link(
    d: Dataset, measure: str = "AIC", eta1=(), eta2=(), options: FitOptions | None = None,
    links=LINK_CODES,
) -> LinkSelection:
    """Per margin, the link whose copula-free fit has the smallest criterion (first wins ties)."""
    measure = _measure(measure)
    best, values = [], {}
    for margin, covs in ((1, tuple(eta1)), (2, tuple(eta2))):
        vals = {}
        for link in links:
            try:
                model, rep, edf = fit_margin(d, margin, link, covs, options=options)
            except (LikelihoodError, FloatingPointError, ValueError):
                vals[link] = math.inf
                continue
            if not rep.converged:
                vals[link] = math.inf
                continue
            ll = model.loglik(rep.x)
            pen = 2.0 if measure == "AIC" else math.log(d.n)
            vals[link] = -2.0 * ll + pen * edf
        if all(math.isinf(v) for v in vals.values()):
            raise StepwiseError(f"every link fit failed for margin {margin}")
        best.append(min(links, key=lambda l: (vals[l], links.index(l))))
        values[margin] = vals
    return LinkSelection((best[0], best[1]), values, measure)


@dataclass
class StepTrace:
    steps: list[tuple[int, str, float]]
    final_spec: ModelSpec
    measure: str
    direction: str

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "direction": self.direction,
            "measure": self.measure,
            "steps": [{"step": s, "model": lab, "value": v} for s, lab, v in self.steps],
            "final": {
                "eta1": list(self.final_spec.eta1),
                "eta2": list(self.final_spec.eta2),
                "eta3": list(self.final_spec.eta3),
            },
        }

    def format(self) -> str:
        width = max(len(lab) for _, lab, _ in self.steps)
        lines = [f"{'Step':<6}{'Model':<{width + 2}}{self.measure}"]
        for s, lab, v in self.steps:
            lines.append(f"{s:<6}{lab:<{width + 2}}{v:.6f}")
        for eq, base in (("eta1", "s(time)"), ("eta2", "s(time)"), ("eta3", "1")):
            covs = getattr(self.final_spec, eq)
            lines.append(f"{eq} ~ {base}" + "".join(f" + {c}" for c in covs))
        return "\n".join(lines)


def _score(args) -> float:
    spec, d, measure, options = args
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fm = fit_model(spec, d, options)
    except (FitError, LikelihoodError, FloatingPointError, ValueError):
        return math.inf
    return criterion(fm, measure)


def _score_all(specs, d, measure, options, threads):
    jobs = [(s, d, measure, options) for s in specs]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_score, jobs))
    return [_score(j) for j in jobs]


def _spec(copula, links, covs, n_knots) -> ModelSpec:
    covs = tuple(covs)
    return ModelSpec(copula, tuple(links), covs, covs, covs, n_knots)


def backward(
    d: Dataset, copula: str, links, measure: str = "AIC", covariates=None,
    options: FitOptions | None = None, n_knots: int = 8, threads: int | None = None,
) -> StepTrace:
    measure = _measure(measure)
    threads = resolve_threads(threads)
    current = list(covariates if covariates is not None else d.names)
    if not current:
        raise StepwiseError("backward elimination needs at least one covariate")
    incumbent = _score((_spec(copula, links, current, n_knots), d, measure, options))
    if math.isinf(incumbent):
        raise StepwiseError("the full model could not be fitted")
    steps = [(0, "(full model)", incumbent)]
    while current:
        cands = [[c for c in current if c != drop] for drop in current]
        vals = _score_all([_spec(copula, links, c, n_knots) for c in cands], d, measure, options, threads)
        j = min(range(len(vals)), key=lambda i: (vals[i], i))
        if not vals[j] < incumbent:
            break
        removed = current[j]
        current, incumbent = cands[j], vals[j]
        steps.append((len(steps), f"Remove: {removed}", incumbent))
    return StepTrace(steps, _spec(copula, links, current, n_knots), measure, "backward")


def forward(
    d: Dataset, copula: str, links, measure: str = "AIC", covariates=None,
    options: FitOptions | None = None, n_knots: int = 8, threads: int | None = None,
) -> StepTrace:
    measure = _measure(measure)
    threads = resolve_threads(threads)
    pool = list(covariates if covariates is not None else d.names)
    current: list[str] = []
    incumbent = _score((_spec(copula, links, current, n_knots), d, measure, options))
    if math.isinf(incumbent):
        raise StepwiseError("the intercept-only model could not be fitted")
    steps = [(0, "(intercept)", incumbent)]
    while pool:
        cands = [current + [c] for c in pool]
        vals = _score_all([_spec(copula, links, c, n_knots) for c in cands], d, measure, options, threads)
        j = min(range(len(vals)), key=lambda i: (vals[i], i))
        if not vals[j] < incumbent:
            break
        added = pool.pop(j)
        current, incumbent = cands[j], vals[j]
        steps.append((len(steps), f"+ {added}", incumbent))
    return StepTrace(steps, _spec(copula, links, current, n_knots), measure, "forward")
