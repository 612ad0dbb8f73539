"""Synthetic bivariate survival data with known relevant covariates.

Margin 1 follows a proportional-hazards model on (x1, x2), margin 2 a
proportional-odds model on (x1, x3); both share the two-component baseline
S0 below.  The margin-2 uniform is drawn from the Clayton conditional
distribution given the margin-1 uniform, so T2 depends on T1.  Censoring is
random right censoring at c2 = c1 + U(0, 6), c1 ~ U(0, 2), drawn afresh for
each margin.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq
from scipy.special import log_expit, log_ndtr, ndtri_exp

from . import copulas
from .data import Dataset, write_dataset
from .margins import get_link

SCHEMA_VERSION = 1


class SimulationError(FloatingPointError):
    pass


@dataclass(frozen=True)
class SimConfig:
    n: int = 1000
    p: int = 3
    scenario: str = "A"
    effects1: tuple[tuple[str, float], ...] = (("x1", -1.5), ("x2", 1.7))
    effects2: tuple[tuple[str, float], ...] = (("x1", -1.5), ("x3", -1.3))
    links: tuple[str, str] = ("PH", "PO")
    eta3_intercept: float = 1.2  # scenario A
    eta3_effects: tuple[tuple[str, float], ...] = (("x1", -1.5), ("x2", 1.7), ("x3", -1.5))  # scenario B
    copula: str = "C0"
    n_correlated: int = 3
    correlation: float = 0.5
    seed: int = 0
    truth1: tuple[str, ...] | None = None  # default: covariates with an effect on margin 1
    truth2: tuple[str, ...] | None = None  # default: margin-2 effects plus those reaching T2 through T1

    def __post_init__(self):
        if self.p < 3:
            raise ValueError("p must be at least 3")
        if self.scenario not in ("A", "B"):
            raise ValueError("scenario must be 'A' or 'B'")
        if self.n < 1:
            raise ValueError("n must be positive")
        names = set(self.names)
        for nm, _ in self.effects1 + self.effects2 + self.eta3_effects:
            if nm not in names:
                raise ValueError(f"effect on unknown covariate {nm!r} (p={self.p})")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f"x{j + 1}" for j in range(self.p))

    @property
    def s1(self) -> tuple[str, ...]:
        if self.truth1 is not None:
            return tuple(self.truth1)
        return tuple(sorted({nm for nm, b in self.effects1 if b != 0}, key=self.names.index))

    @property
    def s2(self) -> tuple[str, ...]:
        if self.truth2 is not None:
            return tuple(self.truth2)
        rel = {nm for nm, b in self.effects2 + self.effects1 if b != 0}
        if self.scenario == "B":
            rel |= {nm for nm, b in self.eta3_effects if b != 0}
        return tuple(sorted(rel, key=self.names.index))

    def to_dict(self) -> dict:
        out = asdict(self)
        for k in ("effects1", "effects2", "eta3_effects"):
            out[k] = [[nm, float(b)] for nm, b in out[k]]
        out["links"] = list(self.links)
        return out


def baseline_survival(t):
    t = np.asarray(t, dtype=float)
    return 0.9 * np.exp(-0.4 * t**2.5) + 0.1 * np.exp(-0.1 * t)


def log_baseline_survival(t):
    t = np.asarray(t, dtype=float)
    far = np.logaddexp(np.log(0.9) - 0.4 * t**2.5, np.log(0.1) - 0.1 * t)  # safe when S0 underflows
    with np.errstate(divide="ignore"):
        near = np.log1p(0.9 * np.expm1(-0.4 * t**2.5) + 0.1 * np.expm1(-0.1 * t))  # exact digits near t = 0
    return np.where(t < 1.0, near, far)


def _log_s0_scalar(t: float) -> float:
    a, b = -0.4 * t**2.5, -0.1 * t
    if t < 1.0:
        return math.log1p(0.9 * math.expm1(a) + 0.1 * math.expm1(b))
    hi, lo = max(math.log(0.9) + a, math.log(0.1) + b), min(math.log(0.9) + a, math.log(0.1) + b)
    return hi + math.log1p(math.exp(lo - hi))


def gen_covariates(n: int, p: int, rng: np.random.Generator, n_correlated: int = 3, rho: float = 0.5) -> np.ndarray:
    k = min(n_correlated, p)
    cov = np.full((k, k), rho)
    np.fill_diagonal(cov, 1.0)
    X11 = rng.multivariate_normal(np.zeros(k), cov, size=n) if k else np.zeros((n, 0))
    X12 = rng.standard_normal((n, p - k))
    return np.hstack([X11, X12])


def _log_G(link, eta):
    if link.code == "PH":
        return -np.exp(eta)
    if link.code == "PO":
        return log_expit(-eta)
    return log_ndtr(-eta)


def invert_time(u, lin, link="PH", hi: float = 8.0, cap: float = 1e6) -> np.ndarray:
    """Solve G(g(S0(t)) + lin) = u for t, one root per element.

    The equation is solved as log S0(t) = log G(g(u) - lin), which keeps
    the target representable in the far tail.
    """
    link = get_link(link)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    lin = np.broadcast_to(np.asarray(lin, dtype=float), u.shape)
    if np.any((u <= 0) | (u > 1)):
        raise SimulationError("u must lie in (0, 1]")
    out = np.zeros(u.shape)
    for i in np.flatnonzero(u < 1):
        target = _log_G(link, link.g(u[i]) - lin[i])

        def f(t):
            return _log_s0_scalar(t) - target

        b = hi
        while f(b) > 0:
            b *= 2.0
            if b > cap:
                raise SimulationError(f"no bracket below t={cap:g} for unit {i}")
        out[i] = brentq(f, 0.0, b, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return out


def _g_from_log(link, log_s):
    """g(S) evaluated from log S without forming S."""
    if link.code == "PH":
        return np.log(-log_s)
    if link.code == "PO":
        return np.log(-np.expm1(log_s)) - log_s
    return -ndtri_exp(log_s)


def forward_transform(t, lin, link="PH"):
    """G(g(S0(t)) + lin): the value the inverted time must reproduce."""
    link = get_link(link)
    with np.errstate(divide="ignore"):
        return link.G(_g_from_log(link, log_baseline_survival(t)) + lin)


def invert_time_PH(u, z1, z2, betas=(-1.5, 1.7)):
    return invert_time(u, betas[0] * np.asarray(z1) + betas[1] * np.asarray(z2), "PH")


def invert_time_PO(u, z1, z3, betas=(-1.5, -1.3)):
    return invert_time(u, betas[0] * np.asarray(z1) + betas[1] * np.asarray(z3), "PO")


def clayton_conditional(u, w, theta):
    return copulas.clayton_conditional(u, w, theta)


def apply_censoring(t_true, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    t_true = np.asarray(t_true, dtype=float)
    n = t_true.size
    c1 = rng.uniform(0.0, 2.0, n)
    c2 = c1 + rng.uniform(0.0, 6.0, n)
    cens = t_true > c2
    return np.where(cens, c2, t_true), np.where(cens, "R", "U")


@dataclass
class SimResult:
    data: Dataset
    t_true: np.ndarray  # (n, 2)
    theta: np.ndarray
    u: np.ndarray  # (n, 2) survival uniforms
    config: SimConfig
    s1: tuple[str, ...] = field(default=())
    s2: tuple[str, ...] = field(default=())

    @property
    def censoring_rates(self) -> tuple[float, float]:
        return float(np.mean(self.data.cens1 == "R")), float(np.mean(self.data.cens2 == "R"))

    def sidecar(self) -> dict:
        r1, r2 = self.censoring_rates
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "truth": {"s1": list(self.s1), "s2": list(self.s2)},
            "censoring_rates": [r1, r2],
            "t_true": self.t_true.tolist(),
        }


def _linear(X, names, effects):
    lin = np.zeros(X.shape[0])
    for nm, b in effects:
        lin += b * X[:, names.index(nm)]
    return lin


def generate(cfg: SimConfig, rng: np.random.Generator | None = None) -> SimResult:
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    names = cfg.names
    X = gen_covariates(cfg.n, cfg.p, rng, cfg.n_correlated, cfg.correlation)
    link1, link2 = (get_link(l) for l in cfg.links)

    u1 = rng.uniform(0.0, 1.0, cfg.n)
    t1 = invert_time(u1, _linear(X, names, cfg.effects1), link1)
    obs1, code1 = apply_censoring(t1, rng)

    if cfg.scenario == "A":
        eta3 = np.full(cfg.n, cfg.eta3_intercept)
    else:
        eta3 = _linear(X, names, cfg.eta3_effects)
    theta = copulas.theta_from_eta(cfg.copula, eta3)
    w = rng.uniform(0.0, 1.0, cfg.n)
    if cfg.copula == "C0":
        u2 = clayton_conditional(u1, w, theta)
    else:
        u2 = copulas.conditional_sample(cfg.copula, u1, w, theta)
    u2 = np.clip(u2, np.finfo(float).tiny, 1.0)
    t2 = invert_time(u2, _linear(X, names, cfg.effects2), link2)
    obs2, code2 = apply_censoring(t2, rng)

    nan = np.full(cfg.n, np.nan)
    d = Dataset(obs1, nan, obs2, nan, code1, code2, X, names)
    return SimResult(d, np.column_stack([t1, t2]), theta, np.column_stack([u1, u2]), cfg, cfg.s1, cfg.s2)


def write_simulation(res: SimResult, csv_path, sidecar_path=None) -> None:
    write_dataset(res.data, csv_path)
    sidecar_path = sidecar_path or Path(csv_path).with_suffix(".truth.json")
    Path(sidecar_path).write_text(json.dumps(res.sidecar(), sort_keys=True, indent=1) + "\n")


# ---------------------------------------------------------------------------
# evaluation against the known truth


@dataclass(frozen=True)
class EvalReport:
    n_rep: int
    fp: tuple[float, float]
    fn: tuple[float, float]
    mean_size: tuple[float, float]
    mean_hits: tuple[float, float]  # average |s_hat ∩ s|
    containment: tuple[float, float]  # share of replicates with s ⊆ s_hat

    def to_dict(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items()}


def evaluate(selections, truths, per_replicate: bool = False) -> EvalReport:
    """Average FP, FN, selected size and hits per margin across replicates.

    selections holds one pair (s_hat1, s_hat2) per replicate; truths is a
    single pair (s1, s2), or one pair per replicate when per_replicate is set.
    """
    selections = list(selections)
    if not selections:
        raise ValueError("no replicates to evaluate")
    truths = list(truths) if per_replicate else [truths] * len(selections)
    if len(truths) != len(selections):
        raise ValueError("one truth pair per replicate is required")
    stats = np.zeros((len(selections), 2, 4))
    for h, (sel, tru) in enumerate(zip(selections, truths)):
        for v in range(2):
            s_hat, s = set(sel[v]), set(tru[v])
            stats[h, v] = (len(s_hat - s), len(s - s_hat), len(s_hat), len(s_hat & s))
    mean = stats.mean(axis=0)
    contain = np.array([[set(t[v]) <= set(s[v]) for v in range(2)] for s, t in zip(selections, truths)]).mean(axis=0)
    def pair(a):
        return float(a[0]), float(a[1])

    return EvalReport(len(selections), pair(mean[:, 0]), pair(mean[:, 1]), pair(mean[:, 2]), pair(mean[:, 3]), pair(contain))
