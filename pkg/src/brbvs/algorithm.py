"""Bootstrap ranking-based variable selection.

Each of B replicates splits a random permutation of the units into
r = floor(n/m) disjoint subsamples of size m.  The joint model with every
covariate in both margins is fitted on each subsample and the covariates of
each margin are ranked.  For every size k the top-k sets are tallied into
pi_hat, the most frequent set is A_hat[k], and the selected size minimises

    pi_hat(A_hat[k+1])**tau / pi_hat(A_hat[k]),   k = 0, ..., kmax - 1.
"""

from __future__ import annotations

import math
import os
import warnings
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset, draw_subsamples
from .fit import FitError, FitOptions, fit_model
from .likelihood import LikelihoodError, ModelSpec
from .ranking import MarginRanking, get_metric, rank_fit

SCHEMA_VERSION = 1
FAILURE_WARN_SHARE = 0.2


class BrbvsError(RuntimeError):
    pass


@dataclass(frozen=True)
class BrbvsConfig:
    kmax: int = 6
    copula: str = "C0"
    margins: tuple[str, str] = ("PH", "PO")
    m: int | None = None  # default: n // 2
    tau: float = 0.5
    B: int = 50
    metric: str = "FIM"
    seed: int = 0
    n_knots: int = 8
    threads: int | None = None  # default: $BRBVS_THREADS or 1

    def __post_init__(self):
        if self.kmax < 1:
            raise ValueError("kmax must be at least 1")
        if not 0 < self.tau <= 1:
            raise ValueError("tau must lie in (0, 1]")
        if self.B < 1:
            raise ValueError("B must be at least 1")
        if self.m is not None and self.m < 1:
            raise ValueError("m must be positive")
        get_metric(self.metric)
        object.__setattr__(self, "margins", tuple(self.margins))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["margins"] = list(self.margins)
        out.pop("threads")  # does not affect results
        return out


@dataclass
class MarginSelection:
    margin: int
    pi_hat: dict[int, dict[tuple[int, ...], float]]
    A_hat: dict[int, tuple[int, ...]]
    pi_max: list[float]  # pi_hat(A_hat[k]) for k = 0..kmax
    s_hat: int
    selected: tuple[int, ...]
    freq: dict[int, float]  # selected covariate -> share of subsamples with it in the top s_hat


@dataclass
class BrbvsResult:
    config: BrbvsConfig
    names: tuple[str, ...]
    n: int
    m: int
    r: int
    margins: list[MarginSelection]
    n_fits: int
    n_failed: int
    warnings: list[str] = field(default_factory=list)
    max_gradient: float = float("nan")  # largest max|gradient| over the retained fits
    min_eigenvalue: float = float("nan")  # smallest information eigenvalue over the retained fits

    def selected_names(self, margin: int) -> tuple[str, ...]:
        return tuple(self.names[i] for i in self.margins[margin - 1].selected)

    def to_dict(self) -> dict:
        def setname(idx):
            return [self.names[i] for i in idx]

        margins = []
        for ms in self.margins:
            pi_tab = {}
            for k, tab in ms.pi_hat.items():
                rows = sorted(tab.items(), key=lambda kv: (-kv[1], kv[0]))
                pi_tab[str(k)] = [{"set": setname(s), "pi": p} for s, p in rows]
            margins.append({
                "margin": ms.margin,
                "pi_hat": pi_tab,
                "A_hat": {str(k): setname(s) for k, s in ms.A_hat.items()},
                "pi_max": ms.pi_max,
                "s_hat": ms.s_hat,
                "selected": setname(ms.selected),
                "freq": {self.names[i]: f for i, f in ms.freq.items()},
            })
        return {
            "schema_version": SCHEMA_VERSION,
            "config": self.config.to_dict(),
            "n": self.n,
            "m": self.m,
            "r": self.r,
            "names": list(self.names),
            "margins": margins,
            "n_fits": self.n_fits,
            "n_failed": self.n_failed,
            "warnings": list(self.warnings),
            "max_gradient": self.max_gradient,
            "min_eigenvalue": self.min_eigenvalue,
        }


# ---------------------------------------------------------------------------
# aggregation


def estimate_pi(rankings: list[MarginRanking], k: int) -> dict[tuple[int, ...], float]:
    if k == 0:
        return {(): 1.0}
    if not rankings:
        return {}
    counts = Counter(r.top(k) for r in rankings)
    return {s: c / len(rankings) for s, c in counts.items()}


def argmax_set(pi: dict[tuple[int, ...], float]) -> tuple[int, ...]:
    """Most probable set; ties go to the lexicographically smallest tuple."""
    return min(pi, key=lambda s: (-pi[s], s))


def select_size(pi_by_k, tau: float, kmax: int) -> int:
    pi = np.asarray(pi_by_k, dtype=float)
    ratios = np.full(kmax, np.inf)
    for k in range(kmax):
        if pi[k] <= 0:
            break
        ratios[k] = pi[k + 1] ** tau / pi[k]
    return int(np.argmin(ratios))


def selection_frequencies(rankings: list[MarginRanking], s_hat: int, selected=None) -> dict[int, float]:
    """Share of subsamples placing each covariate among the top s_hat; zero shares are dropped."""
    if s_hat == 0 or not rankings:
        return {}
    counts = Counter(i for r in rankings for i in r.order[:s_hat])
    keys = sorted(selected) if selected is not None else sorted(counts)
    return {i: counts[i] / len(rankings) for i in keys if counts[i] > 0}


def aggregate(rankings: list[MarginRanking], margin: int, kmax: int, tau: float) -> MarginSelection:
    pi_hat, A_hat, pi_max = {}, {}, []
    for k in range(kmax + 1):
        tab = estimate_pi(rankings, k)
        pi_hat[k] = tab
        A_hat[k] = argmax_set(tab)
        pi_max.append(tab[A_hat[k]])
    s_hat = select_size(pi_max, tau, kmax)
    selected = A_hat[s_hat]
    return MarginSelection(
        margin, pi_hat, A_hat, pi_max, s_hat, selected,
        selection_frequencies(rankings, s_hat, selected),
    )


# ---------------------------------------------------------------------------
# subsample fitting


def subsample_plan(n: int, m: int, B: int, seed: int) -> list[np.ndarray]:
    """Index arrays for all B * floor(n/m) subsamples, in (b, q) order."""
    plan = []
    for b in range(B):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(b,)))
        plan.extend(s.indices for s in draw_subsamples(n, m, rng))
    return plan


def _fit_one(args):
    d, idx, spec, metrics, options = args
    sub = d.subset(idx)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            fm = fit_model(spec, sub, options)
    except (FitError, LikelihoodError, FloatingPointError, np.linalg.LinAlgError, ValueError):
        return None
    if not fm.converged:
        return None
    ranks = {mt: rank_fit(fm, mt) for mt in metrics}
    return ranks, fm.max_abs_gradient, fm.eigen_range[0]


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("BRBVS_THREADS", "1") or 1)
    return max(1, threads)


def run_brbvs_metrics(
    d: Dataset, cfg: BrbvsConfig, metrics=None, options: FitOptions | None = None,
) -> dict[str, BrbvsResult]:
    """Run the selection for several ranking metrics on one shared set of fits."""
    metrics = tuple(get_metric(mt)[0] for mt in (metrics or (cfg.metric,)))
    if not cfg.kmax < d.p:
        raise BrbvsError(f"kmax={cfg.kmax} must be smaller than the number of covariates p={d.p}")
    m = cfg.m if cfg.m is not None else d.n // 2
    if not 1 <= m <= d.n:
        raise BrbvsError(f"subsample size m={m} must satisfy 1 <= m <= n={d.n}")
    spec = ModelSpec(cfg.copula, cfg.margins, d.names, d.names, (), cfg.n_knots)
    plan = subsample_plan(d.n, m, cfg.B, cfg.seed)
    jobs = [(d, idx, spec, metrics, options) for idx in plan]
    threads = resolve_threads(cfg.threads)
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_fit_one, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    else:
        outcomes = [_fit_one(j) for j in jobs]
    ok = [o for o in outcomes if o is not None]
    n_failed = len(outcomes) - len(ok)
    if not ok:
        raise BrbvsError(f"all {len(outcomes)} subsample fits failed")
    notes = []
    if n_failed > FAILURE_WARN_SHARE * len(outcomes):
        notes.append(f"{n_failed} of {len(outcomes)} subsample fits failed and were excluded")
    max_grad = max(o[1] for o in ok)
    min_eig = min(o[2] for o in ok)
    results = {}
    for mt in metrics:
        sel = [aggregate([o[0][mt][v] for o in ok], v + 1, cfg.kmax, cfg.tau) for v in range(2)]
        mcfg = BrbvsConfig(**{**asdict(cfg), "metric": mt})
        results[mt] = BrbvsResult(
            mcfg, d.names, d.n, m, d.n // m, sel, len(outcomes), n_failed, list(notes), max_grad, min_eig,
        )
    return results


def run_brbvs(d: Dataset, cfg: BrbvsConfig, options: FitOptions | None = None) -> BrbvsResult:
    return run_brbvs_metrics(d, cfg, (cfg.metric,), options)[get_metric(cfg.metric)[0]]


def expected_fits(n: int, cfg: BrbvsConfig) -> int:
    m = cfg.m if cfg.m is not None else n // 2
    return cfg.B * math.floor(n / m)
