"""Monte Carlo evaluation of the bootstrap selection on simulated data."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from .algorithm import BrbvsConfig, run_brbvs_metrics
from .fit import FitOptions
from .ranking import get_metric
from .simulate import EvalReport, SimConfig, evaluate, generate

SCHEMA_VERSION = 1


def derived_seed(master: int, *key: int) -> int:
    return int(np.random.SeedSequence(master, spawn_key=key).generate_state(1)[0])


@dataclass
class MonteCarloResult:
    sim: SimConfig
    brbvs: BrbvsConfig
    n_rep: int
    seed: int
    selections: dict[str, list[tuple[tuple[str, ...], tuple[str, ...]]]]  # metric -> per replicate
    reports: dict[str, EvalReport]
    failures: list[int]  # failed subsample fits per replicate
    max_gradient: list[float]  # per replicate, over its retained subsample fits
    min_eigenvalue: list[float]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "sim": self.sim.to_dict(),
            "brbvs": self.brbvs.to_dict(),
            "n_rep": self.n_rep,
            "seed": self.seed,
            "truth": {"s1": list(self.sim.s1), "s2": list(self.sim.s2)},
            "selections": {k: [[list(a), list(b)] for a, b in v] for k, v in self.selections.items()},
            "reports": {k: v.to_dict() for k, v in self.reports.items()},
            "failed_fits": self.failures,
            "max_gradient": self.max_gradient,
            "min_eigenvalue": self.min_eigenvalue,
        }


def monte_carlo(
    sim: SimConfig, cfg: BrbvsConfig, n_rep: int, seed: int = 0, metrics=("FIM",),
    options: FitOptions | None = None, progress=None,
) -> MonteCarloResult:
    """n_rep independent datasets, each analysed once per metric on shared fits."""
    metrics = tuple(get_metric(mt)[0] for mt in metrics)
    selections = {mt: [] for mt in metrics}
    failures, grads, eigs = [], [], []
    for h in range(n_rep):
        data = generate(replace(sim, seed=derived_seed(seed, h, 0))).data
        run_cfg = BrbvsConfig(**{**asdict(cfg), "seed": derived_seed(seed, h, 1)})
        results = run_brbvs_metrics(data, run_cfg, metrics, options)
        for mt, res in results.items():
            selections[mt].append((res.selected_names(1), res.selected_names(2)))
        first = next(iter(results.values()))
        failures.append(first.n_failed)
        grads.append(first.max_gradient)
        eigs.append(first.min_eigenvalue)
        if progress is not None:
            progress(h, results)
    truths = (sim.s1, sim.s2)
    reports = {mt: evaluate(sel, truths) for mt, sel in selections.items()}
    return MonteCarloResult(sim, cfg, n_rep, seed, selections, reports, failures, grads, eigs)
