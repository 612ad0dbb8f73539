"""Covariate importance scores from a fitted model and per-margin rankings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fit import FittedModel


class RankingError(ValueError):
    pass


@dataclass(frozen=True)
class MarginRanking:
    margin: int
    order: tuple[int, ...]  # covariate indices, most important first
    scores: tuple[float, ...]  # aligned with order

    def top(self, k: int) -> tuple[int, ...]:
        """Top-k covariates as a sorted index tuple."""
        return tuple(sorted(self.order[:k]))


def _block(margin: int) -> str:
    if margin not in (1, 2):
        raise RankingError("margin must be 1 or 2")
    return f"beta{margin}"


def fim_measure(fm: FittedModel, margin: int) -> np.ndarray:
    """beta_j^2 times the observed-information diagonal entry of beta_j."""
    s = fm.blocks[_block(margin)]
    if fm.info is None or not np.all(np.isfinite(np.diag(fm.info)[s])):
        raise RankingError("fitted model carries no usable information matrix")
    beta = fm.delta[s]
    return beta**2 * np.diag(fm.info)[s]


def abs_measure(fm: FittedModel, margin: int) -> np.ndarray:
    return np.abs(fm.delta[fm.blocks[_block(margin)]])


METRICS = {"FIM": fim_measure, "Abs": abs_measure}


def get_metric(name: str):
    for key, fn in METRICS.items():
        if key.lower() == str(name).lower():
            return key, fn
    raise RankingError(f"unknown metric {name!r}; expected one of {', '.join(METRICS)}")


def rank_margin(scores, margin: int = 1) -> MarginRanking:
    """Stable descending sort; ties keep ascending column order."""
    scores = np.nan_to_num(np.asarray(scores, dtype=float), nan=-np.inf)
    order = np.argsort(-scores, kind="stable")
    return MarginRanking(margin, tuple(int(i) for i in order), tuple(float(scores[i]) for i in order))


def rank_fit(fm: FittedModel, metric: str = "FIM") -> tuple[MarginRanking, MarginRanking]:
    _, fn = get_metric(metric)
    return rank_margin(fn(fm, 1), 1), rank_margin(fn(fm, 2), 2)
