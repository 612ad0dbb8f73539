"""Link functions and link-based marginal survival models.

A margin is g{S(t|x)} = b(t) + x'beta, where b is a nondecreasing baseline
in time.  The links are stored as printed in their usual table form:

    PH      g(S) = log(-log S)     G(eta) = exp(-exp(eta))
    PO      g(S) = -logit(S)       G(eta) = 1 / (1 + exp(eta))
    probit  g(S) = -Phi^{-1}(S)    G(eta) = Phi(-eta)

so G is decreasing and a larger predictor means a shorter survival time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import BSpline
from scipy.special import expit, log_expit, ndtr, ndtri

LINK_CODES = ("PH", "PO", "probit")
_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

TIME_FLOOR = 1e-8


class LinkDomainError(ValueError):
    pass


@dataclass(frozen=True)
class LinkFamily:
    code: str

    def g(self, s):
        s = np.asarray(s, dtype=float)
        if np.any((s <= 0) | (s >= 1)):
            raise LinkDomainError("survival probability must lie in (0, 1)")
        if self.code == "PH":
            return np.log(-np.log(s))
        if self.code == "PO":
            return np.log1p(-s) - np.log(s)
        return -ndtri(s)

    def G(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.code == "PH":
            return np.exp(-np.exp(eta))
        if self.code == "PO":
            return expit(-eta)
        return ndtr(-eta)

    def dG(self, eta):
        """G'(eta); always negative."""
        eta = np.asarray(eta, dtype=float)
        if self.code == "PH":
            return -np.exp(eta - np.exp(eta))
        if self.code == "PO":
            return -expit(eta) * expit(-eta)
        return -np.exp(-0.5 * eta * eta - _LOG_SQRT_2PI)

    def log_neg_dG(self, eta):
        eta = np.asarray(eta, dtype=float)
        if self.code == "PH":
            return eta - np.exp(eta)
        if self.code == "PO":
            return log_expit(eta) + log_expit(-eta)
        return -0.5 * eta * eta - _LOG_SQRT_2PI

    def dlog_neg_dG(self, eta):
        """Derivative of log(-G'(eta))."""
        eta = np.asarray(eta, dtype=float)
        if self.code == "PH":
            return 1.0 - np.exp(eta)
        if self.code == "PO":
            return 2.0 * expit(-eta) - 1.0
        return -eta


def get_link(code: str | LinkFamily) -> LinkFamily:
    if isinstance(code, LinkFamily):
        return code
    norm = {"ph": "PH", "po": "PO", "probit": "probit"}.get(str(code).lower())
    if norm is None:
        raise ValueError(f"unknown link {code!r}; expected one of {', '.join(LINK_CODES)}")
    return LinkFamily(norm)


def link_eval(link, s):
    return get_link(link).g(s)


def link_inverse(link, eta):
    return get_link(link).G(eta)


def link_inverse_deriv(link, eta):
    return get_link(link).dG(eta)


# ---------------------------------------------------------------------------
# baseline in log-time


@dataclass(frozen=True)
class SplineBasis:
    """B-spline basis in log-time, continued linearly past the boundary knots."""

    knots: np.ndarray  # full knot vector, boundary knots repeated degree+1 times
    degree: int = 2

    @classmethod
    def from_times(cls, times, n_interior: int = 8, degree: int = 2) -> "SplineBasis":
        times = np.asarray(times, dtype=float)
        times = times[np.isfinite(times) & (times > 0)]
        x = np.log(np.maximum(times, TIME_FLOOR))
        if x.size < 2 or np.ptp(x) <= 0:
            raise ValueError("need at least two distinct positive times to place knots")
        lo, hi = float(x.min()), float(x.max())
        probs = np.linspace(0.0, 1.0, n_interior + 2)[1:-1]
        inner = np.unique(np.quantile(x, probs))
        inner = inner[(inner > lo) & (inner < hi)]
        full = np.concatenate([[lo] * (degree + 1), inner, [hi] * (degree + 1)])
        return cls(full, degree)

    @property
    def n_coef(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def design(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Basis values at log(t) and their derivatives with respect to log(t)."""
        x = np.log(np.maximum(np.asarray(t, dtype=float), TIME_FLOOR))
        lo, hi = self.bounds
        spl = BSpline(self.knots, np.eye(self.n_coef), self.degree, extrapolate=True)
        dspl = spl.derivative()
        xc = np.clip(x, lo, hi)
        basis = spl(xc)
        dbasis = dspl(xc)
        # dspl at the right boundary is one-sided; evaluate just inside
        at_hi = xc >= hi
        if at_hi.any():
            dbasis[at_hi] = dspl(np.full(int(at_hi.sum()), np.nextafter(hi, lo)))
        basis = basis + (x - xc)[:, None] * dbasis
        return basis, dbasis


def baseline_coefficients(raw) -> np.ndarray:
    """Map unrestricted raw values to nondecreasing spline coefficients."""
    raw = np.asarray(raw, dtype=float)
    out = np.empty_like(raw)
    out[0] = raw[0]
    out[1:] = raw[0] + np.cumsum(np.exp(raw[1:]))
    return out


def baseline_jacobian(raw) -> np.ndarray:
    raw = np.asarray(raw, dtype=float)
    k = raw.size
    jac = np.zeros((k, k))
    jac[:, 0] = 1.0
    inc = np.exp(raw[1:])
    for j in range(1, k):
        jac[j:, j] = inc[j - 1]
    return jac


def raw_from_coefficients(alpha, min_increment: float = 1e-3) -> np.ndarray:
    """Inverse of baseline_coefficients after forcing positive increments."""
    alpha = np.asarray(alpha, dtype=float)
    inc = np.maximum(np.diff(alpha), min_increment)
    return np.concatenate([[alpha[0]], np.log(inc)])


@dataclass(frozen=True)
class MonotoneBaseline:
    basis: SplineBasis
    raw_coefs: np.ndarray

    def eta(self, t):
        b, _ = self.basis.design(np.atleast_1d(t))
        return b @ baseline_coefficients(self.raw_coefs)

    def deta_dt(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        _, db = self.basis.design(t)
        return (db @ baseline_coefficients(self.raw_coefs)) / np.maximum(t, TIME_FLOOR)


@dataclass(frozen=True)
class FunctionBaseline:
    """Baseline given directly by callables, e.g. a known generating truth."""

    eta_fn: Callable
    deta_dt_fn: Callable

    def eta(self, t):
        return np.asarray(self.eta_fn(np.atleast_1d(np.asarray(t, float))), dtype=float)

    def deta_dt(self, t):
        return np.asarray(self.deta_dt_fn(np.atleast_1d(np.asarray(t, float))), dtype=float)


@dataclass(frozen=True)
class MarginModel:
    link: LinkFamily
    baseline: MonotoneBaseline | FunctionBaseline
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))
    names: tuple[str, ...] = ()

    def predictor(self, t, x=None):
        eta = self.baseline.eta(t)
        if self.beta.size:
            x = np.atleast_2d(np.asarray(x, dtype=float))
            eta = eta + x @ self.beta
        return eta

    def survival(self, t, x=None):
        return self.link.G(self.predictor(t, x))

    def density(self, t, x=None):
        """f(t|x) = -G'(eta) * d eta / dt."""
        eta = self.predictor(t, x)
        return -self.link.dG(eta) * self.baseline.deta_dt(t)
