"""Closed-form bivariate copula families.

Each family exposes the CDF, the two h-functions (partial derivatives of the
CDF), the density, a link from an unrestricted predictor to the dependence
parameter, Kendall's tau and conditional sampling.

Derivatives for the explicit families are generated symbolically with sympy
on first use and cached; the Gaussian family is coded by hand on top of a
vectorised bivariate normal CDF.  All families here are exchangeable, so the
u2-derivatives are obtained by swapping arguments.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import sympy as sp
from scipy import integrate
from scipy.special import ndtr, ndtri, roots_legendre

U_EPS = 1e-12

COPULA_CODES = ("AMH", "C0", "FGM", "F", "GAL", "N", "G0", "J0", "PL")


class CopulaDomainError(ValueError):
    pass


class InversionError(FloatingPointError):
    pass


@dataclass(frozen=True)
class CopulaFamily:
    code: str
    name: str
    lower: float
    upper: float
    lower_closed: bool
    upper_closed: bool
    link: str  # "log", "log1", "tanh" or "identity"
    independence: float | None = None  # finite parameter value giving C = u1*u2
    singular_at: float | None = None  # removable singularity of the closed form

    def in_range(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        lo = theta >= self.lower if self.lower_closed else theta > self.lower
        hi = theta <= self.upper if self.upper_closed else theta < self.upper
        ok = lo & hi
        if self.code == "F":
            ok = ok | (theta == 0.0)  # independence limit
        return ok & np.isfinite(theta)


_INF = np.inf
FAMILIES: dict[str, CopulaFamily] = {
    "AMH": CopulaFamily("AMH", "Ali-Mikhail-Haq", -1.0, 1.0, True, True, "tanh", 0.0),
    "C0": CopulaFamily("C0", "Clayton", 0.0, _INF, False, False, "log"),
    "FGM": CopulaFamily("FGM", "Farlie-Gumbel-Morgenstern", -1.0, 1.0, True, True, "tanh", 0.0),
    "F": CopulaFamily("F", "Frank", -_INF, _INF, False, False, "identity", 0.0, 0.0),
    "GAL": CopulaFamily("GAL", "Galambos", 0.0, _INF, False, False, "log"),
    "N": CopulaFamily("N", "Gaussian", -1.0, 1.0, True, True, "tanh", 0.0),
    "G0": CopulaFamily("G0", "Gumbel", 1.0, _INF, True, False, "log1", 1.0),
    "J0": CopulaFamily("J0", "Joe", 1.0, _INF, False, False, "log1"),
    "PL": CopulaFamily("PL", "Plackett", 0.0, _INF, False, False, "log", 1.0, 1.0),
}


def get_family(family: str | CopulaFamily) -> CopulaFamily:
    if isinstance(family, CopulaFamily):
        return family
    try:
        return FAMILIES[family]
    except KeyError:
        raise ValueError(
            f"unknown copula {family!r}; expected one of {', '.join(COPULA_CODES)}"
        ) from None


# ---------------------------------------------------------------------------
# dependence-parameter link


def theta_from_eta(family, eta):
    fam = get_family(family)
    eta = np.asarray(eta, dtype=float)
    if fam.link == "log":
        return np.exp(eta)
    if fam.link == "log1":
        return 1.0 + np.exp(eta)
    if fam.link == "tanh":
        return np.tanh(eta)
    return eta.copy()


def eta_from_theta(family, theta):
    fam = get_family(family)
    theta = np.asarray(theta, dtype=float)
    if fam.link == "log":
        return np.log(theta)
    if fam.link == "log1":
        return np.log(theta - 1.0)
    if fam.link == "tanh":
        return np.arctanh(theta)
    return theta.copy()


def dtheta_deta(family, eta):
    fam = get_family(family)
    eta = np.asarray(eta, dtype=float)
    if fam.link in ("log", "log1"):
        return np.exp(eta)
    if fam.link == "tanh":
        return 1.0 - np.tanh(eta) ** 2
    return np.ones_like(eta)


# ---------------------------------------------------------------------------
# bivariate normal CDF (Genz's BVNU, vectorised)

_GL_X, _GL_W = roots_legendre(20)
_GL_X = _GL_X + 1.0  # nodes on (0, 2)
_TWOPI = 2.0 * np.pi


def bvn_upper(h, k, r):
    """P(X > h, Y > k) for a standard bivariate normal with correlation r.

    Drezner-Wesolowsky/Genz Gauss-Legendre scheme; absolute error ~1e-15.
    """
    h, k, r = (np.array(a, dtype=float) for a in np.broadcast_arrays(h, k, r))
    shape = h.shape
    h, k, r = h.ravel(), k.ravel(), r.ravel()
    out = np.empty_like(h)

    mid = np.abs(r) < 0.925
    if mid.any():
        hh, kk, rr = h[mid], k[mid], r[mid]
        hk = hh * kk
        hs = 0.5 * (hh * hh + kk * kk)
        asr = 0.5 * np.arcsin(rr)
        sn = np.sin(asr[:, None] * _GL_X[None, :])
        terms = np.exp((sn * hk[:, None] - hs[:, None]) / (1.0 - sn * sn))
        out[mid] = (terms @ _GL_W) * asr / _TWOPI + ndtr(-hh) * ndtr(-kk)

    unit = np.abs(r) >= 1.0
    if unit.any():
        hh, kk, rr = h[unit], k[unit], r[unit]
        out[unit] = np.where(
            rr > 0, ndtr(-np.maximum(hh, kk)), np.maximum(0.0, ndtr(-hh) - ndtr(kk))
        )

    high = ~mid & ~unit
    if high.any():
        hh, kk, rr = h[high], k[high].copy(), r[high]
        neg = rr < 0
        kk[neg] = -kk[neg]
        hk = hh * kk
        as_ = 1.0 - rr * rr
        a = np.sqrt(as_)
        bs = (hh - kk) ** 2
        asr = -0.5 * (bs / as_ + hk)
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 80.0
        bvn = np.where(
            asr > -100,
            a * np.exp(asr) * (1.0 - c * (bs - as_) * (1.0 - d * bs) / 3.0 + c * d * as_ * as_),
            0.0,
        )
        b = np.sqrt(bs)
        spv = np.sqrt(_TWOPI) * ndtr(-b / a)
        corr = np.exp(-0.5 * hk) * spv * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0)
        bvn = bvn - np.where(hk > -100, corr, 0.0)
        a2 = a / 2.0
        xs = (a2[:, None] * _GL_X[None, :]) ** 2
        asr2 = -0.5 * (bs[:, None] / xs + hk[:, None])
        keep = asr2 > -100
        spx = 1.0 + c[:, None] * xs * (1.0 + 5.0 * d[:, None] * xs)
        rs = np.sqrt(1.0 - xs)
        ep = np.exp(-(hk[:, None] / 2.0) * xs / (1.0 + rs) ** 2) / rs
        vals = np.where(keep, np.exp(np.where(keep, asr2, 0.0)) * (spx - ep), 0.0)
        bvn = (a2 * (vals @ _GL_W) - bvn) / _TWOPI
        res = np.empty_like(bvn)
        pos = ~neg
        res[pos] = bvn[pos] + ndtr(-np.maximum(hh[pos], kk[pos]))
        hn, kn, bn = hh[neg], kk[neg], bvn[neg]
        lower_part = np.where(hn < 0, ndtr(kn) - ndtr(hn), ndtr(-hn) - ndtr(-kn))
        res[neg] = np.where(hn >= kn, -bn, lower_part - bn)
        out[high] = res

    return np.clip(out, 0.0, 1.0).reshape(shape)


def bvn_cdf(x, y, r):
    """Standard bivariate normal CDF Phi_2(x, y; r)."""
    return bvn_upper(-np.asarray(x, float), -np.asarray(y, float), r)


# ---------------------------------------------------------------------------
# derivative kernels


class Derivs(NamedTuple):
    """CDF, h1, density and the partials needed by censored likelihoods."""

    C: np.ndarray
    h1: np.ndarray  # dC/du1
    c: np.ndarray  # d2C/du1du2
    C_t: np.ndarray  # dC/dtheta
    h1_t: np.ndarray
    c_t: np.ndarray
    h1_u1: np.ndarray
    c_u1: np.ndarray


def _sym_cdf(code: str, u, v, t):
    if code == "AMH":
        return u * v / (1 - t * (1 - u) * (1 - v))
    if code == "C0":
        return (u ** (-t) + v ** (-t) - 1) ** (-1 / t)
    if code == "FGM":
        return u * v * (1 + t * (1 - u) * (1 - v))
    if code == "F":
        return -1 / t * sp.log(1 + (sp.exp(-t * u) - 1) * (sp.exp(-t * v) - 1) / (sp.exp(-t) - 1))
    if code == "GAL":
        return u * v * sp.exp(((-sp.log(u)) ** (-t) + (-sp.log(v)) ** (-t)) ** (-1 / t))
    if code == "G0":
        return sp.exp(-(((-sp.log(u)) ** t + (-sp.log(v)) ** t) ** (1 / t)))
    if code == "J0":
        return 1 - ((1 - u) ** t + (1 - v) ** t - (1 - u) ** t * (1 - v) ** t) ** (1 / t)
    if code == "PL":
        q = 1 + (t - 1) * (u + v)
        r = q**2 - 4 * t * (t - 1) * u * v
        return (q - sp.sqrt(r)) / (2 * (t - 1))
    raise ValueError(code)


def _lambdify_set(cdf, u, v, t):
    h1 = sp.diff(cdf, u)
    c = sp.diff(h1, v)
    exprs = [cdf, h1, c, sp.diff(cdf, t), sp.diff(h1, t), sp.diff(c, t), sp.diff(h1, u), sp.diff(c, u)]
    return sp.lambdify((u, v, t), exprs, "numpy", cse=True)


# series half-width around a removable singularity; truncation error ~ band**4
_SERIES_BAND = 1e-3


@functools.lru_cache(maxsize=None)
def _symbolic_kernel(code: str):
    u, v = sp.symbols("u v", positive=True)
    t = sp.Symbol("t", real=True)
    cdf = _sym_cdf(code, u, v, t)
    exact = _lambdify_set(cdf, u, v, t)
    series = None
    fam = FAMILIES[code]
    if fam.singular_at is not None:
        t0 = fam.singular_at
        poly = sp.series(cdf, t, t0, 4).removeO()
        series = _lambdify_set(sp.expand(poly), u, v, t)
    return exact, series


def _gaussian_derivs(u1, u2, rho) -> Derivs:
    x1 = ndtri(u1)
    x2 = ndtri(u2)
    s2 = 1.0 - rho * rho
    s = np.sqrt(s2)
    phi1 = np.exp(-0.5 * x1 * x1) / np.sqrt(_TWOPI)
    z = (x2 - rho * x1) / s
    phiz = np.exp(-0.5 * z * z) / np.sqrt(_TWOPI)
    q = rho * rho * (x1 * x1 + x2 * x2) - 2.0 * rho * x1 * x2
    c = np.exp(-q / (2.0 * s2)) / s
    C = bvn_cdf(x1, x2, rho)
    C_t = np.exp(-(x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / (2.0 * s2)) / (_TWOPI * s)
    h1 = ndtr(z)
    h1_t = phiz * (rho * x2 - x1) / (s2 * s)
    h1_u1 = -rho * phiz / (s * phi1)
    c_u1 = c * (rho * x2 - rho * rho * x1) / (s2 * phi1)
    dq = 2.0 * rho * (x1 * x1 + x2 * x2) - 2.0 * x1 * x2
    c_t = c * (rho / s2 - (dq * s2 + 2.0 * rho * q) / (2.0 * s2 * s2))
    return Derivs(C, h1, c, C_t, h1_t, c_t, h1_u1, c_u1)


def derivatives(family, u1, u2, theta) -> Derivs:
    """All kernel quantities at (u1, u2, theta), no range checks.

    u-values are clamped to [U_EPS, 1 - U_EPS]; theta must already be valid.
    """
    fam = get_family(family)
    u1, u2, theta = np.broadcast_arrays(
        np.clip(np.asarray(u1, float), U_EPS, 1 - U_EPS),
        np.clip(np.asarray(u2, float), U_EPS, 1 - U_EPS),
        np.asarray(theta, float),
    )
    shape = u1.shape
    if fam.code == "N":
        return _gaussian_derivs(u1, u2, theta)
    exact, series = _symbolic_kernel(fam.code)
    with np.errstate(all="ignore"):
        vals = [np.broadcast_to(np.asarray(x, float), shape) for x in exact(u1, u2, theta)]
        if series is not None:
            near = np.abs(theta - fam.singular_at) < _SERIES_BAND
            if near.any():
                approx = [np.broadcast_to(np.asarray(x, float), shape) for x in series(u1, u2, theta)]
                vals = [np.where(near, a, e) for a, e in zip(approx, vals)]
    return Derivs(*[np.array(x) for x in vals])


# ---------------------------------------------------------------------------
# public evaluation


def _checked(family, u1, u2, theta):
    fam = get_family(family)
    theta = np.asarray(theta, dtype=float)
    if not np.all(fam.in_range(theta)):
        raise CopulaDomainError(f"theta outside the {fam.name} parameter range")
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    if np.any((u1 < 0) | (u1 > 1) | (u2 < 0) | (u2 > 1)):
        raise CopulaDomainError("copula arguments must lie in [0, 1]")
    return fam, u1, u2, theta


def cdf(family, u1, u2, theta):
    fam, u1, u2, theta = _checked(family, u1, u2, theta)
    val = derivatives(fam, u1, u2, theta).C
    val = np.where(u2 == 1.0, u1, val)
    val = np.where(u1 == 1.0, u2, val)
    val = np.where((u1 == 0.0) | (u2 == 0.0), 0.0, val)
    return np.clip(val, 0.0, 1.0)[()]


def h1(family, u1, u2, theta):
    """dC/du1, the conditional law of U2 <= u2 given U1 = u1."""
    fam, u1, u2, theta = _checked(family, u1, u2, theta)
    val = derivatives(fam, u1, u2, theta).h1
    val = np.where(u2 == 1.0, 1.0, val)
    val = np.where(u2 == 0.0, 0.0, val)
    return np.clip(val, 0.0, 1.0)[()]


def h2(family, u1, u2, theta):
    """dC/du2; every family here is exchangeable."""
    return h1(family, u2, u1, theta)


def density(family, u1, u2, theta):
    fam, u1, u2, theta = _checked(family, u1, u2, theta)
    return np.maximum(derivatives(fam, u1, u2, theta).c, 0.0)[()]


# ---------------------------------------------------------------------------
# Kendall's tau


def _frank_tau(theta: float) -> float:
    if abs(theta) < 1e-8:
        return 0.0
    debye, _ = integrate.quad(lambda x: x / np.expm1(x) if x != 0 else 1.0, 0.0, theta)
    return 1.0 - 4.0 / theta * (1.0 - debye / theta)


@functools.lru_cache(maxsize=1)
def _tau_grid():
    x, w = roots_legendre(32)
    edges = np.linspace(0.0, 1.0, 9)
    nodes = np.concatenate([0.5 * (b - a) * x + 0.5 * (a + b) for a, b in zip(edges[:-1], edges[1:])])
    weights = np.concatenate([0.5 * (b - a) * w for a, b in zip(edges[:-1], edges[1:])])
    return nodes, weights


def _numeric_tau(fam: CopulaFamily, theta: float) -> float:
    nodes, weights = _tau_grid()
    u1, u2 = np.meshgrid(nodes, nodes, indexing="ij")
    d12 = derivatives(fam, u1, u2, theta).h1
    d21 = derivatives(fam, u2, u1, theta).h1
    return float(1.0 - 4.0 * weights @ (d12 * d21) @ weights)


def kendall_tau(family, theta) -> float:
    fam = get_family(family)
    theta = float(theta)
    if not fam.in_range(theta):
        raise CopulaDomainError(f"theta outside the {fam.name} parameter range")
    if fam.code == "C0":
        return theta / (theta + 2.0)
    if fam.code == "G0":
        return 1.0 - 1.0 / theta
    if fam.code == "N":
        return 2.0 / np.pi * np.arcsin(theta)
    if fam.code == "FGM":
        return 2.0 * theta / 9.0
    if fam.code == "AMH":
        if abs(theta) < 1e-8:
            return 0.0
        if theta == 1.0:
            return 1.0 / 3.0
        return 1.0 - 2.0 * (theta + (1 - theta) ** 2 * np.log1p(-theta)) / (3.0 * theta**2)
    if fam.code == "F":
        return _frank_tau(theta)
    if fam.independence is not None and theta == fam.independence:
        return 0.0
    return _numeric_tau(fam, theta)


# ---------------------------------------------------------------------------
# conditional sampling


def clayton_conditional(u1, w, theta):
    """Closed-form inverse of the Clayton h-function in its second argument."""
    u1 = np.asarray(u1, dtype=float)
    w = np.asarray(w, dtype=float)
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.expm1(-theta / (1.0 + theta) * np.log(w))
        inner = a * np.exp(-theta * np.log(u1))
        out = np.exp(-np.log1p(inner) / theta)
    out = np.where(theta < 1e-10, w, out)
    return np.where(w >= 1.0, 1.0, out)[()]


def conditional_sample(family, u1, w, theta, tol: float = 1e-10, max_iter: int = 200):
    """Return u2 with h1(u1, u2; theta) = w."""
    fam = get_family(family)
    if not np.all(fam.in_range(theta)):
        raise CopulaDomainError(f"theta outside the {fam.name} parameter range")
    if fam.code == "C0":
        return clayton_conditional(u1, w, theta)
    u1, w, theta = (np.array(a, dtype=float) for a in np.broadcast_arrays(u1, w, theta))
    lo = np.zeros_like(w)
    hi = np.ones_like(w)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        val = derivatives(fam, u1, mid, theta).h1
        above = val > w
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
        if np.all(hi - lo < 1e-16):
            break
    root = 0.5 * (lo + hi)
    resid = np.abs(derivatives(fam, u1, root, theta).h1 - w)
    interior = (root > U_EPS) & (root < 1 - U_EPS)
    bad = interior & (resid > tol) & (hi - lo > 1e-15)
    if bad.any():
        i = int(np.flatnonzero(bad.ravel())[0])
        raise InversionError(
            f"{fam.name} h-function inversion did not converge at element {i}: "
            f"residual {resid.ravel()[i]:.3e}"
        )
    return root[()]
