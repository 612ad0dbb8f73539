"""Censoring-aware log-likelihoods for the copula survival model.

Every unit contributes through a handful of linear predictors (each margin's
predictor at the lower and upper time bound, the baseline slope at the
observed time, and the copula predictor).  The per-unit log-likelihood is
differentiated analytically with respect to those predictors; the Hessian is
assembled from central differences of that per-unit gradient, which keeps
the finite differencing in a five-dimensional space regardless of how many
coefficients the model has.

Per-unit contributions by censoring pattern (S = marginal survival, f =
marginal density, h1/h2 = copula h-functions, l/u = lower/upper bound):

    UU  c(S1, S2) f1 f2          UR  h1(S1, S2) f1        RU  h2(S1, S2) f2
    RR  C(S1, S2)                II  C(l,l) - C(u,l) - C(l,u) + C(u,u)
    IR  C(S1l, S2) - C(S1u, S2)  IU  {h2(S1l, S2) - h2(S1u, S2)} f2
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import copulas
from .data import Dataset
from .margins import (
    TIME_FLOOR,
    SplineBasis,
    baseline_coefficients,
    get_link,
)

S_EPS = 1e-10
FD_STEP = 1e-5


class LikelihoodError(FloatingPointError):
    def __init__(self, message, unit=None, case=None):
        super().__init__(message)
        self.unit = unit
        self.case = case


@dataclass(frozen=True)
class ModelSpec:
    copula: str
    links: tuple[str, str] = ("PH", "PO")
    eta1: tuple[str, ...] = ()
    eta2: tuple[str, ...] = ()
    eta3: tuple[str, ...] = ()
    n_knots: int = 8
    degree: int = 2

    def __post_init__(self):
        copulas.get_family(self.copula)
        object.__setattr__(self, "links", tuple(get_link(l).code for l in self.links))
        for name in ("eta1", "eta2", "eta3"):
            object.__setattr__(self, name, tuple(getattr(self, name)))

    def with_covariates(self, covs) -> "ModelSpec":
        covs = tuple(covs)
        return ModelSpec(self.copula, self.links, covs, covs, covs, self.n_knots, self.degree)

    def to_dict(self) -> dict:
        return {
            "copula": self.copula,
            "links": list(self.links),
            "eta1": list(self.eta1),
            "eta2": list(self.eta2),
            "eta3": list(self.eta3),
            "n_knots": self.n_knots,
            "degree": self.degree,
        }


@dataclass(frozen=True)
class ParamLayout:
    """Index map of the parameter vector (base1, beta1, base2, beta2, beta3)."""

    k1: int
    p1: int
    k2: int
    p2: int
    p3: int  # including the intercept

    @property
    def slices(self) -> dict[str, slice]:
        out, start = {}, 0
        for name, size in (
            ("base1", self.k1), ("beta1", self.p1), ("base2", self.k2),
            ("beta2", self.p2), ("beta3", self.p3),
        ):
            out[name] = slice(start, start + size)
            start += size
        return out

    @property
    def size(self) -> int:
        return self.k1 + self.p1 + self.k2 + self.p2 + self.p3

    def split(self, vec) -> dict[str, np.ndarray]:
        return {k: np.asarray(vec)[s] for k, s in self.slices.items()}


def _margin_basis(d: Dataset, margin: int, spec: ModelSpec) -> SplineBasis:
    lower, upper, codes = d.margin_times(margin)
    times = np.concatenate([lower, upper[codes == "I"]])
    return SplineBasis.from_times(times, spec.n_knots, spec.degree)


class _PredictorModel:
    """Log-likelihood built from per-unit functions of linear predictors.

    Subclasses fill ``Z`` (q, n, P) mapping linear coefficients to the q
    predictors differentiated numerically, ``Zd`` (k, n, P) for baseline
    slopes that enter only through log-terms, ``dmask`` (k, n), the list of
    baseline ``base_slices`` and implement ``_unit``.
    """

    Z: np.ndarray
    Zd: np.ndarray
    dmask: np.ndarray
    base_slices: list[slice]
    used: np.ndarray  # (q,) predictors that any unit depends on
    n_params: int

    def _unit(self, a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def linear_coefficients(self, delta) -> np.ndarray:
        delta = np.asarray(delta, dtype=float)
        if delta.shape != (self.n_params,):
            raise ValueError(f"parameter vector must have length {self.n_params}")
        phi = delta.copy()
        for s in self.base_slices:
            phi[s] = baseline_coefficients(delta[s])
        return phi

    def _slopes(self, phi):
        slopes = self.Zd @ phi
        return np.where(self.dmask, slopes, 1.0)

    def per_unit(self, delta) -> np.ndarray:
        phi = self.linear_coefficients(delta)
        ll, _ = self._unit(self.Z @ phi)
        slopes = self._slopes(phi)
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = ll + np.sum(np.where(self.dmask, np.log(slopes), 0.0), axis=0)
        bad = ~np.isfinite(ll)
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise LikelihoodError(
                f"non-finite log-likelihood contribution at unit {i} ({self.case_label(i)})",
                unit=i, case=self.case_label(i),
            )
        return ll

    def case_label(self, i: int) -> str:
        return ""

    def predictor_loglik(self, a) -> tuple[np.ndarray, np.ndarray]:
        """Per-unit log-likelihood (without the baseline-slope terms) and its
        gradient, as functions of the stacked linear predictors ``a``."""
        return self._unit(np.asarray(a, dtype=float))

    def loglik(self, delta) -> float:
        return float(np.sum(self.per_unit(delta)))

    def _phi_gradient(self, phi):
        _, g = self._unit(self.Z @ phi)
        slopes = self._slopes(phi)
        gphi = np.einsum("qn,qnp->p", g, self.Z)
        gphi += np.einsum("kn,knp->p", np.where(self.dmask, 1.0 / slopes, 0.0), self.Zd)
        return gphi

    def _chain(self, delta, gphi):
        grad = gphi.copy()
        for s in self.base_slices:
            raw = delta[s]
            ga = gphi[s]
            tail = np.cumsum(ga[::-1])[::-1]  # sum over k >= j
            grad[s] = np.concatenate([[tail[0]], np.exp(raw[1:]) * tail[1:]])
        return grad

    def gradient(self, delta) -> np.ndarray:
        delta = np.asarray(delta, dtype=float)
        phi = self.linear_coefficients(delta)
        gphi = self._phi_gradient(phi)
        if not np.all(np.isfinite(gphi)):
            raise LikelihoodError("non-finite gradient")
        return self._chain(delta, gphi)

    def _unit_hessian(self, a) -> np.ndarray:
        q, n = a.shape
        H = np.zeros((q, q, n))
        for p in range(q):
            if not self.used[p]:
                continue
            h = FD_STEP * (1.0 + np.abs(a[p]))
            ap = a.copy()
            am = a.copy()
            ap[p] += h
            am[p] -= h
            _, gp = self._unit(ap)
            _, gm = self._unit(am)
            H[:, p, :] = (gp - gm) / (2.0 * h)
        return 0.5 * (H + H.transpose(1, 0, 2))

    def hessian(self, delta) -> np.ndarray:
        """Hessian of the (unpenalised) log-likelihood in the raw parameters."""
        delta = np.asarray(delta, dtype=float)
        phi = self.linear_coefficients(delta)
        a = self.Z @ phi
        Hu = self._unit_hessian(a)
        P = self.n_params
        Hphi = np.zeros((P, P))
        for p in range(Hu.shape[0]):
            if not self.used[p]:
                continue
            weighted = np.einsum("qn,qnj->nj", Hu[p], self.Z)
            Hphi += self.Z[p].T @ weighted
        slopes = self._slopes(phi)
        wd = np.where(self.dmask, -1.0 / slopes**2, 0.0)
        for k in range(self.Zd.shape[0]):
            Hphi += self.Zd[k].T @ (wd[k][:, None] * self.Zd[k])
        gphi = self._phi_gradient(phi)
        J = np.eye(P)
        extra = np.zeros(P)
        for s in self.base_slices:
            raw = delta[s]
            inc = np.exp(raw[1:])
            block = np.zeros((raw.size, raw.size))
            block[:, 0] = 1.0
            for j in range(1, raw.size):
                block[j:, j] = inc[j - 1]
            J[s, s] = block
            tail = np.cumsum(gphi[s][::-1])[::-1]
            extra[s] = np.concatenate([[0.0], inc * tail[1:]])
        H = J.T @ Hphi @ J + np.diag(extra)
        H = 0.5 * (H + H.T)
        if not np.all(np.isfinite(H)):
            raise LikelihoodError("non-finite Hessian")
        return H


def _design_rows(basis: SplineBasis, times, rows_mask):
    times = np.where(rows_mask, times, 1.0)
    B, dB = basis.design(times)
    B[~rows_mask] = 0.0
    dB[~rows_mask] = 0.0
    return B, dB


class JointLikelihood(_PredictorModel):
    """Bivariate copula survival log-likelihood for one ModelSpec and Dataset."""

    def __init__(self, spec: ModelSpec, d: Dataset, bases: tuple[SplineBasis, SplineBasis] | None = None):
        self.spec = spec
        self.data = d
        self.family = copulas.get_family(spec.copula)
        self.link1, self.link2 = (get_link(l) for l in spec.links)
        if bases is None:
            bases = (_margin_basis(d, 1, spec), _margin_basis(d, 2, spec))
        self.bases = bases
        X1, X2 = d.columns(spec.eta1), d.columns(spec.eta2)
        X3 = np.column_stack([np.ones(d.n), d.columns(spec.eta3)])
        self.layout = ParamLayout(bases[0].n_coef, X1.shape[1], bases[1].n_coef, X2.shape[1], X3.shape[1])
        sl = self.layout.slices
        self.n_params = self.layout.size
        self.base_slices = [sl["base1"], sl["base2"]]
        n, P = d.n, self.n_params

        self.U1, self.I1 = d.cens1 == "U", d.cens1 == "I"
        self.U2, self.I2 = d.cens2 == "U", d.cens2 == "I"
        Z = np.zeros((5, n, P))
        Zd = np.zeros((2, n, P))
        for m, (basis, X, bs, bt, interval) in enumerate(
            ((bases[0], X1, sl["base1"], sl["beta1"], self.I1), (bases[1], X2, sl["base2"], sl["beta2"], self.I2))
        ):
            lower, upper, _ = d.margin_times(m + 1)
            Bl, dBl = _design_rows(basis, lower, np.ones(n, bool))
            Bu, _ = _design_rows(basis, upper, interval)
            Z[2 * m, :, bs] = Bl
            Z[2 * m, :, bt] = X
            Z[2 * m + 1, :, bs] = Bu
            Z[2 * m + 1, :, bt] = np.where(interval[:, None], X, 0.0)
            Zd[m, :, bs] = dBl
        Z[4, :, sl["beta3"]] = X3
        self.Z, self.Zd = Z, Zd
        self.dmask = np.vstack([self.U1, self.U2])
        self.used = np.array([True, self.I1.any(), True, self.I2.any(), True])
        self.log_t1 = np.log(np.maximum(d.t1_lower, TIME_FLOOR))
        self.log_t2 = np.log(np.maximum(d.t2_lower, TIME_FLOOR))
        kinds = {}
        for d1 in (0, 1):
            for d2 in (0, 1):
                idx = np.flatnonzero((self.U1 == bool(d1)) & (self.U2 == bool(d2)))
                if idx.size:
                    kinds[(d1, d2)] = idx
        self._kinds = kinds

    def case_label(self, i: int) -> str:
        return f"case {self.data.cens1[i]}{self.data.cens2[i]}"

    def _kernel(self, d1, d2, u1, u2, theta):
        D = copulas.derivatives(self.family, u1, u2, theta)
        E = copulas.derivatives(self.family, u2, u1, theta)
        if (d1, d2) == (0, 0):
            return D.C, D.h1, E.h1, D.C_t
        if (d1, d2) == (1, 0):
            return D.h1, D.h1_u1, D.c, D.h1_t
        if (d1, d2) == (0, 1):
            return E.h1, D.c, E.h1_u1, E.h1_t
        return D.c, D.c_u1, E.c_u1, D.c_t

    def _unit(self, a):
        e1l, e1u, e2l, e2u, e3 = a
        n = e1l.shape[0]
        ll = np.zeros(n)
        g = np.zeros((5, n))

        def surv(link, eta):
            s = link.G(eta)
            inside = (s > S_EPS) & (s < 1 - S_EPS)
            return np.clip(s, S_EPS, 1 - S_EPS), np.where(inside, link.dG(eta), 0.0)

        S1l, dS1l = surv(self.link1, e1l)
        S1u, dS1u = surv(self.link1, e1u)
        S2l, dS2l = surv(self.link2, e2l)
        S2u, dS2u = surv(self.link2, e2u)
        theta = copulas.theta_from_eta(self.family, e3)
        dth = copulas.dtheta_deta(self.family, e3)

        U1, U2 = self.U1, self.U2
        ll[U1] += self.link1.log_neg_dG(e1l[U1]) - self.log_t1[U1]
        g[0, U1] += self.link1.dlog_neg_dG(e1l[U1])
        ll[U2] += self.link2.log_neg_dG(e2l[U2]) - self.log_t2[U2]
        g[2, U2] += self.link2.dlog_neg_dG(e2l[U2])

        M = np.zeros(n)
        dM = np.zeros((5, n))  # w.r.t. S1l, S1u, S2l, S2u, theta
        with np.errstate(all="ignore"):
            for (d1, d2), idx in self._kinds.items():
                i1 = self.I1[idx]
                i2 = self.I2[idx]
                corners = (
                    (np.ones(idx.size, bool), S1l, S2l, 0, 2, 1.0),
                    (i1, S1u, S2l, 1, 2, -1.0),
                    (i2, S1l, S2u, 0, 3, -1.0),
                    (i1 & i2, S1u, S2u, 1, 3, 1.0),
                )
                for sel, s1, s2, slot1, slot2, w in corners:
                    if not sel.any():
                        continue
                    rows = idx[sel]
                    K, Ku1, Ku2, Kt = self._kernel(d1, d2, s1[rows], s2[rows], theta[rows])
                    M[rows] += w * K
                    dM[slot1, rows] += w * Ku1
                    dM[slot2, rows] += w * Ku2
                    dM[4, rows] += w * Kt
            ll += np.log(M)
            g[0] += dM[0] / M * dS1l
            g[1] += dM[1] / M * dS1u
            g[2] += dM[2] / M * dS2l
            g[3] += dM[3] / M * dS2u
            g[4] += dM[4] / M * dth
        return ll, g

    def theta(self, delta) -> np.ndarray:
        phi = self.linear_coefficients(delta)
        return copulas.theta_from_eta(self.family, self.Z[4] @ phi)


class MarginLikelihood(_PredictorModel):
    """Univariate censored log-likelihood of a single margin (no copula)."""

    def __init__(self, link, basis: SplineBasis, lower, upper, codes, X):
        self.link = get_link(link)
        self.basis = basis
        codes = np.asarray(codes)
        lower = np.asarray(lower, float)
        upper = np.asarray(upper, float)
        X = np.asarray(X, float).reshape(len(lower), -1)
        n, k, p = len(lower), basis.n_coef, X.shape[1]
        self.n_params = k + p
        self.base_slices = [slice(0, k)]
        self.U, self.R, self.I = codes == "U", codes == "R", codes == "I"
        self.codes = codes
        Bl, dBl = _design_rows(basis, lower, np.ones(n, bool))
        Bu, _ = _design_rows(basis, upper, self.I)
        Z = np.zeros((2, n, k + p))
        Z[0, :, :k] = Bl
        Z[0, :, k:] = X
        Z[1, :, :k] = Bu
        Z[1, :, k:] = np.where(self.I[:, None], X, 0.0)
        self.Z = Z
        self.Zd = np.zeros((1, n, k + p))
        self.Zd[0, :, :k] = dBl
        self.dmask = self.U[None, :]
        self.used = np.array([True, self.I.any()])
        self.log_t = np.log(np.maximum(lower, TIME_FLOOR))

    @classmethod
    def from_dataset(cls, d: Dataset, margin: int, link, covariates=(), basis=None, n_knots=8, degree=2):
        lower, upper, codes = d.margin_times(margin)
        if basis is None:
            times = np.concatenate([lower, upper[codes == "I"]])
            basis = SplineBasis.from_times(times, n_knots, degree)
        return cls(link, basis, lower, upper, codes, d.columns(tuple(covariates)))

    def case_label(self, i: int) -> str:
        return f"case {self.codes[i]}"

    def _unit(self, a):
        el, eu = a
        n = el.shape[0]
        ll = np.zeros(n)
        g = np.zeros((2, n))
        L = self.link
        U, R, I = self.U, self.R, self.I
        with np.errstate(all="ignore"):
            ll[U] = L.log_neg_dG(el[U]) - self.log_t[U]
            g[0, U] = L.dlog_neg_dG(el[U])
            ll[R] = np.log(L.G(el[R]))
            g[0, R] = L.dG(el[R]) / L.G(el[R])
            mass = L.G(el[I]) - L.G(eu[I])
            ll[I] = np.log(mass)
            g[0, I] = L.dG(el[I]) / mass
            g[1, I] = -L.dG(eu[I]) / mass
        return ll, g


# ---------------------------------------------------------------------------
# functional interface


def loglik(spec: ModelSpec, delta, d: Dataset) -> float:
    return JointLikelihood(spec, d).loglik(delta)


def gradient(spec: ModelSpec, delta, d: Dataset) -> np.ndarray:
    return JointLikelihood(spec, d).gradient(delta)


def observed_information(spec: ModelSpec, delta, d: Dataset) -> np.ndarray:
    info = -JointLikelihood(spec, d).hessian(delta)
    asym = np.max(np.abs(info - info.T)) if info.size else 0.0
    if asym > 1e-6:
        raise LikelihoodError(f"observed information is not symmetric (max deviation {asym:.2e})")
    return info


def fd_hessian(grad_fn, x, step: float = FD_STEP) -> np.ndarray:
    """Central differences of a gradient, step * (1 + |x_j|) per coordinate."""
    x = np.asarray(x, dtype=float)
    H = np.empty((x.size, x.size))
    for j in range(x.size):
        h = step * (1.0 + abs(x[j]))
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        H[:, j] = (np.asarray(grad_fn(xp)) - np.asarray(grad_fn(xm))) / (2.0 * h)
    return 0.5 * (H + H.T)
