"""Damped Newton (Levenberg-Marquardt style) maximisation of a smooth objective."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class OptimOptions:
    max_iter: int = 200
    grad_tol: float = 1e-6  # stop when max |gradient| falls below
    converge_tol: float = 1e-4  # gradient level reported as converged
    step_tol: float = 1e-12
    lambda0: float = 1e-3
    lambda_max: float = 1e16


@dataclass
class OptimReport:
    x: np.ndarray
    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    iterations: int
    converged: bool
    message: str
    history: list = field(default_factory=list)

    @property
    def grad_norm(self) -> float:
        return float(np.max(np.abs(self.gradient))) if self.gradient.size else 0.0


def _is_pd(A) -> bool:
    try:
        np.linalg.cholesky(A)
        return True
    except np.linalg.LinAlgError:
        return False


def maximize(
    fun: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    hess: Callable[[np.ndarray], np.ndarray],
    x0,
    options: OptimOptions | None = None,
) -> OptimReport:
    """Maximise ``fun``; ``fun`` may raise or return a non-finite value to reject a point.

    Each iteration solves (-H + lam I) s = g.  The damping lam shrinks when the
    achieved gain agrees with the quadratic model and grows otherwise.
    """
    opt = options or OptimOptions()
    x = np.asarray(x0, dtype=float).copy()
    f = fun(x)
    if not np.isfinite(f):
        raise FloatingPointError("objective is not finite at the starting point")
    g = grad(x)
    H = hess(x)
    lam, nu = opt.lambda0 * max(1.0, float(np.max(np.abs(np.diag(H)), initial=0.0))), 2.0
    history = [f]
    message = "maximum number of iterations reached"
    it = 0  # attempted steps
    while it < opt.max_iter:
        if np.max(np.abs(g), initial=0.0) < opt.grad_tol:
            message = "gradient below tolerance"
            break
        it += 1
        A = -H
        try:
            L = np.linalg.cholesky(A + lam * np.eye(x.size))
        except np.linalg.LinAlgError:
            lam *= nu
            nu *= 2.0
            if lam > opt.lambda_max:
                message = "damping exceeded its limit"
                break
            continue
        s = np.linalg.solve(L.T, np.linalg.solve(L, g))
        predicted = float(g @ s - 0.5 * s @ A @ s)
        x_new = x + s
        try:
            f_new = fun(x_new)
        except (FloatingPointError, ValueError, ArithmeticError):
            f_new = -np.inf
        gain = f_new - f if np.isfinite(f_new) else -np.inf
        if predicted > 0 and gain > 0:
            rho = gain / predicted
            x, f = x_new, f_new
            g = grad(x)
            H = hess(x)
            history.append(f)
            lam *= max(1.0 / 3.0, 1.0 - (2.0 * rho - 1.0) ** 3)
            nu = 2.0
            if np.max(np.abs(s)) < opt.step_tol * (1.0 + np.max(np.abs(x))):
                message = "step below tolerance"
                break
        else:
            lam *= nu
            nu *= 2.0
            if lam > opt.lambda_max:
                message = "damping exceeded its limit"
                break
            if np.max(np.abs(s)) < opt.step_tol * (1.0 + np.max(np.abs(x))):
                message = "no further improvement possible"
                break
    gmax = float(np.max(np.abs(g), initial=0.0))
    converged = gmax < opt.converge_tol and _is_pd(-H)
    return OptimReport(x, float(f), g, H, it, bool(converged), message, history)
