import numpy as np
import pytest

from brbvs.optimizer import OptimOptions, maximize


def test_concave_quadratic_in_few_steps():
    target = np.array([1.5, -2.0, 0.3])
    A = np.diag([1.0, 4.0, 0.5])
    rep = maximize(
        lambda x: -(x - target) @ A @ (x - target),
        lambda x: -2 * A @ (x - target),
        lambda x: -2 * A,
        np.zeros(3),
    )
    assert rep.iterations <= 3
    assert np.allclose(rep.x, target, atol=1e-8)
    assert rep.converged


def test_negated_rosenbrock():
    def f(x):
        return -(100 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2)

    def g(x):
        return -np.array([-400 * x[0] * (x[1] - x[0] ** 2) - 2 * (1 - x[0]), 200 * (x[1] - x[0] ** 2)])

    def h(x):
        return -np.array([[1200 * x[0] ** 2 - 400 * x[1] + 2, -400 * x[0]], [-400 * x[0], 200.0]])

    rep = maximize(f, g, h, np.array([-1.2, 1.0]))
    assert rep.grad_norm < 1e-6
    assert np.allclose(rep.x, [1.0, 1.0], atol=1e-6)
    assert all(b >= a for a, b in zip(rep.history, rep.history[1:]))


def test_indefinite_start_still_ascends():
    # saddle at the origin of a function with a maximum at (0, 2)
    def f(x):
        return -x[0] ** 2 + x[1] ** 2 - 0.125 * x[1] ** 4

    def g(x):
        return np.array([-2 * x[0], 2 * x[1] - 0.5 * x[1] ** 3])

    def h(x):
        return np.array([[-2.0, 0.0], [0.0, 2 - 1.5 * x[1] ** 2]])

    rep = maximize(f, g, h, np.array([0.5, 0.1]))
    assert all(b >= a for a, b in zip(rep.history, rep.history[1:]))
    assert np.allclose(rep.x, [0.0, 2.0], atol=1e-6) and rep.converged


def test_rejects_nonfinite_points():
    # log barrier: objective is -inf outside x > 0
    def f(x):
        return float(np.log(x[0]) - x[0]) if x[0] > 0 else -np.inf

    rep = maximize(f, lambda x: np.array([1 / x[0] - 1]), lambda x: np.array([[-1 / x[0] ** 2]]), np.array([0.05]))
    assert rep.x[0] == pytest.approx(1.0, abs=1e-6)


def test_nonfinite_start_raises():
    with pytest.raises(FloatingPointError):
        maximize(lambda x: np.nan, lambda x: x, lambda x: np.eye(1), np.zeros(1))


def test_iteration_cap_reports_not_converged():
    rep = maximize(
        lambda x: -np.sum(x ** 4), lambda x: -4 * x ** 3, lambda x: np.diag(-12 * x ** 2),
        np.array([3.0]), OptimOptions(max_iter=2),
    )
    assert not rep.converged and rep.iterations == 2


def test_deterministic():
    args = (lambda x: -np.sum((x - 1) ** 4), lambda x: -4 * (x - 1) ** 3, lambda x: np.diag(-12 * (x - 1) ** 2))
    a = maximize(*args, np.zeros(2))
    b = maximize(*args, np.zeros(2))
    assert np.array_equal(a.x, b.x) and a.history == b.history
