import numpy as np
import pytest

from brbvs.data import Dataset

ACCEPTANCE_KEY = pytest.StashKey[dict]()
N_CRITERIA = 12


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record the verdict of one acceptance criterion for the terminal summary."""
    store = request.config.stash[ACCEPTANCE_KEY]

    def record(number: int, label: str, ok: bool, detail: str = "") -> bool:
        store[number] = (label, bool(ok), detail)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(ACCEPTANCE_KEY, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        if k in store:
            label, ok, detail = store[k]
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {k:>2}. {label}: {detail}")
        else:
            terminalreporter.write_line(f"[----] {k:>2}. not run")


def random_mixed_dataset(rng: np.random.Generator, n: int = 30, p: int = 2, codes="URI") -> Dataset:
    """Random bivariate times with every censoring code represented."""
    X = rng.normal(size=(n, p))
    t1 = rng.gamma(2.0, 0.5, n) * np.exp(-0.3 * X[:, 0])
    t2 = rng.gamma(2.0, 0.5, n) * np.exp(0.3 * X[:, -1]) + 0.2 * t1
    pool = np.array(list(codes))
    c1 = pool[np.arange(n) % len(pool)]
    c2 = pool[(np.arange(n) // len(pool)) % len(pool)]
    c1, c2 = rng.permutation(c1), rng.permutation(c2)
    u1 = np.where(c1 == "I", t1 * rng.uniform(1.2, 2.0, n), np.nan)
    u2 = np.where(c2 == "I", t2 * rng.uniform(1.2, 2.0, n), np.nan)
    return Dataset(t1, u1, t2, u2, c1, c2, X, tuple(f"x{j + 1}" for j in range(p)))


def moderate_params(L, rng: np.random.Generator, scale: float = 0.2) -> np.ndarray:
    """A parameter vector with mild baselines and small effects for a JointLikelihood."""
    sl = L.layout.slices
    delta = rng.normal(scale=scale, size=L.n_params)
    for name in ("base1", "base2"):
        s = sl[name]
        k = s.stop - s.start
        delta[s.start] = -2.0 + 0.2 * rng.normal()
        delta[s.start + 1:s.stop] = np.log(3.0 / k) + 0.2 * rng.normal(size=k - 1)
    return delta
