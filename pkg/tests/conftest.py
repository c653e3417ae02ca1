import numpy as np
import pytest

from tailvi.mixtures import DiagGaussianMixture


def central_diff(fn, theta, step=1e-5):
    """Central finite differences of a scalar function of a flat vector."""
    theta = np.array(theta, dtype=float)
    grad = np.empty_like(theta)
    for i in range(theta.size):
        up, down = theta.copy(), theta.copy()
        up[i] += step
        down[i] -= step
        grad[i] = (fn(up) - fn(down)) / (2 * step)
    return grad


def rel_err(got, want):
    got, want = np.ravel(got), np.ravel(want)
    return np.max(np.abs(got - want)) / max(1.0, np.max(np.abs(want)))


def make_mixture(rng, k=None, d=None):
    k = int(rng.integers(1, 5)) if k is None else k
    d = int(rng.integers(1, 4)) if d is None else d
    return DiagGaussianMixture(
        rng.normal(size=k),
        rng.normal(scale=1.5, size=(k, d)),
        rng.uniform(-0.5, 0.5, size=(k, d)),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance_report(request):
    """Record one pass/fail line per acceptance criterion."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(criterion, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
