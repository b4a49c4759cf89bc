import numpy as np
import pytest
from scipy.special import expit

from rocinfer.data import Dataset

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def report(request):
    """Record (and print) one pass/fail line for an acceptance criterion."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        print(line)
        lines.append(line)
        return ok

    return _report


def baseline_data(n, seed, beta=(1.0, -0.5)):
    """Logit design with x1 ~ N(2,1), x2 ~ N(0,1) drawn from a plain numpy generator."""
    rng = np.random.default_rng(seed)
    X = np.c_[rng.normal(2, 1, n), rng.normal(0, 1, n)]
    y = (expit(X @ np.asarray(beta)) > rng.uniform(size=n)).astype(int)
    return Dataset(y, X, ("x1", "x2"))


@pytest.fixture(scope="session")
def baseline_10k():
    return baseline_data(10000, 11)


@pytest.fixture(scope="session")
def baseline_20k():
    return baseline_data(20000, 12)


@pytest.fixture(scope="session")
def table2_run(baseline_20k):
    from rocinfer.auc import table2_bootstrap

    return table2_bootstrap(baseline_20k, B=500, seed=0)


@pytest.fixture(scope="session")
def table1_run(baseline_20k):
    """Resample-split bootstrap of the baseline design with its wall time in seconds."""
    import time

    from rocinfer.auc import table1_bootstrap

    start = time.perf_counter()
    out = table1_bootstrap(baseline_20k, B=200, seed=0)
    return out, time.perf_counter() - start
