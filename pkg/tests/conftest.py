import numpy as np
import pytest

from stpforecast.types import Ensemble, HorizonSpec


def random_ensemble(seed, k, n, m, p, centered=True, kind="transient"):
    rng = np.random.default_rng(seed)
    h = HorizonSpec(n, m, p)
    data = rng.standard_normal((k, h.size))
    if centered:
        data = data - data.mean(axis=0)
    return Ensemble(data, h, kind=kind, centered=centered)


def rel(a, b):
    return np.linalg.norm(np.asarray(a) - np.asarray(b)) / max(np.linalg.norm(b), 1e-300)


@pytest.fixture
def small_ensemble():
    return random_ensemble(0, k=12, n=3, m=2, p=4)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
