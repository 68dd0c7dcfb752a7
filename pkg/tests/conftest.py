import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def three_se(samples, axis=0):
    """Three Monte Carlo standard errors of the mean."""
    samples = np.asarray(samples, dtype=float)
    return 3.0 * samples.std(axis=axis, ddof=1) / np.sqrt(samples.shape[axis])


_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """``criterion(label, ok, detail)`` records one acceptance line and returns ``ok``."""
    def record(label, ok, detail=""):
        _ACCEPTANCE.append((label, bool(ok), detail))
        print(f"{label}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
