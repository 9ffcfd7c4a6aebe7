import numpy as np
import pytest

from gamefusion.dataset import GeneratorConfig, generate_synthetic


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset():
    """120 records with a strong planted shift on expression for the overall task."""
    cfg = GeneratorConfig(n_records=120, effects={("overall", "expression"): 3.0})
    return generate_synthetic(cfg, 5)


@pytest.fixture(scope="session")
def sparse_dataset():
    cfg = GeneratorConfig(n_records=80, effects={("overall", "mfcc"): 2.0}, missing_rate=0.3)
    return generate_synthetic(cfg, 9)


# one pass/fail line per acceptance criterion, printed after the run
_CRITERIA = {}


@pytest.fixture
def criterion():
    def record(number, ok, detail):
        _CRITERIA[number] = (bool(ok), detail)
        print(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
