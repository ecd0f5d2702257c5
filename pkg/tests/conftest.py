import pytest

from qratio.distributions import Lognormal, make_rng
from qratio.income_ingest import ReconstructionPolicy, load_shipped_table, reconstruct
from qratio.quantile_core import sort_sample


@pytest.fixture(scope="session")
def ln_sample():
    return sort_sample(Lognormal(0.0, 1.0).draw(make_rng(2024), 1000))


@pytest.fixture(scope="session")
def abs_samples():
    return {
        year: reconstruct(load_shipped_table(year), ReconstructionPolicy(seed=0))
        for year in (2005, 2011)
    }


_ACCEPTANCE_LINES = []


@pytest.fixture
def record_criterion():
    """Record one pass/fail line; all lines are printed in the terminal summary."""
    def record(label, passed, detail):
        line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
