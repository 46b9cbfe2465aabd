import numpy as np
import pytest

from selfsim.aggregator import GeneratorConfig

ACCEPTANCE_RESULTS = []


class FixedUniform:
    """Stand-in for UniformSource that replays given values."""

    def __init__(self, *values):
        self._values = list(values)

    def next(self):
        return self._values.pop(0)

    def uniform(self, n):
        return np.array([self.next() for _ in range(n)])


@pytest.fixture
def fixed_uniform():
    return FixedUniform


@pytest.fixture
def small_config():
    return GeneratorConfig(
        n_sources=4, target_rate=1e6, link_rate=1e8, alpha_on=1.6, alpha_off=1.5,
        beta_off=2e-3, packet_budget=5000, master_seed=7,
    )


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
