import numpy as np
import pytest

from smmkit import Gaussian

from oracles import random_spd


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_gaussian(rng, d, scale=1.0, spread=2.0):
    return Gaussian(rng.uniform(-spread, spread, d), random_spd(rng, d, scale))


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(test_acceptance.VERDICTS):
            terminalreporter.write_line(test_acceptance.VERDICTS[n])
