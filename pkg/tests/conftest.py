import sys

import numpy as np
import pytest

from strokeplan.model import StrokeModel, load_params


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    module = sys.modules.get("test_acceptance")
    if module is None:
        return
    results = getattr(module, "CRITERION_RESULTS", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in getattr(module, "EXPECTED_CRITERIA", sorted(results)):
        terminalreporter.write_line(
            results.get(num, "criterion {}: NOT RUN".format(num)))


@pytest.fixture(scope="session")
def params():
    return load_params()


@pytest.fixture(scope="session")
def model(params):
    return StrokeModel(params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
