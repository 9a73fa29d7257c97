import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mmrsink.network import ParametricPathNetwork, random_instance

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = os.path.join(os.path.dirname(__file__), "data")

# acceptance outcomes, printed at the end of the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def three_vertex():
    # tau=1, lengths (1, 1), capacities (1, 2), weights (0, 1, 2)
    return ParametricPathNetwork.build([0, 1, 2], [0, 0, 0], [1, 1], [1, 2])


def nets(seed, count, n_max, n_min=2, **kw):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        yield random_instance(int(rng.integers(n_min, n_max + 1)), rng, **kw)


def constant(net):
    """The same instance with every weight frozen at its intercept."""
    return ParametricPathNetwork.build(
        net.a, [0.0] * net.n, net.lengths, net.capacities, tau=net.tau, horizon=net.horizon
    )
