import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_physical_G(rng, n=1, squeeze=2.0):
    """Pure-state correlation matrix S S^T / 2 with S random symplectic."""
    from semichaos.core import random_symplectic

    S = random_symplectic(n, rng, scale=squeeze)
    return 0.5 * S @ S.T


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
