import numpy as np
import pytest

from gapspec import from_blocks

ACCEPTANCE_LINES: list[str] = []


def random_symmetric(rng, n, scale=1.0):
    m = rng.standard_normal((n, n)) * scale
    return 0.5 * (m + m.T)


def random_gapped(rng, n_plus, n_minus, shift=3.0, coupling=1.0):
    """Random real operator whose plus block sits above the minus block by about 2*shift."""
    app = random_symmetric(rng, n_plus) + shift * np.eye(n_plus)
    amm = random_symmetric(rng, n_minus) - shift * np.eye(n_minus)
    apm = coupling * rng.standard_normal((n_plus, n_minus))
    return from_blocks(app, apm, amm)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_by_two():
    return from_blocks([[2.0]], [[1.0]], [[-2.0]])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
