import numpy as np
import pytest

from kwsphere.grid import build_grid


@pytest.fixture(scope="session")
def grid64():
    return build_grid(64, 128)


@pytest.fixture(scope="session")
def grid16():
    return build_grid(16, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_bandlimited(grid, L, rng, scale=1.0, zero_mean=False):
    """Random real field with harmonic content up to degree L."""
    from kwsphere.harmonics import SpectralCoeffs, synthesize

    c = rng.standard_normal((L + 1) ** 2) / (1.0 + np.arange((L + 1) ** 2)) ** 0.5
    if zero_mean:
        c[0] = 0.0
    f = synthesize(SpectralCoeffs(L, c), grid)
    return scale * f


# One summary line per acceptance criterion, shown after the test run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("-")[1].split("]")[0])):
            terminalreporter.write_line(line)
