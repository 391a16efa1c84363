import math

import pytest

from nmmscatter import PlaneWave, PmlParams, PointSource, solve, trapezoid

EX1_PML = PmlParams(2.5, 1.0, 70.0)


@pytest.fixture(scope="session")
def ex1_plane():
    return solve(trapezoid(1.0), PlaneWave(math.pi / 6), EX1_PML, 280, 140)


@pytest.fixture(scope="session")
def ex1_point():
    return solve(trapezoid(1.0), PointSource((0.2, 0.2)), EX1_PML, 280, 140)


@pytest.fixture(scope="session")
def small_plane():
    return solve(trapezoid(1.0), PlaneWave(math.pi / 6), EX1_PML, 140, 70)


@pytest.fixture(scope="session")
def small_point():
    return solve(trapezoid(1.0), PointSource((0.2, 0.2)), EX1_PML, 140, 70)


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        request.config._acceptance_lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
