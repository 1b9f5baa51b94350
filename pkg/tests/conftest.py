import pytest

from fractal_levelsets.ifs import GridSpec, attractor_levels, sierpinski_gasket

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def gasket():
    return sierpinski_gasket()


@pytest.fixture(scope="session")
def gasket_covers_b2(gasket):
    spec = GridSpec.for_system(gasket, 2)
    return spec, attractor_levels(gasket, spec, range(0, 7))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def gasket_covers_b6(gasket):
    spec = GridSpec.for_system(gasket, 6)
    return spec, attractor_levels(gasket, spec, range(0, 6))
