import numpy as np
import pytest

from twistframe.frames import GeneratorSet, decompose
from twistframe.grids import GridSpec, make_gaussian, make_hermite, modulated, random_smooth

ACCEPTANCE_LINES: list[str] = []


def corpus(spec: GridSpec) -> list:
    """Ten smooth, well-localized test functions used across suites."""
    rng = np.random.default_rng(7)
    g = make_gaussian(spec, (0, 0), 1.0)
    return [
        g,
        make_gaussian(spec, (0.5, -0.25), 0.8, label="g_off"),
        make_gaussian(spec, (0, 0), 1.5, label="g_wide"),
        make_gaussian(spec, (-1, 1), 0.6, label="g_narrow"),
        make_hermite(spec, 1),
        make_hermite(spec, 2, (0.25, 0)),
        make_hermite(spec, 3),
        modulated(g, (1.0, -0.5)),
        modulated(make_gaussian(spec, (1, 0), 0.9), (0.25, 2.0)),
        random_smooth(spec, rng, terms=3, label="rand"),
    ]


@pytest.fixture(scope="session")
def spec():
    return GridSpec()


@pytest.fixture(scope="session")
def gauss(spec):
    return make_gaussian(spec, (0, 0), 1.0, label="g")


@pytest.fixture(scope="session")
def corpus16(spec):
    return corpus(spec)


@pytest.fixture(scope="session")
def basis07(spec):
    """Parseval basis from a width-0.7 gaussian; well localized in space."""
    g7 = make_gaussian(spec, (0, 0), 0.7, label="g7")
    return GeneratorSet.of(g7), decompose(GeneratorSet.of(g7))


@pytest.fixture(params=["numba", "numpy"])
def backend(request, monkeypatch):
    monkeypatch.setenv("TWISTFRAME_NUMBA", "1" if request.param == "numba" else "0")
    return request.param


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
