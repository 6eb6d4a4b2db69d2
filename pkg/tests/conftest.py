import numpy as np
import pytest

from parafreq import assemble, make_circle, make_gauss_line, make_torus

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def flat_circle():
    return make_circle(128, TWO_PI)


@pytest.fixture(scope="session")
def flat_circle_op(flat_circle):
    return assemble(flat_circle)


@pytest.fixture(scope="session")
def weighted_circle():
    base = make_circle(128, TWO_PI)
    return make_circle(128, TWO_PI, np.cos(base.coords[:, 0]))


@pytest.fixture(scope="session")
def weighted_circle_op(weighted_circle):
    return assemble(weighted_circle)


@pytest.fixture(scope="session")
def conformal_torus():
    base = make_torus(16, 16, TWO_PI, TWO_PI)
    x, y = base.coords[:, 0], base.coords[:, 1]
    phi = 0.4 * np.sin(x) * np.cos(y) + 0.2 * np.cos(2.0 * x)
    psi = 0.3 * np.sin(x) * np.cos(y)
    return make_torus(16, 16, TWO_PI, TWO_PI, phi, psi)


@pytest.fixture(scope="session")
def conformal_torus_op(conformal_torus):
    return assemble(conformal_torus)


@pytest.fixture(scope="session")
def gauss_line():
    return make_gauss_line(32)


@pytest.fixture(scope="session")
def gauss_line_op(gauss_line):
    return assemble(gauss_line)
