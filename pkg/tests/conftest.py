import numpy as np
import pytest

from subflow import Derivation, EmbeddedSpace, parse


@pytest.fixture(scope="session")
def disk():
    return EmbeddedSpace(
        2,
        inequalities=(parse("x0^2 + x1^2 - 1"),),
        sample_box=((-1.0, 1.0), (-1.0, 1.0)),
    )


@pytest.fixture(scope="session")
def disk_dx(disk):
    return Derivation.from_strings(disk, ["1", "0"])


@pytest.fixture(scope="session")
def circle():
    return EmbeddedSpace(
        2,
        equalities=(parse("x0^2 + x1^2 - 1"),),
        sample_box=((-1.2, 1.2), (-1.2, 1.2)),
    )


@pytest.fixture(scope="session")
def circle_rotation(circle):
    return Derivation.from_strings(circle, ["-x1", "x0"])


@pytest.fixture(scope="session")
def interval01():
    return EmbeddedSpace(
        1,
        inequalities=(parse("-x0"), parse("x0 - 1")),
        sample_box=((0.0, 1.0),),
    )


@pytest.fixture(scope="session")
def interval_ddx(interval01):
    return Derivation.from_strings(interval01, ["1"])


@pytest.fixture(scope="session")
def halfcone():
    return EmbeddedSpace(
        3,
        equalities=(parse("x0^2 + x1^2 - x2^2"),),
        inequalities=(parse("-x2"),),
        sample_box=((-1.0, 1.0), (-1.0, 1.0), (0.0, 1.5)),
    )


# expression corpus reused by differentiation and identity tests
EXPR_CORPUS = [
    "x0",
    "x1",
    "x0 + x1",
    "x0 - 2*x1",
    "x0*x1",
    "x0^2",
    "x0^3 - x1^2",
    "x0^2 + x1^2",
    "sin(x0)",
    "cos(x1)",
    "sin(x0*x1)",
    "exp(0.5*x0)",
    "exp(x0*x1)",
    "log(2 + x0)",
    "sqrt(2 + x0)",
    "tanh(x0 + x1)",
    "atan(x0 - x1)",
    "1/(2 + x0)",
    "x0/(3 + x1^2)",
    "sin(x0)*exp(x1) + x0^2*x1",
    "(1 + x0^2)^3",
    "exp(0.2*x0)*cos(x1)",
]


def interior_points(count: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.uniform(-1.0, 1.0, size=(count, 2))
