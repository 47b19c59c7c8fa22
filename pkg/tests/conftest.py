import math

import pytest

from hypb import polygon as P

PHI = (1 + math.sqrt(5)) / 2
PENTAGON_SIDE = math.acosh(PHI)


@pytest.fixture(scope="session")
def right_pentagon():
    return P.build_regular(5, P.RationalAngle.from_fraction(1, 2))


@pytest.fixture(scope="session")
def triangle_237():
    angles = (
        P.RationalAngle.from_fraction(1, 2),
        P.RationalAngle.from_fraction(1, 3),
        P.RationalAngle.from_fraction(1, 7),
    )
    return P.solve_closure(P.DeformationParams(angles, ()))


@pytest.fixture(scope="session")
def pi3_pentagon():
    ra = P.RationalAngle.from_fraction(1, 3)
    return P.solve_closure(P.DeformationParams((ra,) * 5, (2.0, 2.3)))


@pytest.fixture(scope="session")
def pi3_pentagon_b():
    ra = P.RationalAngle.from_fraction(1, 3)
    return P.solve_closure(P.DeformationParams((ra,) * 5, (1.9, 2.4)))
