from fractions import Fraction

import numpy as np
import pytest

from isomon.fuchsian import FuchsianSystem, ParabolicConnection, Weight, random_system

GENERIC_LAM = (0.11, 0.23, 0.37, 0.41)
GENERIC_POINTS = (0, 1, 2, -1 + 0.7j)


@pytest.fixture
def generic_conn():
    return random_system(GENERIC_POINTS, GENERIC_LAM, seed=5)


@pytest.fixture
def tenth_weight():
    return Weight(tuple(Fraction(k, 10) for k in range(1, 9)))


def upper_triangular_conn(aligned: bool, weight):
    """Upper-triangular residues; [1:0] is the only invariant line."""
    lam = [0.1, 0.2, 0.3, -0.6]
    off = [1, 2, -0.5, -2.5]
    res = [[[l, b], [0, -l]] for l, b in zip(lam, off)]
    system = FuchsianSystem((0, 1, 2, 3), res)
    if aligned:
        return ParabolicConnection.build(system, lam, lines=[[1, 0]] * 4, weight=weight)
    return ParabolicConnection.build(system, [-l for l in lam], weight=weight)


def diagonal_system(lam, points=(0, 1, 2, np.inf)):
    """Residues diag(lam_i, -lam_i) at finite points; infinity is derived."""
    res = [np.diag([l, -l]) for l in lam] + [np.zeros((2, 2))] * (len(points) - len(lam))
    return FuchsianSystem(points, res)
