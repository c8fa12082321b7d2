import math

import pytest

from mtms.presets import PAPER
from mtms.tones import optimize_tones


@pytest.fixture(scope="session")
def delta():
    return PAPER.delta


@pytest.fixture(scope="session")
def tone_sets(delta):
    return {n: optimize_tones(n, delta) for n in range(1, 9)}


def tau_of(delta):
    return 2 * math.pi / delta
