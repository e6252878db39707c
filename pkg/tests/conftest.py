import numpy as np
import pytest

from maxreg_lab.grid import Grid
from maxreg_lab.operators import assemble_extended

# smallest positive root of tan(nu/2) = nu, 30-digit reference value
NU_STAR = 2.3311223704144226137


@pytest.fixture(scope="session")
def sys64():
    return assemble_extended(Grid(64))


@pytest.fixture(scope="session")
def sys128():
    return assemble_extended(Grid(128))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
