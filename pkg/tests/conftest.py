import os
import pathlib

# reuse extension tables across test runs (builds take ~20 s per parameter pair)
os.environ.setdefault("FRACBUBBLES_CACHE",
                      str(pathlib.Path(__file__).resolve().parent.parent
                          / ".fracbubbles-cache"))

import numpy as np
import pytest

from fracbubbles.params import FracParams


@pytest.fixture(scope="session")
def p3():
    return FracParams.create(3, 0.5)


@pytest.fixture(scope="session")
def p1_quarter():
    return FracParams.create(1, 0.25)


@pytest.fixture(scope="session")
def p1_tenth():
    return FracParams.create(1, 0.1)


@pytest.fixture(scope="session")
def table3(p3):
    from fracbubbles.extension import get_extension_table
    return get_extension_table(p3)


@pytest.fixture(scope="session")
def table1_quarter(p1_quarter):
    from fracbubbles.extension import get_extension_table
    return get_extension_table(p1_quarter)


@pytest.fixture(scope="session")
def table1_tenth(p1_tenth):
    from fracbubbles.extension import get_extension_table
    return get_extension_table(p1_tenth)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240517)
