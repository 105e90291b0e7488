import pytest

import povcast as pc


@pytest.fixture(scope="session")
def table1():
    return pc.load_table1()


@pytest.fixture(scope="session")
def smoothed(table1):
    return pc.smooth(table1, 4, 5)
