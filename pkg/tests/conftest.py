import pytest

from statage import fading, tdma


@pytest.fixture(scope="session")
def table2():
    return fading.FadingConfig.table2()


@pytest.fixture(scope="session")
def table2_small():
    # coarser gain grid keeps solver-heavy tests fast
    return fading.FadingConfig.table2(grid_points=400)


@pytest.fixture(scope="session")
def tdma_table2():
    return tdma.TdmaConfig.table2()
