import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from hmlab.grid import Grid

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def unit_grid():
    return Grid.square(0.5, 0.5, 1.0, 33)


def slope(spacings, errors):
    return float(np.polyfit(np.log(spacings), np.log(errors), 1)[0])
