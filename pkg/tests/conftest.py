from __future__ import annotations

import numpy as np
import pytest

from conformal_yamabe import cones


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def gamma2_n4():
    return cones.normalize(cones.canonical(cones.GardingCone(4, 2)))
