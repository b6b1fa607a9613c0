from __future__ import annotations

import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from banditnav import FovSpec, GridSpec, OccupancyMap


@pytest.fixture
def empty_map_10() -> OccupancyMap:
    """Fully known, all-free 10x10 map at 1 m resolution."""
    spec = GridSpec(width=10, height=10, resolution=1.0)
    return OccupancyMap.from_occupied_mask(spec, np.zeros((10, 10), dtype=bool))


@pytest.fixture
def default_fov() -> FovSpec:
    return FovSpec(horizontal_fov=math.radians(79.0), max_range=5.0, ray_count=181)
