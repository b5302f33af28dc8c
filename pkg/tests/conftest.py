from __future__ import annotations

import pytest

from gnomonic_grid import build_grid
from models import GridSpec, MappingKind


@pytest.fixture(scope='session')
def grid_cache():
    cache = {}

    def get(mapping, ne, radius=None):
        kind = MappingKind.parse(mapping)
        key = (kind, ne, radius)
        if key not in cache:
            spec = GridSpec(mapping=kind, ne=ne) if radius is None else GridSpec(mapping=kind, ne=ne, radius=radius)
            cache[key] = build_grid(spec)
        return cache[key]
    return get


@pytest.fixture(scope='session')
def equi_edge_c48(grid_cache):
    return grid_cache('equi-edge', 48)


@pytest.fixture(scope='session')
def equiangular_c48(grid_cache):
    return grid_cache('equiangular', 48)
