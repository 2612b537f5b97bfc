"""Shared fixtures.

The full-scale reference map (256 grid, 100 steps) takes a few seconds to
build, so it is session-scoped and shared by the acceptance tests.
"""

from __future__ import annotations

import numpy as np
import pytest

from oitsample import (
    PeriodicGrid,
    ScalarField,
    TransportConfig,
    build_transport_map,
    make_density,
)

REFERENCE_GRID_N = 256
REFERENCE_STEPS = 100


@pytest.fixture(scope="session")
def grid64() -> PeriodicGrid:
    return PeriodicGrid(64, 64)


@pytest.fixture(scope="session")
def rng() -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=20240817))


@pytest.fixture(scope="session")
def reference_density():
    """The ratio-100 two-bump target on the 256 grid."""
    grid = PeriodicGrid(REFERENCE_GRID_N, REFERENCE_GRID_N)
    return make_density("two-bump", grid)


@pytest.fixture(scope="session")
def reference_build(reference_density):
    """Transport map for the two-bump target at full scale, built once."""
    import time

    cfg = TransportConfig(steps=REFERENCE_STEPS, grid=reference_density.grid)
    t0 = time.perf_counter()
    result = build_transport_map(reference_density, cfg)
    elapsed = time.perf_counter() - t0
    return result, elapsed


def smooth_test_map(grid: PeriodicGrid, amp: float = 0.15, phase: float = 0.0):
    """A smooth analytic diffeomorphism for grid-calculus tests."""
    from oitsample import DiffeoMap, VectorField

    def dx(x, y):
        return amp * np.sin(x + phase) * np.cos(y)

    def dy(x, y):
        return -amp * np.cos(x) * np.sin(y - phase)

    disp = VectorField(
        ScalarField.from_function(grid, dx),
        ScalarField.from_function(grid, dy),
    )
    return DiffeoMap(grid, disp)
