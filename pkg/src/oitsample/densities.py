"""Built-in analytic target densities.

Each entry produces a raw positive field on a given grid; the common
pipeline (optional dynamic-range shift, then normalization) turns it into
a unit-mass density.  Registry names are what the CLI accepts; a parameter
can be appended after a colon, e.g. ``sine-perturbation:0.8``.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .geodesic import Density, normalize, set_dynamic_range
from .grid import PeriodicGrid, ScalarField


def uniform_field(grid: PeriodicGrid, _param: float | None = None) -> ScalarField:
    return ScalarField.constant(grid, 1.0)


def two_bump_field(grid: PeriodicGrid, _param: float | None = None) -> ScalarField:
    """Two Gaussian bumps (one banana-shaped) over a 1/10 floor."""
    def formula(x, y):
        return (3.0 * np.exp(-x**2 - 10.0 * (y - x**2 / 2.0 + 1.0) ** 2)
                + 2.0 * np.exp(-((x + 1.0) ** 2) - y**2) + 0.1)
    return ScalarField.from_function(grid, formula)


def one_gaussian_bump_field(grid: PeriodicGrid, param: float | None = None) -> ScalarField:
    """Isotropic Gaussian bump exp(-(x^2+y^2)/w) centered at the origin."""
    width = 1.0 if param is None else float(param)
    if width <= 0.0:
        raise InvalidInputError("bump width must be positive")
    return ScalarField.from_function(grid, lambda x, y: np.exp(-(x**2 + y**2) / width))


def sine_perturbation_field(grid: PeriodicGrid, param: float | None = None) -> ScalarField:
    """1 + s*sin(x); s in (0, 1) keeps it positive."""
    s = 0.5 if param is None else float(param)
    if not 0.0 < s < 1.0:
        raise InvalidInputError(f"sine amplitude must be in (0, 1), got {s}")
    return ScalarField.from_function(grid, lambda x, y: 1.0 + s * np.sin(x))


# name -> (field builder, dynamic-range ratio applied when none is requested)
REGISTRY = {
    "uniform": (uniform_field, None),
    "two-bump": (two_bump_field, 100.0),
    "one-gaussian-bump": (one_gaussian_bump_field, None),
    "sine-perturbation": (sine_perturbation_field, None),
}


def parse_density_spec(spec: str) -> tuple[str, float | None]:
    """Split ``name`` or ``name:param`` into (name, optional float param)."""
    name, _, raw_param = spec.partition(":")
    name = name.strip()
    if name not in REGISTRY:
        known = ", ".join(sorted(REGISTRY))
        raise InvalidInputError(f"unknown density {name!r} (built-ins: {known})")
    if not raw_param:
        return name, None
    try:
        return name, float(raw_param)
    except ValueError as exc:
        raise InvalidInputError(f"bad density parameter {raw_param!r}") from exc


def make_density(spec: str, grid: PeriodicGrid, ratio: float | None = None) -> Density:
    """Build a named density: raw field, optional range shift, normalize.

    ``ratio`` overrides the registry default (two-bump pins max/min = 100
    unless told otherwise).
    """
    name, param = parse_density_spec(spec)
    builder, default_ratio = REGISTRY[name]
    raw = builder(grid, param)
    effective = default_ratio if ratio is None else ratio
    if effective is not None:
        raw = set_dynamic_range(raw, effective)
    return normalize(raw)
