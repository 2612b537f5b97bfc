"""Periodic grid container and the discrete calculus built on it.

Everything in this package lives on a uniform n_x-by-n_y grid over the
square [-pi, pi)^2 with opposite edges identified.  Fields are stored
row-major as ``values[i, j]`` = sample at node ``(-pi + i*h_x, -pi + j*h_y)``,
so axis 0 is x and axis 1 is y.  Maps are stored as periodic displacement
fields (the map is ``x -> wrap(x + d(x))``), which keeps the identity exact
and makes periodicity trivial.

Interpolation is periodic bilinear throughout; the order is a deliberate
constant of this package, not a knob.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, InvalidInputError

TWO_PI = 2.0 * np.pi


def wrap_angle(x: np.ndarray | float) -> np.ndarray | float:
    """Wrap arbitrary finite reals into [-pi, pi).

    Values already in range pass through bit-for-bit (the add-mod-subtract
    round trip would otherwise perturb them by an ulp, making wrapped and
    unwrapped code paths disagree).  ``np.mod`` can round up to exactly
    2*pi for tiny negative inputs, so that case is folded back too.
    """
    arr = np.asarray(x, dtype=np.float64)
    m = np.mod(arr + np.pi, TWO_PI)
    m = np.where(m >= TWO_PI, m - TWO_PI, m)
    return np.where((arr >= -np.pi) & (arr < np.pi), arr, m - np.pi)


def _wrap_shift(x: np.ndarray) -> np.ndarray:
    """Wrap values known to lie in (-3*pi, 3*pi) into [-pi, pi).

    One conditional shift per side; much cheaper than ``np.mod`` on large
    sample batches.  Callers must guarantee the bound.
    """
    out = np.where(x >= np.pi, x - TWO_PI, x)
    return np.where(out < -np.pi, out + TWO_PI, out)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, order="C", copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform discretization of the flat torus [-pi, pi)^2.

    Attributes:
        n_x, n_y: nodes per axis (>= 4).
        h_x, h_y: spacing 2*pi/n per axis.
        cell_volume: h_x * h_y.
        xs, ys: 1-D node coordinate arrays.
    """

    n_x: int
    n_y: int
    h_x: float = field(init=False, compare=False, repr=False)
    h_y: float = field(init=False, compare=False, repr=False)
    cell_volume: float = field(init=False, compare=False, repr=False)
    xs: np.ndarray = field(init=False, compare=False, repr=False)
    ys: np.ndarray = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.n_x < 4 or self.n_y < 4:
            raise InvalidInputError(f"grid must be at least 4x4, got {self.n_x}x{self.n_y}")
        h_x = TWO_PI / self.n_x
        h_y = TWO_PI / self.n_y
        object.__setattr__(self, "h_x", h_x)
        object.__setattr__(self, "h_y", h_y)
        object.__setattr__(self, "cell_volume", h_x * h_y)
        object.__setattr__(self, "xs", _freeze(-np.pi + np.arange(self.n_x) * h_x))
        object.__setattr__(self, "ys", _freeze(-np.pi + np.arange(self.n_y) * h_y))
        total = self.n_x * self.n_y * self.cell_volume
        if abs(total - 4.0 * np.pi**2) > 1e-12 * 4.0 * np.pi**2:
            raise InvalidInputError("grid does not tile the torus volume")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_x, self.n_y)

    def node_mesh(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinate arrays X, Y of shape (n_x, n_y)."""
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        return X, Y


@dataclass(frozen=True)
class ScalarField:
    """Grid sampling of a periodic real function."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != self.grid.shape:
            raise InvalidInputError(f"values shape {v.shape} != grid {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("field values must be finite")
        object.__setattr__(self, "values", _freeze(v))

    @classmethod
    def constant(cls, grid: PeriodicGrid, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn) -> "ScalarField":
        """Sample ``fn(X, Y)`` at the grid nodes."""
        X, Y = grid.node_mesh()
        return cls(grid, np.asarray(fn(X, Y), dtype=np.float64))


@dataclass(frozen=True)
class VectorField:
    """Pair of scalar components on one grid."""

    u_x: ScalarField
    u_y: ScalarField

    def __post_init__(self) -> None:
        if self.u_x.grid != self.u_y.grid:
            raise GridMismatchError("vector components live on different grids")

    @property
    def grid(self) -> PeriodicGrid:
        return self.u_x.grid

    @classmethod
    def from_arrays(cls, grid: PeriodicGrid, ux: np.ndarray, uy: np.ndarray) -> "VectorField":
        return cls(ScalarField(grid, ux), ScalarField(grid, uy))


# ---------------------------------------------------------------------------
# bilinear interpolation


class _Stencil:
    """Precomputed periodic bilinear indices and offsets for a point set.

    Building the stencil once and gathering several fields through it is the
    main cost saver in the transport loop and the sampler.  Gathers use the
    nested-lerp form ``v00 + f*(v10 - v00)``, which reproduces constants and
    nodal values exactly.
    """

    __slots__ = ("flat00", "flat10", "flat01", "flat11", "fx", "fy")

    def __init__(self, grid: PeriodicGrid, px: np.ndarray, py: np.ndarray,
                 already_wrapped: bool = False):
        if already_wrapped:
            xw = _wrap_shift(px)
            yw = _wrap_shift(py)
        else:
            xw = wrap_angle(px)
            yw = wrap_angle(py)
        ix, self.fx = _index_frac(xw, grid.xs, grid.h_x, grid.n_x)
        iy, self.fy = _index_frac(yw, grid.ys, grid.h_y, grid.n_y)
        n_y = grid.n_y
        iy1 = iy + 1
        iy1[iy1 == n_y] = 0
        base = ix * n_y
        base1 = base + n_y
        base1[base1 == grid.n_x * n_y] = 0
        self.flat00 = base + iy
        self.flat10 = base1 + iy
        self.flat01 = base + iy1
        self.flat11 = base1 + iy1

    def gather(self, values: np.ndarray) -> np.ndarray:
        flat = values.reshape(-1)
        lo = flat[self.flat00]
        lo += self.fx * (flat[self.flat10] - lo)
        hi = flat[self.flat01]
        hi += self.fx * (flat[self.flat11] - hi)
        lo += self.fy * (hi - lo)
        return lo


def _index_frac(c: np.ndarray, nodes: np.ndarray, h: float, n: int):
    """Lower node index and fractional offset for wrapped coordinates.

    The provisional index from division is corrected against the stored node
    coordinates so that a query at a node yields frac == 0 exactly; this is
    what makes interpolation nodally exact.
    """
    t = (c + np.pi) * (1.0 / h)
    i0 = t.astype(np.int64)  # t >= 0, so truncation == floor
    np.clip(i0, 0, n - 1, out=i0)
    i0 = np.where(c < nodes[i0], i0 - 1, i0)  # xs[0] == -pi, cannot underflow
    nxt = i0 + 1
    has_next = nxt < n
    upper = nodes[np.where(has_next, nxt, 0)]
    i0 = np.where(has_next & (c >= upper), nxt, i0)
    frac = (c - nodes[i0]) * (1.0 / h)
    np.clip(frac, 0.0, 1.0, out=frac)
    return i0, frac


def interp_scalar(field: ScalarField, points: np.ndarray) -> np.ndarray:
    """Periodic bilinear interpolation of ``field`` at arbitrary points.

    Parameters
    ----------
    field : ScalarField
    points : array of shape (N, 2) or (2,), any finite reals (wrapped mod 2*pi)

    Returns
    -------
    np.ndarray of N interpolated values.  Exact at grid nodes and exact on
    constant fields.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[-1] != 2:
        raise InvalidInputError("points must have two coordinates")
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("point coordinates must be finite")
    st = _Stencil(field.grid, np.ascontiguousarray(pts[:, 0]),
                  np.ascontiguousarray(pts[:, 1]))
    out = st.gather(field.values)
    return out[0] if single else out


def interp_vector(vf: VectorField, points: np.ndarray) -> np.ndarray:
    """Interpolate both components at once; returns shape (N, 2)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if not np.all(np.isfinite(pts)):
        raise InvalidInputError("point coordinates must be finite")
    st = _Stencil(vf.grid, np.ascontiguousarray(pts[:, 0]),
                  np.ascontiguousarray(pts[:, 1]))
    return np.stack([st.gather(vf.u_x.values), st.gather(vf.u_y.values)], axis=1)


# ---------------------------------------------------------------------------
# spectral calculus


def _deriv_wavenumbers(grid: PeriodicGrid) -> tuple[np.ndarray, np.ndarray]:
    """Integer wavenumbers per axis with the Nyquist mode's derivative zeroed.

    Zeroing the (unpaired) Nyquist mode keeps d/dx of a real field real.
    """
    kx = np.fft.fftfreq(grid.n_x, d=grid.h_x) * TWO_PI
    ky = np.fft.fftfreq(grid.n_y, d=grid.h_y) * TWO_PI
    if grid.n_x % 2 == 0:
        kx = kx.copy()
        kx[grid.n_x // 2] = 0.0
    if grid.n_y % 2 == 0:
        ky = ky.copy()
        ky[grid.n_y // 2] = 0.0
    return kx, ky


def gradient_spectral(f: ScalarField) -> VectorField:
    """Fourier-space gradient; exact for bandlimited fields."""
    kx, ky = _deriv_wavenumbers(f.grid)
    fh = np.fft.fft2(f.values)
    ux = np.fft.ifft2(1j * kx[:, None] * fh).real
    uy = np.fft.ifft2(1j * ky[None, :] * fh).real
    return VectorField.from_arrays(f.grid, ux, uy)


# ---------------------------------------------------------------------------
# diffeomorphisms


def _central_diff(values: np.ndarray, axis: int, spacing: float) -> np.ndarray:
    return (np.roll(values, -1, axis=axis) - np.roll(values, 1, axis=axis)) / (2.0 * spacing)


def _jacobian_det_arrays(grid: PeriodicGrid, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
    """det(I + Dd) from centered differences of the displacement."""
    a11 = 1.0 + _central_diff(dx, 0, grid.h_x)
    a12 = _central_diff(dx, 1, grid.h_y)
    a21 = _central_diff(dy, 0, grid.h_x)
    a22 = 1.0 + _central_diff(dy, 1, grid.h_y)
    return a11 * a22 - a12 * a21


@dataclass(frozen=True)
class DiffeoMap:
    """Torus diffeomorphism stored as a periodic displacement field.

    The map is ``x -> wrap(x + disp(x))``.  ``inv_disp``, when present, is
    the displacement of the inverse map; construction checks the round-trip
    ``phi^-1(phi(x)) ~= x`` to within 10 grid spacings.
    """

    grid: PeriodicGrid
    disp: VectorField
    inv_disp: VectorField | None = None

    def __post_init__(self) -> None:
        if self.disp.grid != self.grid:
            raise GridMismatchError("displacement grid mismatch")
        dx = self.disp.u_x.values
        dy = self.disp.u_y.values
        if max(np.abs(dx).max(), np.abs(dy).max()) > TWO_PI:
            raise InvalidInputError("displacement exceeds one period")
        det = _jacobian_det_arrays(self.grid, dx, dy)
        if det.min() <= 0.0:
            raise InvalidInputError(
                f"map is not orientation preserving (min det {det.min():.3e})"
            )
        if self.inv_disp is not None:
            if self.inv_disp.grid != self.grid:
                raise GridMismatchError("inverse displacement grid mismatch")
            err = self._round_trip_error()
            bound = 10.0 * max(self.grid.h_x, self.grid.h_y)
            if err > bound:
                raise InvalidInputError(
                    f"inverse is inconsistent: round-trip error {err:.3e} > {bound:.3e}"
                )

    def _round_trip_error(self) -> float:
        X, Y = self.grid.node_mesh()
        fx = X + self.disp.u_x.values
        fy = Y + self.disp.u_y.values
        st = _Stencil(self.grid, fx.reshape(-1), fy.reshape(-1))
        bx = fx.reshape(-1) + st.gather(self.inv_disp.u_x.values) - X.reshape(-1)
        by = fy.reshape(-1) + st.gather(self.inv_disp.u_y.values) - Y.reshape(-1)
        return float(np.hypot(wrap_angle(bx), wrap_angle(by)).max())

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Evaluate the map at points; result wrapped into [-pi, pi)."""
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        moved = pts + interp_vector(self.disp, pts)
        return wrap_angle(moved)


def identity_map(grid: PeriodicGrid, with_inverse: bool = True) -> DiffeoMap:
    zero = ScalarField.constant(grid, 0.0)
    disp = VectorField(zero, zero)
    return DiffeoMap(grid, disp, disp if with_inverse else None)


def jacobian_det(mapping: DiffeoMap) -> ScalarField:
    """Jacobian determinant of the map, second-order accurate."""
    det = _jacobian_det_arrays(mapping.grid, mapping.disp.u_x.values,
                               mapping.disp.u_y.values)
    return ScalarField(mapping.grid, det)


def _compose_disp_arrays(grid: PeriodicGrid,
                         outer_x: np.ndarray, outer_y: np.ndarray,
                         inner_x: np.ndarray, inner_y: np.ndarray):
    """Displacement of outer-after-inner: d(x) = d_in(x) + d_out(x + d_in(x))."""
    X, Y = grid.node_mesh()
    px = (X + inner_x).reshape(-1)
    py = (Y + inner_y).reshape(-1)
    st = _Stencil(grid, px, py)
    cx = inner_x + st.gather(outer_x).reshape(grid.shape)
    cy = inner_y + st.gather(outer_y).reshape(grid.shape)
    return cx, cy


def compose(outer: DiffeoMap, inner: DiffeoMap) -> DiffeoMap:
    """Composition ``outer o inner`` (inner applied first).

    The outer displacement is evaluated at the inner map's image by periodic
    bilinear interpolation.  If both maps carry inverses, the composed
    inverse is ``inner^-1 o outer^-1``.
    """
    if outer.grid != inner.grid:
        raise GridMismatchError("cannot compose maps on different grids")
    grid = outer.grid
    cx, cy = _compose_disp_arrays(
        grid,
        outer.disp.u_x.values, outer.disp.u_y.values,
        inner.disp.u_x.values, inner.disp.u_y.values,
    )
    inv = None
    if outer.inv_disp is not None and inner.inv_disp is not None:
        ix, iy = _compose_disp_arrays(
            grid,
            inner.inv_disp.u_x.values, inner.inv_disp.u_y.values,
            outer.inv_disp.u_x.values, outer.inv_disp.u_y.values,
        )
        inv = VectorField.from_arrays(grid, ix, iy)
    return DiffeoMap(grid, VectorField.from_arrays(grid, cx, cy), inv)
