"""Spectral Poisson solver on the periodic grid.

The discrete Laplacian is the exact Fourier symbol -|k|^2, which makes the
solver, the spectral gradient, and the spectral Laplacian mutually
consistent.  Sources are projected onto the solvable subspace by removing
their mean (the k = 0 mode); solutions are returned with zero mean.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GridMismatchError, InvalidInputError
from .grid import PeriodicGrid, ScalarField, _deriv_wavenumbers

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PoissonWorkspace:
    """Precomputed inverse symbol -1/|k|^2 (zero at k = 0) for one grid.

    The symbol table is read-only and may be shared across threads; the FFT
    calls allocate their own work arrays, so a workspace instance itself has
    no mutable state to protect.
    """

    grid: PeriodicGrid
    inv_symbol: np.ndarray = field(init=False, compare=False, repr=False)
    deriv_kx: np.ndarray = field(init=False, compare=False, repr=False)
    deriv_ky: np.ndarray = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        kx = np.fft.fftfreq(self.grid.n_x, d=self.grid.h_x) * TWO_PI
        ky = np.fft.fftfreq(self.grid.n_y, d=self.grid.h_y) * TWO_PI
        k2 = kx[:, None] ** 2 + ky[None, :] ** 2
        inv = np.zeros_like(k2)
        nz = k2 > 0.0
        inv[nz] = -1.0 / k2[nz]
        inv.setflags(write=False)
        object.__setattr__(self, "inv_symbol", inv)
        dkx, dky = _deriv_wavenumbers(self.grid)
        dkx.setflags(write=False)
        dky.setflags(write=False)
        object.__setattr__(self, "deriv_kx", dkx)
        object.__setattr__(self, "deriv_ky", dky)


def solve_poisson(ws: PoissonWorkspace, s: ScalarField) -> ScalarField:
    """Zero-mean f with (spectral) Laplacian f = s - mean(s)."""
    if s.grid != ws.grid:
        raise GridMismatchError("source grid does not match workspace")
    f_hat = np.fft.fft2(s.values) * ws.inv_symbol  # symbol is 0 at k=0: mean removed
    return ScalarField(ws.grid, np.fft.ifft2(f_hat).real)


def laplacian_spectral(f: ScalarField) -> ScalarField:
    """Exact-symbol Laplacian, the inverse of :func:`solve_poisson` on
    zero-mean fields."""
    kx = np.fft.fftfreq(f.grid.n_x, d=f.grid.h_x) * TWO_PI
    ky = np.fft.fftfreq(f.grid.n_y, d=f.grid.h_y) * TWO_PI
    k2 = kx[:, None] ** 2 + ky[None, :] ** 2
    return ScalarField(f.grid, -np.fft.ifft2(k2 * np.fft.fft2(f.values)).real)


def _solve_gradient(ws: PoissonWorkspace, s_values: np.ndarray):
    """Fused solve + gradient for the transport loop.

    Returns (f, v_x, v_y) as raw arrays, computed from a single forward
    transform of the source.
    """
    if not np.all(np.isfinite(s_values)):
        raise InvalidInputError("source values must be finite")
    f_hat = np.fft.fft2(s_values) * ws.inv_symbol
    f = np.fft.ifft2(f_hat).real
    v_x = np.fft.ifft2(1j * ws.deriv_kx[:, None] * f_hat).real
    v_y = np.fft.ifft2(1j * ws.deriv_ky[None, :] * f_hat).real
    return f, v_x, v_y
