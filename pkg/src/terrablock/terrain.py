"""Finite-difference terrain derivatives on elevation grids.

Gradients use central differences over ``2 * cell_size`` in the interior and
one-sided differences over ``cell_size`` along the first and last column/row.
Corner cells are one-sided on both axes.  Nodata propagates through the
arithmetic: an output cell is nodata exactly when some cell of its stencil is
nodata.  The interior stencil does not include the center cell, so a lone
nodata cell still gets a gradient of its own.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import Grid


@dataclass(frozen=True)
class TerrainDerivatives:
    grad_x: Grid
    grad_y: Grid
    slope: Grid
    aspect: Grid


def gradient(dem: Grid) -> tuple[Grid, Grid]:
    """Per-cell elevation gradient ``(d/dx, d/dy)``.

    Requires at least 2 columns and 2 rows so every cell has a usable
    difference stencil.
    """
    if dem.nrows < 2 or dem.ncols < 2:
        raise ValueError(f"gradient needs at least a 2x2 grid, got {dem.nrows}x{dem.ncols}")
    v = dem.values
    d = dem.cell_size

    gx = np.empty_like(v)
    gx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * d)
    gx[:, 0] = (v[:, 1] - v[:, 0]) / d
    gx[:, -1] = (v[:, -1] - v[:, -2]) / d

    # row 0 is the southernmost row, so +row is +y and no sign flip is needed
    gy = np.empty_like(v)
    gy[1:-1, :] = (v[2:, :] - v[:-2, :]) / (2.0 * d)
    gy[0, :] = (v[1, :] - v[0, :]) / d
    gy[-1, :] = (v[-1, :] - v[-2, :]) / d

    return dem.with_values(gx), dem.with_values(gy)


def slope_magnitude(grad_x: Grid, grad_y: Grid) -> Grid:
    """Euclidean slope ``sqrt(gx^2 + gy^2)``, unitless rise/run."""
    if not grad_x.congruent(grad_y):
        raise ValueError("gradient grids are not congruent")
    return grad_x.with_values(np.hypot(grad_x.values, grad_y.values))


def aspect(grad_x: Grid, grad_y: Grid) -> Grid:
    """Downslope direction ``atan2(-gy, gx)`` in radians, range (-pi, pi].

    Flat cells (both gradients exactly zero) have no defined direction and
    come out nodata.
    """
    if not grad_x.congruent(grad_y):
        raise ValueError("gradient grids are not congruent")
    gx = grad_x.values
    gy = grad_y.values
    theta = np.arctan2(-gy, gx)
    theta[theta == -np.pi] = np.pi
    flat = (gx == 0.0) & (gy == 0.0)
    theta[flat] = np.nan
    return grad_x.with_values(theta)


def derive_all(dem: Grid) -> TerrainDerivatives:
    gx, gy = gradient(dem)
    return TerrainDerivatives(
        grad_x=gx,
        grad_y=gy,
        slope=slope_magnitude(gx, gy),
        aspect=aspect(gx, gy),
    )
