"""Axis-aligned 2D grids over a metric extent, shared by rendering and planning.

Convention: `values[iy, ix]` covers the square with lower corner
(x0 + ix*cell, y0 + iy*cell); world coordinates map to cells by floor division.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Grid2D:
    x0: float
    y0: float
    cell: float
    values: np.ndarray  # (ny, nx)

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @staticmethod
    def from_bounds(bounds: tuple[float, float, float, float], cell: float, fill=0.0, dtype=np.float64) -> "Grid2D":
        if cell <= 0:
            raise ValueError("cell size must be positive")
        xmin, ymin, xmax, ymax = bounds
        nx = max(1, int(np.ceil((xmax - xmin) / cell - 1e-12)))
        ny = max(1, int(np.ceil((ymax - ymin) / cell - 1e-12)))
        return Grid2D(xmin, ymin, cell, np.full((ny, nx), fill, dtype=dtype))

    def like(self, fill=0.0, dtype=np.float64) -> "Grid2D":
        return Grid2D(self.x0, self.y0, self.cell, np.full(self.values.shape, fill, dtype=dtype))

    def cell_of(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        ix = np.floor((np.asarray(x) - self.x0) / self.cell).astype(np.int64)
        iy = np.floor((np.asarray(y) - self.y0) / self.cell).astype(np.int64)
        return ix, iy

    def center_of(self, ix, iy) -> tuple[np.ndarray, np.ndarray]:
        return (
            self.x0 + (np.asarray(ix) + 0.5) * self.cell,
            self.y0 + (np.asarray(iy) + 0.5) * self.cell,
        )

    def in_bounds(self, ix, iy) -> np.ndarray:
        ix = np.asarray(ix)
        iy = np.asarray(iy)
        return (ix >= 0) & (ix < self.nx) & (iy >= 0) & (iy < self.ny)
