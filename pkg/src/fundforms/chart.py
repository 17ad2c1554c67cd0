"""Rectangular parameter charts with uniform grids.

A chart is the discrete stand-in for a simply-connected d-dimensional
coordinate patch: a box [a_1,b_1] x ... x [a_d,b_d] sampled on a uniform
tensor grid.  Every field in this package lives on such a chart; the
codimension k records the rank of the normal bundle of the immersions the
chart is meant to carry.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeMismatchError


@dataclass(frozen=True)
class Chart:
    """Uniform grid on a rectangular box in R^d.

    Parameters
    ----------
    dim_d : intrinsic dimension d >= 2.
    codim_k : codimension k >= 1 of the target immersions.
    extent : per-axis intervals ((a_1, b_1), ..., (a_d, b_d)).
    resolution : per-axis point counts, each >= 3.
    """

    dim_d: int
    codim_k: int
    extent: tuple
    resolution: tuple

    def __post_init__(self):
        object.__setattr__(self, "extent", tuple((float(a), float(b)) for a, b in self.extent))
        object.__setattr__(self, "resolution", tuple(int(n) for n in self.resolution))
        if self.dim_d < 2:
            raise ValueError(f"dim_d must be >= 2, got {self.dim_d}")
        if self.codim_k < 1:
            raise ValueError(f"codim_k must be >= 1, got {self.codim_k}")
        if len(self.extent) != self.dim_d or len(self.resolution) != self.dim_d:
            raise ShapeMismatchError("extent/resolution must have one entry per axis")
        for (a, b), n in zip(self.extent, self.resolution):
            if n < 3:
                raise ValueError(f"resolution must be >= 3 per axis (central differences), got {n}")
            if not b > a:
                raise ValueError(f"empty interval [{a}, {b}]")

    @property
    def ambient_dim(self) -> int:
        return self.dim_d + self.codim_k

    @property
    def shape(self) -> tuple:
        return self.resolution

    @property
    def spacing(self) -> tuple:
        return tuple((b - a) / (n - 1) for (a, b), n in zip(self.extent, self.resolution))

    def axis_coords(self, axis: int) -> np.ndarray:
        a, b = self.extent[axis]
        return np.linspace(a, b, self.resolution[axis])

    def meshgrid(self) -> list:
        """Coordinate arrays X_1, ..., X_d of shape ``self.shape`` ('ij' indexing)."""
        return list(np.meshgrid(*(self.axis_coords(i) for i in range(self.dim_d)), indexing="ij"))

    def trapezoid_weights(self) -> np.ndarray:
        """Product trapezoid quadrature weights (without the cell volume factor)."""
        w = np.ones(self.shape)
        for ax, n in enumerate(self.resolution):
            w1 = np.ones(n)
            w1[0] = w1[-1] = 0.5
            shape = [1] * self.dim_d
            shape[ax] = n
            w = w * w1.reshape(shape)
        return w

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def corner_index(self) -> tuple:
        """Lowest-index grid corner, the default base point of path integrals."""
        return (0,) * self.dim_d
