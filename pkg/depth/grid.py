"""
Rectangular-grid discretization of a landscape.

Values are stored at cell centres in row-major (C) order; the grid is
the common carrier of the watershed, quadrature and Gibbs-sampling engines.
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from django.conf import settings

from annealab.exceptions import InvalidInputError, ResourceError, UnsupportedError
from landscapes.catalog import Landscape

logger = logging.getLogger(__name__)

MAX_GRID_DIM = 3


@dataclass(frozen=True, eq=False)
class GridField:
    """f sampled at the centres of a regular grid over a box."""
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    shape: Tuple[int, ...]
    values: np.ndarray

    def __post_init__(self):
        if not (len(self.lo) == len(self.hi) == len(self.shape)):
            raise InvalidInputError("bounds and shape must have one entry per axis")
        if any(n < 3 for n in self.shape):
            raise InvalidInputError(f"every axis needs at least 3 cells, got shape {self.shape}")
        if self.values.ndim != 1 or self.values.size != int(np.prod(self.shape)):
            raise InvalidInputError("values must be a flat array with prod(shape) entries")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("grid values must be finite")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def bounds(self) -> List[Tuple[float, float]]:
        return list(zip(self.lo, self.hi))

    @cached_property
    def cell_size(self) -> Tuple[float, ...]:
        return tuple((hi - lo) / n for lo, hi, n in zip(self.lo, self.hi, self.shape))

    @cached_property
    def strides(self) -> Tuple[int, ...]:
        """Flat-index offset of one step along each axis."""
        out, step = [], 1
        for n in reversed(self.shape):
            out.append(step)
            step *= n
        return tuple(reversed(out))

    def centers(self, axis: int) -> np.ndarray:
        lo, h, n = self.lo[axis], self.cell_size[axis], self.shape[axis]
        return lo + (np.arange(n) + 0.5) * h

    def field(self) -> np.ndarray:
        return self.values.reshape(self.shape)

    def unravel(self, flat: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def point(self, flat: int) -> Tuple[float, ...]:
        idx = self.unravel(flat)
        return tuple(float(self.lo[a] + (idx[a] + 0.5) * self.cell_size[a]) for a in range(self.dim))

    def neighbor_table(self) -> List[List[int]]:
        """Axis-adjacent (2d-neighbourhood) flat indices of every cell."""
        coords = np.unravel_index(np.arange(self.size), self.shape)
        table = [[] for _ in range(self.size)]
        for axis, (n, stride) in enumerate(zip(self.shape, self.strides)):
            c = coords[axis]
            for flat in np.nonzero(c > 0)[0].tolist():
                table[flat].append(flat - stride)
            for flat in np.nonzero(c < n - 1)[0].tolist():
                table[flat].append(flat + stride)
        return table


def discretize(land: Landscape, shape: Union[int, Sequence[int]],
               cell_budget: Optional[int] = None) -> GridField:
    """Evaluate the landscape at every cell centre of a grid over its domain box."""
    if land.dim > MAX_GRID_DIM:
        raise UnsupportedError(f"grids are limited to dimension {MAX_GRID_DIM}, got {land.dim}")
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape),) * land.dim
    shape = tuple(int(n) for n in shape)
    if len(shape) != land.dim:
        raise InvalidInputError(f"shape {shape} does not match dimension {land.dim}")
    if any(n < 3 for n in shape):
        raise InvalidInputError(f"every axis needs at least 3 cells, got shape {shape}")
    budget = cell_budget or getattr(settings, 'DEPTH_CELL_BUDGET', 10 ** 8)
    cells = int(np.prod(shape, dtype=object))
    if cells > budget:
        raise ResourceError(f"grid of {cells} cells exceeds the budget of {budget}")

    axes = [
        lo + (np.arange(n) + 0.5) * ((hi - lo) / n)
        for lo, hi, n in zip(land.lo, land.hi, shape)
    ]
    mesh = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
    values = np.ascontiguousarray(land.values(mesh), dtype=float).reshape(-1)
    logger.debug("discretized %s on %s cells", land.name, shape)
    return GridField(lo=tuple(land.lo), hi=tuple(land.hi), shape=shape, values=values)
