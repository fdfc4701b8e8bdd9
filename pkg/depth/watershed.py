"""
Saddle heights and critical depth by a union-find watershed sweep.

Cells are inserted in ascending order of f (ties broken by flat index);
adjacent inserted cells are merged. The cell whose insertion first joins
the basins of two minima is their communicating saddle and its value is
the saddle height (the minimax level over grid paths).
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings

from annealab.exceptions import DegenerateInputError, InvalidInputError
from .grid import GridField

logger = logging.getLogger(__name__)


# ============================================================================
# UNION-FIND
# ============================================================================

class UnionFind:
    """Disjoint sets over 0..n-1 with path halving and union by rank."""
    __slots__ = ('parent', 'rank')

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, v: int) -> int:
        parent = self.parent
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    def union(self, a: int, b: int) -> int:
        """Merge the sets rooted at a and b; returns the surviving root."""
        if self.rank[a] < self.rank[b]:
            a, b = b, a
        self.parent[b] = a
        if self.rank[a] == self.rank[b]:
            self.rank[a] += 1
        return a


# ============================================================================
# LOCAL MINIMA
# ============================================================================

@dataclass(frozen=True)
class GridPoint:
    """A grid cell: flat index, centre coordinates and value."""
    index: int
    x: Tuple[float, ...]
    value: float

    def to_dict(self) -> dict:
        return {'x': list(self.x), 'f': self.value}


def _pad(mask: np.ndarray, axis: int, at_start: bool, fill: bool) -> np.ndarray:
    shape = list(mask.shape)
    shape[axis] = 1
    edge = np.full(shape, fill, dtype=bool)
    return np.concatenate([edge, mask] if at_start else [mask, edge], axis=axis)


def scan_minima(g: GridField) -> Tuple[List[GridPoint], List[str]]:
    """Strict local minima over the 2d-neighbourhood, plus plateau warnings."""
    f = g.field()
    strict = np.ones(f.shape, dtype=bool)
    weak = np.ones(f.shape, dtype=bool)
    for axis in range(g.dim):
        d = np.diff(f, axis=axis)
        # right neighbour f[i+1]; missing at the last cell
        strict &= _pad(d > 0, axis, at_start=False, fill=True)
        weak &= _pad(d >= 0, axis, at_start=False, fill=True)
        # left neighbour f[i-1]; missing at the first cell
        strict &= _pad(d < 0, axis, at_start=True, fill=True)
        weak &= _pad(d <= 0, axis, at_start=True, fill=True)

    warnings = []
    plateau = weak & ~strict
    if np.any(plateau):
        msg = f"{int(plateau.sum())} plateau cells (equal adjacent values) excluded from minima"
        logger.warning(msg)
        warnings.append(msg)

    flat = np.flatnonzero(strict.reshape(-1))
    values = g.values[flat]
    order = np.lexsort((flat, values))
    minima = [GridPoint(int(flat[i]), g.point(int(flat[i])), float(values[i])) for i in order]
    return minima, warnings


def find_local_minima(g: GridField) -> List[GridPoint]:
    """Grid local minima sorted ascending by value."""
    return scan_minima(g)[0]


# ============================================================================
# SWEEP
# ============================================================================

class WatershedSweep:
    """Ascending union-find sweep building the minima merge tree."""

    def __init__(self, g: GridField, minima: List[GridPoint]):
        self.grid = g
        self.minima = minima
        n = len(minima)
        self.heights = np.full((n, n), np.nan)
        self.saddles: List[List[Optional[int]]] = [[None] * n for _ in range(n)]
        for i, m in enumerate(minima):
            self.heights[i, i] = m.value
            self.saddles[i][i] = m.index

    def run(self, pair: Optional[Tuple[int, int]] = None) -> 'WatershedSweep':
        """Sweep until every minimum (or just the given pair) shares one basin."""
        g = self.grid
        values = g.values
        neighbors = g.neighbor_table()
        label_of = {m.index: i for i, m in enumerate(self.minima)}
        basins: Dict[int, List[int]] = {}
        uf = UnionFind(g.size)
        active = bytearray(g.size)
        total = len(self.minima)
        order = np.argsort(values, kind='stable').tolist()

        for cell in order:
            active[cell] = 1
            if cell in label_of:
                basins[cell] = [label_of[cell]]
            level = float(values[cell])
            for nb in neighbors[cell]:
                if not active[nb]:
                    continue
                ra, rb = uf.find(cell), uf.find(nb)
                if ra == rb:
                    continue
                left, right = basins.pop(ra, []), basins.pop(rb, [])
                for i in left:
                    for j in right:
                        self.heights[i, j] = self.heights[j, i] = level
                        self.saddles[i][j] = self.saddles[j][i] = cell
                root = uf.union(ra, rb)
                merged = left + right
                if merged:
                    basins[root] = merged
                if pair is not None and not np.isnan(self.heights[pair]):
                    return self
                if len(merged) == total:
                    return self
        return self


def saddle_height(g: GridField, i: int, j: int, minima: Optional[List[GridPoint]] = None) -> float:
    """Minimax grid-path level between minima i and j (indices into find_local_minima)."""
    if minima is None:
        minima = find_local_minima(g)
    n = len(minima)
    if not (0 <= i < n and 0 <= j < n):
        raise InvalidInputError(f"minimum indices ({i}, {j}) out of range for {n} minima")
    if i == j:
        return minima[i].value
    sweep = WatershedSweep(g, minima).run(pair=(i, j))
    return float(sweep.heights[i, j])


# ============================================================================
# CRITICAL DEPTH
# ============================================================================

@dataclass
class DepthReport:
    """Minima, pairwise saddle heights and the critical depth of a grid field."""
    minima: List[GridPoint]
    saddle_heights: np.ndarray
    communicating_saddles: List[List[Optional[GridPoint]]]
    critical_depth: float
    dominating_index: int
    uniqueness_warnings: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def global_minimum(self) -> GridPoint:
        return self.minima[0]

    @property
    def dominating_minimum(self) -> GridPoint:
        return self.minima[self.dominating_index]

    def to_dict(self) -> dict:
        return {
            'minima': [m.to_dict() for m in self.minima],
            'saddle_heights': self.saddle_heights.tolist(),
            'communicating_saddles': [
                [s.to_dict() if s is not None else None for s in row]
                for row in self.communicating_saddles
            ],
            'critical_depth': self.critical_depth,
            'dominating_index': self.dominating_index,
            'warnings': self.uniqueness_warnings + self.warnings,
        }


def _grid_hessian(g: GridField, flat: int) -> Optional[np.ndarray]:
    """Second differences of the cell values; None on the boundary."""
    idx = np.array(g.unravel(flat))
    if any(i == 0 or i == n - 1 for i, n in zip(idx, g.shape)):
        return None
    f = g.field()
    h = g.cell_size
    hess = np.empty((g.dim, g.dim))
    for a in range(g.dim):
        e = np.zeros(g.dim, dtype=int)
        e[a] = 1
        hess[a, a] = (f[tuple(idx + e)] - 2.0 * f[tuple(idx)] + f[tuple(idx - e)]) / (h[a] * h[a])
        for b in range(a + 1, g.dim):
            u = np.zeros(g.dim, dtype=int)
            u[b] = 1
            mixed = (f[tuple(idx + e + u)] - f[tuple(idx + e - u)]
                     - f[tuple(idx - e + u)] + f[tuple(idx - e - u)]) / (4.0 * h[a] * h[b])
            hess[a, b] = hess[b, a] = mixed
    return hess


def _critical_point_warnings(g: GridField, minima: List[GridPoint], saddles) -> List[str]:
    """Index-one check at saddles and non-degeneracy at minima (1-D/2-D only)."""
    if g.dim > 2:
        return []
    out = []
    for i, m in enumerate(minima):
        hess = _grid_hessian(g, m.index)
        if hess is not None and np.linalg.eigvalsh(hess)[0] <= 0:
            out.append(f"minimum {i} at {m.x} is degenerate on the grid")
    seen = set()
    for i in range(len(minima)):
        for j in range(i + 1, len(minima)):
            s = saddles[i][j]
            if s is None or s.index in seen:
                continue
            seen.add(s.index)
            hess = _grid_hessian(g, s.index)
            if hess is None:
                out.append(f"saddle between minima {i} and {j} lies on the domain boundary")
                continue
            eig = np.linalg.eigvalsh(hess)
            if not (eig[0] < 0 and np.all(eig[1:] > 0)):
                out.append(f"saddle between minima {i} and {j} at {s.x} is not of index one")
    for msg in out:
        logger.warning(msg)
    return out


def critical_depth(g: GridField) -> DepthReport:
    """Full depth report: minima, saddle heights, E* and the dominating well."""
    minima, warnings = scan_minima(g)
    if not minima:
        raise DegenerateInputError("no strict local minima on the grid (all-plateau field)")
    tol = getattr(settings, 'DEPTH_TIE_TOLERANCE', 1e-9)

    sweep = WatershedSweep(g, minima).run()
    saddles = [
        [GridPoint(c, g.point(c), float(g.values[c])) if c is not None else None for c in row]
        for row in sweep.saddles
    ]

    uniqueness = []
    n = len(minima)
    if n >= 2 and minima[1].value - minima[0].value <= tol:
        uniqueness.append(
            f"global minimum is not unique: f(m_1)={minima[0].value:.12g}, f(m_2)={minima[1].value:.12g}"
        )

    depth, dominating = 0.0, 0
    if n >= 2:
        barriers = sweep.heights[1:, 0] - np.array([m.value for m in minima[1:]])
        dominating = int(np.argmax(barriers)) + 1
        depth = float(barriers[dominating - 1])
        ranked = np.sort(barriers)[::-1]
        if len(ranked) >= 2 and ranked[0] - ranked[1] <= tol:
            uniqueness.append(f"dominating barrier is not unique: {ranked[0]:.12g} vs {ranked[1]:.12g}")
    for msg in uniqueness:
        logger.warning(msg)

    warnings += _critical_point_warnings(g, minima, saddles)
    logger.info("critical depth %.6g over %d minima (dominating index %d)", depth, n, dominating)
    return DepthReport(
        minima=minima,
        saddle_heights=sweep.heights,
        communicating_saddles=saddles,
        critical_depth=depth,
        dominating_index=dominating,
        uniqueness_warnings=uniqueness,
        warnings=warnings,
    )
