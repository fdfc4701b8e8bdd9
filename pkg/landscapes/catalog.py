"""
Objective functions with exact gradients and the built-in landscape catalog.

All objectives are vectorized: they accept points of shape (..., d) and
return values of shape (...) and gradients of shape (..., d).
"""
import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from django.conf import settings

from annealab.exceptions import InvalidInputError, ResourceError

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], np.ndarray]


# ============================================================================
# LANDSCAPE
# ============================================================================

@dataclass(frozen=True)
class Landscape:
    """An objective f on R^d with its gradient and a domain box."""
    name: str
    dim: int
    func: Objective
    gradient: Objective
    lo: Tuple[float, ...]
    hi: Tuple[float, ...]
    params: Dict[str, float] = field(default_factory=dict)
    known_minima: Optional[List[Tuple[float, ...]]] = None
    analytic_depth: Optional[float] = None
    analytic_lipschitz: Optional[float] = None
    shift: float = 0.0

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInputError(f"dimension must be positive, got {self.dim}")
        if len(self.lo) != self.dim or len(self.hi) != self.dim:
            raise InvalidInputError("domain box must have one interval per axis")
        for lo, hi in zip(self.lo, self.hi):
            if not lo < hi:
                raise InvalidInputError(f"empty domain interval [{lo}, {hi}]")

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((x >= self.lo) & (x <= self.hi)))

    def _point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape == () and self.dim == 1:
            x = x.reshape(1)
        if x.shape[-1:] != (self.dim,):
            raise InvalidInputError(f"expected a point of dimension {self.dim}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InvalidInputError(f"non-finite point {x!r}")
        return x

    def eval(self, x) -> float:
        """f(x) for a single point."""
        return float(self.func(self._point(x)) - self.shift)

    def grad(self, x) -> np.ndarray:
        """Analytic gradient at a single point."""
        return np.asarray(self.gradient(self._point(x)), dtype=float)

    def values(self, points: np.ndarray) -> np.ndarray:
        """Unchecked batch evaluation used by the grid and chain engines."""
        return self.func(points) - self.shift

    def normalize(self, resolution: int) -> 'Landscape':
        """Shift f so that its minimum over the cell-centred grid is 0."""
        if resolution < 2:
            raise InvalidInputError(f"resolution must be at least 2, got {resolution}")
        budget = getattr(settings, 'DEPTH_CELL_BUDGET', 10 ** 8)
        if resolution ** self.dim > budget:
            raise ResourceError(f"{resolution}^{self.dim} cells exceed the budget of {budget}")
        axes = [
            lo + (np.arange(resolution) + 0.5) * ((hi - lo) / resolution)
            for lo, hi in zip(self.lo, self.hi)
        ]
        mesh = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1)
        grid_min = float(np.min(self.values(mesh)))
        logger.debug("normalize %s: grid minimum %.17g at resolution %d", self.name, grid_min, resolution)
        return dataclasses.replace(self, shift=self.shift + grid_min)


# ============================================================================
# CATALOG OBJECTIVES
# ============================================================================

def _quadratic(x):
    return 0.5 * np.sum(x * x, axis=-1)


def _quadratic_grad(x):
    return np.array(x, dtype=float, copy=True)


def _flat(x):
    return np.zeros(np.shape(x)[:-1])


def _flat_grad(x):
    return np.zeros(np.shape(x))


def _linear(x, slope=1.0):
    return slope * np.sum(x, axis=-1)


def _linear_grad(x, slope=1.0):
    return np.full(np.shape(x), slope, dtype=float)


class _Polynomial1D:
    """Picklable 1-D polynomial objective (coefficients, highest power first)."""

    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.deriv = np.polyder(self.coeffs)

    def __call__(self, x):
        return np.polyval(self.coeffs, x[..., 0])

    def gradient(self, x):
        return np.polyval(self.deriv, x)


class _TiltedWell2D:
    """(x^2 - 1)^2 + a x + y^2 / 2."""

    def __init__(self, a):
        self.a = a

    def __call__(self, p):
        x, y = p[..., 0], p[..., 1]
        return (x * x - 1.0) ** 2 + self.a * x + 0.5 * y * y

    def gradient(self, p):
        x, y = p[..., 0], p[..., 1]
        return np.stack([4.0 * x * x * x - 4.0 * x + self.a, y], axis=-1)


def _polynomial_structure(coeffs) -> Tuple[List[float], float]:
    """Local minima and critical depth of a 1-D polynomial, from its critical points."""
    p = np.asarray(coeffs, dtype=float)
    dp, ddp = np.polyder(p), np.polyder(p, 2)
    roots = np.roots(dp)
    crit = np.sort(roots[np.abs(roots.imag) < 1e-9].real)
    minima = [c for c in crit if np.polyval(ddp, c) > 0]
    maxima = [c for c in crit if np.polyval(ddp, c) < 0]
    if not minima:
        return [], 0.0
    values = [np.polyval(p, m) for m in minima]
    glob = minima[int(np.argmin(values))]
    depth = 0.0
    for m, fm in zip(minima, values):
        if m == glob:
            continue
        lo, hi = min(m, glob), max(m, glob)
        barrier = max(np.polyval(p, s) for s in maxima if lo < s < hi)
        depth = max(depth, barrier - fm)
    return [float(m) for m in minima], float(depth)


def quadratic(dim: int = 1, half_width: float = 10.0) -> Landscape:
    """f(x) = |x|^2 / 2 on [-half_width, half_width]^d."""
    dim = int(dim)
    return Landscape(
        name='quadratic',
        dim=dim,
        func=_quadratic,
        gradient=_quadratic_grad,
        lo=(-float(half_width),) * dim,
        hi=(float(half_width),) * dim,
        params={'dim': dim, 'half_width': float(half_width)},
        known_minima=[(0.0,) * dim],
        analytic_depth=0.0,
        analytic_lipschitz=1.0,
    )


def double_well(a: float = 0.2, half_width: float = 2.0) -> Landscape:
    """Tilted double well f(x) = (x^2 - 1)^2 + a x."""
    a = float(a)
    if not 0.0 <= a <= 0.5:
        raise InvalidInputError(f"double_well tilt must lie in [0, 0.5], got {a}")
    poly = _Polynomial1D([1.0, 0.0, -2.0, a, 1.0])
    minima, depth = _polynomial_structure(poly.coeffs)
    return Landscape(
        name='double_well',
        dim=1,
        func=poly,
        gradient=poly.gradient,
        lo=(-float(half_width),),
        hi=(float(half_width),),
        params={'a': a, 'half_width': float(half_width)},
        known_minima=[(m,) for m in minima],
        analytic_depth=depth,
        analytic_lipschitz=12.0 * half_width ** 2 - 4.0,
    )


def triple_well(scale: float = 0.5, tilt: float = 0.2, half_width: float = 3.0) -> Landscape:
    """scale * (x^6/6 - 5x^4/4 + 2x^2) + tilt * x: minima near -2, 0 and 2 at distinct depths."""
    scale, tilt = float(scale), float(tilt)
    poly = _Polynomial1D([scale / 6.0, 0.0, -1.25 * scale, 0.0, 2.0 * scale, tilt, 0.0])
    minima, depth = _polynomial_structure(poly.coeffs)
    if len(minima) != 3:
        raise InvalidInputError(f"triple_well(scale={scale}, tilt={tilt}) has {len(minima)} minima")
    second = np.polyder(poly.coeffs, 2)
    lipschitz = float(np.max(np.abs(np.polyval(second, np.linspace(-half_width, half_width, 4001)))))
    return Landscape(
        name='triple_well',
        dim=1,
        func=poly,
        gradient=poly.gradient,
        lo=(-float(half_width),),
        hi=(float(half_width),),
        params={'scale': scale, 'tilt': tilt, 'half_width': float(half_width)},
        known_minima=[(m,) for m in minima],
        analytic_depth=depth,
        analytic_lipschitz=lipschitz,
    )


def double_well_2d(a: float = 0.2, half_width: float = 2.0, y_half_width: float = 2.5) -> Landscape:
    """f(x, y) = (x^2 - 1)^2 + a x + y^2 / 2; same barriers as the 1-D well."""
    a = float(a)
    well = _TiltedWell2D(a)
    minima, depth = _polynomial_structure([1.0, 0.0, -2.0, a, 1.0])
    return Landscape(
        name='double_well_2d',
        dim=2,
        func=well,
        gradient=well.gradient,
        lo=(-float(half_width), -float(y_half_width)),
        hi=(float(half_width), float(y_half_width)),
        params={'a': a, 'half_width': float(half_width), 'y_half_width': float(y_half_width)},
        known_minima=[(m, 0.0) for m in minima],
        analytic_depth=depth,
        analytic_lipschitz=12.0 * half_width ** 2 - 4.0,
    )


def flat(dim: int = 1, half_width: float = 10.0) -> Landscape:
    """f = 0 everywhere: pure Brownian motion under the chain engines."""
    dim = int(dim)
    return Landscape(
        name='flat', dim=dim, func=_flat, gradient=_flat_grad,
        lo=(-float(half_width),) * dim, hi=(float(half_width),) * dim,
        params={'dim': dim}, analytic_lipschitz=0.0,
    )


def linear(dim: int = 1, half_width: float = 100.0) -> Landscape:
    """f(x) = sum(x); violates the growth assumption."""
    dim = int(dim)
    return Landscape(
        name='linear', dim=dim, func=_linear, gradient=_linear_grad,
        lo=(-float(half_width),) * dim, hi=(float(half_width),) * dim,
        params={'dim': dim}, analytic_lipschitz=0.0,
    )


CATALOG = {
    'quadratic': quadratic,
    'double_well': double_well,
    'triple_well': triple_well,
    'double_well_2d': double_well_2d,
}


def catalog_ids() -> List[str]:
    return sorted(CATALOG)


def get_landscape(landscape_id: str, params: Optional[dict] = None, normalize: bool = True,
                  resolution: Optional[int] = None) -> Landscape:
    """Build a catalog landscape by id, normalized by default."""
    try:
        factory = CATALOG[landscape_id]
    except KeyError:
        raise InvalidInputError(
            f"unknown landscape '{landscape_id}'; catalog: {', '.join(catalog_ids())}"
        ) from None
    try:
        land = factory(**(params or {}))
    except TypeError as exc:
        raise InvalidInputError(f"bad parameters for {landscape_id}: {exc}") from None
    if normalize:
        if resolution is None:
            resolution = getattr(settings, 'NORMALIZE_RESOLUTION', {}).get(land.dim, 128)
        land = land.normalize(resolution)
    return land
