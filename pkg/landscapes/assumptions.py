"""
Numerical checkers for the standing assumptions on an objective:
quadratic growth at infinity, a lower bound on the Hessian and a
globally Lipschitz gradient.
"""
import logging
from dataclasses import dataclass, field, asdict
from typing import List

import numpy as np
from django.conf import settings
from scipy.spatial.distance import pdist

from annealab.exceptions import DomainExceededError, InvalidInputError
from .catalog import Landscape

logger = logging.getLogger(__name__)


@dataclass
class AssumptionReport:
    """Outcome of the growth / Hessian / Lipschitz checks."""
    growth_ratio_min: float
    growth_ok: bool
    hessian_lower_bound: float
    hessian_lower_bound_ok: bool
    lipschitz_estimate: float
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def _fd_step(x: np.ndarray, base: float) -> np.ndarray:
    return base * np.maximum(1.0, np.abs(x))


def finite_difference_gradient(land: Landscape, x) -> np.ndarray:
    """Central differences of f with step 1e-4 scaled by coordinate magnitude."""
    x = np.asarray(x, dtype=float)
    h = _fd_step(x, 1e-4)
    out = np.empty(land.dim)
    for i in range(land.dim):
        e = np.zeros(land.dim)
        e[i] = h[i]
        out[i] = (land.eval(x + e) - land.eval(x - e)) / (2.0 * h[i])
    return out


def gradient_mismatch(land: Landscape, points: int = 100, seed: int = 0) -> float:
    """Worst relative disagreement between grad and central differences at random interior points."""
    rng = np.random.default_rng(seed)
    lo, hi = np.array(land.lo), np.array(land.hi)
    margin = 0.05 * (hi - lo)
    worst = 0.0
    for x in rng.uniform(lo + margin, hi - margin, size=(points, land.dim)):
        g = land.grad(x)
        fd = finite_difference_gradient(land, x)
        err = np.max(np.abs(fd - g)) / max(1.0, float(np.max(np.abs(g))))
        worst = max(worst, err)
    return worst


def laplacian(land: Landscape, x) -> float:
    """Second-order central differences of f summed over axes."""
    x = np.asarray(x, dtype=float)
    h = _fd_step(x, 1e-3)
    f0 = land.eval(x)
    total = 0.0
    for i in range(land.dim):
        e = np.zeros(land.dim)
        e[i] = h[i]
        total += (land.eval(x + e) - 2.0 * f0 + land.eval(x - e)) / (h[i] * h[i])
    return total


def hessian(land: Landscape, x) -> np.ndarray:
    """Symmetrized central differences of the analytic gradient."""
    x = np.asarray(x, dtype=float)
    h = _fd_step(x, 1e-4)
    cols = []
    for j in range(land.dim):
        e = np.zeros(land.dim)
        e[j] = h[j]
        cols.append((land.grad(x + e) - land.grad(x - e)) / (2.0 * h[j]))
    hess = np.column_stack(cols)
    return 0.5 * (hess + hess.T)


def _sphere_points(dim: int, radius: float, samples: int, seed: int) -> np.ndarray:
    if dim == 1:
        signs = np.where(np.arange(samples) % 2 == 0, 1.0, -1.0)
        return (radius * signs).reshape(-1, 1)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((samples, dim))
    return radius * v / np.linalg.norm(v, axis=1, keepdims=True)


def secant_lipschitz(points: np.ndarray, grads: np.ndarray) -> float:
    """max |g_i - g_j| / |x_i - x_j| over pairs of distinct points."""
    dx = pdist(points)
    dg = pdist(grads)
    keep = dx > 0.0
    if not np.any(keep):
        return 0.0
    return float(np.max(dg[keep] / dx[keep]))


def estimate_lipschitz(land: Landscape, samples: int, rng_seed: int) -> float:
    """Largest gradient secant slope over all pairs of uniform samples in the box."""
    if samples < 2:
        raise InvalidInputError(f"need at least 2 samples, got {samples}")
    rng = np.random.default_rng(rng_seed)
    points = rng.uniform(land.lo, land.hi, size=(samples, land.dim))
    return secant_lipschitz(points, land.gradient(points))


def check_growth_assumption(land: Landscape, radius: float, samples: int, seed: int = 0) -> AssumptionReport:
    """Evaluate (|grad f|^2 - lap f) / |x|^2 on the sphere of the given radius."""
    if radius <= 0:
        raise InvalidInputError(f"radius must be positive, got {radius}")
    if samples < 1:
        raise InvalidInputError(f"samples must be at least 1, got {samples}")
    points = _sphere_points(land.dim, radius, samples, seed)
    if not all(land.contains(p) for p in points):
        raise DomainExceededError(f"radius {radius} leaves the domain box of {land.name}")

    notes = []
    ratios = []
    for x in points:
        g = land.grad(x)
        ratios.append((float(g @ g) - laplacian(land, x)) / float(x @ x))
    growth_min = float(min(ratios))
    margin = getattr(settings, 'GROWTH_MARGIN', 1e-2)
    growth_ok = growth_min > margin
    if not growth_ok:
        notes.append(
            f"growth ratio {growth_min:.3g} at radius {radius} does not exceed margin {margin:g}; "
            "quadratic growth at infinity is not supported by the samples"
        )

    rng = np.random.default_rng(seed + 1)
    interior = rng.uniform(land.lo, land.hi, size=(max(samples, 64), land.dim))
    hess_min = min(float(np.linalg.eigvalsh(hessian(land, x))[0]) for x in interior)
    hess_ok = bool(np.isfinite(hess_min))
    if hess_min < 0:
        notes.append(f"Hessian eigenvalues reach {hess_min:.3g} on the sampled box")

    lipschitz = estimate_lipschitz(land, max(2, samples), seed)
    if not growth_ok:
        logger.warning("%s: %s", land.name, notes[0])
    return AssumptionReport(
        growth_ratio_min=growth_min,
        growth_ok=growth_ok,
        hessian_lower_bound=hess_min,
        hessian_lower_bound_ok=hess_ok,
        lipschitz_estimate=lipschitz,
        notes=notes,
    )
