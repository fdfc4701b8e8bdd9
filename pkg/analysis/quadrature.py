"""
Gibbs measure nu_tau ~ exp(-f / tau) on a grid: normalization, tail mass
P(f > delta) and the Laplace-method scaling Z_tau ~ C tau^(d/2).

Weights are always exp(-(f - min f) / tau) so nothing underflows at small
tau; log Z is reported for the shifted weights.
"""
import logging
import math
from dataclasses import dataclass, field, asdict
from typing import List, Sequence

import numpy as np
from scipy import integrate, stats

from annealab.exceptions import InvalidInputError, UnsupportedError
from depth.grid import GridField

logger = logging.getLogger(__name__)


def _shifted_weights(g: GridField, tau: float) -> np.ndarray:
    if not tau > 0:
        raise InvalidInputError(f"temperature must be positive, got {tau}")
    return np.exp(-(g.values - g.values.min()) / tau)


def _trapezoid(values: np.ndarray, g: GridField) -> float:
    """Iterated trapezoid rule over the cell centres."""
    out = values.reshape(g.shape)
    for axis in reversed(range(g.dim)):
        out = integrate.trapezoid(out, dx=g.cell_size[axis], axis=axis)
    return float(out)


@dataclass(frozen=True, eq=False)
class GibbsMeasure1D:
    grid: GridField
    tau: float
    z_tau: float
    cdf: np.ndarray

    @property
    def log_z(self) -> float:
        return math.log(self.z_tau)


def gibbs_measure_1d(g: GridField, tau: float) -> GibbsMeasure1D:
    if g.dim != 1:
        raise UnsupportedError(f"GibbsMeasure1D needs a 1-D grid, got dimension {g.dim}")
    w = _shifted_weights(g, tau)
    cumulative = integrate.cumulative_trapezoid(w, dx=g.cell_size[0], initial=0.0)
    z = float(cumulative[-1])
    cdf = cumulative / z
    cdf[-1] = 1.0
    return GibbsMeasure1D(grid=g, tau=tau, z_tau=z, cdf=cdf)


def _crossing_fraction(f: np.ndarray, seg: np.ndarray, delta: float) -> np.ndarray:
    """Where f = delta inside segment [i, i+1], as a fraction of the cell width.

    Three-point quadratic interpolation refined by Newton from the linear guess.
    """
    left = np.where(seg > 0, seg - 1, seg)
    base = np.where(seg > 0, seg, seg + 1)
    right = base + 1
    # quadratic through t = -1, 0, 1 centred on `base`
    f0, fm, fp = f[base], f[left], f[right]
    b = 0.5 * (fp - fm)
    a = 0.5 * (fp - 2.0 * f0 + fm)
    offset = (seg - base).astype(float)  # 0 or -1
    t = offset + (delta - f[seg]) / (f[seg + 1] - f[seg])
    for _ in range(4):
        slope = b + 2.0 * a * t
        safe = np.abs(slope) > 0
        step = np.where(safe, (a * t * t + b * t + f0 - delta) / np.where(safe, slope, 1.0), 0.0)
        t = np.clip(t - step, offset, offset + 1.0)
    return t - offset


def gibbs_tail_quadrature(g: GridField, tau: float, delta: float) -> float:
    """
    nu_tau(f > delta) by the trapezoid rule.

    In 1-D cells straddling the level set are split at the interpolated
    crossing, where the weight is exactly exp(-(delta - min f) / tau); in
    higher dimensions the indicator is applied to the trapezoid weights.
    """
    fmin = float(g.values.min())
    if delta < fmin:
        return 1.0
    w = _shifted_weights(g, tau)
    if g.dim > 1:
        return _trapezoid(w * (g.values > delta), g) / _trapezoid(w, g)

    f, h = g.values, g.cell_size[0]
    above = f > delta
    segments = 0.5 * (w[:-1] + w[1:]) * h
    total = math.fsum(segments)
    tail = [math.fsum(segments[above[:-1] & above[1:]])]
    mixed = np.flatnonzero(above[:-1] != above[1:])
    if mixed.size:
        t = _crossing_fraction(f, mixed, delta)
        w_cross = math.exp(-(delta - fmin) / tau)
        rising = ~above[mixed]
        # the exceeding part runs from the crossing to the right end when f rises
        length = np.where(rising, 1.0 - t, t) * h
        w_end = np.where(rising, w[mixed + 1], w[mixed])
        tail.append(math.fsum(0.5 * (w_end + w_cross) * length))
    return min(1.0, math.fsum(tail) / total)


def gibbs_reference(g: GridField, taus: Sequence[float], delta: float) -> List[float]:
    """Tail mass of the instantaneous Gibbs measure at each temperature."""
    return [gibbs_tail_quadrature(g, float(t), delta) for t in taus]


# ============================================================================
# LAPLACE SCALING
# ============================================================================

LAPLACE_TAUS = tuple(np.geomspace(0.02, 0.05, 6).tolist())


@dataclass
class LaplaceFit:
    taus: List[float]
    log_z: List[float]
    slope: float
    intercept: float
    r_squared: float
    expected_slope: float
    notes: List[str] = field(default_factory=list)

    @property
    def relative_error(self) -> float:
        return abs(self.slope - self.expected_slope) / self.expected_slope

    def to_dict(self) -> dict:
        data = asdict(self)
        data['relative_error'] = self.relative_error
        return data


def laplace_check(g: GridField, taus: Sequence[float] = LAPLACE_TAUS, tolerance: float = 0.05) -> LaplaceFit:
    """Regress ln Z_tau on ln tau; a non-degenerate quadratic minimum gives slope d/2."""
    taus = [float(t) for t in taus]
    if len(taus) < 2:
        raise InvalidInputError("need at least two temperatures")
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise InvalidInputError("temperatures must be strictly decreasing")
    log_z = [math.log(_trapezoid(_shifted_weights(g, t), g)) for t in taus]
    fit = stats.linregress(np.log(taus), log_z)
    result = LaplaceFit(
        taus=taus,
        log_z=log_z,
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue ** 2),
        expected_slope=g.dim / 2.0,
    )
    if result.relative_error > tolerance:
        msg = f"Laplace slope {result.slope:.4g} differs from d/2={result.expected_slope:g} by more than {tolerance:.0%}"
        logger.warning(msg)
        result.notes.append(msg)
    return result
