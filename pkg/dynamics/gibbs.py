"""
Direct sampling from the grid Gibbs density proportional to exp(-f/tau).
"""
import math

import numpy as np

from annealab.exceptions import DegenerateInputError, InvalidInputError, UnsupportedError
from depth.grid import GridField
from .streams import UniformStream


class GibbsSampler1D:
    """Inverse-CDF sampler of the piecewise-constant density on a 1-D grid."""

    def __init__(self, g: GridField, tau: float):
        if g.dim != 1:
            raise UnsupportedError(f"direct Gibbs sampling needs a 1-D grid, got dimension {g.dim}")
        if not tau > 0:
            raise InvalidInputError(f"temperature must be positive, got {tau}")
        weights = np.exp(-(g.values - g.values.min()) / tau)
        total = math.fsum(weights)
        if not (total > 0 and math.isfinite(total)):
            raise DegenerateInputError(
                f"Gibbs weights underflow at tau={tau:g}; use a larger temperature or shift the values"
            )
        self.grid = g
        self.tau = tau
        self.cdf = np.cumsum(weights) / total
        self.cdf[-1] = 1.0

    def sample(self, stream: UniformStream, n: int = 1) -> np.ndarray:
        u = stream.uniforms(2 * n).reshape(n, 2)
        cells = np.minimum(np.searchsorted(self.cdf, u[:, 0], side='right'), self.grid.size - 1)
        return self.grid.lo[0] + (cells + u[:, 1]) * self.grid.cell_size[0]


def gibbs_sample_1d(g: GridField, tau: float, rng_stream: UniformStream) -> float:
    return float(GibbsSampler1D(g, tau).sample(rng_stream, 1)[0])
