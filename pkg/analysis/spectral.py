"""
Spectral gap of the Langevin generator L g = tau g'' - f' g' in 1-D and
the Eyring-Kramers barrier fit -ln lambda_1(tau) ~ E* / tau.

The generator is discretized as a reversible nearest-neighbour jump
process on cell centres with zero-flux ends, rates

    w(i -> i+1) = (tau / h^2) exp(-(f(i+1/2) - f(i)) / tau),

f(i+1/2) taken at the cell boundary. Constants span the null space
exactly. On the flux variables phi_i = sqrt(c_i) (v_i - v_{i+1}), with
c_i = pi_i w(i -> i+1) the edge conductances, -L restricted to zero-mean
functions has the closed-form inverse

    K_ij = S_min(i,j) T_max(i,j) / (Z sqrt(c_i c_j)),

S_i and T_i the Gibbs mass left and right of edge i. K has positive
entries and its largest eigenvalue is 1 / lambda_1, which Lanczos on K
resolves in relative precision.
"""
import logging
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats
from scipy.sparse import linalg as sparse_linalg

from annealab.exceptions import DegenerateInputError, InvalidInputError, UnsupportedError
from landscapes.catalog import Landscape

logger = logging.getLogger(__name__)

MIN_CELLS = 128
FIT_TAU_RANGE = (0.03, 0.3)
LOG_MASS_CUTOFF = 500.0   # cells with (f - f_min) / tau above this are dropped
LOG_BARRIER_LIMIT = 600.0
EIGEN_TOL = 1e-13


def _cells(land: Landscape, tau: float, n_cells: int):
    if land.dim != 1:
        raise UnsupportedError(f"spectral gaps are computed for 1-D landscapes only, got dimension {land.dim}")
    if n_cells < MIN_CELLS:
        raise InvalidInputError(f"need at least {MIN_CELLS} cells, got {n_cells}")
    if not tau > 0:
        raise InvalidInputError(f"temperature must be positive, got {tau}")
    lo, hi = land.lo[0], land.hi[0]
    h = (hi - lo) / n_cells
    centres = lo + (np.arange(n_cells) + 0.5) * h
    faces = lo + np.arange(1, n_cells) * h
    f = land.values(centres.reshape(-1, 1))
    f_face = land.values(faces.reshape(-1, 1))
    return f, f_face, tau / (h * h)


def generator_tridiagonal(land: Landscape, tau: float, n_cells: int) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the symmetrized -L on the full grid."""
    f, f_face, scale = _cells(land, tau, n_cells)
    up = scale * np.exp(-(f_face - f[:-1]) / tau)    # i -> i+1
    down = scale * np.exp(-(f_face - f[1:]) / tau)   # i+1 -> i
    diag = np.zeros(n_cells)
    diag[:-1] += up
    diag[1:] += down
    off = -scale * np.exp(-(f_face - 0.5 * (f[:-1] + f[1:])) / tau)
    return diag, off


@dataclass(frozen=True)
class BirthDeathChain:
    """The jump process restricted to the cells that carry Gibbs mass, in log weights."""
    log_pi: np.ndarray   # -(f_i - f_min) / tau
    log_c: np.ndarray    # log conductance of edge (i, i+1)

    @property
    def n_edges(self) -> int:
        return len(self.log_c)


def birth_death_chain(land: Landscape, tau: float, n_cells: int) -> BirthDeathChain:
    f, f_face, scale = _cells(land, tau, n_cells)
    f_min = float(f.min())
    kept = np.flatnonzero((f - f_min) / tau <= LOG_MASS_CUTOFF)
    first, last = int(kept[0]), int(kept[-1])
    if last - first < 2:
        raise DegenerateInputError(f"fewer than three cells carry mass at tau={tau:g}; refine the grid or raise tau")
    barrier = float(np.max(f_face[first:last] - f_min)) / tau
    if barrier > LOG_BARRIER_LIMIT:
        raise DegenerateInputError(
            f"barrier/tau = {barrier:.0f} leaves the gap below double precision at tau={tau:g}; raise tau"
        )
    if first > 0 or last < n_cells - 1:
        logger.debug("spectral chain at tau=%g keeps cells %d..%d of %d", tau, first, last, n_cells)
    return BirthDeathChain(
        log_pi=-(f[first:last + 1] - f_min) / tau,
        log_c=np.log(scale) - (f_face[first:last] - f_min) / tau,
    )


class InverseGenerator:
    """K = (-L)^-1 on zero-mean functions, as the semiseparable K_ij = left_min(i,j) * right_max(i,j)."""

    def __init__(self, chain: BirthDeathChain):
        log_s = np.logaddexp.accumulate(chain.log_pi)[:-1]
        log_t = np.logaddexp.accumulate(chain.log_pi[::-1])[::-1][1:]
        log_z = np.logaddexp.reduce(chain.log_pi)
        half = 0.5 * (chain.log_c + log_z)
        self.left = np.exp(log_s - half)
        self.right = np.exp(log_t - half)
        self.size = chain.n_edges

    def matvec(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float).reshape(-1)
        head = np.cumsum(self.left * w)
        tail = np.cumsum((self.right * w)[::-1])[::-1]
        return self.right * head + self.left * np.append(tail[1:], 0.0)

    def operator(self) -> sparse_linalg.LinearOperator:
        return sparse_linalg.LinearOperator(
            (self.size, self.size), matvec=self.matvec, rmatvec=self.matvec, dtype=float,
        )

    def dense(self) -> np.ndarray:
        idx = np.arange(self.size)
        return self.left[np.minimum.outer(idx, idx)] * self.right[np.maximum.outer(idx, idx)]


def spectral_gap_1d(land: Landscape, tau: float, n_cells: int) -> float:
    """Smallest nonzero eigenvalue of -L."""
    inverse = InverseGenerator(birth_death_chain(land, tau, n_cells))
    try:
        top = sparse_linalg.eigsh(
            inverse.operator(), k=1, which='LA', v0=np.ones(inverse.size),
            tol=EIGEN_TOL, return_eigenvectors=False,
        )
    except sparse_linalg.ArpackNoConvergence as exc:
        raise DegenerateInputError(f"Lanczos did not converge at tau={tau:g}: {exc}") from None
    gap = 1.0 / float(top[0])
    logger.debug("spectral gap of %s at tau=%g: %.12g", land.name, tau, gap)
    return gap


def lowest_eigenvalues(land: Landscape, tau: float, n_cells: int) -> np.ndarray:
    """The null eigenvalue (exact: rows of the generator sum to zero) and the gap."""
    return np.array([0.0, spectral_gap_1d(land, tau, n_cells)])

@dataclass
class SpectralReport:
    taus: List[float]
    gaps: List[float]
    fitted_barrier: float
    fit_r_squared: float
    intercept: float
    reference_depth: Optional[float] = None
    notes: List[str] = field(default_factory=list)

    @property
    def relative_error(self) -> Optional[float]:
        if self.reference_depth is None or self.reference_depth == 0:
            return None
        return abs(self.fitted_barrier - self.reference_depth) / self.reference_depth

    def to_dict(self) -> dict:
        data = asdict(self)
        data['relative_error'] = self.relative_error
        return data


def eyring_kramers_fit(land: Landscape, taus: Sequence[float], n_cells: int,
                       e_star: Optional[float] = None) -> SpectralReport:
    """Slope of -ln lambda_1 against 1 / tau over a decreasing temperature sweep."""
    taus = [float(t) for t in taus]
    if len(taus) < 2:
        raise InvalidInputError("need at least two temperatures")
    if any(b >= a for a, b in zip(taus, taus[1:])):
        raise InvalidInputError("temperatures must be strictly decreasing")
    lo, hi = FIT_TAU_RANGE
    if not all(lo <= t <= hi for t in taus):
        raise InvalidInputError(f"temperatures must lie in [{lo}, {hi}]")

    gaps = [spectral_gap_1d(land, t, n_cells) for t in taus]
    notes = []
    if not all(g > 0 for g in gaps):
        raise InvalidInputError(f"non-positive spectral gap in {gaps}; refine the grid or raise tau")
    fit = stats.linregress(1.0 / np.array(taus), -np.log(gaps))
    r2 = float(fit.rvalue ** 2)
    if r2 < 0.9:
        msg = f"barrier fit is degenerate (r^2={r2:.3f})"
        logger.warning(msg)
        notes.append(msg)
    report = SpectralReport(
        taus=taus,
        gaps=gaps,
        fitted_barrier=float(fit.slope),
        fit_r_squared=r2,
        intercept=float(fit.intercept),
        reference_depth=e_star,
        notes=notes,
    )
    if report.relative_error is not None and report.relative_error > 0.1:
        msg = f"fitted barrier {report.fitted_barrier:.4g} is {report.relative_error:.0%} away from E*={e_star:.4g}"
        logger.warning(msg)
        notes.append(msg)
    return report
