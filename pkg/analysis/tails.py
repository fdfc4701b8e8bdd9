"""
Tail probabilities P(f(x_k) > delta) over an ensemble, their Wilson
intervals, the log-log decay fit and the check against the C * Theta^-rate
bound.
"""
import csv
import logging
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from django.conf import settings
from scipy import stats

from annealab.exceptions import InsufficientDataError, InvalidInputError

logger = logging.getLogger(__name__)

CSV_COLUMNS = ('k', 'theta', 'tau', 'n', 'n_exceed', 'p_hat', 'ci_lo', 'ci_hi')


def _min_exceedances() -> int:
    return getattr(settings, 'FIT_MIN_EXCEEDANCES', 5)


def wilson_interval(n_exceed: int, n: int, level: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n < 1:
        raise InvalidInputError("need at least one trial")
    if not 0.0 < level < 1.0:
        raise InvalidInputError(f"confidence level must lie in (0, 1), got {level}")
    z = stats.norm.ppf(0.5 + level / 2.0)
    p = n_exceed / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n))
    lo = 0.0 if n_exceed == 0 else max(0.0, centre - half)
    hi = 1.0 if n_exceed == n else min(1.0, centre + half)
    return lo, hi


# ============================================================================
# TAIL CURVE
# ============================================================================

@dataclass(frozen=True)
class TailRow:
    k: int
    theta: float
    tau: float
    n: int
    n_exceed: int
    p_hat: float
    ci_lo: float
    ci_hi: float


@dataclass
class TailCurve:
    delta: float
    rows: List[TailRow]
    ci_level: float = 0.95

    def __post_init__(self):
        ks = [r.k for r in self.rows]
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise InvalidInputError("tail rows must be sorted by strictly increasing k")

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def to_csv(self, path: Union[str, Path]):
        with open(path, 'w', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(CSV_COLUMNS)
            for r in self.rows:
                writer.writerow([
                    r.k, format(r.theta, '.17g'), format(r.tau, '.17g'), r.n, r.n_exceed,
                    format(r.p_hat, '.17g'), format(r.ci_lo, '.17g'), format(r.ci_hi, '.17g'),
                ])

    @classmethod
    def from_csv(cls, path: Union[str, Path], delta: float, ci_level: float = 0.95) -> 'TailCurve':
        with open(path, newline='') as fh:
            reader = csv.DictReader(fh)
            missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise InvalidInputError(f"{path}: missing columns {sorted(missing)}")
            rows = [
                TailRow(
                    k=int(row['k']), theta=float(row['theta']), tau=float(row['tau']),
                    n=int(row['n']), n_exceed=int(row['n_exceed']), p_hat=float(row['p_hat']),
                    ci_lo=float(row['ci_lo']), ci_hi=float(row['ci_hi']),
                )
                for row in reader
            ]
        return cls(delta=delta, rows=rows, ci_level=ci_level)


def _as_matrix(trajectories) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(k, theta, tau, f) from an EnsembleBlock or a list of Trajectory objects."""
    if hasattr(trajectories, 'f_values'):
        b = trajectories
        return np.asarray(b.checkpoints), np.asarray(b.theta), np.asarray(b.tau), np.asarray(b.f_values)
    trajectories = list(trajectories)
    if not trajectories:
        raise InvalidInputError("no chains to estimate from")
    first = trajectories[0].checkpoints
    ks = [c.k for c in first]
    for t in trajectories[1:]:
        if [c.k for c in t.checkpoints] != ks:
            raise InvalidInputError(f"chain {t.chain_id} was recorded on a different checkpoint grid")
    f = np.array([[c.f_value for c in t.checkpoints] for t in trajectories], dtype=float)
    return (np.array(ks), np.array([c.theta_cum for c in first]),
            np.array([c.tau for c in first]), f)


def estimate_tail(trajectories, delta: float, ci_level: float = 0.95) -> TailCurve:
    """Fraction of chains with f > delta at every checkpoint; diverged chains (f = inf) exceed."""
    if not delta > 0:
        raise InvalidInputError(f"delta must be positive, got {delta}")
    ks, theta, tau, f = _as_matrix(trajectories)
    n = f.shape[0]
    if n < 1:
        raise InvalidInputError("no chains to estimate from")
    exceed = np.sum(~(f <= delta), axis=0)
    rows = []
    for c, k in enumerate(ks):
        m = int(exceed[c])
        lo, hi = wilson_interval(m, n, ci_level)
        rows.append(TailRow(int(k), float(theta[c]), float(tau[c]), n, m, m / n, lo, hi))
    return TailCurve(delta=float(delta), rows=rows, ci_level=ci_level)


# ============================================================================
# DECAY FIT
# ============================================================================

@dataclass
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    burn_in_k: int
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def default_burn_in(cs) -> float:
    """Theta at which tau(Theta) first drops to E / ln(100)."""
    return max(0.0, 100.0 - cs.t_offset)


def _usable_rows(curve: TailCurve, burn_in_theta: Optional[float], notes: List[str]) -> List[TailRow]:
    minimum = _min_exceedances()
    rows = [r for r in curve.rows if r.n_exceed >= minimum and r.theta > 0]
    if burn_in_theta:
        after = [r for r in curve.rows if r.theta >= burn_in_theta]
        if after:
            rows = [r for r in rows if r.theta >= burn_in_theta]
        else:
            msg = f"no checkpoint reaches the burn-in Theta={burn_in_theta:g}; using every usable row"
            logger.warning(msg)
            notes.append(msg)
    return rows


def fit_decay(curve: TailCurve, burn_in_theta: Optional[float] = None) -> FitResult:
    """OLS of ln p_hat against ln Theta over rows with enough exceedances."""
    notes = []
    rows = _usable_rows(curve, burn_in_theta, notes)
    if len(rows) < 3:
        raise InsufficientDataError(
            f"{len(rows)} usable rows (need 3 with at least {_min_exceedances()} exceedances)"
        )
    x = np.log([r.theta for r in rows])
    y = np.log([r.p_hat for r in rows])
    fit = stats.linregress(x, y)
    r2 = float(min(1.0, max(0.0, fit.rvalue ** 2)))
    return FitResult(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=r2,
        n_points=len(rows),
        burn_in_k=rows[0].k,
        notes=notes,
    )


@dataclass
class BoundCheck:
    holds: bool
    fitted_C: float
    reference_C: float
    exponent: float
    violations: List[int] = field(default_factory=list)
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def theoretical_bound_check(curve: TailCurve, rate: float, epsilon: float,
                            burn_in_theta: Optional[float] = None) -> BoundCheck:
    """
    Test p_hat <= C * Theta^-(rate - epsilon).

    C is fixed from the first half of the usable rows (largest ci_hi times
    Theta^(rate - epsilon)); the bound holds when the ci_lo of every later
    row stays below C * Theta^-(rate - epsilon).
    """
    if rate < 0:
        raise InvalidInputError(f"rate must be nonnegative, got {rate}")
    if not epsilon > 0:
        raise InvalidInputError(f"epsilon must be positive, got {epsilon}")
    if not curve.rows:
        raise InvalidInputError("empty tail curve")
    notes = []
    rows = _usable_rows(curve, burn_in_theta, notes)
    exponent = rate - epsilon
    if len(rows) < 2:
        notes.append(f"only {len(rows)} usable rows; the bound cannot be tested")
        return BoundCheck(False, float('nan'), float('nan'), exponent, notes=notes)

    scaled = [r.ci_hi * r.theta ** exponent for r in rows]
    half = len(rows) // 2
    reference = max(scaled[:half])
    violations = [r.k for r in rows[half:] if r.ci_lo > reference * r.theta ** -exponent]
    if violations:
        notes.append(f"{len(violations)} rows exceed the bound fixed from the first {half} rows")
    return BoundCheck(
        holds=not violations,
        fitted_C=float(max(scaled)),
        reference_C=float(reference),
        exponent=exponent,
        violations=violations,
        notes=notes,
    )
