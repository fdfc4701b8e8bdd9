"""
Single-chain engines: the annealing iteration, fixed-temperature ULA and
the fine-step Euler reference of the continuous process.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from django.conf import settings

from annealab.exceptions import DivergenceError, InvalidInputError
from landscapes.catalog import Landscape
from schedules.schedules import ConstantStep
from .streams import NoiseStream

logger = logging.getLogger(__name__)


# ============================================================================
# INITIAL LAW
# ============================================================================

@dataclass(frozen=True)
class InitialDistribution:
    """
    mu0: a point mass or an isotropic Gaussian.

    A point mass may be anchored on the landscape with
    ``at='dominating_minimum'``; the harness resolves it from the depth
    report before any chain starts.
    """
    kind: str
    x0: Optional[Tuple[float, ...]] = None
    mean: Optional[Tuple[float, ...]] = None
    stddev: Optional[float] = None
    at: Optional[str] = None

    KINDS = ('point_mass', 'gaussian')
    ANCHORS = ('dominating_minimum', 'global_minimum')

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidInputError(f"unknown initial distribution '{self.kind}'; use one of {self.KINDS}")
        if self.kind == 'point_mass':
            if self.x0 is None and self.at is None:
                raise InvalidInputError("point_mass needs x0 or an anchor ('at')")
            if self.at is not None and self.at not in self.ANCHORS:
                raise InvalidInputError(f"unknown anchor '{self.at}'; use one of {self.ANCHORS}")
        else:
            if self.mean is None:
                raise InvalidInputError("gaussian needs a mean")
            if self.stddev is None or not self.stddev > 0:
                raise InvalidInputError(f"gaussian stddev must be positive, got {self.stddev}")

    @classmethod
    def point_mass(cls, x0) -> 'InitialDistribution':
        return cls(kind='point_mass', x0=tuple(np.atleast_1d(np.asarray(x0, dtype=float)).tolist()))

    @classmethod
    def gaussian(cls, mean, stddev: float) -> 'InitialDistribution':
        mean = tuple(np.atleast_1d(np.asarray(mean, dtype=float)).tolist())
        return cls(kind='gaussian', mean=mean, stddev=float(stddev))

    @classmethod
    def from_dict(cls, data: dict) -> 'InitialDistribution':
        kind = data.get('kind')
        if kind == 'point_mass' and 'x0' in data:
            return cls.point_mass(data['x0'])
        if kind == 'gaussian':
            return cls.gaussian(data.get('mean', 0.0), data.get('stddev', 1.0))
        return cls(kind=kind, at=data.get('at'))

    def to_dict(self) -> dict:
        if self.kind == 'gaussian':
            return {'kind': 'gaussian', 'mean': list(self.mean), 'stddev': self.stddev}
        if self.x0 is None:
            return {'kind': 'point_mass', 'at': self.at}
        return {'kind': 'point_mass', 'x0': list(self.x0)}

    def anchored(self, point) -> 'InitialDistribution':
        """Point mass at the landscape point this distribution is anchored to."""
        return self.point_mass(point)

    @property
    def resolved(self) -> bool:
        return self.kind == 'gaussian' or self.x0 is not None

    @property
    def dim(self) -> int:
        if not self.resolved:
            raise InvalidInputError(f"initial point anchored at '{self.at}' is not resolved yet")
        return len(self.x0 if self.kind == 'point_mass' else self.mean)

    def sample(self, stream: NoiseStream) -> np.ndarray:
        if not self.resolved:
            raise InvalidInputError(f"initial point anchored at '{self.at}' is not resolved yet")
        if self.kind == 'point_mass':
            return np.array(self.x0, dtype=float)
        return np.asarray(self.mean, dtype=float) + self.stddev * stream.normal()


# ============================================================================
# CHAIN STATE
# ============================================================================

@dataclass
class ChainState:
    """Position, iteration count and Kahan-summed cumulative step size of one chain."""
    x: np.ndarray
    k: int
    theta_cum: float
    rng: NoiseStream
    theta_comp: float = 0.0

    def advance_clock(self, eta: float):
        self.k += 1
        self.theta_cum, self.theta_comp = kahan_add(self.theta_cum, self.theta_comp, eta)


def kahan_add(total: float, comp: float, value: float) -> Tuple[float, float]:
    y = value - comp
    t = total + y
    return t, (t - total) - y


def divergence_limit(land: Landscape) -> float:
    return getattr(settings, 'DIVERGENCE_FACTOR', 1e3) * land.diameter


def init_chain(mu0: InitialDistribution, seed: int, chain_id: int, silent: bool = False) -> ChainState:
    """Fresh chain at k = 0 with x drawn from mu0 on the chain's own stream."""
    stream = NoiseStream(seed, chain_id, mu0.dim, silent=silent)
    return ChainState(x=mu0.sample(stream), k=0, theta_cum=0.0, rng=stream)


def _move(s: ChainState, land: Landscape, eta: float, tau: float) -> ChainState:
    z = s.rng.normal()
    x = s.x - land.gradient(s.x) * eta + math.sqrt(2.0 * tau * eta) * z
    k = s.k + 1
    if not np.all(np.isfinite(x)) or float(np.linalg.norm(x)) > divergence_limit(land):
        raise DivergenceError(k, x, f"chain {s.rng.chain_id} diverged at iteration {k} (eta={eta:g})")
    s.x = x
    s.advance_clock(eta)
    return s


def sa_step(s: ChainState, land: Landscape, ss, cs) -> ChainState:
    """x <- x - grad f(x) eta_{k+1} + sqrt(2 tau(Theta_k) eta_{k+1}) Z; mutates and returns s."""
    return _move(s, land, ss.step_size(s.k + 1), cs.temperature(s.theta_cum))


def ula_step(s: ChainState, land: Landscape, eta: float, tau: float) -> ChainState:
    """Fixed step and temperature; tau = 0 is plain gradient descent."""
    if not eta > 0:
        raise InvalidInputError(f"step size must be positive, got {eta}")
    if not tau >= 0:
        raise InvalidInputError(f"temperature must be nonnegative, got {tau}")
    return _move(s, land, float(eta), float(tau))


# ============================================================================
# TRAJECTORIES
# ============================================================================

@dataclass(frozen=True)
class Checkpoint:
    k: int
    theta_cum: float
    tau: float
    x: Tuple[float, ...]
    f_value: float


@dataclass
class Trajectory:
    chain_id: int
    checkpoints: List[Checkpoint] = field(default_factory=list)

    def record(self, s: ChainState, land: Landscape, cs):
        if self.checkpoints and s.k <= self.checkpoints[-1].k:
            raise InvalidInputError("trajectory checkpoints must have increasing k")
        self.checkpoints.append(Checkpoint(
            k=s.k,
            theta_cum=s.theta_cum,
            tau=cs.temperature(s.theta_cum),
            x=tuple(float(v) for v in s.x),
            f_value=land.eval(s.x),
        ))

    def rows(self, record_x: bool = False) -> List[list]:
        """CSV rows chain_id,k,theta,tau,f_value[,x_1..x_d]."""
        out = []
        for c in self.checkpoints:
            row = [self.chain_id, c.k, c.theta_cum, c.tau, c.f_value]
            if record_x:
                row.extend(c.x)
            out.append(row)
        return out


def _checkpoint_list(checkpoints: Sequence[int]) -> List[int]:
    ks = [int(k) for k in checkpoints]
    if not ks or ks[0] < 1 or any(b <= a for a, b in zip(ks, ks[1:])):
        raise InvalidInputError(f"checkpoints must be strictly increasing iterations >= 1, got {checkpoints}")
    return ks


def run_chain(s: ChainState, land: Landscape, ss, cs, checkpoints: Sequence[int]) -> Trajectory:
    """Advance one chain with sa_step, recording at each checkpoint."""
    traj = Trajectory(chain_id=s.rng.chain_id)
    for k in _checkpoint_list(checkpoints):
        while s.k < k:
            sa_step(s, land, ss, cs)
        traj.record(s, land, cs)
    return traj


def fine_euler_reference(land: Landscape, cs, dt: float, T: float, mu0: InitialDistribution, seed: int,
                         chain_id: int = 0, checkpoints: Optional[Sequence[int]] = None,
                         silent: bool = False) -> Trajectory:
    """Euler-Maruyama with constant dt and tau at elapsed time: the continuous-process surrogate."""
    if not dt > 0:
        raise InvalidInputError(f"dt must be positive, got {dt}")
    if T < dt:
        raise InvalidInputError(f"horizon T={T} is shorter than one step dt={dt}")
    n_steps = int(math.floor(T / dt + 1e-9))
    s = init_chain(mu0, seed, chain_id, silent=silent)
    logger.debug("Euler reference: %d steps of %g on %s", n_steps, dt, land.name)
    return run_chain(s, land, ConstantStep(dt), cs, checkpoints or [n_steps])
