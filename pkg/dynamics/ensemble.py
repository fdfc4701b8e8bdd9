"""
Vectorized ensemble of independent annealing chains.

All chains of an ensemble share one schedule, so eta_k, tau(Theta_{k-1})
and Theta_k are tabulated once (ScheduleClock) and every step is a single
array update over the chains. Each chain keeps its own NoiseStream: a
block run over any subset of chain ids reproduces exactly what the
single-chain engine (chains.sa_step) computes for those ids.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from annealab.exceptions import InvalidInputError
from landscapes.catalog import Landscape
from .chains import InitialDistribution, _checkpoint_list, divergence_limit, kahan_add
from .streams import NoiseStream

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ScheduleClock:
    """Per-step tables for k = 1..K (index k-1); thetas[k] is Theta_k with thetas[0] = 0."""
    etas: np.ndarray
    taus: np.ndarray
    scales: np.ndarray
    thetas: np.ndarray


@lru_cache(maxsize=8)
def schedule_clock(ss, cs, k_max: int) -> ScheduleClock:
    etas = np.empty(k_max)
    taus = np.empty(k_max)
    scales = np.empty(k_max)
    thetas = np.empty(k_max + 1)
    theta, comp = 0.0, 0.0
    thetas[0] = 0.0
    for i in range(k_max):
        eta = ss.step_size(i + 1)
        tau = cs.temperature(theta)
        etas[i], taus[i] = eta, tau
        scales[i] = math.sqrt(2.0 * tau * eta)
        theta, comp = kahan_add(theta, comp, eta)
        thetas[i + 1] = theta
    return ScheduleClock(etas=etas, taus=taus, scales=scales, thetas=thetas)


@dataclass
class EnsembleBlock:
    """Checkpoint records of a set of chains.

    divergence_k is the first iteration whose iterate left the divergence
    limit (0 if the chain never did); from then on the chain is frozen and
    its f_values are +inf.
    """
    chain_ids: np.ndarray
    checkpoints: np.ndarray
    theta: np.ndarray
    tau: np.ndarray
    f_values: np.ndarray
    diverged: np.ndarray
    divergence_k: np.ndarray
    x: Optional[np.ndarray] = None

    FIELDS = ('chain_ids', 'checkpoints', 'theta', 'tau', 'f_values', 'diverged', 'divergence_k')

    @property
    def n_chains(self) -> int:
        return len(self.chain_ids)

    @property
    def divergence_fraction(self) -> float:
        return float(np.mean(self.diverged)) if self.n_chains else 0.0

    def save(self, path: Path):
        arrays = {name: getattr(self, name) for name in self.FIELDS}
        if self.x is not None:
            arrays['x'] = self.x
        with open(path, 'wb') as fh:
            np.savez(fh, **arrays)

    @classmethod
    def load(cls, path: Path) -> 'EnsembleBlock':
        with np.load(path) as data:
            arrays = {name: data[name] for name in cls.FIELDS}
            x = data['x'] if 'x' in data.files else None
        return cls(x=x, **arrays)

    @classmethod
    def concatenate(cls, blocks: Sequence['EnsembleBlock']) -> 'EnsembleBlock':
        if not blocks:
            raise InvalidInputError("no blocks to concatenate")
        first = blocks[0]
        for b in blocks[1:]:
            if not np.array_equal(b.checkpoints, first.checkpoints):
                raise InvalidInputError("blocks were recorded on different checkpoint grids")
        xs = [b.x for b in blocks]
        return cls(
            chain_ids=np.concatenate([b.chain_ids for b in blocks]),
            checkpoints=first.checkpoints,
            theta=first.theta,
            tau=first.tau,
            f_values=np.concatenate([b.f_values for b in blocks]),
            diverged=np.concatenate([b.diverged for b in blocks]),
            divergence_k=np.concatenate([b.divergence_k for b in blocks]),
            x=np.concatenate(xs) if all(x is not None for x in xs) else None,
        )


class ChainEnsemble:
    """Runs chains of one (landscape, schedules, mu0, seed) experiment."""

    def __init__(self, land: Landscape, ss, cs, mu0: InitialDistribution, seed: int, silent: bool = False):
        if mu0.dim != land.dim:
            raise InvalidInputError(f"initial law has dimension {mu0.dim}, landscape {land.dim}")
        self.land = land
        self.ss = ss
        self.cs = cs
        self.mu0 = mu0
        self.seed = int(seed)
        self.silent = silent

    def run(self, chain_ids: Sequence[int], checkpoints: Sequence[int], record_x: bool = False) -> EnsembleBlock:
        ks = _checkpoint_list(checkpoints)
        ids = np.asarray(chain_ids, dtype=np.int64)
        if ids.size == 0:
            raise InvalidInputError("an ensemble run needs at least one chain")
        land = self.land
        clock = schedule_clock(self.ss, self.cs, ks[-1])
        limit = divergence_limit(land)

        streams: List[NoiseStream] = [
            NoiseStream(self.seed, int(c), land.dim, silent=self.silent) for c in ids
        ]
        x = np.stack([self.mu0.sample(s) for s in streams])
        n, block = len(ids), streams[0].block_steps

        f_values = np.empty((n, len(ks)))
        xs = np.empty((n, len(ks), land.dim)) if record_x else None
        diverged = np.zeros(n, dtype=bool)
        divergence_k = np.zeros(n, dtype=np.int64)

        def check(k, moved):
            bad = ~np.all(np.isfinite(moved), axis=1) | (np.linalg.norm(moved, axis=1) > limit)
            fresh = bad & ~diverged
            if np.any(fresh):
                diverged[fresh] = True
                divergence_k[fresh] = k
                logger.debug("%d chains diverged at iteration %d", int(fresh.sum()), k)
            # diverged chains stay at their last accepted state
            return np.where(diverged[:, None], x, moved)

        k, c = 0, 0
        with np.errstate(over='ignore', invalid='ignore'):
            while k < ks[-1]:
                steps = min(block, ks[-1] - k)
                noise = np.stack([s.normals(steps) for s in streams], axis=1)
                for j in range(steps):
                    i = k + j
                    x = check(i + 1, x - land.gradient(x) * clock.etas[i] + clock.scales[i] * noise[j])
                    if i + 1 == ks[c]:
                        values = land.values(x)
                        f_values[:, c] = np.where(diverged, np.inf, values)
                        if record_x:
                            xs[:, c] = x
                        c += 1
                k += steps

        theta = clock.thetas[ks]
        tau = np.array([self.cs.temperature(t) for t in theta])
        if np.any(diverged):
            logger.warning("%d of %d chains diverged", int(diverged.sum()), n)
        return EnsembleBlock(
            chain_ids=ids,
            checkpoints=np.asarray(ks, dtype=np.int64),
            theta=theta,
            tau=tau,
            f_values=f_values,
            diverged=diverged,
            divergence_k=divergence_k,
            x=xs,
        )
