"""
Experiment orchestration.

depth -> schedule check -> chain ensemble -> tail curve -> decay fit ->
bound check, everything persisted under one run directory.

Chains are cut into fixed blocks of CHAIN_BLOCK_SIZE ids and each block
is written to blocks/ as soon as it finishes. Workers only ever split
blocks, and every chain draws from its own (seed, chain_id) stream, so
the worker count never changes the results.
"""
import logging
import os
import time
import zipfile
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np
from django.conf import settings
from django.utils import timezone

from annealab import __version__
from annealab.exceptions import InsufficientDataError, InvalidInputError
from analysis.quadrature import gibbs_reference
from analysis.tails import default_burn_in, estimate_tail, fit_decay, theoretical_bound_check
from depth.grid import discretize
from depth.watershed import critical_depth
from dynamics.ensemble import ChainEnsemble, EnsembleBlock
from landscapes.catalog import get_landscape
from schedules.schedules import StepSchedule, rate_exponent, validate
from .config import ExperimentConfig
from .models import ExperimentRun
from .storage import (
    STATUS_COMPLETE, STATUS_FAILED, STATUS_INCOMPLETE, RunDirectory, content_hash, dumps, write_json,
)

logger = logging.getLogger(__name__)

# E* = 0 has no technical condition to speak of; check it at a vanishing ratio
MIN_DEPTH_RATIO = 1e-12


def schedule_check(ss, e_star: float, E: float, horizon: int) -> dict:
    """Schedule report as written to schedule.json."""
    if not isinstance(ss, StepSchedule):
        return {
            'verdict': 'not_applicable',
            'steps': ss.to_dict(),
            'notes': ['constant Euler step: only E > E* is required'],
        }
    ratio = e_star / E
    if ratio >= 1.0:
        return {
            'verdict': 'invalid',
            'steps': ss.to_dict(),
            'notes': [f'E={E:g} does not exceed E*={e_star:g}; the step conditions are not evaluated'],
        }
    notes = []
    if ratio <= 0.0:
        ratio = MIN_DEPTH_RATIO
        notes.append('E* = 0: technical condition checked at a vanishing depth ratio')
    report = validate(ss, ratio, horizon).to_dict()
    report['steps'] = ss.to_dict()
    report['depth_ratio'] = e_star / E
    report['notes'] = notes + report['notes']
    return report


# ============================================================================
# WORKERS
# ============================================================================

def _init_worker():
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'annealab.settings')
    import django
    django.setup()


def run_block(task) -> str:
    """Run one block of chains and persist it; executed in worker processes."""
    land, ss, cs, mu0, seed, chain_ids, checkpoints, path = task
    block = ChainEnsemble(land, ss, cs, mu0, seed).run(chain_ids, checkpoints)
    path = Path(path)
    tmp = path.with_name(path.name + '.tmp')
    block.save(tmp)
    os.replace(tmp, path)
    return str(path)


# ============================================================================
# RESULT
# ============================================================================

@dataclass
class ExperimentResult:
    run_id: str
    output_dir: str
    status: str
    config: dict
    depth: dict
    schedule: dict
    E: float
    critical_depth: float
    rate: Optional[float]
    tail_csv: str
    fit: Optional[dict]
    bound_check: Optional[dict]
    divergence: dict
    gibbs_reference: Optional[List[float]]
    content_hash: str
    metadata: dict = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def bound_holds(self) -> Optional[bool]:
        return None if self.bound_check is None else bool(self.bound_check['holds'])

    def to_dict(self) -> dict:
        return asdict(self)


# ============================================================================
# RUNNER
# ============================================================================

class ExperimentRunner:
    """Runs one ExperimentConfig end to end."""

    def __init__(self, config: ExperimentConfig, workers: Optional[int] = None, force: bool = False,
                 resume: bool = False, record: bool = True, progress: Optional[Callable[[str], None]] = None):
        self.config = config
        self.workers = max(1, int(workers or getattr(settings, 'DEFAULT_WORKERS', 1)))
        self.force = force
        self.resume = resume
        self.record = record
        self.progress = progress or (lambda message: None)
        self.prepared = False

    def _say(self, message: str):
        logger.debug(message)
        self.progress(message)

    @property
    def run_id(self) -> str:
        echo = self.config.to_dict()
        echo.pop('output_dir', None)
        digest = content_hash([dumps(echo).encode()])
        return f"{self.config.landscape_id}-s{self.config.seed}-{digest[:12]}"

    @property
    def output_dir(self) -> Path:
        if self.config.output_dir:
            return Path(self.config.output_dir)
        return Path(getattr(settings, 'OUTPUT_ROOT', 'runs')) / self.run_id

    def prepare(self) -> 'ExperimentRunner':
        """Landscape, depth report, schedules, rate and the resolved initial law."""
        cfg = self.config
        self.landscape = get_landscape(cfg.landscape_id, cfg.landscape_params)
        self.grid = discretize(self.landscape, cfg.grid_shape(self.landscape.dim))
        self.depth = critical_depth(self.grid)
        e_star = self.depth.critical_depth
        self.E = cfg.resolve_E(e_star)
        cfg.check_cooling(self.E, e_star, self.force)
        self.cooling = cfg.cooling_schedule(self.E)
        self.steps = cfg.step_schedule(self.landscape)
        self.schedule = schedule_check(self.steps, e_star, self.E, cfg.horizon)
        if self.schedule['verdict'] not in ('valid', 'not_applicable') and not self.force:
            raise InvalidInputError(
                f"schedule verdict is '{self.schedule['verdict']}' for theta={cfg.theta:g}; pass --force to run anyway"
            )
        self.rate = rate_exponent(self.E, e_star, cfg.delta) if self.E > e_star else None

        mu0 = cfg.initial_distribution()
        if not mu0.resolved:
            anchor = self.depth.dominating_minimum if mu0.at == 'dominating_minimum' else self.depth.global_minimum
            mu0 = mu0.anchored(anchor.x)
        if mu0.dim != self.landscape.dim:
            raise InvalidInputError(f"initial law has dimension {mu0.dim}, landscape {self.landscape.dim}")
        self.mu0 = mu0
        self.checkpoints = cfg.checkpoint_list()
        self.prepared = True
        self._say(
            f"{self.landscape.name}: E*={e_star:.6g}, E={self.E:.6g}, schedule {self.schedule['verdict']}, "
            f"x0={list(np.round(self.mu0.x0, 6)) if self.mu0.x0 else 'gaussian'}"
        )
        return self

    # ------------------------------------------------------------------

    def run(self) -> ExperimentResult:
        cfg = self.config
        started = timezone.now()
        wall = time.perf_counter()
        if not self.prepared:
            self.prepare()

        echo = cfg.to_dict()
        run_dir = RunDirectory(self.output_dir)
        reused = run_dir.open(dumps(echo), resume=self.resume)
        registry = self._register(run_dir, echo)
        write_json(run_dir.path(run_dir.DEPTH), self.depth.to_dict())
        write_json(run_dir.path(run_dir.SCHEDULE), self.schedule)

        ensemble = self._run_chains(run_dir, reused)
        divergence = self._divergence(ensemble)

        curve = estimate_tail(ensemble, cfg.delta, cfg.ci_level)
        curve.to_csv(run_dir.path(run_dir.TAIL))
        fit, bound, notes = self._analyse(curve)
        write_json(run_dir.path(run_dir.FIT), {
            'fit': fit, 'bound_check': bound, 'rate': self.rate, 'epsilon': cfg.epsilon, 'delta': cfg.delta,
        })

        gibbs = None
        if self.landscape.dim == 1:
            gibbs = gibbs_reference(self.grid, curve.column('tau'), cfg.delta)

        status = STATUS_COMPLETE
        if divergence['fraction'] > divergence['max_fraction']:
            status = STATUS_FAILED
            notes.append(
                f"{divergence['n_diverged']} of {ensemble.n_chains} chains diverged "
                f"(first at k={divergence['first_k']}); the run is marked failed"
            )
        for message in notes:
            logger.warning(message)

        finished = timezone.now()
        result = ExperimentResult(
            run_id=self.run_id,
            output_dir=str(run_dir.root),
            status=status,
            config=echo,
            depth=self.depth.to_dict(),
            schedule=self.schedule,
            E=self.E,
            critical_depth=self.depth.critical_depth,
            rate=self.rate,
            tail_csv=run_dir.TAIL,
            fit=fit,
            bound_check=bound,
            divergence=divergence,
            gibbs_reference=gibbs,
            content_hash=content_hash(run_dir.hashed_parts(echo)),
            metadata={
                'started_at': started.isoformat(),
                'finished_at': finished.isoformat(),
                'wall_seconds': time.perf_counter() - wall,
                'workers': self.workers,
                'resumed': reused,
                'version': __version__,
            },
            notes=notes,
        )
        write_json(run_dir.path(run_dir.RESULT), result.to_dict())
        run_dir.set_status(status)
        self._finish(registry, result, finished)
        self._say(f"run {result.run_id}: {status}, hash {result.content_hash[:12]}")
        return result

    # ------------------------------------------------------------------

    def _block_ranges(self):
        size = int(getattr(settings, 'CHAIN_BLOCK_SIZE', 256))
        n = self.config.n_chains
        return [
            (index, np.arange(start, min(start + size, n), dtype=np.int64))
            for index, start in enumerate(range(0, n, size))
        ]

    def _usable_block(self, path: Path, ids: np.ndarray) -> bool:
        if not path.exists():
            return False
        try:
            block = EnsembleBlock.load(path)
        except (OSError, ValueError, KeyError, zipfile.BadZipFile):
            logger.warning("unreadable block %s; it will be recomputed", path)
            return False
        return np.array_equal(block.chain_ids, ids) and np.array_equal(block.checkpoints, self.checkpoints)

    def _run_chains(self, run_dir: RunDirectory, reused: bool) -> EnsembleBlock:
        ranges = self._block_ranges()
        tasks = []
        for index, ids in ranges:
            path = run_dir.block_path(index)
            if reused and self._usable_block(path, ids):
                continue
            tasks.append((self.landscape, self.steps, self.cooling, self.mu0, self.config.seed,
                          ids, self.checkpoints, str(path)))
        if reused:
            self._say(f"resuming: {len(ranges) - len(tasks)} of {len(ranges)} blocks already done")
        self._say(f"running {len(tasks)} blocks of chains to k={self.checkpoints[-1]} on {self.workers} workers")
        self._execute(tasks)
        return EnsembleBlock.concatenate([EnsembleBlock.load(run_dir.block_path(i)) for i, _ in ranges])

    def _execute(self, tasks):
        total = len(tasks)
        if self.workers <= 1 or total <= 1:
            for done, task in enumerate(tasks, start=1):
                run_block(task)
                self._say(f"  block {done}/{total} done")
            return
        try:
            with ProcessPoolExecutor(max_workers=min(self.workers, total), initializer=_init_worker) as executor:
                futures = [executor.submit(run_block, task) for task in tasks]
                for done, future in enumerate(as_completed(futures), start=1):
                    future.result()
                    self._say(f"  block {done}/{total} done")
        except (PermissionError, OSError) as exc:
            logger.warning("parallel execution unavailable (%s); falling back to one process", exc)
            for task in tasks:
                if not Path(task[-1]).exists():
                    run_block(task)

    def _divergence(self, ensemble: EnsembleBlock) -> dict:
        mask = np.asarray(ensemble.diverged, dtype=bool)
        n_diverged = int(mask.sum())
        return {
            'n_diverged': n_diverged,
            'fraction': ensemble.divergence_fraction,
            'max_fraction': float(getattr(settings, 'DIVERGENCE_MAX_FRACTION', 0.10)),
            'first_k': int(ensemble.divergence_k[mask].min()) if n_diverged else None,
            'chain_ids': ensemble.chain_ids[mask][:20].tolist(),
        }

    def _analyse(self, curve):
        cfg = self.config
        notes = []
        burn_in = cfg.burn_in_theta if cfg.burn_in_theta is not None else default_burn_in(self.cooling)
        fit = None
        try:
            result = fit_decay(curve, burn_in)
            fit = result.to_dict()
            notes.extend(result.notes)
        except InsufficientDataError as exc:
            notes.append(f"decay fit skipped: {exc}")
        bound = None
        if self.rate is not None:
            bound = theoretical_bound_check(curve, self.rate, cfg.epsilon, burn_in).to_dict()
        else:
            notes.append("E does not exceed E*: no decay rate applies, bound check skipped")
        return fit, bound, notes

    # ------------------------------------------------------------------
    # run registry
    # ------------------------------------------------------------------

    def _register(self, run_dir: RunDirectory, echo: dict) -> Optional[ExperimentRun]:
        if not self.record:
            return None
        run, _ = ExperimentRun.objects.update_or_create(
            run_id=self.run_id,
            defaults={
                'command': 'anneal',
                'landscape_id': self.config.landscape_id,
                'config': echo,
                'status': STATUS_INCOMPLETE,
                'output_dir': str(run_dir.root),
                'critical_depth': self.depth.critical_depth,
                'rate': self.rate,
                'fitted_slope': None,
                'bound_holds': None,
                'divergence_fraction': None,
                'content_hash': '',
                'finished_at': None,
            },
        )
        return run

    def _finish(self, run: Optional[ExperimentRun], result: ExperimentResult, finished):
        if run is None:
            return
        run.status = result.status
        run.fitted_slope = result.fit['slope'] if result.fit else None
        run.bound_holds = result.bound_holds
        run.divergence_fraction = result.divergence['fraction']
        run.content_hash = result.content_hash
        run.finished_at = finished
        run.save()
