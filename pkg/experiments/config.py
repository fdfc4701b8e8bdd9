"""
Experiment configuration.

An ExperimentConfig is built from three layers, later ones winning:
settings.ANNEAL_DEFAULTS, an optional JSON file (--config) and the
command-line flags. Its to_dict() is the config echo written to
config.json; from_dict(to_dict()) gives back an equal config.
"""
import copy
import dataclasses
import json
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from django.conf import settings

from annealab.exceptions import InvalidInputError
from dynamics.chains import InitialDistribution
from landscapes.assumptions import estimate_lipschitz
from landscapes.catalog import Landscape
from schedules.schedules import ConstantStep, CoolingSchedule, StepSchedule

logger = logging.getLogger(__name__)

GEOMETRIC = re.compile(r'^\s*geometric\(\s*([0-9.eE+-]+)\s*,\s*(\d+)\s*\)\s*$')
PROCESSES = ('discrete', 'continuous')
TOP_LEVEL_KEYS = (
    'landscape', 'cells', 'cooling', 'steps', 'process', 'dt', 'delta', 'n_chains',
    'checkpoints', 'seed', 'mu0', 'output_dir', 'epsilon', 'ci_level', 'horizon', 'burn_in_theta',
)
LIPSCHITZ_SAMPLES = 512


def parse_checkpoints(value) -> List[int]:
    """A list of iterations, or 'geometric(base, count)' for base^1 .. base^count."""
    if isinstance(value, str):
        match = GEOMETRIC.match(value)
        if not match:
            raise InvalidInputError(f"checkpoints must be a list or 'geometric(base, count)', got '{value}'")
        base, count = float(match.group(1)), int(match.group(2))
        if not base > 1.0 or count < 1:
            raise InvalidInputError(f"geometric checkpoints need base > 1 and count >= 1, got {value}")
        # rounding may merge the first few points of a small base
        ks = sorted({int(round(base ** i)) for i in range(1, count + 1)})
    else:
        try:
            ks = [int(k) for k in value]
        except (TypeError, ValueError):
            raise InvalidInputError(f"checkpoints must be integers, got {value!r}") from None
        if any(k != float(v) for k, v in zip(ks, value)):
            raise InvalidInputError(f"checkpoints must be integers, got {value!r}")
    if not ks or ks[0] < 1 or any(b <= a for a, b in zip(ks, ks[1:])):
        raise InvalidInputError(f"checkpoints must be strictly increasing iterations >= 1, got {value!r}")
    return ks


def merge(base: dict, override: dict) -> dict:
    """Recursive dict overlay; switching the landscape id replaces its params too."""
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key == 'mu0':
            out[key] = copy.deepcopy(value)
            continue
        if key == 'landscape' and isinstance(value, dict) and 'id' in value:
            if value['id'] != (out.get('landscape') or {}).get('id'):
                out['landscape'] = {'id': value['id'], 'params': copy.deepcopy(value.get('params') or {})}
                continue
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _number(name: str, value, positive: bool = True) -> float:
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise InvalidInputError(f"{name} must be a number, got {value!r}") from None
    if not math.isfinite(value) or (positive and not value > 0):
        raise InvalidInputError(f"{name} must be a positive finite number, got {value}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    landscape_id: str = 'double_well'
    landscape_params: Dict[str, Any] = dataclasses.field(default_factory=dict)
    cells: Optional[Union[int, Tuple[int, ...]]] = None
    E: Optional[float] = None
    E_multiplier: Optional[float] = 1.5
    t_offset: float = math.e
    eta0: Union[float, str] = 'auto'
    theta: float = 0.75
    process: str = 'discrete'
    dt: float = 0.01
    delta: float = 0.3
    n_chains: int = 10000
    checkpoints: Union[str, Tuple[int, ...]] = 'geometric(2, 20)'
    seed: int = 0
    mu0: Dict[str, Any] = dataclasses.field(default_factory=lambda: {'kind': 'point_mass', 'at': 'dominating_minimum'})
    output_dir: Optional[str] = None
    epsilon: float = 0.05
    ci_level: float = 0.95
    horizon: int = 10 ** 6
    burn_in_theta: Optional[float] = None

    def __post_init__(self):
        def put(name, value):
            object.__setattr__(self, name, value)

        if not isinstance(self.landscape_id, str) or not self.landscape_id:
            raise InvalidInputError("landscape id must be a non-empty string")
        put('landscape_params', dict(self.landscape_params or {}))
        if self.cells is not None:
            cells = self.cells
            if isinstance(cells, (list, tuple)):
                put('cells', tuple(int(n) for n in cells))
            else:
                put('cells', int(cells))
        if self.E is not None:
            put('E', _number('E', self.E))
        elif self.E_multiplier is None:
            raise InvalidInputError("cooling needs E or E_multiplier")
        if self.E_multiplier is not None:
            put('E_multiplier', _number('E_multiplier', self.E_multiplier))
        put('t_offset', _number('t_offset', self.t_offset))
        if self.eta0 != 'auto':
            put('eta0', _number('eta0', self.eta0))
        theta = _number('theta', self.theta)
        if theta > 1.0:
            raise InvalidInputError(f"theta must lie in (0, 1], got {theta}")
        put('theta', theta)
        if self.process not in PROCESSES:
            raise InvalidInputError(f"process must be one of {PROCESSES}, got '{self.process}'")
        put('dt', _number('dt', self.dt))
        put('delta', _number('delta', self.delta))
        if int(self.n_chains) != self.n_chains or int(self.n_chains) < 1:
            raise InvalidInputError(f"n_chains must be a positive integer, got {self.n_chains}")
        put('n_chains', int(self.n_chains))
        if not isinstance(self.checkpoints, str):
            put('checkpoints', tuple(parse_checkpoints(self.checkpoints)))
        else:
            parse_checkpoints(self.checkpoints)
        if int(self.seed) != self.seed or int(self.seed) < 0:
            raise InvalidInputError(f"seed must be a nonnegative integer, got {self.seed}")
        put('seed', int(self.seed))
        put('mu0', InitialDistribution.from_dict(self.mu0 or {}).to_dict())
        if self.output_dir is not None:
            put('output_dir', str(self.output_dir))
        put('epsilon', _number('epsilon', self.epsilon))
        ci = _number('ci_level', self.ci_level)
        if not ci < 1.0:
            raise InvalidInputError(f"ci_level must lie in (0, 1), got {ci}")
        put('ci_level', ci)
        if int(self.horizon) < 10 ** 3:
            raise InvalidInputError(f"horizon must be at least 1000, got {self.horizon}")
        put('horizon', int(self.horizon))
        if self.burn_in_theta is not None:
            put('burn_in_theta', _number('burn_in_theta', self.burn_in_theta, positive=False))

    # ------------------------------------------------------------------
    # echo
    # ------------------------------------------------------------------

    @classmethod
    def from_dict(cls, data: dict) -> 'ExperimentConfig':
        unknown = set(data) - set(TOP_LEVEL_KEYS)
        if unknown:
            raise InvalidInputError(f"unknown config keys {sorted(unknown)}")
        landscape = data.get('landscape') or {}
        cooling = data.get('cooling') or {}
        steps = data.get('steps') or {}
        defaults = cls.__dataclass_fields__
        kwargs = {
            'landscape_id': landscape.get('id', defaults['landscape_id'].default),
            'landscape_params': landscape.get('params') or {},
            'cells': data.get('cells'),
            'E': cooling.get('E'),
            'E_multiplier': cooling.get('E_multiplier'),
            't_offset': cooling.get('t_offset', math.e),
            'eta0': steps.get('eta0', 'auto'),
            'theta': steps.get('theta', defaults['theta'].default),
        }
        for key in ('process', 'dt', 'delta', 'n_chains', 'checkpoints', 'seed', 'mu0',
                    'output_dir', 'epsilon', 'ci_level', 'horizon', 'burn_in_theta'):
            if key in data:
                kwargs[key] = data[key]
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            'landscape': {'id': self.landscape_id, 'params': dict(self.landscape_params)},
            'cells': list(self.cells) if isinstance(self.cells, tuple) else self.cells,
            'cooling': {'E': self.E, 'E_multiplier': self.E_multiplier, 't_offset': self.t_offset},
            'steps': {'eta0': self.eta0, 'theta': self.theta},
            'process': self.process,
            'dt': self.dt,
            'delta': self.delta,
            'n_chains': self.n_chains,
            'checkpoints': self.checkpoints if isinstance(self.checkpoints, str) else list(self.checkpoints),
            'seed': self.seed,
            'mu0': dict(self.mu0),
            'output_dir': self.output_dir,
            'epsilon': self.epsilon,
            'ci_level': self.ci_level,
            'horizon': self.horizon,
            'burn_in_theta': self.burn_in_theta,
        }

    def replace(self, **changes) -> 'ExperimentConfig':
        return dataclasses.replace(self, **changes)

    # ------------------------------------------------------------------
    # derived objects
    # ------------------------------------------------------------------

    def checkpoint_list(self) -> List[int]:
        return parse_checkpoints(self.checkpoints)

    def grid_shape(self, dim: int) -> Union[int, Tuple[int, ...]]:
        if self.cells is not None:
            return self.cells
        return getattr(settings, 'DEPTH_GRID_CELLS', {}).get(dim, 128)

    def resolve_E(self, e_star: float) -> float:
        if self.E is not None:
            return self.E
        if not e_star > 0:
            raise InvalidInputError(
                f"E_multiplier needs a positive critical depth (E*={e_star:g}); set cooling.E explicitly"
            )
        return self.E_multiplier * e_star

    def check_cooling(self, E: float, e_star: float, force: bool = False):
        """E must exceed E* for any decay guarantee; --force runs the trapped regime anyway."""
        if E > e_star or force:
            if not E > e_star:
                logger.warning("E=%g does not exceed E*=%g; running anyway (forced)", E, e_star)
            return
        raise InvalidInputError(
            f"E={E:g} does not exceed the critical depth E*={e_star:g}; raise E_multiplier above 1 or pass --force"
        )

    def cooling_schedule(self, E: float) -> CoolingSchedule:
        return CoolingSchedule(E=E, t_offset=self.t_offset)

    def resolve_eta0(self, land: Landscape) -> float:
        if self.eta0 != 'auto':
            return self.eta0
        lipschitz = estimate_lipschitz(land, LIPSCHITZ_SAMPLES, self.seed)
        if not lipschitz > 0:
            raise InvalidInputError(f"cannot pick eta0 automatically: gradient of {land.name} looks constant")
        eta0 = 1.0 / lipschitz
        logger.info("eta0=auto: 1/L with L~%.4g gives eta0=%.4g", lipschitz, eta0)
        return eta0

    def step_schedule(self, land: Landscape):
        if self.process == 'continuous':
            return ConstantStep(self.dt)
        return StepSchedule(eta0=self.resolve_eta0(land), theta=self.theta)

    def initial_distribution(self) -> InitialDistribution:
        return InitialDistribution.from_dict(self.mu0)


def read_config_file(path: Union[str, Path]) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise InvalidInputError(f"config file {path} does not exist") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise InvalidInputError(f"config file {path} must hold a JSON object")
    return data


def load_config(path: Optional[Union[str, Path]] = None, overrides: Optional[dict] = None) -> ExperimentConfig:
    """settings.ANNEAL_DEFAULTS, then the JSON file, then explicit overrides."""
    layered = copy.deepcopy(getattr(settings, 'ANNEAL_DEFAULTS', {}))
    if path:
        layered = merge(layered, read_config_file(path))
    if overrides:
        layered = merge(layered, overrides)
    return ExperimentConfig.from_dict(layered)
