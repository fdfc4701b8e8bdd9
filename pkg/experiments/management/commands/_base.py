"""
Shared flags, config layering and exit codes of the laboratory commands.

Exit codes: 0 success, 1 experiment-level failure, 2 invalid input.
"""
import json
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from annealab.exceptions import (
    AnnealabError, DegenerateInputError, DomainExceededError, InsufficientDataError,
    InvalidInputError, ResourceError, UnsupportedError,
)
from depth.grid import discretize
from depth.watershed import critical_depth
from experiments.config import ExperimentConfig, load_config, merge
from experiments.storage import atomic_write_text, dumps
from landscapes.catalog import get_landscape

INPUT_ERRORS = (
    InvalidInputError, DomainExceededError, UnsupportedError, ResourceError,
    DegenerateInputError, InsufficientDataError,
)


class ExperimentFailed(AnnealabError):
    """The command ran, but its experiment-level check did not pass."""


class LabCommand(BaseCommand):
    """Base for the laboratory commands; subclasses implement run(**options)."""

    def add_arguments(self, parser):
        parser.add_argument(
            '--config',
            type=str,
            help='JSON config file layered over settings.ANNEAL_DEFAULTS'
        )
        parser.add_argument(
            '--seed',
            type=int,
            help='Master seed'
        )
        parser.add_argument(
            '--out',
            type=str,
            help='Output file (JSON commands) or run directory (anneal)'
        )
        parser.add_argument(
            '--workers',
            type=int,
            help='Worker processes (default: settings.DEFAULT_WORKERS)'
        )
        parser.add_argument(
            '--force',
            action='store_true',
            help='Run even when E <= E* or the schedule verdict is not valid'
        )
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def add_landscape_arguments(self, parser):
        parser.add_argument(
            '--landscape',
            type=str,
            help='Catalog landscape id (quadratic, double_well, triple_well, double_well_2d)'
        )
        parser.add_argument(
            '--a',
            type=float,
            help='Tilt of the double wells'
        )
        parser.add_argument(
            '--params',
            type=str,
            help='Landscape parameters as a JSON object'
        )
        parser.add_argument(
            '--cells',
            type=int,
            nargs='+',
            help='Depth grid cells: one value for every axis or one per axis'
        )

    def add_schedule_arguments(self, parser):
        parser.add_argument('--theta', type=float, help='Step exponent: eta_k = eta0 k^-theta')
        parser.add_argument('--eta0', type=str, help="Initial step size or 'auto' (1 / Lipschitz estimate)")
        parser.add_argument('--E', type=float, dest='E', help='Cooling constant E')
        parser.add_argument('--E-multiplier', type=float, dest='E_multiplier', help='E as a multiple of E*')
        parser.add_argument('--t-offset', type=float, dest='t_offset', help='Cooling offset (at least e)')
        parser.add_argument('--horizon', type=int, help='Last iteration of the sampled schedule trends')

    def schedule_overrides(self, options) -> dict:
        out = {}
        if options.get('theta') is not None:
            out.setdefault('steps', {})['theta'] = options['theta']
        eta0 = options.get('eta0')
        if eta0 is not None:
            if eta0 != 'auto':
                try:
                    eta0 = float(eta0)
                except ValueError:
                    raise InvalidInputError(f"--eta0 must be a number or 'auto', got '{eta0}'") from None
            out.setdefault('steps', {})['eta0'] = eta0
        if options.get('E') is not None:
            out.setdefault('cooling', {})['E'] = options['E']
        if options.get('E_multiplier') is not None:
            out.setdefault('cooling', {}).update({'E': None, 'E_multiplier': options['E_multiplier']})
        if options.get('t_offset') is not None:
            out.setdefault('cooling', {})['t_offset'] = options['t_offset']
        if options.get('horizon') is not None:
            out['horizon'] = options['horizon']
        return out

    def handle(self, *args, **options):
        try:
            self.run(**options)
        except ExperimentFailed as exc:
            raise CommandError(str(exc), returncode=1) from exc
        except INPUT_ERRORS as exc:
            raise CommandError(str(exc), returncode=2) from exc
        except AnnealabError as exc:
            raise CommandError(str(exc), returncode=1) from exc

    def run(self, **options):
        raise NotImplementedError

    # ------------------------------------------------------------------

    def overrides(self, options) -> dict:
        """Config overrides from the landscape flags and --seed."""
        out = {}
        landscape = {}
        if options.get('landscape'):
            landscape['id'] = options['landscape']
        params = {}
        if options.get('params'):
            try:
                params.update(json.loads(options['params']))
            except (json.JSONDecodeError, TypeError, ValueError) as exc:
                raise InvalidInputError(f"--params must be a JSON object: {exc}") from None
        if options.get('a') is not None:
            params['a'] = options['a']
        if params:
            landscape['params'] = params
        if landscape:
            out['landscape'] = landscape
        cells = options.get('cells')
        if cells:
            out['cells'] = cells[0] if len(cells) == 1 else list(cells)
        if options.get('seed') is not None:
            out['seed'] = options['seed']
        return out

    def load(self, options, extra=None) -> ExperimentConfig:
        overrides = self.overrides(options)
        if extra:
            overrides = merge(overrides, extra)
        return load_config(options.get('config'), overrides)

    def landscape_and_depth(self, cfg: ExperimentConfig):
        land = get_landscape(cfg.landscape_id, cfg.landscape_params)
        shape = cfg.grid_shape(land.dim)
        grid = discretize(land, shape)
        return land, grid, critical_depth(grid)

    def emit(self, data, out=None):
        """JSON to stdout, and to --out when given."""
        text = dumps(data)
        if out:
            path = Path(out)
            path.parent.mkdir(parents=True, exist_ok=True)
            atomic_write_text(path, text)
            self.stderr.write(f"Saved to {path}")
        self.stdout.write(text, ending='')
