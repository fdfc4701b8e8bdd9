"""
Re-fit the decay of an existing tail.csv.
Usage: python manage.py fit --tail runs/a5/tail.csv
       python manage.py fit --tail tail.csv --delta 0.3 --rate 0.1667 --epsilon 0.05
"""
from pathlib import Path

from analysis.tails import TailCurve, default_burn_in, fit_decay, theoretical_bound_check
from annealab.exceptions import InvalidInputError
from experiments.config import ExperimentConfig
from experiments.storage import RunDirectory, read_json
from ._base import ExperimentFailed, LabCommand


class Command(LabCommand):
    help = 'Log-log decay fit (and optional bound check) of a tail curve (JSON)'

    def add_command_arguments(self, parser):
        parser.add_argument('--tail', type=str, required=True, help='Path of a tail.csv')
        parser.add_argument('--delta', type=float, help='Level of the curve (default: from the run config)')
        parser.add_argument('--burn-in-theta', type=float, dest='burn_in_theta', help='Fit only rows with Theta >= this')
        parser.add_argument('--rate', type=float, help='Bound exponent (default: from the run fit.json)')
        parser.add_argument('--epsilon', type=float, help='Slack in the bound exponent')

    def run(self, **options):
        tail = Path(options['tail'])
        if not tail.exists():
            raise InvalidInputError(f"{tail} does not exist")
        run_dir = RunDirectory(tail.parent)
        cfg = None
        if run_dir.path(run_dir.CONFIG).exists():
            cfg = ExperimentConfig.from_dict(read_json(run_dir.path(run_dir.CONFIG)))
        stored = read_json(run_dir.path(run_dir.FIT)) if run_dir.path(run_dir.FIT).exists() else {}

        delta = options.get('delta') or (cfg.delta if cfg else None)
        if delta is None:
            raise InvalidInputError("--delta is required outside a run directory")
        burn_in = options.get('burn_in_theta')
        if burn_in is None and cfg is not None:
            burn_in = cfg.burn_in_theta if cfg.burn_in_theta is not None else default_burn_in(cfg)
        rate = options.get('rate') if options.get('rate') is not None else stored.get('rate')
        epsilon = options.get('epsilon') or (cfg.epsilon if cfg else 0.05)

        curve = TailCurve.from_csv(tail, delta, cfg.ci_level if cfg else 0.95)
        data = {'tail': str(tail), 'delta': delta, 'burn_in_theta': burn_in}
        data['fit'] = fit_decay(curve, burn_in).to_dict()
        check = None
        if rate is not None:
            check = theoretical_bound_check(curve, rate, epsilon, burn_in)
            data.update({'rate': rate, 'epsilon': epsilon, 'bound_check': check.to_dict()})
        self.emit(data, options.get('out'))
        if check is not None and not check.holds:
            raise ExperimentFailed(f"bound check failed at k={check.violations}")
