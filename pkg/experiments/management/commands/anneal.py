"""
Run an annealing experiment end to end.
Usage: python manage.py anneal
       python manage.py anneal --config run.json --workers 4 --out runs/a5
       python manage.py anneal --E-multiplier 0.5 --force
       python manage.py anneal --out runs/a5 --resume
"""
import json

from annealab.exceptions import InvalidInputError
from experiments.runner import ExperimentRunner
from experiments.storage import STATUS_FAILED
from ._base import ExperimentFailed, LabCommand


def parse_checkpoints_flag(value: str):
    """'geometric(2, 20)', a JSON list or comma-separated iterations."""
    value = value.strip()
    if value.startswith('geometric'):
        return value
    try:
        if value.startswith('['):
            return json.loads(value)
        return [int(v) for v in value.split(',') if v.strip()]
    except ValueError:
        raise InvalidInputError(f"cannot parse --checkpoints '{value}'") from None


class Command(LabCommand):
    help = 'Run chains, estimate the tail curve, fit its decay and check the bound'

    def add_command_arguments(self, parser):
        self.add_landscape_arguments(parser)
        self.add_schedule_arguments(parser)
        parser.add_argument('--delta', type=float, help='Tail level: P(f(x_k) > delta)')
        parser.add_argument('--n-chains', type=int, dest='n_chains', help='Number of chains')
        parser.add_argument('--checkpoints', type=str, help="'geometric(base, count)' or a list of iterations")
        parser.add_argument('--process', type=str, choices=['discrete', 'continuous'], help='Chain engine')
        parser.add_argument('--dt', type=float, help='Euler step of the continuous process')
        parser.add_argument('--mu0', type=str, help='Initial law as a JSON object')
        parser.add_argument('--epsilon', type=float, help='Slack in the bound exponent')
        parser.add_argument('--burn-in-theta', type=float, dest='burn_in_theta', help='Fit only rows with Theta >= this')
        parser.add_argument(
            '--resume',
            action='store_true',
            help='Reuse finished chain blocks of an earlier run with the same config'
        )

    def run(self, **options):
        extra = self.schedule_overrides(options)
        for key in ('delta', 'n_chains', 'process', 'dt', 'epsilon', 'burn_in_theta'):
            if options.get(key) is not None:
                extra[key] = options[key]
        if options.get('checkpoints'):
            extra['checkpoints'] = parse_checkpoints_flag(options['checkpoints'])
        if options.get('mu0'):
            try:
                extra['mu0'] = json.loads(options['mu0'])
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"--mu0 must be a JSON object: {exc}") from None
        if options.get('out'):
            extra['output_dir'] = options['out']
        cfg = self.load(options, extra)

        runner = ExperimentRunner(
            cfg,
            workers=options.get('workers'),
            force=options['force'],
            resume=options['resume'],
            progress=self.stdout.write,
        )
        result = runner.run()

        self.stdout.write(f"Output: {result.output_dir}")
        self.stdout.write(f"E*={result.critical_depth:.6g}  E={result.E:.6g}  rate={result.rate}")
        if result.fit:
            self.stdout.write(
                f"fitted slope {result.fit['slope']:.4g} (r^2={result.fit['r_squared']:.3f}, "
                f"{result.fit['n_points']} rows)"
            )
        for note in result.notes:
            self.stdout.write(self.style.WARNING(note))
        if result.status == STATUS_FAILED:
            raise ExperimentFailed(
                f"run failed: {result.divergence['n_diverged']} chains diverged "
                f"({result.divergence['fraction']:.1%} > {result.divergence['max_fraction']:.0%})"
            )
        if result.bound_holds is False:
            raise ExperimentFailed(
                f"bound check failed at k={result.bound_check['violations']} "
                f"(exponent {result.bound_check['exponent']:.4g})"
            )
        self.stdout.write(self.style.SUCCESS(f"Run {result.run_id} complete (hash {result.content_hash[:12]})"))
