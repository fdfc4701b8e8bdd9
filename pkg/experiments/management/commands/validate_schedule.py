"""
Check a step-size schedule against the annealing conditions.
Usage: python manage.py validate_schedule --theta 0.75
       python manage.py validate_schedule --landscape triple_well --theta 0.5 --E-multiplier 2
"""
from experiments.runner import schedule_check
from schedules.schedules import StepSchedule
from ._base import LabCommand


class Command(LabCommand):
    help = 'Verdict on Theta_k -> inf, eta_{k+1} Theta_k -> 0 and the technical condition (JSON)'

    def add_command_arguments(self, parser):
        self.add_landscape_arguments(parser)
        self.add_schedule_arguments(parser)

    def run(self, **options):
        cfg = self.load(options, self.schedule_overrides(options))
        land, _, depth = self.landscape_and_depth(cfg)
        e_star = depth.critical_depth
        E = cfg.resolve_E(e_star)
        ss = StepSchedule(eta0=cfg.resolve_eta0(land), theta=cfg.theta)
        report = schedule_check(ss, e_star, E, cfg.horizon)
        self.emit({'critical_depth': e_star, 'E': E, **report}, options.get('out'))
        self.stderr.write(f"theta={cfg.theta:g}: {report['verdict']}")
