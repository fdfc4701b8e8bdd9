"""
Critical depth of a catalog landscape.
Usage: python manage.py depth --landscape double_well --a 0.2 --cells 16384
       python manage.py depth --landscape double_well_2d --cells 400 250 --assumptions
"""
from landscapes.assumptions import check_growth_assumption
from ._base import LabCommand

GROWTH_SAMPLES = 256


class Command(LabCommand):
    help = 'Minima, saddle heights and critical depth E* of a landscape (JSON)'

    def add_command_arguments(self, parser):
        self.add_landscape_arguments(parser)
        parser.add_argument(
            '--assumptions',
            action='store_true',
            help='Also report the growth ratio, Hessian lower bound and Lipschitz estimate'
        )

    def run(self, **options):
        cfg = self.load(options)
        land, grid, report = self.landscape_and_depth(cfg)
        data = {
            'landscape': {'id': cfg.landscape_id, 'params': land.params},
            'cells': list(grid.shape),
            **report.to_dict(),
        }
        if land.analytic_depth is not None:
            data['analytic_depth'] = land.analytic_depth
        if options['assumptions']:
            # largest sphere inside the domain box
            radius = 0.9 * min(min(-lo for lo in land.lo), min(land.hi))
            data['assumptions'] = check_growth_assumption(land, radius, GROWTH_SAMPLES, cfg.seed).to_dict()
        self.emit(data, options.get('out'))
