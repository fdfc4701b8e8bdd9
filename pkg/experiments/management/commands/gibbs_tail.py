"""
Tail mass of the Gibbs measure exp(-f / tau) above a level.
Usage: python manage.py gibbs_tail --landscape quadratic --tau 1 --delta 0.5
       python manage.py gibbs_tail --tau 0.1 0.05 0.02 --laplace
"""
import math

from analysis.quadrature import gibbs_tail_quadrature, laplace_check
from depth.grid import discretize
from landscapes.catalog import get_landscape
from ._base import LabCommand


class Command(LabCommand):
    help = 'P(f > delta) under the Gibbs measure at each temperature, by quadrature (JSON)'

    def add_command_arguments(self, parser):
        self.add_landscape_arguments(parser)
        parser.add_argument('--tau', type=float, nargs='+', required=True, help='Temperatures')
        parser.add_argument('--delta', type=float, help='Level delta')
        parser.add_argument(
            '--laplace',
            action='store_true',
            help='Also fit ln Z_tau against ln tau (expected slope d/2)'
        )

    def run(self, **options):
        extra = {'delta': options['delta']} if options.get('delta') is not None else None
        cfg = self.load(options, extra)
        land = get_landscape(cfg.landscape_id, cfg.landscape_params)
        grid = discretize(land, cfg.grid_shape(land.dim))
        rows = []
        for tau in options['tau']:
            p = gibbs_tail_quadrature(grid, tau, cfg.delta)
            rows.append({
                'tau': tau,
                'p': p,
                'minus_tau_log_p': -tau * math.log(p) if p > 0 else None,
            })
        data = {
            'landscape': {'id': cfg.landscape_id, 'params': land.params},
            'cells': list(grid.shape),
            'delta': cfg.delta,
            'rows': rows,
        }
        if options['laplace']:
            data['laplace'] = laplace_check(grid).to_dict()
        self.emit(data, options.get('out'))
