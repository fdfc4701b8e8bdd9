"""
Spectral gap of the 1-D Langevin generator and the barrier fit.
Usage: python manage.py spectral --landscape quadratic --taus 1.0
       python manage.py spectral --landscape double_well --taus 0.15 0.125 0.1 0.075 0.05
"""
from analysis.spectral import eyring_kramers_fit, spectral_gap_1d
from annealab.exceptions import UnsupportedError
from landscapes.catalog import get_landscape
from ._base import LabCommand

DEFAULT_TAUS = [0.15, 0.125, 0.1, 0.075, 0.05]


class Command(LabCommand):
    help = 'lambda_1(tau) of the generator; with several temperatures, the fitted barrier vs E* (JSON)'

    def add_command_arguments(self, parser):
        self.add_landscape_arguments(parser)
        parser.add_argument('--taus', type=float, nargs='+', default=DEFAULT_TAUS, help='Temperatures, decreasing')
        parser.add_argument(
            '--spectral-cells',
            type=int,
            dest='spectral_cells',
            default=2048,
            help='Cells of the generator discretization (default: 2048)'
        )

    def run(self, **options):
        cfg = self.load(options)
        land = get_landscape(cfg.landscape_id, cfg.landscape_params)
        if land.dim != 1:
            raise UnsupportedError(f"spectral gaps are computed for 1-D landscapes only, got dimension {land.dim}")
        n_cells = options['spectral_cells']
        taus = options['taus']
        data = {'landscape': {'id': cfg.landscape_id, 'params': land.params}, 'cells': n_cells}
        if len(taus) == 1:
            data.update({'tau': taus[0], 'gap': spectral_gap_1d(land, taus[0], n_cells)})
        else:
            _, _, depth = self.landscape_and_depth(cfg)
            report = eyring_kramers_fit(land, taus, n_cells, e_star=depth.critical_depth)
            data.update(report.to_dict())
            for note in report.notes:
                self.stderr.write(note)
        self.emit(data, options.get('out'))
