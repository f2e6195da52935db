import math

from django.core.management.base import BaseCommand

from sensing.services.experiments import MAP_KINDS, run_analyze

from ._common import guarded


class Command(BaseCommand):
    help = 'Wigner grids, photon-number histograms and symplectic transform checks'

    def add_arguments(self, parser):
        sub = parser.add_subparsers(dest='subcommand', required=True)

        for name in ('wigner', 'photon-dist'):
            p = sub.add_parser(name)
            p.add_argument('--record', type=str, help='Run id, run directory or record/params file')
            p.add_argument('--state', type=str, help='vacuum | fock:N | coherent:A | squeezed:R | on:N:W')
            p.add_argument('--mode', type=int, default=0, help='Qumode to analyse')
            p.add_argument('--cutoff', type=int, help='Fock cutoff for --state')
            p.add_argument('--out', type=str, help='Output directory')
            if name == 'wigner':
                p.add_argument('--q-range', type=float, nargs=2, default=(-5.0, 5.0))
                p.add_argument('--p-range', type=float, nargs=2, default=(-5.0, 5.0))
                p.add_argument('--resolution', type=int, default=101)

        p = sub.add_parser('transform-check')
        p.add_argument('--map', dest='kind', choices=MAP_KINDS, required=True)
        p.add_argument('--theta', type=float, default=math.pi / 5)
        p.add_argument('--r', type=float, default=0.4)
        p.add_argument('--a', type=float, default=1.5)
        p.add_argument('--b', type=float, default=0.6)
        p.add_argument('--epsilon', type=float, default=0.5)
        p.add_argument('--out', type=str, help='Output directory')

    def handle(self, *args, **options):
        subcommand = options['subcommand']
        if subcommand == 'transform-check':
            keys = ('kind', 'out', 'theta', 'r', 'a', 'b', 'epsilon')
        elif subcommand == 'wigner':
            keys = ('record', 'state', 'out', 'mode', 'cutoff', 'q_range', 'p_range', 'resolution')
        else:
            keys = ('record', 'state', 'out', 'mode', 'cutoff')
        path = guarded(lambda: run_analyze(subcommand, **{k: options[k] for k in keys}))
        self.stdout.write(self.style.SUCCESS(f"Wrote {path}"))
