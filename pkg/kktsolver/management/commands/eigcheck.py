"""
Dense spectrum check of the matching Schur complement approximation.

Exits 0 when every eigenvalue of S^{-1} S lies in [1/2 - 1e-6, 1 + 1e-6], 2 otherwise.

Usage:
    python manage.py eigcheck --config poisson_small.json
"""

from django.core.management.base import CommandError

from kktsolver.exceptions import KKTSolverError
from kktsolver.export_service import ReportWriter
from kktsolver.management.base import EXIT_NOT_CONVERGED, KKTCommand
from kktsolver.services import KKTRunService

LOWER = 0.5
UPPER = 1.0
SLACK = 1e-6


class Command(KKTCommand):
    help = 'Compute the dense spectrum of the preconditioned Schur complement'

    def handle(self, *args, **options):
        config = self.load_config(options)
        service = KKTRunService(config)

        try:
            cell, eigenvalues = service.spectrum()
        except KKTSolverError as exc:
            self.fail(exc)

        writer = ReportWriter(self.output_dir(options, config))
        writer.write_eigenvalues(cell, eigenvalues)

        lo, hi = float(eigenvalues[0]), float(eigenvalues[-1])
        self.stdout.write(f'{cell.name}: {eigenvalues.size} eigenvalues')
        self.stdout.write(f'min = {lo:.10f}')
        self.stdout.write(f'max = {hi:.10f}')

        if lo < LOWER - SLACK or hi > UPPER + SLACK:
            self.stdout.write(self.style.WARNING(
                f'Spectrum [{lo:.6f}, {hi:.6f}] is outside [{LOWER}, {UPPER}]'
            ))
            raise CommandError(f'{cell.name}: spectrum outside [{LOWER}, {UPPER}]',
                               returncode=EXIT_NOT_CONVERGED)
        self.stdout.write(self.style.SUCCESS(f'Spectrum contained in [{LOWER}, {UPPER}]'))
