"""
Solve one KKT system and write its report row and residual history.

Usage:
    python manage.py solve --config poisson.json
    python manage.py solve --config poisson.json --out-dir results/poisson --export-mm
"""

from django.core.management.base import CommandError

from kktsolver.exceptions import KKTSolverError
from kktsolver.export_service import ReportWriter
from kktsolver.management.base import EXIT_NOT_CONVERGED, KKTCommand
from kktsolver.services import KKTRunService


class Command(KKTCommand):
    help = 'Solve the KKT system of the first configured cell with preconditioned GMRES'

    def handle(self, *args, **options):
        config = self.load_config(options)
        service = KKTRunService(config)

        try:
            result = service.run_first()
        except KKTSolverError as exc:
            self.fail(exc)

        writer = ReportWriter(self.output_dir(options, config))
        writer.write_report([result])
        writer.write_residuals(result)
        if result.picard is not None:
            writer.write_nonlinear(result)
        if self.export_requested(options, config):
            writer.export_system(result.system)

        report = result.report
        summary = (f'{result.cell.name}: {report.iterations} iterations, '
                   f'relative residual {report.final_residual:.3e}, '
                   f'setup {report.setup_seconds:.3f}s, solve {report.solve_seconds:.3f}s')
        if not report.converged:
            self.stdout.write(self.style.WARNING(f'Not converged - {summary}'))
            raise CommandError(f'{result.cell.name} did not converge', returncode=EXIT_NOT_CONVERGED)

        self.stdout.write(self.style.SUCCESS(f'Converged - {summary}'))
        self.stdout.write(f'Results written to {writer.out_dir}')
