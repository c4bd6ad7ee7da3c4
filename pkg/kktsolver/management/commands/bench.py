"""
Benchmark sweep over the Cartesian product of k and beta.

Writes report.csv and bench_table.txt; a failing cell is recorded with
converged=false and does not stop the sweep.

Usage:
    python manage.py bench --config poisson_table.json --out-dir results/table
"""

from kktsolver.exceptions import KKTSolverError
from kktsolver.export_service import ReportWriter
from kktsolver.management.base import KKTCommand
from kktsolver.services import KKTRunService


class Command(KKTCommand):
    help = 'Run a (k, beta) sweep and print the iteration/timing table'

    def handle(self, *args, **options):
        config = self.load_config(options)
        service = KKTRunService(config)
        cells = service.cells()
        self.stdout.write(f'Running {len(cells)} cell(s) for problem {config.problem}...')

        try:
            results = service.run_sweep()
        except KKTSolverError as exc:
            self.fail(exc)

        writer = ReportWriter(self.output_dir(options, config))
        writer.write_report(results)
        for result in results:
            if result.error is None:
                writer.write_residuals(result)
        writer.write_bench_table(results)
        if self.export_requested(options, config) and results[0].system is not None:
            writer.export_system(results[0].system)

        self.stdout.write(writer.bench_table(results))
        failed = [r for r in results if not r.converged]
        if failed:
            self.stdout.write(self.style.WARNING(
                f'{len(failed)} of {len(results)} cell(s) did not converge: '
                + ', '.join(r.cell.name for r in failed)
            ))
        else:
            self.stdout.write(self.style.SUCCESS(f'All {len(results)} cell(s) converged'))
        self.stdout.write(f'Results written to {writer.out_dir}')
