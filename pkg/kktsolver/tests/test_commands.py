import json
from io import StringIO
from pathlib import Path
from tempfile import TemporaryDirectory

import pandas as pd
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, override_settings

from kktsolver.sparse_linalg import read_matrix_market, read_vector


class CommandTestCase(SimpleTestCase):

    def setUp(self):
        self._tmp = TemporaryDirectory()
        self.tmp = Path(self._tmp.name)
        self.out = self.tmp / 'out'

    def tearDown(self):
        self._tmp.cleanup()

    def write_config(self, **fields) -> str:
        path = self.tmp / 'run.json'
        path.write_text(json.dumps(fields), encoding='utf-8')
        return str(path)

    def run_command(self, name, config, **options):
        stdout = StringIO()
        call_command(name, config=config, out_dir=str(self.out), stdout=stdout, **options)
        return stdout.getvalue()

    def report(self) -> pd.DataFrame:
        return pd.read_csv(self.out / 'report.csv', dtype=str)


class SolveCommandTests(CommandTestCase):

    def test_poisson(self):
        output = self.run_command('solve', self.write_config(problem='poisson', k=3, beta=1e-4))
        self.assertIn('Converged', output)

        header = (self.out / 'report.csv').read_text().splitlines()[0]
        self.assertEqual(header, 'problem,k,beta,n_t,scheme,iters,converged,setup_s,solve_s')
        report = self.report()
        self.assertEqual(len(report), 1)
        row = report.iloc[0]
        self.assertEqual(row['problem'], 'poisson')
        self.assertEqual(row['beta'], '0.0001')
        self.assertEqual(row['n_t'], '1')
        self.assertEqual(row['scheme'], 'stationary')
        self.assertEqual(row['converged'], 'true')
        self.assertLessEqual(int(row['iters']), 25)

        residuals = pd.read_csv(self.out / 'residuals_poisson_k3_beta0.0001_nt1_stationary.csv')
        self.assertEqual(list(residuals.columns), ['iter', 'residual'])
        self.assertEqual(len(residuals), int(row['iters']) + 1)

    def test_instationary(self):
        self.run_command('solve', self.write_config(problem='heat', k=2, n_t=4, scheme='backward_euler'))
        row = self.report().iloc[0]
        self.assertEqual(row['n_t'], '4')
        self.assertEqual(row['scheme'], 'backward_euler')
        self.assertEqual(row['converged'], 'true')

    def test_malformed_config_writes_nothing(self):
        config = self.write_config(problem='poisson', k=3, unknown_key=True)
        with self.assertRaises(CommandError) as ctx:
            self.run_command('solve', config)
        self.assertEqual(ctx.exception.returncode, 1)
        self.assertFalse(self.out.exists())

    def test_unknown_problem(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command('solve', self.write_config(problem='stokes'))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_unsupported_problem_parameter(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command('solve', self.write_config(problem='poisson', k=2, n_t=5))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_missing_config_file(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command('solve', str(self.tmp / 'missing.json'))
        self.assertEqual(ctx.exception.returncode, 1)

    def test_not_converged(self):
        config = self.write_config(problem='poisson', k=3, beta=1e-4, solver={'maxit': 1})
        with self.assertRaises(CommandError) as ctx:
            self.run_command('solve', config)
        self.assertEqual(ctx.exception.returncode, 2)
        row = self.report().iloc[0]
        self.assertEqual(row['converged'], 'false')
        self.assertEqual(row['iters'], '1')

    def test_export_matrix_market(self):
        self.run_command('solve', self.write_config(problem='poisson', k=2), export_mm=True)
        for name in ('A.mtx', 'B1t.mtx', 'B2.mtx', 'C.mtx'):
            self.assertTrue((self.out / name).read_text().startswith('%%MatrixMarket matrix coordinate real general'))
        A = read_matrix_market(self.out / 'A.mtx')
        rhs = read_vector(self.out / 'rhs.txt')
        self.assertEqual(rhs.shape, (2 * A.shape[0],))

    def test_nonlinear_run_writes_picard_history(self):
        self.run_command('solve', self.write_config(problem='semilinear', k=2, nonlinear=True))
        history = pd.read_csv(self.out / 'nonlinear_semilinear_k2_beta0.0001_nt1_stationary.csv')
        self.assertEqual(list(history.columns), ['iter', 'residual'])
        self.assertGreaterEqual(len(history), 2)

    def test_output_dir_from_settings(self):
        fallback = self.tmp / 'fallback'
        stdout = StringIO()
        with override_settings(KKT_OUTPUT_DIR=str(fallback)):
            call_command('solve', config=self.write_config(problem='poisson', k=2), stdout=stdout)
        self.assertTrue((fallback / 'report.csv').exists())


class BenchCommandTests(CommandTestCase):

    def test_sweep(self):
        output = self.run_command('bench', self.write_config(problem='poisson', k=[2, 3], beta=[1.0, 1e-4]))
        report = self.report()
        self.assertEqual(list(zip(report['k'], report['beta'])),
                         [('2', '1'), ('2', '0.0001'), ('3', '1'), ('3', '0.0001')])
        self.assertTrue((report['converged'] == 'true').all())

        table = (self.out / 'bench_table.txt').read_text()
        self.assertIn('beta=1 it', table)
        self.assertIn('beta=0.0001 CPU', table)
        self.assertIn('beta=1 it', output)
        self.assertIn('All 4 cell(s) converged', output)

    def test_non_converged_cells_are_marked(self):
        output = self.run_command('bench', self.write_config(problem='poisson', k=[2, 3], beta=1e-4,
                                                             solver={'maxit': 1}))
        report = self.report()
        self.assertTrue((report['converged'] == 'false').all())
        self.assertIn('1*', (self.out / 'bench_table.txt').read_text())
        self.assertIn('did not converge', output)

    def test_rerun_is_byte_stable(self):
        config = self.write_config(problem='convdiff', k=[2, 3], beta=[1e-2, 1e-4])
        runs = []
        for name in ('first', 'second'):
            self.out = self.tmp / name
            self.run_command('bench', config)
            runs.append(self.out)

        first, second = (pd.read_csv(out / 'report.csv', dtype=str).drop(columns=['setup_s', 'solve_s'])
                         for out in runs)
        pd.testing.assert_frame_equal(first, second)

        residual_files = sorted(path.name for path in runs[0].glob('residuals_*.csv'))
        self.assertEqual(len(residual_files), 4)
        self.assertEqual(residual_files, sorted(path.name for path in runs[1].glob('residuals_*.csv')))
        for name in residual_files:
            with self.subTest(file=name):
                self.assertEqual((runs[0] / name).read_bytes(), (runs[1] / name).read_bytes())


class EigcheckCommandTests(CommandTestCase):

    def test_poisson_spectrum_is_contained(self):
        output = self.run_command('eigcheck', self.write_config(problem='poisson', k=2, beta=1e-2))
        self.assertIn('Spectrum contained', output)
        eigenvalues = pd.read_csv(self.out / 'eigenvalues_poisson_k2_beta0.01_nt1_stationary.csv')
        self.assertEqual(list(eigenvalues.columns), ['index', 'eigenvalue'])
        self.assertGreaterEqual(eigenvalues['eigenvalue'].min(), 0.5 - 1e-6)
        self.assertLessEqual(eigenvalues['eigenvalue'].max(), 1.0 + 1e-6)

    def test_heat_spectrum_is_contained(self):
        output = self.run_command('eigcheck', self.write_config(problem='heat', k=2, n_t=4,
                                                                scheme='backward_euler'))
        self.assertIn('Spectrum contained', output)

    @override_settings(KKT_EIGCHECK_MAX_DIM=10)
    def test_dense_limit(self):
        with self.assertRaises(CommandError) as ctx:
            self.run_command('eigcheck', self.write_config(problem='poisson', k=2))
        self.assertEqual(ctx.exception.returncode, 1)
