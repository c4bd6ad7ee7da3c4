import json
from pathlib import Path
from tempfile import TemporaryDirectory

from django.conf import settings
from django.test import SimpleTestCase, override_settings

from kktsolver.config import load_run_config, parse_run_config
from kktsolver.exceptions import ConfigurationError
from kktsolver.krylov import SolverSettings


def parse(**fields):
    return parse_run_config(json.dumps(fields))


class RunConfigTests(SimpleTestCase):

    def test_defaults(self):
        config = parse(problem='poisson')
        self.assertEqual(config.ks(), [5])
        self.assertEqual(config.betas(), [None])
        self.assertEqual(config.sweep(), [(5, None)])
        self.assertFalse(config.nonlinear)
        self.assertEqual(config.solver.settings(), SolverSettings(rtol=1e-6, restart=10, maxit=500))

    def test_sweep_order(self):
        config = parse(problem='poisson', k=[3, 4], beta=[1.0, 1e-2, 1e-4])
        self.assertEqual(config.sweep(), [(3, 1.0), (3, 1e-2), (3, 1e-4),
                                          (4, 1.0), (4, 1e-2), (4, 1e-4)])

    def test_scalar_and_list_forms(self):
        self.assertEqual(parse(problem='heat', k=3, beta=1e-3).sweep(), [(3, 1e-3)])
        self.assertEqual(parse(problem='heat', k=[3], beta=[1e-3]).sweep(), [(3, 1e-3)])

    def test_unknown_keys_are_rejected(self):
        with self.assertRaises(ConfigurationError):
            parse(problem='poisson', tolerance=1e-6)
        with self.assertRaises(ConfigurationError):
            parse(problem='poisson', solver={'rtol': 1e-6, 'method': 'cg'})
        with self.assertRaises(ConfigurationError):
            parse(problem='poisson', prec={'smoother': 'jacobi'})

    def test_unknown_problem(self):
        with self.assertRaises(ConfigurationError) as ctx:
            parse(problem='stokes')
        self.assertIn('poisson', str(ctx.exception))

    def test_missing_problem(self):
        with self.assertRaises(ConfigurationError):
            parse(k=3)

    def test_k_range(self):
        for k in (0, 15, [3, 0], []):
            with self.subTest(k=k), self.assertRaises(ConfigurationError):
                parse(problem='poisson', k=k)

    def test_beta_must_be_positive(self):
        for beta in (0.0, -1e-4, [1.0, 0.0], []):
            with self.subTest(beta=beta), self.assertRaises(ConfigurationError):
                parse(problem='poisson', beta=beta)

    def test_solver_ranges(self):
        with self.assertRaises(ConfigurationError):
            parse(problem='poisson', solver={'rtol': 0.0})
        with self.assertRaises(ConfigurationError):
            parse(problem='poisson', solver={'restart': 0})

    def test_chebyshev_bounds(self):
        with self.assertRaises(ConfigurationError):
            parse(problem='poisson', prec={'cheb_bounds': [2.0, 0.5]})
        with self.assertRaises(ConfigurationError):
            parse(problem='poisson', prec={'cheb_bounds': [0.0, 2.0]})

    def test_scheme_choices(self):
        self.assertEqual(parse(problem='heat', scheme='backward_euler').scheme, 'backward_euler')
        with self.assertRaises(ConfigurationError):
            parse(problem='heat', scheme='crank')

    def test_prec_options(self):
        options = parse(problem='poisson', prec={'cheb_sweeps': 10, 'mg_cycles': 3, 'omega': 0.5,
                                                 'exact_inner': True}).prec.options()
        self.assertEqual(options.cheb_sweeps, 10)
        self.assertEqual(options.cheb_bounds, (0.5, 2.0))
        self.assertEqual(options.mg.cycles, 3)
        self.assertEqual(options.mg.omega, 0.5)
        self.assertTrue(options.exact_inner)

    def test_coarse_cells(self):
        self.assertEqual(parse(problem='poisson', prec={'coarse_cells': 4}).coarse_cells(), 4)
        self.assertEqual(parse(problem='poisson').coarse_cells(), 2)
        with override_settings(KKT_COARSE_CELLS=3):
            self.assertEqual(parse(problem='poisson').coarse_cells(), 3)

    def test_picard_config(self):
        config = parse(problem='semilinear', nonlinear=True, solver={'restart': 20},
                       picard={'max_iters': 4, 'nl_rtol': 1e-7, 'linear_rtol': 1e-9})
        picard = config.picard_config()
        self.assertEqual(picard.max_iters, 4)
        self.assertEqual(picard.nl_rtol, 1e-7)
        self.assertEqual(picard.solver.rtol, 1e-9)
        self.assertEqual(picard.solver.restart, 20)

    def test_problem_params(self):
        config = parse(problem='convdiff', wind='horizontal', diffusivity=0.5)
        params = config.problem_params(1e-3)
        self.assertEqual(params['beta'], 1e-3)
        self.assertEqual(params['wind'], 'horizontal')
        self.assertEqual(params['diffusivity'], 0.5)
        self.assertIsNone(params['n_t'])

    def test_load_from_file(self):
        with TemporaryDirectory() as tmp:
            path = Path(tmp) / 'run.json'
            path.write_text(json.dumps({'problem': 'heat', 'k': 3, 'n_t': 5}), encoding='utf-8')
            config = load_run_config(path)
            self.assertEqual(config.problem, 'heat')
            self.assertEqual(config.n_t, 5)

    def test_missing_file(self):
        with TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigurationError):
                load_run_config(Path(tmp) / 'missing.json')

    def test_malformed_json(self):
        with self.assertRaises(ConfigurationError):
            parse_run_config('{"problem": "poisson",')


class ProjectSettingsTests(SimpleTestCase):

    def test_only_the_solver_app_is_installed(self):
        self.assertEqual(settings.INSTALLED_APPS, ['kktsolver'])
