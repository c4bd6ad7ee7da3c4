"""Shared fixtures for the kktsolver test suite."""

import unittest

import numpy as np
from decouple import config

from kktsolver.kkt_systems import TimeGrid, build_kkt
from kktsolver.mesh import build_refined_mesh
from kktsolver.problems import get_problem

RUN_SLOW = config('KKT_RUN_SLOW', default=False, cast=bool)

slow = unittest.skipUnless(RUN_SLOW, 'set KKT_RUN_SLOW=1 to run benchmark reproductions')


def rng(seed: int = 0) -> np.random.Generator:
    return np.random.default_rng(seed)


def relative_error(actual: np.ndarray, expected: np.ndarray) -> float:
    scale = max(np.linalg.norm(expected), np.finfo(float).tiny)
    return float(np.linalg.norm(np.asarray(actual) - np.asarray(expected)) / scale)


def named_system(name: str, k: int, **params):
    """Build (named problem, mesh, grid, system) the way the run service does."""
    named = get_problem(name, **params)
    mesh = build_refined_mesh(k, named.domain)
    grid = None
    scheme = None
    if not named.problem.is_stationary:
        grid = TimeGrid(0.0, named.t_final, named.n_t)
        scheme = named.scheme
    return named, mesh, grid, build_kkt(named.problem, mesh, grid, scheme)


def interior_vector(mesh, generator: np.random.Generator) -> np.ndarray:
    """Random nodal vector vanishing on the boundary."""
    x = generator.standard_normal(mesh.n_nodes)
    x[mesh.boundary_nodes] = 0.0
    return x
