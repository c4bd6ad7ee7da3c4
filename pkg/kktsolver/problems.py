"""
Library of control problems, addressable by name.

REGISTRY:
    poisson      -lap v = u on (-1,1)^2, v = 1 on the boundary,
                 v_d = cos(pi x/2) cos(pi y/2) + 1
    heat         dv/dt - lap v = u + f on (0,2)^2 over (0, 2), v = 0 on the boundary and
                 at t = 0; data shifted by (1, 1): f = cos(pi x~/2) cos(pi y~/2),
                 v_d = t f
    convdiff     -nu lap v + w . grad v = u, Poisson data, recirculating wind by default
    convdiff_t   time-dependent convdiff, initial state equal to the boundary value
    semilinear   Poisson data with D(v) = K + c diag(m * v) (lumped mass m)

Wind fields and convection-diffusion defaults are not taken from any published data
set; they are chosen to give a mild, well-posed test problem.
"""

import inspect
import logging
from dataclasses import dataclass, field
from functools import lru_cache, partial
from typing import Callable, Dict, List, Optional

import numpy as np

from .exceptions import ConfigurationError, UnknownProblemError
from .fem_assembly import assemble_convection, assemble_reaction, assemble_stiffness
from .kkt_systems import BACKWARD_EULER, STATIONARY, TRAPEZOIDAL, ControlProblem
from .mesh import Mesh, Rectangle
from .sparse_linalg import as_csr

logger = logging.getLogger(__name__)

POISSON_DOMAIN: Rectangle = (-1.0, 1.0, -1.0, 1.0)
HEAT_DOMAIN: Rectangle = (0.0, 2.0, 0.0, 2.0)


@dataclass(frozen=True)
class NamedProblem:
    name: str
    problem: ControlProblem
    domain: Rectangle
    beta: float
    n_t: int = 1
    t_final: float = 0.0
    scheme: str = STATIONARY
    params: Dict[str, object] = field(default_factory=dict)


# =============================================================================
# WIND FIELDS
# =============================================================================

def recirculating_wind(x, y):
    return 2.0 * y * (1.0 - x ** 2), -2.0 * x * (1.0 - y ** 2)


def zero_wind(x, y):
    return 0.0, 0.0


def horizontal_wind(x, y):
    return 1.0, 0.0


WINDS: Dict[str, Callable] = {
    'recirculating': recirculating_wind,
    'none': zero_wind,
    'horizontal': horizontal_wind,
}


# =============================================================================
# DATA
# =============================================================================

def poisson_desired_state(x, y):
    return np.cos(0.5 * np.pi * x) * np.cos(0.5 * np.pi * y) + 1.0


def heat_force(x, y, t):
    return np.cos(0.5 * np.pi * (x - 1.0)) * np.cos(0.5 * np.pi * (y - 1.0))


def heat_desired_state(x, y, t):
    return t * heat_force(x, y, t)


def _constant(value: float, timed: bool = False) -> Callable:
    if timed:
        return lambda x, y, t: np.full_like(np.asarray(x, dtype=np.float64), value)
    return lambda x, y: np.full_like(np.asarray(x, dtype=np.float64), value)


@lru_cache(maxsize=16)
def _stiffness(mesh: Mesh, diffusivity: float):
    return assemble_stiffness(mesh, diffusivity)


@lru_cache(maxsize=16)
def _convection_diffusion(mesh: Mesh, diffusivity: float, wind: str):
    return as_csr(_stiffness(mesh, diffusivity) + assemble_convection(mesh, WINDS[wind]))


# =============================================================================
# PROBLEM FACTORIES
# =============================================================================

def poisson_control(beta: float = 1e-4) -> NamedProblem:
    problem = ControlProblem(
        forward_operator=lambda mesh, state, t: _stiffness(mesh, 1.0),
        desired_state=poisson_desired_state,
        force=_constant(0.0),
        bc=_constant(1.0),
        beta=beta,
    )
    return NamedProblem(name='poisson', problem=problem, domain=POISSON_DOMAIN, beta=beta)


def heat_control(beta: float = 1e-4, n_t: int = 10, t_final: float = 2.0,
                 scheme: str = TRAPEZOIDAL) -> NamedProblem:
    problem = ControlProblem(
        forward_operator=lambda mesh, state, t: _stiffness(mesh, 1.0),
        desired_state=heat_desired_state,
        force=heat_force,
        bc=_constant(0.0, timed=True),
        beta=beta,
        stationary=False,
        initial_condition=_constant(0.0),
    )
    return NamedProblem(name='heat', problem=problem, domain=HEAT_DOMAIN, beta=beta,
                        n_t=n_t, t_final=t_final, scheme=scheme)


def convdiff_control(wind: str = 'recirculating', diffusivity: float = 0.1, beta: float = 1e-4,
                     stationary: bool = True, n_t: int = 10, t_final: float = 2.0,
                     scheme: str = BACKWARD_EULER) -> NamedProblem:
    """
    Convection-diffusion control with D = diffusivity K + N(wind) and Poisson data.

    Raises:
        ConfigurationError: unknown wind name or non-positive diffusivity
    """
    if wind not in WINDS:
        raise ConfigurationError(f"Unknown wind '{wind}'. Valid choices: {', '.join(sorted(WINDS))}")
    if not diffusivity > 0:
        raise ConfigurationError(f"diffusivity must be positive, got {diffusivity}")

    operator = lambda mesh, state, t: _convection_diffusion(mesh, float(diffusivity), wind)
    params = {'wind': wind, 'diffusivity': diffusivity}
    if stationary:
        problem = ControlProblem(
            forward_operator=operator,
            desired_state=poisson_desired_state,
            force=_constant(0.0),
            bc=_constant(1.0),
            beta=beta,
        )
        return NamedProblem(name='convdiff', problem=problem, domain=POISSON_DOMAIN, beta=beta,
                            params=params)

    problem = ControlProblem(
        forward_operator=operator,
        desired_state=lambda x, y, t: poisson_desired_state(x, y),
        force=_constant(0.0, timed=True),
        bc=_constant(1.0, timed=True),
        beta=beta,
        stationary=False,
        initial_condition=_constant(1.0),
    )
    return NamedProblem(name='convdiff_t', problem=problem, domain=POISSON_DOMAIN, beta=beta,
                        n_t=n_t, t_final=t_final, scheme=scheme, params=params)


def semilinear_control(reaction: float = 0.1, beta: float = 1e-4) -> NamedProblem:
    """Poisson control with the state-dependent operator D(v) = K + reaction diag(m * v)."""
    if reaction < 0:
        raise ConfigurationError(f"reaction must be >= 0, got {reaction}")

    def operator(mesh, state, t):
        weights = np.zeros(mesh.n_nodes) if state is None else state
        return as_csr(_stiffness(mesh, 1.0) + assemble_reaction(mesh, weights, reaction))

    problem = ControlProblem(
        forward_operator=operator,
        desired_state=poisson_desired_state,
        force=_constant(0.0),
        bc=_constant(1.0),
        beta=beta,
    )
    return NamedProblem(name='semilinear', problem=problem, domain=POISSON_DOMAIN, beta=beta,
                        params={'reaction': reaction})


PROBLEMS: Dict[str, Callable[..., NamedProblem]] = {
    'poisson': poisson_control,
    'heat': heat_control,
    'convdiff': convdiff_control,
    'convdiff_t': partial(convdiff_control, stationary=False),
    'semilinear': semilinear_control,
}


def problem_names() -> List[str]:
    return sorted(PROBLEMS)


def get_problem(name: str, **params) -> NamedProblem:
    """
    Look up a problem by name and build it.

    Parameters that are None are ignored, so optional run-config fields can be passed
    through unchanged.

    Raises:
        UnknownProblemError: name not in the registry
        ConfigurationError: a parameter the problem does not take
    """
    factory = PROBLEMS.get(name)
    if factory is None:
        raise UnknownProblemError(name, PROBLEMS)
    given = {key: value for key, value in params.items() if value is not None}
    accepted = inspect.signature(factory).parameters
    unsupported = sorted(set(given) - set(accepted))
    if unsupported:
        raise ConfigurationError(f"Problem '{name}' does not take parameter(s): {', '.join(unsupported)}")
    named = factory(**given)
    logger.debug(f"Built problem '{name}' with {given}")
    return named
