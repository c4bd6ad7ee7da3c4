"""
Run configuration for the solve / bench / eigcheck commands.

A run is described by one JSON document validated against RunConfig. Unknown keys are
rejected at every level. `k` and `beta` may be scalars or lists; `bench` sweeps the
Cartesian product in (k, beta) order, the other commands use the first cell.

Example:
    {
      "problem": "poisson",
      "k": [5, 6],
      "beta": [1.0, 1e-4],
      "solver": {"rtol": 1e-6, "restart": 10, "maxit": 300},
      "prec": {"cheb_sweeps": 20, "mg_cycles": 2}
    }
"""

import itertools
import logging
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .conf import get_setting
from .exceptions import ConfigurationError
from .krylov import MgConfig, SolverSettings
from .nonlinear import PicardConfig
from .preconditioners import PrecOptions
from .problems import PROBLEMS, problem_names

logger = logging.getLogger(__name__)

MAX_K = 14


class _Section(BaseModel):
    model_config = ConfigDict(extra='forbid')


class SolverSection(_Section):
    rtol: float = Field(1e-6, gt=0, lt=1)
    restart: int = Field(10, ge=1)
    maxit: int = Field(500, ge=1)
    flexible: bool = False

    def settings(self) -> SolverSettings:
        return SolverSettings(rtol=self.rtol, restart=self.restart, maxit=self.maxit,
                              flexible=self.flexible)


class PrecSection(_Section):
    cheb_sweeps: int = Field(20, ge=1)
    cheb_bounds: Tuple[float, float] = (0.5, 2.0)
    mg_cycles: int = Field(2, ge=1)
    omega: float = Field(2.0 / 3.0, gt=0, le=1)
    pre_sweeps: int = Field(1, ge=0)
    post_sweeps: int = Field(1, ge=0)
    coarse_cells: Optional[int] = Field(None, ge=1)
    exact_inner: bool = False

    @field_validator('cheb_bounds')
    @classmethod
    def _ordered_bounds(cls, value):
        lo, hi = value
        if not 0 < lo <= hi:
            raise ValueError(f'cheb_bounds must satisfy 0 < lo <= hi, got {value}')
        return value

    def options(self) -> PrecOptions:
        return PrecOptions(
            cheb_sweeps=self.cheb_sweeps,
            cheb_bounds=tuple(self.cheb_bounds),
            mg=MgConfig(cycles=self.mg_cycles, omega=self.omega,
                        pre_sweeps=self.pre_sweeps, post_sweeps=self.post_sweeps),
            exact_inner=self.exact_inner,
        )


class PicardSection(_Section):
    max_iters: int = Field(10, ge=1)
    nl_rtol: float = Field(1e-5, gt=0, lt=1)
    linear_rtol: float = Field(1e-8, gt=0, lt=1)


class OutputSection(_Section):
    dir: Optional[str] = None
    export_mm: bool = False


class RunConfig(_Section):
    problem: str
    k: Union[int, List[int]] = 5
    beta: Optional[Union[float, List[float]]] = None
    n_t: Optional[int] = Field(None, ge=2)
    t_final: Optional[float] = Field(None, gt=0)
    scheme: Optional[Literal['backward_euler', 'trapezoidal']] = None
    diffusivity: Optional[float] = Field(None, gt=0)
    wind: Optional[str] = None
    reaction: Optional[float] = Field(None, ge=0)
    nonlinear: bool = False
    solver: SolverSection = Field(default_factory=SolverSection)
    prec: PrecSection = Field(default_factory=PrecSection)
    picard: PicardSection = Field(default_factory=PicardSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @field_validator('problem')
    @classmethod
    def _known_problem(cls, value):
        if value not in PROBLEMS:
            raise ValueError(f"unknown problem '{value}', valid choices: {', '.join(problem_names())}")
        return value

    @field_validator('k')
    @classmethod
    def _k_range(cls, value):
        values = value if isinstance(value, list) else [value]
        if not values:
            raise ValueError('k must not be empty')
        for item in values:
            if not 1 <= item <= MAX_K:
                raise ValueError(f'k must lie in [1, {MAX_K}], got {item}')
        return value

    @field_validator('beta')
    @classmethod
    def _beta_positive(cls, value):
        if value is None:
            return value
        values = value if isinstance(value, list) else [value]
        if not values:
            raise ValueError('beta must not be empty')
        for item in values:
            if not item > 0:
                raise ValueError(f'beta must be positive, got {item}')
        return value

    def ks(self) -> List[int]:
        return list(self.k) if isinstance(self.k, list) else [self.k]

    def betas(self) -> List[Optional[float]]:
        if self.beta is None:
            return [None]
        return list(self.beta) if isinstance(self.beta, list) else [self.beta]

    def coarse_cells(self) -> int:
        if self.prec.coarse_cells is not None:
            return self.prec.coarse_cells
        return get_setting('KKT_COARSE_CELLS', 2)

    def picard_config(self) -> PicardConfig:
        return PicardConfig(
            max_iters=self.picard.max_iters,
            nl_rtol=self.picard.nl_rtol,
            solver=SolverSettings(rtol=self.picard.linear_rtol, restart=self.solver.restart,
                                  maxit=self.solver.maxit, flexible=self.solver.flexible),
            prec=self.prec.options(),
        )

    def problem_params(self, beta: Optional[float]) -> dict:
        return {
            'beta': beta,
            'n_t': self.n_t,
            't_final': self.t_final,
            'scheme': self.scheme,
            'diffusivity': self.diffusivity,
            'wind': self.wind,
            'reaction': self.reaction,
        }

    def sweep(self) -> List[Tuple[int, Optional[float]]]:
        return list(itertools.product(self.ks(), self.betas()))


def parse_run_config(text: str) -> RunConfig:
    try:
        return RunConfig.model_validate_json(text)
    except ValidationError as exc:
        raise ConfigurationError(f"Invalid run configuration:\n{exc}") from exc


def load_run_config(path: Union[str, Path]) -> RunConfig:
    """
    Read and validate a JSON run configuration.

    Raises:
        ConfigurationError: missing/unreadable file or schema violation
    """
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as exc:
        raise ConfigurationError(f"Cannot read config file {path}: {exc}") from exc
    config = parse_run_config(text)
    logger.debug(f"Loaded run config from {path}: problem={config.problem}, "
                 f"{len(config.sweep())} cell(s)")
    return config
