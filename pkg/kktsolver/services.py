"""
Run orchestration behind the management commands.

A run configuration expands into cells, one per (k, beta) pair. Each cell builds its
mesh and KKT system, the block-triangular preconditioner, and runs the Krylov solve
(or the Picard iteration for nonlinear runs). Setup time covers mesh, assembly and
preconditioner construction; solve time covers the iteration only.
"""

import logging
import time
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import RunConfig
from .kkt_systems import STATIONARY, SaddleSystem, TimeGrid, build_kkt
from .krylov import SolveReport, krylov_solve
from .mesh import Mesh, build_refined_mesh
from .nonlinear import PicardReport, picard_solve
from .preconditioners import build_block_triangular, schur_spectrum
from .problems import NamedProblem, get_problem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Cell:
    problem: str
    k: int
    beta: float
    n_t: int
    scheme: str

    @property
    def name(self) -> str:
        return f"{self.problem}_k{self.k}_beta{self.beta:g}_nt{self.n_t}_{self.scheme}"


@dataclass
class CellResult:
    cell: Cell
    report: SolveReport
    system: Optional[SaddleSystem] = None
    solution: Optional[np.ndarray] = None
    picard: Optional[PicardReport] = None
    error: Optional[str] = None

    @property
    def converged(self) -> bool:
        return self.report.converged

    def as_row(self) -> Dict:
        return {
            'problem': self.cell.problem,
            'k': self.cell.k,
            'beta': self.cell.beta,
            'n_t': self.cell.n_t,
            'scheme': self.cell.scheme,
            'iters': self.report.iterations,
            'converged': self.report.converged,
            'setup_s': self.report.setup_seconds,
            'solve_s': self.report.solve_seconds,
        }


def _failed_report() -> SolveReport:
    return SolveReport(iterations=0, residual_history=np.zeros(0), converged=False)


class KKTRunService:
    """Builds and solves the cells of one run configuration"""

    def __init__(self, config: RunConfig):
        self.config = config

    def cells(self) -> List[Tuple[int, Optional[float]]]:
        return self.config.sweep()

    def resolve(self, k: int, beta: Optional[float]) -> Tuple[NamedProblem, Cell]:
        named = get_problem(self.config.problem, **self.config.problem_params(beta))
        cell = Cell(problem=named.name, k=k, beta=named.beta, n_t=named.n_t, scheme=named.scheme)
        return named, cell

    def build_system(self, named: NamedProblem, k: int) -> Tuple[Mesh, Optional[TimeGrid], SaddleSystem]:
        mesh = build_refined_mesh(k, named.domain, self.config.coarse_cells())
        grid = None
        if named.scheme != STATIONARY:
            grid = TimeGrid(0.0, named.t_final, named.n_t)
        system = build_kkt(named.problem, mesh, grid, named.scheme if grid else None)
        return mesh, grid, system

    def run_cell(self, k: int, beta: Optional[float]) -> CellResult:
        """
        Solve one cell.

        Returns:
            CellResult with timings filled in; non-convergence is reported, not raised
        """
        named, cell = self.resolve(k, beta)
        return self._solve_cell(named, cell)

    def _solve_cell(self, named: NamedProblem, cell: Cell) -> CellResult:
        logger.info(f"Running cell {cell.name}")
        k = cell.k
        if self.config.nonlinear:
            return self._run_picard(named, cell)

        start = time.perf_counter()
        mesh, grid, system = self.build_system(named, k)
        prec = build_block_triangular(system, self.config.prec.options())
        setup = time.perf_counter() - start

        x, report = krylov_solve(system.operator(), prec, system.rhs, self.config.solver.settings())
        report = replace(report, setup_seconds=setup)
        logger.info(f"Cell {cell.name}: {report.iterations} iterations, converged={report.converged}, "
                    f"setup {setup:.3f}s, solve {report.solve_seconds:.3f}s")
        return CellResult(cell=cell, report=report, system=system, solution=x)

    def _run_picard(self, named: NamedProblem, cell: Cell) -> CellResult:
        start = time.perf_counter()
        mesh = build_refined_mesh(cell.k, named.domain, self.config.coarse_cells())
        grid = TimeGrid(0.0, named.t_final, named.n_t) if named.scheme != STATIONARY else None
        setup = time.perf_counter() - start

        x, system, picard = picard_solve(named.problem, mesh, grid, self.config.picard_config(),
                                         scheme=named.scheme if grid else None)
        report = SolveReport(
            iterations=int(sum(picard.linear_iterations)),
            residual_history=picard.residual_history,
            converged=picard.converged,
            setup_seconds=setup,
            solve_seconds=picard.solve_seconds,
            final_residual=float(picard.residual_history[-1] / picard.residual_history[0])
            if picard.residual_history[0] > 0 else 0.0,
        )
        return CellResult(cell=cell, report=report, system=system, solution=x, picard=picard)

    def run_first(self) -> CellResult:
        k, beta = self.cells()[0]
        return self.run_cell(k, beta)

    def run_sweep(self) -> List[CellResult]:
        """
        Run every cell in (k, beta) order. A failing cell is logged and recorded as
        not converged with zero iterations; the sweep continues.
        """
        results = []
        for k, beta in self.cells():
            named, cell = self.resolve(k, beta)
            try:
                results.append(self._solve_cell(named, cell))
            except Exception as exc:
                logger.error(f"Cell {cell.name} failed: {exc}", exc_info=True)
                results.append(CellResult(cell=cell, report=_failed_report(), error=str(exc)))
        return results

    def spectrum(self) -> Tuple[Cell, np.ndarray]:
        """Dense eigenvalues of S^{-1} S for the first cell (exact factor solves)."""
        k, beta = self.cells()[0]
        named, cell = self.resolve(k, beta)
        _, _, system = self.build_system(named, k)
        return cell, schur_spectrum(system)
