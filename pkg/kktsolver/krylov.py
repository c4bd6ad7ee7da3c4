"""
Krylov outer solvers and the fixed inner solvers used inside the preconditioners.

OUTER:
    gmres / fgmres     restarted, right-preconditioned, modified Gram-Schmidt Arnoldi
                       with Givens rotations; convergence is declared on the true
                       residual ||b - A x|| <= rtol ||b|| checked at the end of each
                       restart cycle. Iterations are counted cumulatively.

INNER (fixed linear maps, zero initial guess):
    chebyshev_jacobi   Chebyshev semi-iteration on a Jacobi splitting
    mg_vcycle          geometric multigrid V-cycles with damped Jacobi smoothing and a
                       dense LU on the coarsest level

Non-convergence is reported via SolveReport.converged, never raised.
"""

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.sparse as sp

from .exceptions import (
    BreakdownError,
    CoarseSolveError,
    ConfigurationError,
    DimensionMismatchError,
    NonPositiveDiagonalError,
    SingularMatrixError,
)
from .mesh import Mesh, hierarchy, prolongation
from .sparse_linalg import DenseLU, apply_operator, as_csr, transpose

logger = logging.getLogger(__name__)

BREAKDOWN_TOL = 1e-300
DEFAULT_MAXIT = 500


@dataclass
class SolveReport:
    iterations: int
    residual_history: np.ndarray
    converged: bool
    setup_seconds: float = 0.0
    solve_seconds: float = 0.0
    final_residual: float = 0.0
    restarts: int = 0


# =============================================================================
# RESTARTED (F)GMRES
# =============================================================================

def _givens(a: float, b: float) -> Tuple[float, float]:
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def _restarted_gmres(op, precond, b: np.ndarray, rtol: float, restart: int,
                     maxit: Optional[int], flexible: bool) -> Tuple[np.ndarray, SolveReport]:
    b = np.asarray(b, dtype=np.float64)
    n = b.shape[0]
    if op.shape != (n, n):
        raise DimensionMismatchError(f"Operator shape {op.shape} does not match rhs length {n}")
    if precond is not None and precond.shape != (n, n):
        raise DimensionMismatchError(f"Preconditioner shape {precond.shape} does not match n = {n}")
    if not 0.0 < rtol < 1.0:
        raise ConfigurationError(f"rtol must lie in (0, 1), got {rtol}")
    if restart < 1:
        raise ConfigurationError(f"restart must be >= 1, got {restart}")
    maxit = DEFAULT_MAXIT if maxit is None else maxit

    def prec(v):
        return v.copy() if precond is None else apply_operator(precond, v)

    start = time.perf_counter()
    x = np.zeros(n)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return x, SolveReport(iterations=0, residual_history=np.zeros(1), converged=True,
                              solve_seconds=time.perf_counter() - start)

    tol = rtol * b_norm
    history: List[float] = [b_norm]
    r = b.copy()
    beta = b_norm
    iterations = 0
    restarts = 0
    converged = False

    while True:
        V = np.zeros((restart + 1, n))
        Z = np.zeros((restart, n)) if flexible else None
        H = np.zeros((restart + 1, restart))
        cs = np.zeros(restart)
        sn = np.zeros(restart)
        g = np.zeros(restart + 1)
        g[0] = beta
        V[0] = r / beta
        k = 0
        broke_down = False

        for j in range(restart):
            if iterations >= maxit:
                break
            z = prec(V[j])
            if flexible:
                Z[j] = z
            w = apply_operator(op, z)
            for i in range(j + 1):
                H[i, j] = np.dot(w, V[i])
                w = w - H[i, j] * V[i]
            H[j + 1, j] = np.linalg.norm(w)

            for i in range(j):
                hi, hi1 = H[i, j], H[i + 1, j]
                H[i, j] = cs[i] * hi + sn[i] * hi1
                H[i + 1, j] = -sn[i] * hi + cs[i] * hi1
            h_sub = H[j + 1, j]
            cs[j], sn[j] = _givens(H[j, j], h_sub)
            H[j, j] = cs[j] * H[j, j] + sn[j] * h_sub
            H[j + 1, j] = 0.0
            g[j + 1] = -sn[j] * g[j]
            g[j] = cs[j] * g[j]

            iterations += 1
            k = j + 1
            history.append(abs(g[j + 1]))

            if h_sub < BREAKDOWN_TOL:
                broke_down = True
                break
            V[j + 1] = w / h_sub
            if abs(g[j + 1]) <= tol:
                break

        if k > 0:
            if np.min(np.abs(np.diag(H[:k, :k]))) < BREAKDOWN_TOL:
                raise BreakdownError(
                    f"Arnoldi breakdown after {iterations} iterations: singular Hessenberg matrix"
                )
            y = scipy.linalg.solve_triangular(H[:k, :k], g[:k])
            if flexible:
                x = x + Z[:k].T @ y
            else:
                x = x + prec(V[:k].T @ y)

        r = b - apply_operator(op, x)
        beta = float(np.linalg.norm(r))
        history[-1] = beta
        logger.debug(f"GMRES cycle {restarts}: {iterations} iterations, residual {beta / b_norm:.3e}")

        if beta <= tol:
            converged = True
            break
        if broke_down:
            raise BreakdownError(
                f"Arnoldi breakdown after {iterations} iterations with relative residual "
                f"{beta / b_norm:.3e} above rtol {rtol:.1e}"
            )
        if iterations >= maxit or k == 0:
            break
        restarts += 1

    elapsed = time.perf_counter() - start
    report = SolveReport(
        iterations=iterations,
        residual_history=np.asarray(history),
        converged=converged,
        solve_seconds=elapsed,
        final_residual=beta / b_norm,
        restarts=restarts,
    )
    if converged:
        logger.info(f"{'FGMRES' if flexible else 'GMRES'} converged in {iterations} iterations "
                    f"(relative residual {report.final_residual:.3e}, {elapsed:.3f}s)")
    else:
        logger.warning(f"{'FGMRES' if flexible else 'GMRES'} did not converge in {iterations} "
                       f"iterations (relative residual {report.final_residual:.3e})")
    return x, report


def gmres(op, precond, b: np.ndarray, rtol: float = 1e-6, restart: int = 10,
          maxit: Optional[int] = None) -> Tuple[np.ndarray, SolveReport]:
    """
    Restarted GMRES with right preconditioning.

    Args:
        op: system operator (matrix or LinearOperator)
        precond: fixed linear approximation of op^{-1}, or None
        b: right-hand side
        rtol: relative tolerance on the true residual
        restart: Krylov dimension per cycle
        maxit: cap on total inner iterations across restarts

    Returns:
        (x, SolveReport)

    Raises:
        BreakdownError: Arnoldi breakdown without convergence
    """
    return _restarted_gmres(op, precond, b, rtol, restart, maxit, flexible=False)


def fgmres(op, precond, b: np.ndarray, rtol: float = 1e-6, restart: int = 10,
           maxit: Optional[int] = None) -> Tuple[np.ndarray, SolveReport]:
    """Flexible GMRES: keeps the preconditioned basis, so precond may vary per step."""
    return _restarted_gmres(op, precond, b, rtol, restart, maxit, flexible=True)


@dataclass(frozen=True)
class SolverSettings:
    rtol: float = 1e-6
    restart: int = 10
    maxit: int = DEFAULT_MAXIT
    flexible: bool = False


def krylov_solve(op, precond, b: np.ndarray, settings: SolverSettings) -> Tuple[np.ndarray, SolveReport]:
    """Run gmres, or fgmres when settings.flexible is set."""
    method = fgmres if settings.flexible else gmres
    return method(op, precond, b, rtol=settings.rtol, restart=settings.restart, maxit=settings.maxit)


def write_residual_history(report: SolveReport, path: Union[str, Path]) -> Path:
    """Write the residual history as CSV with columns iter,residual."""
    path = Path(path)
    frame = pd.DataFrame({
        'iter': np.arange(len(report.residual_history)),
        'residual': report.residual_history,
    })
    frame.to_csv(path, index=False, float_format='%.10e')
    return path


# =============================================================================
# CHEBYSHEV SEMI-ITERATION
# =============================================================================

def _positive_diagonal(m: sp.csr_matrix) -> np.ndarray:
    diag = m.diagonal()
    bad = np.flatnonzero(diag <= 0)
    if bad.size:
        raise NonPositiveDiagonalError(
            f"Jacobi splitting needs a positive diagonal; {bad.size} entries <= 0 (first at row {bad[0]})"
        )
    return diag


def chebyshev_jacobi(m, b: np.ndarray, bounds: Tuple[float, float] = (0.5, 2.0),
                     sweeps: int = 20) -> np.ndarray:
    """
    Chebyshev-accelerated Jacobi iteration for m x = b from x = 0.

    Args:
        m: sparse matrix with positive diagonal
        b: right-hand side
        bounds: (lo, hi) enclosing the spectrum of diag(m)^{-1} m
        sweeps: number of matrix applications

    Returns:
        the iterate after `sweeps` steps; the map b -> x is linear and fixed.
        Equal bounds take a single scaled Jacobi step.

    Raises:
        NonPositiveDiagonalError, ConfigurationError
    """
    lo, hi = bounds
    if not 0.0 < lo <= hi:
        raise ConfigurationError(f"Chebyshev bounds must satisfy 0 < lo <= hi, got {bounds}")
    if sweeps < 0:
        raise ConfigurationError(f"sweeps must be >= 0, got {sweeps}")
    m = m if sp.issparse(m) else as_csr(m)
    inv_diag = 1.0 / _positive_diagonal(m)
    b = np.asarray(b, dtype=np.float64)

    theta = 0.5 * (hi + lo)
    delta = 0.5 * (hi - lo)
    x = np.zeros_like(b)
    if sweeps == 0:
        return x
    if delta == 0.0:
        return inv_diag * b / theta

    sigma = theta / delta
    rho = 1.0 / sigma
    d = inv_diag * b / theta
    x = x + d
    r = b - m @ d
    for _ in range(sweeps - 1):
        rho_new = 1.0 / (2.0 * sigma - rho)
        d = rho_new * rho * d + (2.0 * rho_new / delta) * (inv_diag * r)
        x = x + d
        r = r - m @ d
        rho = rho_new
    return x


def chebyshev_bound(bounds: Tuple[float, float], sweeps: int) -> float:
    """Worst-case error reduction 2 q^k / (1 + q^{2k}) with q = (sqrt(kappa)-1)/(sqrt(kappa)+1)."""
    lo, hi = bounds
    root = np.sqrt(hi / lo)
    q = (root - 1.0) / (root + 1.0)
    return float(2.0 * q ** sweeps / (1.0 + q ** (2 * sweeps)))


# =============================================================================
# GEOMETRIC MULTIGRID
# =============================================================================

@dataclass(frozen=True)
class MgConfig:
    cycles: int = 2
    omega: float = 2.0 / 3.0
    pre_sweeps: int = 1
    post_sweeps: int = 1


@dataclass
class MgHierarchy:
    """
    Nested operators coarse -> fine.

    prolongations[l] maps level l-1 to level l (prolongations[0] is None).
    Rows that couple to nothing else (eliminated Dirichlet rows) are relaxed with
    unit weight, every other row with config.omega.
    """
    meshes: List[Mesh]
    operators: List[sp.csr_matrix]
    prolongations: List[Optional[sp.csr_matrix]]
    config: MgConfig
    coarse_solver: DenseLU
    relax: List[np.ndarray] = field(default_factory=list)

    @property
    def n_levels(self) -> int:
        return len(self.operators)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.operators[-1].shape

    def transposed(self) -> 'MgHierarchy':
        """Hierarchy for the transpose of the fine operator, sharing the prolongations."""
        return _galerkin(self.meshes, self.prolongations, transpose(self.operators[-1]), self.config)


def _decoupled_rows(a: sp.csr_matrix) -> np.ndarray:
    counts = np.diff(a.indptr)
    rows = np.repeat(np.arange(a.shape[0]), counts)
    off_diagonal = (a.indices != rows) & (a.data != 0.0)
    coupled = np.bincount(rows[off_diagonal], minlength=a.shape[0]) > 0
    return ~coupled


def _galerkin(meshes: List[Mesh], prolongations: List[Optional[sp.csr_matrix]],
              fine_operator, config: MgConfig) -> MgHierarchy:
    operators = [as_csr(fine_operator)]
    for level in range(len(meshes) - 1, 0, -1):
        P = prolongations[level]
        coarse_mesh = meshes[level - 1]
        unit = np.zeros(coarse_mesh.n_nodes)
        unit[coarse_mesh.boundary_nodes] = 1.0
        coarse = P.T @ operators[0] @ P + sp.diags(unit)
        operators.insert(0, as_csr(coarse))

    relax = []
    for a in operators:
        inv_diag = 1.0 / _positive_diagonal(a)
        weights = np.where(_decoupled_rows(a), 1.0, config.omega)
        relax.append(weights * inv_diag)

    try:
        coarse_solver = DenseLU(operators[0])
    except SingularMatrixError as exc:
        raise CoarseSolveError(f"Coarse multigrid operator is singular: {exc}") from exc

    return MgHierarchy(meshes=meshes, operators=operators, prolongations=prolongations,
                       config=config, coarse_solver=coarse_solver, relax=relax)


def build_mg_hierarchy(mesh: Mesh, operator, config: Optional[MgConfig] = None) -> MgHierarchy:
    """
    Galerkin hierarchy P^T A P over the nested meshes ending at `mesh`.

    Args:
        mesh: finest mesh; its parent chain fixes the levels
        operator: fine-level matrix, Dirichlet rows already eliminated
        config: smoother and cycle settings

    Raises:
        DimensionMismatchError: operator size differs from the mesh node count
        NonPositiveDiagonalError: a level operator has a diagonal entry <= 0
        CoarseSolveError: the coarsest operator is singular
    """
    config = config or MgConfig()
    if config.cycles < 0 or config.pre_sweeps < 0 or config.post_sweeps < 0 or config.omega <= 0:
        raise ConfigurationError(f"Invalid multigrid configuration {config}")
    if operator.shape != (mesh.n_nodes, mesh.n_nodes):
        raise DimensionMismatchError(
            f"Operator shape {operator.shape} does not match {mesh.n_nodes} mesh nodes"
        )
    meshes = hierarchy(mesh)
    prolongations: List[Optional[sp.csr_matrix]] = [None]
    for coarse, fine in zip(meshes[:-1], meshes[1:]):
        prolongations.append(prolongation(coarse, fine))
    h = _galerkin(meshes, prolongations, operator, config)
    logger.debug(f"Multigrid hierarchy: {h.n_levels} levels, coarse size {h.operators[0].shape[0]}")
    return h


def _smooth(h: MgHierarchy, level: int, x: np.ndarray, b: np.ndarray, sweeps: int) -> np.ndarray:
    a = h.operators[level]
    for _ in range(sweeps):
        x = x + h.relax[level] * (b - a @ x)
    return x


def _vcycle(h: MgHierarchy, level: int, b: np.ndarray) -> np.ndarray:
    if level == 0:
        return h.coarse_solver.solve(b)
    cfg = h.config
    a = h.operators[level]
    P = h.prolongations[level]
    x = _smooth(h, level, np.zeros_like(b), b, cfg.pre_sweeps)
    correction = _vcycle(h, level - 1, P.T @ (b - a @ x))
    x = x + P @ correction
    return _smooth(h, level, x, b, cfg.post_sweeps)


def mg_vcycle(h: MgHierarchy, b: np.ndarray, cycles: Optional[int] = None) -> np.ndarray:
    """
    Apply `cycles` V-cycles to h.operators[-1] x = b from x = 0.

    A single-level hierarchy reduces to the dense coarse solve.
    """
    cycles = h.config.cycles if cycles is None else cycles
    b = np.asarray(b, dtype=np.float64)
    top = h.n_levels - 1
    a = h.operators[-1]
    x = np.zeros_like(b)
    for _ in range(cycles):
        x = x + _vcycle(h, top, b - a @ x)
    return x
