"""
Block preconditioners for the KKT saddle-point systems.

IDEAL:
    P = [[A, 0], [B2, -S]] with the exact Schur complement S = C + B2 A^{-1} B1t.
    Dense, for verification only.

PRACTICAL (block lower-triangular):
    z_v    = A~^{-1} r_v                        Chebyshev-Jacobi on the mass blocks
    z_zeta = -S~^{-1} (r_zeta - B2 z_v)         matching Schur approximation

MATCHING SCHUR APPROXIMATION:
    S^ = (B + L^) A^{-1} (B + L^)^T  with  L^ = A / sqrt(beta)
    so that L^ A^{-1} L^T = A / beta = C. The factor (B + L^) is block lower-bidiagonal
    over time; it is solved by block forward substitution (transpose: backward
    substitution), each diagonal block by multigrid V-cycles or by dense LU when
    exact inner solves are requested.

All inner maps run a fixed number of steps from a zero initial guess, so every
preconditioner here is a constant linear operator and plain GMRES applies.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .conf import get_setting
from .exceptions import ConfigurationError, DimensionMismatchError, DimensionTooLargeError
from .kkt_systems import SaddleSystem
from .krylov import MgConfig, build_mg_hierarchy, chebyshev_jacobi, mg_vcycle
from .sparse_linalg import DenseLU, as_csr, dense_symmetric_eig, transpose

logger = logging.getLogger(__name__)

MASS_BOUNDS = (0.5, 2.0)


@dataclass(frozen=True)
class PrecOptions:
    cheb_sweeps: int = 20
    cheb_bounds: Tuple[float, float] = MASS_BOUNDS
    mg: MgConfig = field(default_factory=MgConfig)
    exact_inner: bool = False

    def validate(self):
        lo, hi = self.cheb_bounds
        if not 0.0 < lo <= hi:
            raise ConfigurationError(f"Chebyshev bounds must satisfy 0 < lo <= hi, got {self.cheb_bounds}")
        if self.cheb_sweeps < 1:
            raise ConfigurationError(f"cheb_sweeps must be >= 1, got {self.cheb_sweeps}")
        if self.mg.cycles < 1:
            raise ConfigurationError(f"mg cycles must be >= 1, got {self.mg.cycles}")


# =============================================================================
# BLOCK-TRIANGULAR PRECONDITIONER
# =============================================================================

class BlockTriangularPrec(LinearOperator):
    """
    Lower block-triangular preconditioner [[A~, 0], [B2, -S~]]^{-1}.

    Args:
        A_tilde_apply: r_v -> approximation of A^{-1} r_v
        B2: forward block used in the residual update
        S_tilde_apply: r -> approximation of S^{-1} r
        flexible: True when an inner map is not a fixed linear operator
    """

    def __init__(self, A_tilde_apply: Callable, B2, S_tilde_apply: Callable, flexible: bool = False):
        self.A_tilde_apply = A_tilde_apply
        self.B2 = B2
        self.S_tilde_apply = S_tilde_apply
        self.flexible = flexible
        self.n_state = B2.shape[1]
        n = B2.shape[0] + B2.shape[1]
        super().__init__(dtype=np.float64, shape=(n, n))

    def _matvec(self, r):
        r = np.ravel(r)
        z_v = self.A_tilde_apply(r[:self.n_state])
        z_zeta = -self.S_tilde_apply(r[self.n_state:] - self.B2 @ z_v)
        return np.concatenate([z_v, z_zeta])


def prec_apply(p: BlockTriangularPrec, r: np.ndarray) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if r.shape != (p.shape[0],):
        raise DimensionMismatchError(f"Preconditioner expects length {p.shape[0]}, got {r.shape}")
    return p @ r


# =============================================================================
# MATCHING SCHUR APPROXIMATION
# =============================================================================

class _BlockSolver:
    """Solve with one diagonal block of the matching factor and with its transpose."""

    def __init__(self, block: sp.csr_matrix, mesh, mg: MgConfig, exact: bool):
        if exact:
            lu = DenseLU(block)
            self.solve = lu.solve
            self.solve_transpose = lu.solve_transpose
        else:
            forward = build_mg_hierarchy(mesh, block, mg)
            backward = forward.transposed()
            self.solve = lambda b: mg_vcycle(forward, b)
            self.solve_transpose = lambda b: mg_vcycle(backward, b)


class MatchingSchur:
    """
    S^{-1} r = (B + L^)^{-T} A (B + L^)^{-1} r with L^ = A / sqrt(beta).

    The factor is stored by time blocks: diagonal blocks F_k = L_kk + A_k / sqrt(beta)
    and the sub-diagonal blocks of the state operator.
    """

    def __init__(self, system: SaddleSystem, mg: Optional[MgConfig] = None, exact_inner: bool = False):
        self.system = system
        self.lambda_scale = 1.0 / np.sqrt(system.beta)
        self.middle = system.A
        self.exact_inner = exact_inner
        n = system.n_nodes
        self.factor = as_csr(system.B2 + self.lambda_scale * system.A)
        self.diag_blocks = [
            as_csr(self.factor[k * n:(k + 1) * n, k * n:(k + 1) * n]) for k in range(system.n_blocks)
        ]
        self.sub_blocks = list(system.state_sub)
        self.sub_blocks_t = [None if s is None else transpose(s) for s in self.sub_blocks]

        # identical diagonal blocks share one solver
        self._solvers: List[_BlockSolver] = []
        for k, block in enumerate(self.diag_blocks):
            for j in range(k):
                if (block != self.diag_blocks[j]).nnz == 0:
                    self._solvers.append(self._solvers[j])
                    break
            else:
                self._solvers.append(_BlockSolver(block, system.mesh, mg or MgConfig(), exact_inner))
        logger.debug(f"Matching Schur: {system.n_blocks} blocks, "
                     f"{len(set(map(id, self._solvers)))} distinct block solvers")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.system.B2.shape

    def factor_apply(self, r: np.ndarray) -> np.ndarray:
        """Block forward substitution with (B + L^)."""
        n = self.system.n_nodes
        blocks = np.asarray(r, dtype=np.float64).reshape(-1, n)
        out = np.zeros_like(blocks)
        for k, solver in enumerate(self._solvers):
            rhs = blocks[k]
            if k > 0:
                rhs = rhs - self.sub_blocks[k] @ out[k - 1]
            out[k] = solver.solve(rhs)
        return out.ravel()

    def factor_T_apply(self, r: np.ndarray) -> np.ndarray:
        """Block backward substitution with (B + L^)^T."""
        n = self.system.n_nodes
        blocks = np.asarray(r, dtype=np.float64).reshape(-1, n)
        out = np.zeros_like(blocks)
        last = len(self._solvers) - 1
        for k in range(last, -1, -1):
            rhs = blocks[k]
            if k < last:
                rhs = rhs - self.sub_blocks_t[k + 1] @ out[k + 1]
            out[k] = self._solvers[k].solve_transpose(rhs)
        return out.ravel()

    def apply(self, r: np.ndarray) -> np.ndarray:
        return self.factor_T_apply(self.middle @ self.factor_apply(r))

    def operator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.apply, dtype=np.float64)

    def lambda_hat(self) -> sp.csr_matrix:
        return as_csr(self.lambda_scale * self.system.A)


def matching_schur_stationary(system: SaddleSystem, inner: Optional[MgConfig] = None,
                              exact_inner: bool = False) -> MatchingSchur:
    """Matching approximation for a stationary system: factor D + M / sqrt(beta)."""
    if not system.is_stationary:
        raise ConfigurationError(f"Expected a stationary system, got scheme '{system.scheme}'")
    return MatchingSchur(system, inner, exact_inner)


def matching_schur_instationary(system: SaddleSystem, inner: Optional[MgConfig] = None,
                                exact_inner: bool = False) -> MatchingSchur:
    """Matching approximation for an all-at-once system: block-bidiagonal factor L + A / sqrt(beta)."""
    if system.is_stationary:
        raise ConfigurationError("Expected an instationary system")
    return MatchingSchur(system, inner, exact_inner)


def matching_schur(system: SaddleSystem, inner: Optional[MgConfig] = None,
                   exact_inner: bool = False) -> MatchingSchur:
    if system.is_stationary:
        return matching_schur_stationary(system, inner, exact_inner)
    return matching_schur_instationary(system, inner, exact_inner)


# =============================================================================
# BUILDERS
# =============================================================================

def _mass_block_solver(system: SaddleSystem, opts: PrecOptions) -> Callable:
    if not opts.exact_inner:
        A = system.A
        return lambda r: chebyshev_jacobi(A, r, opts.cheb_bounds, opts.cheb_sweeps)

    n = system.n_nodes
    factors = [DenseLU(system.A[k * n:(k + 1) * n, k * n:(k + 1) * n]) for k in range(system.n_blocks)]

    def solve(r):
        blocks = np.asarray(r).reshape(-1, n)
        return np.concatenate([lu.solve(b) for lu, b in zip(factors, blocks)])
    return solve


def build_block_triangular(system: SaddleSystem, opts: Optional[PrecOptions] = None) -> BlockTriangularPrec:
    """
    Practical preconditioner: Chebyshev-Jacobi on A, matching Schur on S.

    Args:
        system: stationary or instationary saddle system
        opts: sweep/cycle counts, Chebyshev bounds, exact inner solves

    Raises:
        ConfigurationError: invalid bounds or counts
    """
    opts = opts or PrecOptions()
    opts.validate()
    schur = matching_schur(system, opts.mg, opts.exact_inner)
    prec = BlockTriangularPrec(
        A_tilde_apply=_mass_block_solver(system, opts),
        B2=system.B2,
        S_tilde_apply=schur.apply,
        flexible=False,
    )
    logger.info(f"Built block-triangular preconditioner ({'exact' if opts.exact_inner else 'approximate'} "
                f"inner solves, {opts.cheb_sweeps} Chebyshev sweeps, {opts.mg.cycles} MG cycles)")
    return prec


def _check_dense_size(n: int, setting: str, default: int):
    limit = get_setting(setting, default)
    if n > limit:
        raise DimensionTooLargeError(f"Dense construction limited to {limit} unknowns ({setting}), got {n}")


def exact_schur(system: SaddleSystem) -> np.ndarray:
    """Dense S = C + B2 A^{-1} B1t."""
    A_lu = DenseLU(system.A)
    return system.C.toarray() + system.B2.toarray() @ A_lu.solve(system.B1t.toarray())


def ideal_prec(system: SaddleSystem) -> BlockTriangularPrec:
    """
    Exact block-triangular preconditioner with dense A and S.

    Raises:
        DimensionTooLargeError: total dimension above KKT_IDEAL_MAX_DIM
        SingularMatrixError: singular A or S
    """
    _check_dense_size(system.dimension, 'KKT_IDEAL_MAX_DIM', 4000)
    A_lu = DenseLU(system.A)
    S_lu = DenseLU(exact_schur(system))
    return BlockTriangularPrec(A_tilde_apply=A_lu.solve, B2=system.B2,
                               S_tilde_apply=S_lu.solve, flexible=False)


def schur_approximation_dense(system: SaddleSystem) -> np.ndarray:
    """Dense S^ = F A^{-1} F^T with F = B2 + A / sqrt(beta)."""
    F = (system.B2 + system.A / np.sqrt(system.beta)).toarray()
    A_lu = DenseLU(system.A)
    S_hat = F @ A_lu.solve(F.T)
    return 0.5 * (S_hat + S_hat.T)


def schur_spectrum(system: SaddleSystem) -> np.ndarray:
    """
    Eigenvalues of S^{-1} S with exact factor solves, from the generalized
    symmetric problem S x = lambda S^ x.

    Raises:
        DimensionTooLargeError: total dimension above KKT_EIGCHECK_MAX_DIM
    """
    _check_dense_size(system.dimension, 'KKT_EIGCHECK_MAX_DIM', 1000)
    S = exact_schur(system)
    S = 0.5 * (S + S.T)
    eigenvalues = dense_symmetric_eig(S, schur_approximation_dense(system))
    logger.info(f"Schur spectrum: min {eigenvalues[0]:.6f}, max {eigenvalues[-1]:.6f} "
                f"({eigenvalues.size} eigenvalues)")
    return eigenvalues
