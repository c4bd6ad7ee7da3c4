"""
Sparse matrix storage, linear operators, block composition and dense oracles.

STORAGE:
    SparseMatrix is scipy's csr_matrix kept in canonical form (sorted column indices,
    no duplicates, float64). `as_csr` is the single entry point that enforces it.

OPERATORS:
    LinearOperator is scipy.sparse.linalg.LinearOperator. BlockOperator composes a grid
    of operators (None = zero block) without materializing the product.

DENSE ORACLES (verification only):
    DenseLU / dense_solve     LU with partial pivoting, singular pivot check
    dense_symmetric_eig       symmetric (or generalized symmetric-definite) eigenvalues

I/O:
    Matrix Market coordinate real general, vectors as one value per line, 17 digits.
"""

import logging
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .conf import get_setting
from .exceptions import (
    DimensionMismatchError,
    DimensionTooLargeError,
    NonSymmetricError,
    SingularMatrixError,
)

logger = logging.getLogger(__name__)

SparseMatrix = sp.csr_matrix

SINGULAR_PIVOT = 1e-300
SYMMETRY_RTOL = 1e-12


def as_csr(m) -> sp.csr_matrix:
    """Copy `m` into canonical float64 CSR (sorted indices, duplicates summed)."""
    csr = sp.csr_matrix(m, dtype=np.float64, copy=True)
    csr.sum_duplicates()
    return csr


def spmv(m: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
    """y = M x."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or m.shape[1] != x.shape[0]:
        raise DimensionMismatchError(
            f"spmv: matrix is {m.shape[0]}x{m.shape[1]} but vector has shape {x.shape}"
        )
    return m @ x


def transpose(m: sp.csr_matrix) -> sp.csr_matrix:
    """Exact structural transpose, returned in canonical CSR."""
    return as_csr(m.T)


def apply_operator(op, x: np.ndarray) -> np.ndarray:
    """Apply a matrix, LinearOperator or plain callable to a vector."""
    if sp.issparse(op) or isinstance(op, (np.ndarray, LinearOperator)):
        return op @ x
    return op(x)


def to_dense(op) -> np.ndarray:
    """Materialize any supported operator as a dense array (oracle use only)."""
    if sp.issparse(op):
        return op.toarray()
    if isinstance(op, np.ndarray):
        return np.array(op, dtype=np.float64)
    if isinstance(op, BlockOperator):
        return op.to_dense()
    n = op.shape[1]
    return np.column_stack([apply_operator(op, e) for e in np.eye(n)])


# =============================================================================
# BLOCK COMPOSITION
# =============================================================================

class BlockOperator(LinearOperator):
    """
    Grid of operator blocks applied without forming the full matrix.

    Example:
        op = BlockOperator([[A, B1t], [B2, -C]])
        y = op @ x

    Args:
        blocks: rows of blocks; each block is a sparse/dense matrix, a LinearOperator
                or None for a zero block. Every block row and column needs at least
                one non-None block to fix its size unless sizes are given.
        row_sizes, col_sizes: optional explicit partition sizes.
    """

    def __init__(self, blocks: Sequence[Sequence], row_sizes=None, col_sizes=None):
        self.blocks = [list(row) for row in blocks]
        n_rows = len(self.blocks)
        n_cols = len(self.blocks[0]) if n_rows else 0
        if any(len(row) != n_cols for row in self.blocks):
            raise DimensionMismatchError("BlockOperator rows have different lengths")

        rows = list(row_sizes) if row_sizes is not None else [None] * n_rows
        cols = list(col_sizes) if col_sizes is not None else [None] * n_cols
        for i, row in enumerate(self.blocks):
            for j, block in enumerate(row):
                if block is None:
                    continue
                r, c = block.shape
                if rows[i] is None:
                    rows[i] = r
                if cols[j] is None:
                    cols[j] = c
                if rows[i] != r or cols[j] != c:
                    raise DimensionMismatchError(
                        f"Block ({i},{j}) is {r}x{c}, partition expects {rows[i]}x{cols[j]}"
                    )
        if any(s is None for s in rows + cols):
            raise DimensionMismatchError("BlockOperator partition sizes cannot be inferred")

        self.row_sizes = rows
        self.col_sizes = cols
        self._row_offsets = np.concatenate([[0], np.cumsum(rows)]).astype(int)
        self._col_offsets = np.concatenate([[0], np.cumsum(cols)]).astype(int)
        super().__init__(dtype=np.float64, shape=(int(sum(rows)), int(sum(cols))))

    def _split(self, x: np.ndarray, offsets: np.ndarray) -> List[np.ndarray]:
        return [x[offsets[i]:offsets[i + 1]] for i in range(len(offsets) - 1)]

    def _matvec(self, x):
        parts = self._split(np.ravel(x), self._col_offsets)
        y = np.zeros(self.shape[0])
        for i, row in enumerate(self.blocks):
            out = y[self._row_offsets[i]:self._row_offsets[i + 1]]
            for j, block in enumerate(row):
                if block is not None:
                    out += apply_operator(block, parts[j])
        return y

    def _rmatvec(self, y):
        parts = self._split(np.ravel(y), self._row_offsets)
        x = np.zeros(self.shape[1])
        for i, row in enumerate(self.blocks):
            for j, block in enumerate(row):
                if block is None:
                    continue
                out = x[self._col_offsets[j]:self._col_offsets[j + 1]]
                if sp.issparse(block) or isinstance(block, np.ndarray):
                    out += block.T @ parts[i]
                else:
                    out += block.rmatvec(parts[i])
        return x

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.shape)
        for i, row in enumerate(self.blocks):
            for j, block in enumerate(row):
                if block is None:
                    continue
                dense[self._row_offsets[i]:self._row_offsets[i + 1],
                      self._col_offsets[j]:self._col_offsets[j + 1]] = to_dense(block)
        return dense


# =============================================================================
# DENSE ORACLES
# =============================================================================

class DenseLU:
    """
    LU factorization with partial pivoting of a dense (or densified sparse) matrix.

    Factorize once, solve many times. Used by dense_solve, the multigrid coarse
    level and the exact/ideal preconditioners.

    Raises:
        DimensionMismatchError: non-square input
        DimensionTooLargeError: n above KKT_DENSE_MAX_DIM
        SingularMatrixError: a pivot magnitude below 1e-300
    """

    def __init__(self, m, max_dim: Optional[int] = None):
        a = to_dense(m) if not isinstance(m, np.ndarray) else np.array(m, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatchError(f"LU needs a square matrix, got shape {a.shape}")
        limit = max_dim if max_dim is not None else get_setting('KKT_DENSE_MAX_DIM', 5000)
        if a.shape[0] > limit:
            raise DimensionTooLargeError(
                f"Dense LU limited to n <= {limit}, got n = {a.shape[0]}"
            )
        self.n = a.shape[0]
        if self.n == 0:
            self._factors = None
            return
        lu, piv = scipy.linalg.lu_factor(a, check_finite=True)
        smallest = np.min(np.abs(np.diag(lu)))
        if smallest < SINGULAR_PIVOT:
            raise SingularMatrixError(f"Matrix is singular: smallest pivot {smallest:.3e}")
        self._factors = (lu, piv)

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self._factors is None:
            return np.zeros(0)
        return scipy.linalg.lu_solve(self._factors, np.asarray(b, dtype=np.float64))

    def solve_transpose(self, b: np.ndarray) -> np.ndarray:
        if self._factors is None:
            return np.zeros(0)
        return scipy.linalg.lu_solve(self._factors, np.asarray(b, dtype=np.float64), trans=1)


def dense_solve(m, b: np.ndarray) -> np.ndarray:
    """Solve m x = b by LU with partial pivoting."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != m.shape[0]:
        raise DimensionMismatchError(f"rhs length {b.shape[0]} does not match n = {m.shape[0]}")
    return DenseLU(m).solve(b)


def _checked_symmetric(m, label: str) -> np.ndarray:
    a = to_dense(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"{label} must be square, got shape {a.shape}")
    scale = max(np.linalg.norm(a), 1.0)
    defect = np.linalg.norm(a - a.T)
    if defect > SYMMETRY_RTOL * scale:
        raise NonSymmetricError(f"{label} is not symmetric: ||A - A^T|| = {defect:.3e}")
    return 0.5 * (a + a.T)


def dense_symmetric_eig(m, b=None) -> np.ndarray:
    """
    Eigenvalues of a symmetric matrix, sorted ascending.

    With `b` (symmetric positive definite) the generalized problem m x = lambda b x
    is solved instead, which gives the spectrum of b^{-1} m without forming it.
    """
    a = _checked_symmetric(m, 'matrix')
    if b is None:
        w = scipy.linalg.eigh(a, eigvals_only=True)
    else:
        bb = _checked_symmetric(b, 'metric')
        if bb.shape != a.shape:
            raise DimensionMismatchError("Generalized eigenproblem needs matching shapes")
        w = scipy.linalg.eigh(a, bb, eigvals_only=True)
    return np.sort(w)


def linearity_defect(op, n: int, rng: np.random.Generator) -> float:
    """Relative defect of op(ax + by) against a op(x) + b op(y) on a random probe."""
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    a, b = rng.standard_normal(2)
    combined = apply_operator(op, a * x + b * y)
    separate = a * apply_operator(op, x) + b * apply_operator(op, y)
    scale = max(np.linalg.norm(separate), np.finfo(float).tiny)
    return float(np.linalg.norm(combined - separate) / scale)


# =============================================================================
# MATRIX MARKET / VECTOR I/O
# =============================================================================

def write_matrix_market(path: Union[str, Path], m, comment: str = '') -> Path:
    """Write `m` as `%%MatrixMarket matrix coordinate real general` (1-based)."""
    path = Path(path)
    scipy.io.mmwrite(
        str(path), as_csr(m).tocoo(), comment=comment,
        field='real', precision=17, symmetry='general',
    )
    logger.debug(f"Wrote {m.shape[0]}x{m.shape[1]} matrix to {path}")
    return path


def read_matrix_market(path: Union[str, Path]) -> sp.csr_matrix:
    return as_csr(scipy.io.mmread(str(path)))


def write_vector(path: Union[str, Path], x: np.ndarray) -> Path:
    path = Path(path)
    np.savetxt(path, np.asarray(x, dtype=np.float64), fmt='%.17g')
    return path


def read_vector(path: Union[str, Path]) -> np.ndarray:
    return np.atleast_1d(np.loadtxt(path, dtype=np.float64))
