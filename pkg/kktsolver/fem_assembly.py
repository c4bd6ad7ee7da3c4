"""
P1 finite element assembly on structured triangular meshes.

MATRICES:
    assemble_mass        exact local mass (area/12)[[2,1,1],[1,2,1],[1,1,2]]
    assemble_stiffness   diffusivity * area * (grad phi_a . grad phi_b)
    assemble_convection  (w . grad phi_j) phi_i with 3-point edge-midpoint quadrature
    assemble_reaction    lumped mass weighted by nodal coefficients

All local matrices are computed for every element at once with numpy and summed into
CSR in element order, so each assembled matrix is reproducible bit for bit.

DATA:
    Callables are vectorized over node arrays: f(x, y) for stationary data and
    f(x, y, t) for time-dependent data. Wind fields return the pair (wx, wy).

BOUNDARY CONDITIONS:
    apply_dirichlet performs symmetric elimination with lifting.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import DimensionMismatchError, IndexOutOfRangeError
from .mesh import Mesh
from .sparse_linalg import as_csr

logger = logging.getLogger(__name__)

LOCAL_MASS = np.array([[2.0, 1.0, 1.0],
                       [1.0, 2.0, 1.0],
                       [1.0, 1.0, 2.0]]) / 12.0

# value of each vertex basis function at the midpoint of the edge opposite vertex q
MIDPOINT_BASIS = 0.5 * (1.0 - np.eye(3))


@dataclass(frozen=True)
class AssembledForm:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    lifting: np.ndarray
    constrained: np.ndarray


# =============================================================================
# LOCAL GEOMETRY
# =============================================================================

def element_geometry(mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
    """
    Areas (E,) and barycentric gradients (E, 3, 2) of every element.
    """
    p = mesh.nodes[mesh.elements]
    area = mesh.element_areas()
    # grad phi_a = perp(p_c - p_b) / (2 area) for (a, b, c) cyclic
    nxt = p[:, [1, 2, 0]]
    prv = p[:, [2, 0, 1]]
    edge = prv - nxt
    grads = np.stack([-edge[:, :, 1], edge[:, :, 0]], axis=2) / (2.0 * area[:, None, None])
    return area, grads


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    rows = np.repeat(mesh.elements, 3, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, 3)).ravel()
    n = mesh.n_nodes
    matrix = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    return as_csr(matrix)


# =============================================================================
# MATRICES
# =============================================================================

def assemble_mass(mesh: Mesh) -> sp.csr_matrix:
    """P1 mass matrix M_ij = int phi_i phi_j."""
    area = mesh.element_areas()
    local = area[:, None, None] * LOCAL_MASS[None, :, :]
    return _scatter(mesh, local)


def assemble_stiffness(mesh: Mesh, diffusivity: float = 1.0) -> sp.csr_matrix:
    """P1 stiffness matrix K_ij = diffusivity * int grad phi_i . grad phi_j."""
    if diffusivity <= 0:
        raise ValueError(f"diffusivity must be positive, got {diffusivity}")
    area, grads = element_geometry(mesh)
    local = diffusivity * area[:, None, None] * np.einsum('eak,ebk->eab', grads, grads)
    return _scatter(mesh, local)


def edge_midpoints(mesh: Mesh) -> np.ndarray:
    """Midpoint of the edge opposite each vertex, shape (E, 3, 2)."""
    p = mesh.nodes[mesh.elements]
    return 0.5 * (p[:, [1, 2, 0]] + p[:, [2, 0, 1]])


def assemble_convection(mesh: Mesh, wind: Callable) -> sp.csr_matrix:
    """
    Convection matrix N_ij = int (w . grad phi_j) phi_i.

    Args:
        wind: callable (x, y) -> (wx, wy), vectorized; constant fields may
              return scalars

    The 3-point edge-midpoint rule is exact for the quadratic integrands produced
    by affine winds, so N 1 = 0 up to roundoff.
    """
    area, grads = element_geometry(mesh)
    mids = edge_midpoints(mesh)
    wx, wy = wind(mids[:, :, 0], mids[:, :, 1])
    wx = np.broadcast_to(np.asarray(wx, dtype=np.float64), mids.shape[:2])
    wy = np.broadcast_to(np.asarray(wy, dtype=np.float64), mids.shape[:2])

    # advective derivative of phi_j at quadrature point q: (E, q, j)
    w_dot_grad = wx[:, :, None] * grads[:, None, :, 0] + wy[:, :, None] * grads[:, None, :, 1]
    local = (area / 3.0)[:, None, None] * np.einsum('qi,eqj->eij', MIDPOINT_BASIS, w_dot_grad)
    matrix = _scatter(mesh, local)
    matrix.eliminate_zeros()
    return matrix


def lumped_mass(mesh: Mesh) -> np.ndarray:
    """Row sums of the P1 mass matrix (area/3 per element vertex)."""
    area = mesh.element_areas()
    return np.bincount(mesh.elements.ravel(), weights=np.repeat(area / 3.0, 3),
                       minlength=mesh.n_nodes)


def assemble_reaction(mesh: Mesh, weights: np.ndarray, coefficient: float = 1.0) -> sp.csr_matrix:
    """Lumped reaction operator diag(coefficient * m_i * w_i)."""
    weights = np.broadcast_to(np.asarray(weights, dtype=np.float64), (mesh.n_nodes,))
    return as_csr(sp.diags(coefficient * lumped_mass(mesh) * weights))


# =============================================================================
# DATA
# =============================================================================

def interpolate(mesh: Mesh, f: Callable, t: Optional[float] = None) -> np.ndarray:
    """Nodal values f(x_i), or f(x_i, t) when `t` is given."""
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    values = f(x, y) if t is None else f(x, y, t)
    return np.array(np.broadcast_to(np.asarray(values, dtype=np.float64), (mesh.n_nodes,)))


def assemble_load(mesh: Mesh, f: Callable, t: Optional[float] = None,
                  mass: Optional[sp.csr_matrix] = None) -> np.ndarray:
    """Load vector int f phi_i of the P1 interpolant of f: M @ interpolate(f)."""
    if mass is None:
        mass = assemble_mass(mesh)
    return mass @ interpolate(mesh, f, t)


# =============================================================================
# DIRICHLET ELIMINATION
# =============================================================================

def _checked_indices(boundary, n: int) -> np.ndarray:
    idx = np.asarray(boundary, dtype=np.int64).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexOutOfRangeError(
            f"Constrained index range [{idx.min()}, {idx.max()}] outside 0..{n - 1}"
        )
    return idx


def mask_rows_cols(matrix, boundary, unit_diagonal: bool = True) -> sp.csr_matrix:
    """
    Zero the rows and columns of `boundary`; place a unit diagonal there if asked.

    Rows and columns are cleared by multiplying with a 0/1 diagonal, which keeps
    symmetric input bit-exactly symmetric.
    """
    a = as_csr(matrix)
    n_rows, n_cols = a.shape
    idx = _checked_indices(boundary, min(n_rows, n_cols))
    keep_r = np.ones(n_rows)
    keep_r[idx] = 0.0
    keep_c = np.ones(n_cols)
    keep_c[idx] = 0.0
    out = sp.diags(keep_r) @ a @ sp.diags(keep_c)
    if unit_diagonal:
        unit = np.zeros(n_rows)
        unit[idx] = 1.0
        out = out + sp.diags(unit, shape=(n_rows, n_cols))
    out = as_csr(out)
    out.eliminate_zeros()
    return out


def apply_dirichlet(matrix, rhs: np.ndarray, boundary, values) -> AssembledForm:
    """
    Symmetric Dirichlet elimination.

    Args:
        matrix: square system matrix
        rhs: right-hand side, same length
        boundary: constrained indices
        values: boundary values (scalar or one per constrained index)

    Returns:
        AssembledForm with rows/columns of `boundary` replaced by a unit diagonal,
        rhs reduced by the lifting A[:, boundary] @ values and overwritten with the
        values on the boundary.

    Raises:
        DimensionMismatchError: matrix not square or rhs length mismatch
        IndexOutOfRangeError: constrained index outside the matrix
    """
    a = as_csr(matrix)
    n = a.shape[0]
    if a.shape[1] != n:
        raise DimensionMismatchError(f"apply_dirichlet needs a square matrix, got {a.shape}")
    rhs = np.array(rhs, dtype=np.float64)
    if rhs.shape != (n,):
        raise DimensionMismatchError(f"rhs has shape {rhs.shape}, expected ({n},)")

    idx = _checked_indices(boundary, n)
    g = np.broadcast_to(np.asarray(values, dtype=np.float64), idx.shape)
    g_full = np.zeros(n)
    g_full[idx] = g

    lifting = a @ g_full
    reduced = rhs - lifting
    reduced[idx] = g
    constrained = np.unique(idx)
    return AssembledForm(
        matrix=mask_rows_cols(a, constrained, unit_diagonal=True),
        rhs=reduced,
        lifting=lifting,
        constrained=constrained,
    )
