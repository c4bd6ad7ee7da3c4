"""
Structured triangular meshes of axis-aligned rectangles.

LAYOUT:
    - nodes are numbered row-major, x fastest: index = i + j * (nx + 1)
    - each cell is split along the diagonal from its lower-left to its upper-right
      corner into two counter-clockwise triangles
    - boundary_nodes holds every node with a coordinate on the rectangle boundary

REFINEMENT:
    refine() doubles nx and ny on the same rectangle. Coordinates are computed as
    x_lo + (x_hi - x_lo) * (i / nx), so coarse node (I, J) and fine node (2I, 2J)
    evaluate the same rational i / nx and coincide bit-exactly. The fine mesh keeps a
    reference to its parent and the fine index of every parent node, which is all
    the multigrid prolongation needs.

Meshes are immutable after construction (arrays are flagged read-only).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import InvalidDimensionError, MeshOverflowError

logger = logging.getLogger(__name__)

Rectangle = Tuple[float, float, float, float]

UNIT_SQUARE: Rectangle = (0.0, 1.0, 0.0, 1.0)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    nx: int
    ny: int
    domain: Rectangle
    nodes: np.ndarray
    elements: np.ndarray
    boundary_nodes: np.ndarray
    level: int = 0
    parent: Optional['Mesh'] = None
    parent_nodes: Optional[np.ndarray] = None

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @property
    def area(self) -> float:
        x_lo, x_hi, y_lo, y_hi = self.domain
        return (x_hi - x_lo) * (y_hi - y_lo)

    def element_areas(self) -> np.ndarray:
        """Signed areas, positive for counter-clockwise elements."""
        p = self.nodes[self.elements]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = True
        return mask

    def interior_nodes(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask())

    def __repr__(self):
        return f"Mesh(nx={self.nx}, ny={self.ny}, domain={self.domain}, level={self.level})"


def _validate(nx: int, ny: int, domain: Rectangle):
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidDimensionError(f"Cell counts must be positive integers, got nx={nx}, ny={ny}")
    if len(domain) != 4:
        raise InvalidDimensionError(f"Domain must be (x_lo, x_hi, y_lo, y_hi), got {domain}")
    x_lo, x_hi, y_lo, y_hi = domain
    if not (x_lo < x_hi and y_lo < y_hi):
        raise InvalidDimensionError(f"Degenerate rectangle {domain}")


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    coords = lo + (hi - lo) * (np.arange(n + 1) / n)
    coords[0] = lo
    coords[-1] = hi
    return coords


def _assemble(nx: int, ny: int, domain: Rectangle, level: int,
              parent: Optional[Mesh] = None, parent_nodes: Optional[np.ndarray] = None) -> Mesh:
    x_lo, x_hi, y_lo, y_hi = (float(v) for v in domain)
    xs = _axis(x_lo, x_hi, nx)
    ys = _axis(y_lo, y_hi, ny)
    X, Y = np.meshgrid(xs, ys)  # shape (ny+1, nx+1): row j, column i
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nx), np.arange(ny))
    n0 = (i + j * (nx + 1)).ravel()
    n1 = n0 + 1
    n2 = n0 + nx + 2
    n3 = n0 + nx + 1
    lower = np.column_stack([n0, n1, n2])
    upper = np.column_stack([n0, n2, n3])
    # cell-major: the two triangles of a cell are adjacent
    elements = np.stack([lower, upper], axis=1).reshape(-1, 3)

    ii, jj = np.meshgrid(np.arange(nx + 1), np.arange(ny + 1))
    on_boundary = ((ii == 0) | (ii == nx) | (jj == 0) | (jj == ny)).ravel()
    boundary_nodes = np.flatnonzero(on_boundary)

    return Mesh(
        nx=int(nx), ny=int(ny), domain=(x_lo, x_hi, y_lo, y_hi),
        nodes=_frozen(nodes), elements=_frozen(elements.astype(np.int64)),
        boundary_nodes=_frozen(boundary_nodes.astype(np.int64)),
        level=level, parent=parent,
        parent_nodes=_frozen(parent_nodes) if parent_nodes is not None else None,
    )


def build_rect_mesh(nx: int, ny: int, domain: Rectangle = UNIT_SQUARE) -> Mesh:
    """
    Build the structured triangulation of a rectangle.

    Args:
        nx, ny: cells per axis (>= 1)
        domain: (x_lo, x_hi, y_lo, y_hi)

    Returns:
        Mesh with (nx+1)(ny+1) nodes and 2 nx ny elements.

    Raises:
        InvalidDimensionError: non-positive counts or degenerate rectangle
    """
    _validate(nx, ny, domain)
    mesh = _assemble(int(nx), int(ny), domain, level=0)
    logger.debug(f"Built {mesh!r}: {mesh.n_nodes} nodes, {mesh.n_elements} elements")
    return mesh


def refine(mesh: Mesh) -> Mesh:
    """Uniform refinement: doubles nx and ny, keeps parent linkage."""
    nx, ny = 2 * mesh.nx, 2 * mesh.ny
    limit = np.iinfo(np.intp).max
    if (nx + 1) * (ny + 1) > limit or 2 * nx * ny > limit:
        raise MeshOverflowError(
            f"Refining {mesh!r} would need {(nx + 1) * (ny + 1)} nodes, above index range {limit}"
        )
    I, J = np.meshgrid(np.arange(mesh.nx + 1), np.arange(mesh.ny + 1))
    parent_nodes = (2 * I + 2 * J * (nx + 1)).ravel().astype(np.int64)
    return _assemble(nx, ny, mesh.domain, level=mesh.level + 1,
                     parent=mesh, parent_nodes=parent_nodes)


def build_refined_mesh(k: int, domain: Rectangle, coarse_cells: int = 2) -> Mesh:
    """
    Mesh with 2^k cells per axis (2^k + 1 points), reached by refining a coarse
    mesh of `coarse_cells` cells per axis so the whole nested hierarchy is kept.
    """
    target = 2 ** int(k)
    if coarse_cells < 1 or target < coarse_cells:
        raise InvalidDimensionError(
            f"k={k} gives {target} cells per axis, fewer than coarse_cells={coarse_cells}"
        )
    cells = coarse_cells
    mesh = build_rect_mesh(cells, cells, domain)
    while cells < target:
        mesh = refine(mesh)
        cells *= 2
    if cells != target:
        raise InvalidDimensionError(
            f"coarse_cells={coarse_cells} cannot be refined to 2^{k}={target} cells"
        )
    return mesh


def hierarchy(mesh: Mesh) -> List[Mesh]:
    """Meshes from the coarsest ancestor to `mesh`."""
    chain = [mesh]
    while chain[-1].parent is not None:
        chain.append(chain[-1].parent)
    return chain[::-1]


def prolongation(coarse: Mesh, fine: Mesh) -> sp.csr_matrix:
    """
    P1 interpolation from `coarse` to its refinement `fine`, restricted to interior
    nodes on both sides (rows of fine boundary nodes and columns of coarse boundary
    nodes are zero). Returns an (n_fine x n_coarse) CSR matrix.
    """
    if fine.nx != 2 * coarse.nx or fine.ny != 2 * coarse.ny or fine.domain != coarse.domain:
        raise InvalidDimensionError(f"{fine!r} is not the refinement of {coarse!r}")

    ncx = coarse.nx + 1
    i, j = np.meshgrid(np.arange(fine.nx + 1), np.arange(fine.ny + 1))
    i, j = i.ravel(), j.ravel()
    fine_index = i + j * (fine.nx + 1)
    I0, J0 = i // 2, j // 2
    I1 = I0 + (i % 2)
    J1 = J0 + (j % 2)
    # even/even maps onto one coarse node, every other fine node sits at the midpoint
    # of an edge (horizontal, vertical or the lower-left to upper-right diagonal)
    a = I0 + J0 * ncx
    b = I1 + J1 * ncx
    single = a == b

    rows = np.concatenate([fine_index[single], fine_index[~single], fine_index[~single]])
    cols = np.concatenate([a[single], a[~single], b[~single]])
    vals = np.concatenate([np.ones(single.sum()), np.full(2 * (~single).sum(), 0.5)])

    keep = ~fine.boundary_mask()[rows] & ~coarse.boundary_mask()[cols]
    P = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])),
                      shape=(fine.n_nodes, coarse.n_nodes))
    P = P.tocsr()
    P.sum_duplicates()
    return P
