"""
Discretized KKT saddle-point systems for distributed optimal control.

UNKNOWNS:
    x = (v, zeta): state and adjoint, stacked per retained time point. The control is
    recovered afterwards as u = zeta / beta.

BLOCKS:
    [ A    B1t ] [ v    ]   [ b_v    ]
    [ B2   -C  ] [ zeta ] = [ b_zeta ]

    stationary      A = M, B2 = D, B1t = D^T, C = M / beta
    instationary    B2 = L, block lower-bidiagonal over t_1..t_{n_t-1} (v_0 is known
                    from the initial condition and moved to the right-hand side),
                    A = blockdiag(w_k M), C = A / beta, B1t = L^T

    backward_euler  L_kk = M + tau D_k,          L_k,k-1 = -M,                 w_k = tau
    trapezoidal     L_kk = M + tau/2 D_k,        L_k,k-1 = -M + tau/2 D_{k-1}, w_k = tau
                    except w_N = tau/2 at the final time

    The control enters block k of the state equation as w_k M u_k, which is what makes
    the control block equal A and therefore C = A / beta.

BOUNDARY CONDITIONS:
    Dirichlet rows and columns are eliminated symmetrically in every block (unit
    diagonal, values lifted to the right-hand side). Boundary rows of the
    sub-diagonal blocks are zero. The unit diagonals force zeta = 0 and v = g on the
    boundary.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import DimensionMismatchError, InvalidDimensionError, SingularMatrixError
from .fem_assembly import apply_dirichlet, assemble_mass, interpolate, mask_rows_cols
from .mesh import Mesh
from .sparse_linalg import BlockOperator, DenseLU, as_csr, transpose

logger = logging.getLogger(__name__)

STATIONARY = 'stationary'
BACKWARD_EULER = 'backward_euler'
TRAPEZOIDAL = 'trapezoidal'
TIME_SCHEMES = (BACKWARD_EULER, TRAPEZOIDAL)


# =============================================================================
# DATA TYPES
# =============================================================================

@dataclass(frozen=True)
class TimeGrid:
    t0: float
    tf: float
    n_t: int

    def __post_init__(self):
        if int(self.n_t) != self.n_t or self.n_t < 2:
            raise InvalidDimensionError(f"A time grid needs n_t >= 2 points, got {self.n_t}")
        if not self.tf > self.t0:
            raise InvalidDimensionError(f"Time interval ({self.t0}, {self.tf}) is empty")

    @property
    def tau(self) -> float:
        return (self.tf - self.t0) / (self.n_t - 1)

    @property
    def points(self) -> np.ndarray:
        return self.t0 + self.tau * np.arange(self.n_t)

    @property
    def n_steps(self) -> int:
        return self.n_t - 1


@dataclass(frozen=True)
class ControlProblem:
    """
    Problem definition by callbacks.

    forward_operator(mesh, state, t) returns the unconstrained spatial operator D.
    `state` is None or nodal values of the current state (used by state-dependent
    operators); `t` is None for stationary problems.

    Data callables are vectorized: f(x, y) when stationary, f(x, y, t) otherwise.
    initial_condition(x, y) defaults to zero.
    """
    forward_operator: Callable
    desired_state: Callable
    force: Callable
    bc: Callable
    beta: float
    stationary: bool = True
    initial_condition: Optional[Callable] = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")

    @property
    def is_stationary(self) -> bool:
        return self.stationary

    def data(self, mesh: Mesh, f: Callable, t: Optional[float] = None) -> np.ndarray:
        return interpolate(mesh, f, None if self.stationary else t)

    def initial_state(self, mesh: Mesh) -> np.ndarray:
        if self.initial_condition is None:
            return np.zeros(mesh.n_nodes)
        return interpolate(mesh, self.initial_condition)


@dataclass
class SaddleSystem:
    A: sp.csr_matrix
    B1t: sp.csr_matrix
    B2: sp.csr_matrix
    C: sp.csr_matrix
    rhs: np.ndarray
    beta: float
    n_state: int
    mesh: Mesh
    scheme: str = STATIONARY
    grid: Optional[TimeGrid] = None
    # time-block structure: one entry per retained time point
    state_diag: List[sp.csr_matrix] = field(default_factory=list)
    state_sub: List[Optional[sp.csr_matrix]] = field(default_factory=list)
    weights: np.ndarray = field(default_factory=lambda: np.ones(1))
    mass: Optional[sp.csr_matrix] = None
    mass_bc: Optional[sp.csr_matrix] = None
    desired: Optional[np.ndarray] = None

    @property
    def n_blocks(self) -> int:
        return len(self.weights)

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    @property
    def dimension(self) -> int:
        return 2 * self.n_state

    @property
    def is_stationary(self) -> bool:
        return self.scheme == STATIONARY

    def operator(self) -> BlockOperator:
        return BlockOperator([[self.A, self.B1t], [self.B2, -self.C]])

    def to_sparse(self) -> sp.csr_matrix:
        return as_csr(sp.bmat([[self.A, self.B1t], [self.B2, -self.C]]))

    def to_dense(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x)
        if x.shape != (self.dimension,):
            raise DimensionMismatchError(f"Expected a vector of length {self.dimension}, got {x.shape}")
        return x[:self.n_state], x[self.n_state:]

    def blocks(self, part: np.ndarray) -> np.ndarray:
        """View a state or adjoint part as (n_blocks, n_nodes)."""
        return np.asarray(part).reshape(self.n_blocks, self.n_nodes)

    @property
    def rhs_v(self) -> np.ndarray:
        return self.rhs[:self.n_state]

    @property
    def rhs_zeta(self) -> np.ndarray:
        return self.rhs[self.n_state:]


# =============================================================================
# BUILDERS
# =============================================================================

def _lifted_full(mesh: Mesh, values: np.ndarray) -> np.ndarray:
    """Nodal vector equal to `values` on the boundary and zero inside."""
    full = np.zeros(mesh.n_nodes)
    full[mesh.boundary_nodes] = values[mesh.boundary_nodes]
    return full


def build_stationary_kkt(p: ControlProblem, mesh: Mesh, state: Optional[np.ndarray] = None) -> SaddleSystem:
    """
    Stationary KKT system.

    Args:
        p: stationary control problem
        mesh: spatial mesh
        state: linearization state passed to p.forward_operator (Picard)

    Returns:
        SaddleSystem with A = M, B2 = D, B1t = D^T, C = M / beta (all constrained)
    """
    if not p.is_stationary:
        raise InvalidDimensionError("build_stationary_kkt needs a stationary problem")
    gamma = mesh.boundary_nodes
    M = assemble_mass(mesh)
    D = as_csr(p.forward_operator(mesh, state, None))
    if D.shape != M.shape:
        raise DimensionMismatchError(f"Forward operator is {D.shape}, mesh has {mesh.n_nodes} nodes")

    g = p.data(mesh, p.bc)[gamma]
    vd = p.data(mesh, p.desired_state)
    f = p.data(mesh, p.force)

    mass_form = apply_dirichlet(M, M @ vd, gamma, g)
    state_form = apply_dirichlet(D, M @ f, gamma, g)
    A = mass_form.matrix
    B2 = state_form.matrix
    system = SaddleSystem(
        A=A, B1t=derive_adjoint(B2), B2=B2, C=as_csr(A / p.beta),
        rhs=np.concatenate([mass_form.rhs, state_form.rhs]),
        beta=p.beta, n_state=mesh.n_nodes, mesh=mesh, scheme=STATIONARY,
        state_diag=[B2], state_sub=[None], weights=np.ones(1),
        mass=M, mass_bc=A, desired=vd[None, :],
    )
    logger.info(f"Built stationary KKT system: {system.dimension} unknowns, beta={p.beta:g}")
    return system


def _time_blocks(p: ControlProblem, mesh: Mesh, grid: TimeGrid, scheme: str,
                 M: sp.csr_matrix, state: Optional[np.ndarray]):
    """Unconstrained diagonal/sub-diagonal blocks, weights and forcing per step."""
    if scheme not in TIME_SCHEMES:
        raise InvalidDimensionError(f"Unknown time scheme '{scheme}'; use one of {TIME_SCHEMES}")
    tau = grid.tau
    times = grid.points
    N = grid.n_steps
    v0 = p.initial_state(mesh)
    if state is None:
        states = [None] * (N + 1)
    else:
        states = [v0] + list(np.asarray(state).reshape(N, -1))
    D = [as_csr(p.forward_operator(mesh, states[k], times[k])) for k in range(N + 1)]
    Mf = [M @ p.data(mesh, p.force, times[k]) for k in range(N + 1)]

    diag, sub, forcing = [], [], []
    weights = np.full(N, tau)
    for k in range(1, N + 1):
        if scheme == BACKWARD_EULER:
            diag.append(as_csr(M + tau * D[k]))
            sub.append(as_csr(-M))
            forcing.append(tau * Mf[k])
        else:
            diag.append(as_csr(M + 0.5 * tau * D[k]))
            sub.append(as_csr(-M + 0.5 * tau * D[k - 1]))
            forcing.append(0.5 * tau * (Mf[k] + Mf[k - 1]))
    if scheme == TRAPEZOIDAL:
        weights[-1] = 0.5 * tau
    return diag, sub, weights, forcing, v0


def build_instationary_kkt(p: ControlProblem, mesh: Mesh, grid: TimeGrid, scheme: str,
                           state: Optional[np.ndarray] = None) -> SaddleSystem:
    """
    All-at-once KKT system over the time points t_1..t_{n_t-1}.

    Args:
        p: instationary control problem
        mesh: spatial mesh
        grid: uniform time grid (n_t >= 2)
        scheme: 'backward_euler' or 'trapezoidal'
        state: optional stacked state trajectory (n_t-1 blocks) for state-dependent
               operators; block k linearizes D at t_k

    Returns:
        SaddleSystem of dimension 2 (n_t - 1) n_nodes

    Raises:
        InvalidDimensionError: invalid n_t or scheme
    """
    if p.is_stationary:
        raise InvalidDimensionError("build_instationary_kkt needs an instationary problem")
    gamma = mesh.boundary_nodes
    n = mesh.n_nodes
    times = grid.points
    M = assemble_mass(mesh)
    diag_full, sub_full, weights, forcing, v0 = _time_blocks(p, mesh, grid, scheme, M, state)
    N = grid.n_steps

    bc = [p.data(mesh, p.bc, t) for t in times]
    desired = np.stack([p.data(mesh, p.desired_state, t) for t in times[1:]])

    A_blocks, L_diag, L_sub = [], [], []
    rhs_v, rhs_zeta = [], []
    for k in range(N):
        g_k = bc[k + 1][gamma]
        mass_form = apply_dirichlet(weights[k] * M, weights[k] * (M @ desired[k]), gamma, g_k)
        A_blocks.append(mass_form.matrix)
        rhs_v.append(mass_form.rhs)

        previous = v0 if k == 0 else _lifted_full(mesh, bc[k])
        state_form = apply_dirichlet(diag_full[k], forcing[k] - sub_full[k] @ previous, gamma, g_k)
        L_diag.append(state_form.matrix)
        L_sub.append(mask_rows_cols(sub_full[k], gamma, unit_diagonal=False) if k > 0 else None)
        rhs_zeta.append(state_form.rhs)

    grid_blocks = [[None] * N for _ in range(N)]
    for k in range(N):
        grid_blocks[k][k] = L_diag[k]
        if k > 0:
            grid_blocks[k][k - 1] = L_sub[k]
    L = as_csr(sp.bmat(grid_blocks, format='csr'))
    A = as_csr(sp.block_diag(A_blocks, format='csr'))

    system = SaddleSystem(
        A=A, B1t=derive_adjoint(L), B2=L, C=as_csr(A / p.beta),
        rhs=np.concatenate(rhs_v + rhs_zeta),
        beta=p.beta, n_state=N * n, mesh=mesh, scheme=scheme, grid=grid,
        state_diag=L_diag, state_sub=L_sub, weights=weights,
        mass=M, mass_bc=mask_rows_cols(M, gamma, unit_diagonal=True), desired=desired,
    )
    logger.info(f"Built {scheme} KKT system: {N} time blocks, {system.dimension} unknowns, "
                f"beta={p.beta:g}")
    return system


def build_kkt(p: ControlProblem, mesh: Mesh, grid: Optional[TimeGrid] = None,
              scheme: Optional[str] = None, state: Optional[np.ndarray] = None) -> SaddleSystem:
    """Dispatch on p.is_stationary."""
    if p.is_stationary:
        return build_stationary_kkt(p, mesh, state=state)
    if grid is None or scheme is None:
        raise InvalidDimensionError("Instationary problems need a time grid and a scheme")
    return build_instationary_kkt(p, mesh, grid, scheme, state=state)


# =============================================================================
# OPERATIONS ON SYSTEMS
# =============================================================================

def derive_adjoint(forward_block) -> sp.csr_matrix:
    """Discrete adjoint of an assembled forward operator: its exact transpose."""
    if forward_block.shape[0] != forward_block.shape[1]:
        raise DimensionMismatchError(f"Adjoint needs a square block, got {forward_block.shape}")
    return transpose(forward_block)


def solve_dense(system: SaddleSystem) -> np.ndarray:
    """Monolithic dense LU solve of the saddle system (oracle)."""
    return DenseLU(system.to_sparse()).solve(system.rhs)


def recover_control(system: SaddleSystem, zeta: np.ndarray) -> np.ndarray:
    return np.asarray(zeta) / system.beta


def kkt_residual(system: SaddleSystem, x: np.ndarray) -> np.ndarray:
    return system.rhs - system.operator() @ np.asarray(x)


def objective(system: SaddleSystem, v: np.ndarray, u: np.ndarray) -> float:
    """
    Discrete cost sum_k w_k [ 1/2 |v_k - vd_k|_M^2 + beta/2 |u_k|_M^2 ].
    """
    M = system.mass
    misfit = system.blocks(v) - system.desired
    control = system.blocks(u)
    total = 0.0
    for w, e, c in zip(system.weights, misfit, control):
        total += w * (0.5 * e @ (M @ e) + 0.5 * system.beta * c @ (M @ c))
    return float(total)


def _sparse_solve(matrix: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    x = spla.spsolve(sp.csc_matrix(matrix), rhs)
    if not np.all(np.isfinite(x)):
        raise SingularMatrixError("Sparse solve produced non-finite values")
    return np.atleast_1d(x)


def forward_march(p: ControlProblem, mesh: Mesh, grid: TimeGrid, scheme: str,
                  u: Optional[np.ndarray] = None, state: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Sequential time stepping of M dv/dt + D v = M u + M f.

    Args:
        u: control per retained time point, shape (n_t-1, n_nodes) or stacked;
           None means zero
        state: optional linearization trajectory, as for build_instationary_kkt

    Returns:
        trajectory of shape (n_t, n_nodes), row 0 being the initial state
    """
    gamma = mesh.boundary_nodes
    n = mesh.n_nodes
    times = grid.points
    M = assemble_mass(mesh)
    diag_full, sub_full, weights, forcing, v0 = _time_blocks(p, mesh, grid, scheme, M, state)
    N = grid.n_steps
    controls = np.zeros((N, n)) if u is None else np.asarray(u, dtype=np.float64).reshape(N, n)

    trajectory = np.zeros((N + 1, n))
    trajectory[0] = v0
    for k in range(N):
        rhs = forcing[k] + weights[k] * (M @ controls[k]) - sub_full[k] @ trajectory[k]
        g_k = p.data(mesh, p.bc, times[k + 1])[gamma]
        form = apply_dirichlet(diag_full[k], rhs, gamma, g_k)
        trajectory[k + 1] = _sparse_solve(form.matrix, form.rhs)
    logger.debug(f"Forward march ({scheme}): {N} steps")
    return trajectory


# =============================================================================
# REDUCED (CONTROL-ONLY) FORMULATION, STATIONARY
# =============================================================================

def _reduced_parts(p: ControlProblem, mesh: Mesh, u: np.ndarray):
    gamma = mesh.boundary_nodes
    M = assemble_mass(mesh)
    D = as_csr(p.forward_operator(mesh, None, None))
    u = np.array(u, dtype=np.float64)
    u[gamma] = 0.0
    g = p.data(mesh, p.bc)[gamma]
    vd = p.data(mesh, p.desired_state)
    f = p.data(mesh, p.force)
    state_form = apply_dirichlet(D, M @ (f + u), gamma, g)
    v = _sparse_solve(state_form.matrix, state_form.rhs)
    return M, state_form.matrix, u, v, vd


def reduced_cost(p: ControlProblem, mesh: Mesh, u: np.ndarray) -> float:
    """J(u) = 1/2 |v(u) - vd|_M^2 + beta/2 |u|_M^2, u restricted to interior nodes."""
    M, _, u, v, vd = _reduced_parts(p, mesh, u)
    e = v - vd
    return float(0.5 * e @ (M @ e) + 0.5 * p.beta * u @ (M @ u))


def reduced_gradient(p: ControlProblem, mesh: Mesh, u: np.ndarray) -> np.ndarray:
    """
    Gradient of reduced_cost via one adjoint solve: beta M u - M lambda on interior
    nodes, with D^T lambda = -M (v - vd) and lambda = 0 on the boundary.
    """
    M, D_bc, u, v, vd = _reduced_parts(p, mesh, u)
    gamma = mesh.boundary_nodes
    rhs = -(M @ (v - vd))
    rhs[gamma] = 0.0
    lam = _sparse_solve(derive_adjoint(D_bc), rhs)
    grad = p.beta * (M @ u) - M @ lam
    grad[gamma] = 0.0
    return grad
