"""
Exception hierarchy for the KKT solver package.

Every error raised on purpose by the numerical modules derives from KKTSolverError,
so the management commands can map the whole family onto exit codes in one place.

Non-convergence is NOT an error: solvers report it through SolveReport.converged.
"""


class KKTSolverError(Exception):
    """Base class for all solver errors"""
    pass


class InvalidDimensionError(KKTSolverError):
    """Raised for non-positive cell counts or a degenerate rectangle"""
    pass


class MeshOverflowError(KKTSolverError):
    """Raised when a refined mesh would not fit in the platform index range"""
    pass


class DimensionMismatchError(KKTSolverError):
    """Raised when operand shapes do not agree"""
    pass


class IndexOutOfRangeError(KKTSolverError):
    """Raised when a constrained index falls outside the matrix"""
    pass


class SingularMatrixError(KKTSolverError):
    """Raised when an LU pivot magnitude drops below the singularity threshold"""
    pass


class NonSymmetricError(KKTSolverError):
    """Raised when a symmetric eigensolve receives a non-symmetric matrix"""
    pass


class BreakdownError(KKTSolverError):
    """Raised on Arnoldi breakdown without convergence"""
    pass


class NonPositiveDiagonalError(KKTSolverError):
    """Raised when a Jacobi splitting meets a diagonal entry <= 0"""
    pass


class ConfigurationError(KKTSolverError):
    """Raised for invalid run or preconditioner configuration"""
    pass


class UnknownProblemError(ConfigurationError):
    """Raised for a problem name missing from the registry"""

    def __init__(self, name, choices):
        self.name = name
        self.choices = sorted(choices)
        super().__init__(
            f"Unknown problem '{name}'. Valid choices: {', '.join(self.choices)}"
        )


class DimensionTooLargeError(KKTSolverError):
    """Raised when a dense-only tool is asked to handle a large instance"""
    pass


class CoarseSolveError(SingularMatrixError):
    """Raised when the multigrid coarse operator cannot be factorized"""
    pass
