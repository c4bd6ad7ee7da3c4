"""
Result files for solve / bench / eigcheck runs.

FILES:
    report.csv                  one row per cell; header
                                problem,k,beta,n_t,scheme,iters,converged,setup_s,solve_s
    residuals_<cell>.csv        iter,residual
    nonlinear_<cell>.csv        iter,residual (Picard runs)
    bench_table.txt             iterations and solve time, rows k, one column pair per beta
    eigenvalues_<cell>.csv      index,eigenvalue
    A.mtx B1t.mtx B2.mtx C.mtx  Matrix Market blocks of the saddle system
    rhs.txt                     stacked right-hand side

Everything except the timing columns is byte-stable across reruns: booleans are
written as true/false, beta with %.6g and the remaining floats with fixed formats.
"""

import logging
from pathlib import Path
from typing import List, Union

import numpy as np
import pandas as pd

from .kkt_systems import SaddleSystem
from .krylov import write_residual_history
from .nonlinear import write_nonlinear_history
from .services import Cell, CellResult
from .sparse_linalg import write_matrix_market, write_vector

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['problem', 'k', 'beta', 'n_t', 'scheme', 'iters', 'converged', 'setup_s', 'solve_s']


def format_beta(beta: float) -> str:
    return f"{beta:.6g}"


class ReportWriter:
    """Writes run results into one output directory"""

    def __init__(self, out_dir: Union[str, Path]):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def report_frame(self, results: List[CellResult]) -> pd.DataFrame:
        rows = []
        for result in results:
            row = result.as_row()
            row['beta'] = format_beta(row['beta'])
            row['converged'] = 'true' if row['converged'] else 'false'
            row['setup_s'] = f"{row['setup_s']:.6f}"
            row['solve_s'] = f"{row['solve_s']:.6f}"
            rows.append(row)
        return pd.DataFrame(rows, columns=REPORT_COLUMNS)

    def write_report(self, results: List[CellResult]) -> Path:
        path = self.path('report.csv')
        self.report_frame(results).to_csv(path, index=False)
        logger.info(f"Wrote {len(results)} row(s) to {path}")
        return path

    def write_residuals(self, result: CellResult) -> Path:
        return write_residual_history(result.report, self.path(f"residuals_{result.cell.name}.csv"))

    def write_nonlinear(self, result: CellResult) -> Path:
        return write_nonlinear_history(result.picard, self.path(f"nonlinear_{result.cell.name}.csv"))

    def write_eigenvalues(self, cell: Cell, eigenvalues: np.ndarray) -> Path:
        path = self.path(f"eigenvalues_{cell.name}.csv")
        frame = pd.DataFrame({'index': np.arange(len(eigenvalues)), 'eigenvalue': eigenvalues})
        frame.to_csv(path, index=False, float_format='%.17g')
        return path

    def bench_table(self, results: List[CellResult]) -> str:
        """
        Aligned text table: one row per k, an (it, CPU) column pair per beta.
        Cells that did not converge show their iteration count with a trailing '*'.
        """
        frame = pd.DataFrame([{
            'k': r.cell.k,
            'beta': format_beta(r.cell.beta),
            'it': f"{r.report.iterations}{'' if r.report.converged else '*'}",
            'CPU': f"{r.report.solve_seconds:.2f}",
        } for r in results])
        if frame.empty:
            return ''
        betas = list(dict.fromkeys(frame['beta']))
        table = frame.pivot_table(index='k', columns='beta', values=['it', 'CPU'], aggfunc='first')
        table = table.swaplevel(axis=1)
        table = table.reindex(columns=pd.MultiIndex.from_product([betas, ['it', 'CPU']]))
        table.columns = [f"beta={b} {field}" for b, field in table.columns]
        return table.to_string()

    def write_bench_table(self, results: List[CellResult]) -> Path:
        path = self.path('bench_table.txt')
        path.write_text(self.bench_table(results) + '\n', encoding='utf-8')
        return path

    def export_system(self, system: SaddleSystem) -> List[Path]:
        """Matrix Market dump of the four blocks plus the right-hand side."""
        written = [
            write_matrix_market(self.path('A.mtx'), system.A),
            write_matrix_market(self.path('B1t.mtx'), system.B1t),
            write_matrix_market(self.path('B2.mtx'), system.B2),
            write_matrix_market(self.path('C.mtx'), system.C),
            write_vector(self.path('rhs.txt'), system.rhs),
        ]
        logger.info(f"Exported saddle system blocks to {self.out_dir}")
        return written
