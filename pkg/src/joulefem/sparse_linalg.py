"""Sparse symmetric linear algebra used by every field solve.

Matrices are scipy CSR; assembly goes through from_triplets, which sums
duplicates in a canonical order so the result is bitwise independent of
triplet ordering.  Dirichlet constraints are applied by symmetric
elimination, which keeps the operator symmetric positive definite, and
solves go through a cached sparse LU factorization with a residual check.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu


class NotSPDError(ValueError):
    """Matrix failed a positive-definiteness check (nonpositive diagonal)."""


class SolverError(RuntimeError):
    """Linear solve did not meet the residual contract."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


def from_triplets(n: int, rows, cols, values) -> sp.csr_matrix:
    """Build an n-by-n CSR matrix from parallel triplet arrays.

    Duplicate (row, col) entries are summed.  Entries are sorted by
    (row, col, value) before summation, so the result is bitwise identical
    for any permutation of the input triplets.
    """
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=float)
    if rows.size and (rows.min() < 0 or rows.max() >= n or cols.min() < 0 or cols.max() >= n):
        raise ValueError(f"triplet index out of range for dimension {n}")
    if rows.size == 0:
        return sp.csr_matrix((n, n))
    order = np.lexsort((values, cols, rows))
    rows, cols, values = rows[order], cols[order], values[order]
    new_group = np.empty(rows.size, dtype=bool)
    new_group[0] = True
    new_group[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
    starts = np.flatnonzero(new_group)
    summed = np.add.reduceat(values, starts)
    mat = sp.csr_matrix((summed, (rows[starts], cols[starts])), shape=(n, n))
    mat.sort_indices()
    return mat


@dataclass
class LinearSystem:
    """A sparse operator with right-hand side and Dirichlet bookkeeping."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    constrained: dict[int, float] = field(default_factory=dict)


def apply_dirichlet(system: LinearSystem, values: Mapping[int, float]) -> LinearSystem:
    """Impose prescribed values by symmetric row/column elimination.

    For each constrained dof i the rhs of every free dof j gets -A[j,i]*g_i,
    row i and column i are zeroed, the diagonal is set to 1 and rhs_i = g_i.
    SPD of the free-free block is preserved.  Idempotent for fixed values.
    """
    A = system.matrix
    n = A.shape[0]
    idx = np.fromiter(values.keys(), dtype=np.int64, count=len(values))
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise ValueError(f"constrained dof out of range for dimension {n}")
    g = np.zeros(n)
    g[idx] = np.fromiter(values.values(), dtype=float, count=len(values))
    free = np.ones(n)
    free[idx] = 0.0

    rhs = free * (system.rhs - A @ g) + g
    D_free = sp.diags(free, format="csr")
    D_fix = sp.diags(1.0 - free, format="csr")
    mat = (D_free @ A @ D_free + D_fix).tocsr()
    mat.eliminate_zeros()
    mat.sort_indices()
    merged = dict(system.constrained)
    merged.update({int(i): float(values[i]) for i in values})
    return LinearSystem(mat, rhs, merged)


class SPDSolver:
    """Reusable direct solver for a symmetric positive definite matrix.

    Factorizes once (sparse LU); solve() verifies the residual contract
    ||Ax - b|| <= rel_tol * ||b||.
    """

    def __init__(self, matrix: sp.spmatrix):
        matrix = matrix.tocsr()
        diag = matrix.diagonal()
        if np.any(diag <= 0.0):
            bad = int(np.argmin(diag))
            raise NotSPDError(
                f"nonpositive diagonal entry {diag[bad]:g} at dof {bad}; "
                "matrix is not positive definite"
            )
        self.matrix = matrix
        self._lu = splu(matrix.tocsc())

    def solve(self, rhs: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
        if not 0.0 < rel_tol < 1.0:
            raise ValueError(f"rel_tol must be in (0, 1), got {rel_tol}")
        rhs = np.asarray(rhs, dtype=float)
        x = self._lu.solve(rhs)
        norm_b = np.linalg.norm(rhs)
        residual = np.linalg.norm(self.matrix @ x - rhs)
        if norm_b > 0.0 and residual > rel_tol * norm_b:
            raise SolverError(
                f"solve residual {residual:.3e} exceeds {rel_tol:.1e} * ||b||",
                residual=residual,
            )
        return x


def solve_spd(matrix: sp.spmatrix, rhs: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    """One-shot SPD solve; see SPDSolver for the residual contract."""
    return SPDSolver(matrix).solve(rhs, rel_tol)
