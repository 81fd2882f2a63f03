"""Structure prediction: layered-graph product counts, dense-row detection,
the column elimination tree and symbolic fill bounds for LU."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import DimensionError
from .sparse_core import SparseMatrix, transpose


@dataclass(frozen=True)
class EliminationTree:
    """parent[j] is -1 for a root, otherwise an index greater than j."""

    parent: np.ndarray
    height: int

    @property
    def n(self) -> int:
        return len(self.parent)

    def roots(self) -> np.ndarray:
        return np.flatnonzero(self.parent < 0)


@dataclass(frozen=True)
class DensityReport:
    threshold: int
    dense_rows: np.ndarray
    dense_cols: np.ndarray
    col_threshold: int

    @property
    def any(self) -> bool:
        return bool(self.dense_rows.size or self.dense_cols.size)


def dense_threshold(n: int) -> int:
    """Entry count above which a line of length n is considered dense."""
    return math.ceil(10 * math.sqrt(n))


# -- layered graph -----------------------------------------------------------

@njit(cache=True)
def _reach_counts(m, n, ap, ai, bp, bi):
    seen = np.full(n, -1, np.int64)
    counts = np.zeros(m, np.int64)
    for i in range(m):
        c = 0
        for ka in range(ap[i], ap[i + 1]):
            k = ai[ka]
            for kb in range(bp[k], bp[k + 1]):
                j = bi[kb]
                if seen[j] != i:
                    seen[j] = i
                    c += 1
        counts[i] = c
    return counts


def predict_product_nnz(a: SparseMatrix, b: SparseMatrix):
    """Count, per row of a, the columns of b reachable through the layered graph.

    Returns ``(row_counts, total)``.  Under the no-cancellation convention
    this is exactly the pattern size of ``a @ b``.
    """
    if a.ncols != b.nrows:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    counts = _reach_counts(a.nrows, b.ncols, a.row_ptr, a.col_idx, b.row_ptr, b.col_idx)
    return counts, int(counts.sum())


# -- dense lines -------------------------------------------------------------

def detect_dense_rows(a: SparseMatrix) -> DensityReport:
    """Flag rows with more than ceil(10 sqrt(ncols)) entries, and columns
    with more than ceil(10 sqrt(nrows))."""
    rt = dense_threshold(a.ncols)
    ct = dense_threshold(a.nrows)
    rows = np.flatnonzero(a.row_counts() > rt)
    cols = np.flatnonzero(a.col_counts() > ct)
    return DensityReport(rt, rows, cols, ct)


# -- column elimination tree -------------------------------------------------

@njit(cache=True)
def _etree_ata(m, n, cp, ri):
    # cp/ri: compressed columns of a.  Union-find with path compression on
    # the implicit pattern of a^T a, one row at a time through prev[].
    parent = np.full(n, -1, np.int64)
    ancestor = np.full(n, -1, np.int64)
    prev = np.full(m, -1, np.int64)
    for k in range(n):
        for p in range(cp[k], cp[k + 1]):
            r = ri[p]
            i = prev[r]
            while i != -1 and i < k:
                inext = ancestor[i]
                ancestor[i] = k
                if inext == -1:
                    parent[i] = k
                    break
                i = inext
            prev[r] = k
    return parent


@njit(cache=True)
def _tree_height(parent):
    n = parent.shape[0]
    depth = np.zeros(n, np.int64)
    h = 0
    for j in range(n - 1, -1, -1):
        p = parent[j]
        depth[j] = 1 if p < 0 else depth[p] + 1
        if depth[j] > h:
            h = depth[j]
    return h


def column_etree(a: SparseMatrix) -> EliminationTree:
    """Elimination tree of a^T a, computed without forming the product."""
    at = transpose(a)
    parent = _etree_ata(a.nrows, a.ncols, at.row_ptr, at.col_idx)
    return EliminationTree(parent, int(_tree_height(parent)))


def tree_height(parent) -> int:
    return int(_tree_height(np.asarray(parent, np.int64)))


# -- fill bounds -------------------------------------------------------------

@njit(cache=True)
def _leftmost(m, ap, ai):
    left = np.full(m, -1, np.int64)
    for r in range(m):
        if ap[r + 1] > ap[r]:
            left[r] = ai[ap[r]]
    return left


@njit(cache=True)
def _r_count(n, cp, ri, left, parent):
    # Column j of the Cholesky factor of a^T a: union of etree paths from
    # leftmost(r) up to j over rows r present in column j.
    mark = np.full(n, -1, np.int64)
    total = 0
    for j in range(n):
        mark[j] = j
        cnt = 1
        for p in range(cp[j], cp[j + 1]):
            i = left[ri[p]]
            while i != -1 and i < j and mark[i] != j:
                mark[i] = j
                cnt += 1
                i = parent[i]
        total += cnt
    return total


@njit(cache=True)
def _v_count(n, left, parent):
    # Rows entering the Householder step at column k: rows whose leftmost
    # entry is k plus the survivors passed up from each child.
    q = np.zeros(n, np.int64)
    for r in range(left.shape[0]):
        if left[r] >= 0:
            q[left[r]] += 1
    total = 0
    for k in range(n):
        total += q[k] if q[k] > 1 else 1
        p = parent[k]
        if p >= 0 and q[k] > 1:
            q[p] += q[k] - 1
    return total


def symbolic_fill_bound(a: SparseMatrix, tree: EliminationTree | None = None) -> int:
    """Upper bound on nnz(L + U) for LU with partial pivoting.

    Uses the containment of U in R and of L in the Householder vectors V
    of a QR factorisation of ``a``; the diagonal is counted once.
    """
    if a.nrows != a.ncols:
        raise DimensionError("symbolic_fill_bound needs a square matrix")
    n = a.ncols
    if n == 0:
        return 0
    tree = tree or column_etree(a)
    at = transpose(a)
    left = _leftmost(a.nrows, a.row_ptr, a.col_idx)
    r = _r_count(n, at.row_ptr, at.col_idx, left, tree.parent)
    v = _v_count(n, left, tree.parent)
    return int(r + v - n)
