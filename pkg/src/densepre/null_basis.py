"""Sparse null-space bases for one or a few constraint rows.

The bidiagonal construction pairs consecutive numerical nonzeros of a row,
so every row and column of the basis holds at most two entries.  Several
rows are handled by nesting: each new row is first projected onto the null
space of the previous ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    BoundViolationError,
    DimensionError,
    RankDeficiencyError,
    SingularityError,
    SingularMatrixError,
    UnsupportedBasisKind,
    ZeroPivotError,
    ZeroRowError,
)
from .sparse_core import SparseMatrix, coo, spgemm, spmv_transpose, transpose, triple_product


class BasisKind(str, Enum):
    BIDIAGONAL = "bidiagonal_alg3"
    NESTED = "nested_alg4"
    FUNDAMENTAL = "fundamental_eq13"


@dataclass(frozen=True, eq=False)
class NullBasis:
    """Columns of ``z`` span the null space of the constraint rows.

    ``levels`` and ``projected_rows`` keep the intermediate bases Z_{i-1}
    and rows B_i Z_{i-1} of a nested construction; they let callers build
    particular solutions without refactoring anything.
    """

    z: SparseMatrix
    pivot_ratios: np.ndarray
    max_abs_ratio: float
    kind: BasisKind
    levels: tuple = ()
    projected_rows: tuple = ()

    @property
    def n(self) -> int:
        return self.z.nrows

    @property
    def nnz(self) -> int:
        return self.z.nnz


def dense_row(b) -> np.ndarray:
    """Accept a 1 x n SparseMatrix or any 1-d array-like."""
    if isinstance(b, SparseMatrix):
        if b.nrows != 1:
            raise DimensionError(f"expected a single row, got {b.nrows} rows")
        return b.to_dense()[0]
    b = np.asarray(b, dtype=np.float64)
    if b.ndim == 2 and b.shape[0] == 1:
        b = b[0]
    if b.ndim != 1:
        raise DimensionError("expected a single row")
    return b


def _normalized(z: SparseMatrix) -> SparseMatrix:
    norms = np.sqrt(np.bincount(z.col_idx, weights=z.values**2, minlength=z.ncols))
    norms[norms == 0] = 1.0
    return SparseMatrix(z.nrows, z.ncols, z.row_ptr, z.col_idx, z.values / norms[z.col_idx])


def construct_single(b, eps: float = 0.0, normalize: bool = False) -> NullBasis:
    """Bidiagonal basis for the null space of one row ``b``.

    Consecutive numerical nonzeros b_i, b_j (i < j) give the column
    e_i - (b_i / b_j) e_j; zeros before the last nonzero give e_i and
    positions after it give shifted identity columns.
    """
    b = dense_row(b)
    n = b.size
    if n < 2:
        raise DimensionError("a null basis needs n >= 2")
    nz = np.flatnonzero(np.abs(b) > eps)
    if nz.size == 0:
        raise ZeroRowError(f"row has no entry with magnitude above {eps}")
    last = int(nz[-1])
    ratios = -b[nz[:-1]] / b[nz[1:]]
    head = np.arange(last)
    tail = np.arange(last, n - 1)
    rows = np.concatenate([head, nz[1:], tail + 1])
    cols = np.concatenate([head, nz[:-1], tail])
    vals = np.concatenate([np.ones(last), ratios, np.ones(tail.size)])
    z = coo(n, n - 1, rows, cols, vals)
    if normalize:
        z = _normalized(z)
    mx = float(np.abs(ratios).max()) if ratios.size else 0.0
    return NullBasis(z, ratios, mx, BasisKind.BIDIAGONAL, (None,), (b,))


def _roundoff_floor(terms: int) -> float:
    """Relative error bound for a sum of ``terms`` float64 products."""
    return terms * np.finfo(np.float64).eps


def _abs(a: SparseMatrix) -> SparseMatrix:
    return SparseMatrix(a.nrows, a.ncols, a.row_ptr, a.col_idx, np.abs(a.values))


def _cancel_residue(z: SparseMatrix, y: SparseMatrix, terms: int) -> SparseMatrix:
    """z @ y with entries lost to cancellation set to 0.0; the pattern is kept."""
    prod = spgemm(z, y)
    bound = spgemm(_abs(z), _abs(y)).values * _roundoff_floor(terms)
    vals = np.where(np.abs(prod.values) <= bound, 0.0, prod.values)
    return SparseMatrix(prod.nrows, prod.ncols, prod.row_ptr, prod.col_idx, vals)


def construct_multi(b, eps: float = 0.0, normalize: bool = False) -> NullBasis:
    """Nested basis for an m x n constraint block: Z_i = Z_{i-1} Y_i with Y_i
    the bidiagonal basis of the projected row B_i Z_{i-1}."""
    dense = b.to_dense() if isinstance(b, SparseMatrix) else np.atleast_2d(np.asarray(b, np.float64))
    m, n = dense.shape
    if m == 0:
        raise DimensionError("constraint block has no rows")
    if m >= n:
        raise DimensionError(f"need fewer rows than columns, got {m}x{n}")
    if m == 1:
        return construct_single(dense[0], eps, normalize)
    z = None
    ratios, levels, projected = [], [], []
    for i in range(m):
        if z is None:
            row = dense[i]
        else:
            row = spmv_transpose(z, dense[i])
            # values below the rounding bound of their own sum are cancellation residue, not pivots
            row = np.where(np.abs(row) <= _roundoff_floor(n) * spmv_transpose(_abs(z), np.abs(dense[i])), 0.0, row)
        if not np.any(np.abs(row) > eps):
            raise RankDeficiencyError(i)
        levels.append(z)
        projected.append(row)
        step = construct_single(row, eps)
        ratios.append(step.pivot_ratios)
        z = step.z if z is None else _cancel_residue(z, step.z, n)
    if normalize:
        z = _normalized(z)
    ratios = np.concatenate(ratios)
    mx = float(np.abs(ratios).max()) if ratios.size else 0.0
    return NullBasis(z, ratios, mx, BasisKind.NESTED, tuple(levels), tuple(projected))


def fundamental_basis(b, pivot: int) -> NullBasis:
    """Basis with columns e_j - (b_j / b_p) e_p for every j != p."""
    b = dense_row(b)
    n = b.size
    if n < 2:
        raise DimensionError("a null basis needs n >= 2")
    if not 0 <= pivot < n:
        raise DimensionError(f"pivot {pivot} out of range")
    if b[pivot] == 0:
        raise ZeroPivotError(f"b[{pivot}] is zero")
    others = np.delete(np.arange(n), pivot)
    col = np.arange(n - 1)
    nz = np.flatnonzero((b != 0) & (np.arange(n) != pivot))
    ratios = -b[nz] / b[pivot]
    rows = np.concatenate([others, np.full(nz.size, pivot)])
    cols = np.concatenate([col, np.where(nz < pivot, nz, nz - 1)])
    z = coo(n, n - 1, rows, cols, np.concatenate([np.ones(n - 1), ratios]))
    mx = float(np.abs(ratios).max()) if ratios.size else 0.0
    return NullBasis(z, ratios, mx, BasisKind.FUNDAMENTAL)


def basis_residual(b, basis: NullBasis) -> float:
    """max |B Z| over all entries, for one row or a block."""
    rows = [b.to_dense()[i] for i in range(b.nrows)] if isinstance(b, SparseMatrix) else np.atleast_2d(b)
    return max(float(np.abs(spmv_transpose(basis.z, np.asarray(r, np.float64))).max(initial=0.0)) for r in rows)


def _as_matrix(z):
    return z.z if isinstance(z, NullBasis) else z


def inflation_stats(a: SparseMatrix, z1, z2, nnz_m: int, reduced: SparseMatrix | None = None):
    """Return ``(nnz(z1^T a z2), that / nnz_m)``; ``z1 = None`` means identity.

    For two single-row bidiagonal bases the count is checked against 4 nnz(a).
    """
    zz2 = _as_matrix(z2)
    if a.ncols != zz2.nrows:
        raise DimensionError(f"a is {a.shape} but z2 has {zz2.nrows} rows")
    if z1 is None:
        red = reduced if reduced is not None else spgemm(a, zz2)
    else:
        zz1 = _as_matrix(z1)
        if zz1.nrows != a.nrows:
            raise DimensionError(f"a is {a.shape} but z1 has {zz1.nrows} rows")
        red = reduced if reduced is not None else triple_product(zz1, a, zz2)
    nnz_red = red.nnz
    single = [isinstance(z, NullBasis) and z.kind == BasisKind.BIDIAGONAL and z.z.ncols == z.z.nrows - 1
              for z in (z1, z2)]
    if all(single) and nnz_red > 4 * a.nnz:
        raise BoundViolationError(f"nnz(Z1^T A Z2) = {nnz_red} exceeds 4 nnz(A) = {4 * a.nnz}")
    return nnz_red, nnz_red / nnz_m


def sigma1_upper_bound(z: NullBasis) -> float:
    """1 + max|alpha|: a cheap bound on the largest singular value."""
    if z.kind != BasisKind.BIDIAGONAL:
        raise UnsupportedBasisKind(f"bound only proven for {BasisKind.BIDIAGONAL.value}, got {z.kind.value}")
    return 1.0 + z.max_abs_ratio


def _onenorm(a: SparseMatrix) -> float:
    if a.nnz == 0:
        return 0.0
    return float(np.bincount(a.col_idx, weights=np.abs(a.values), minlength=a.ncols).max())


def condest_1norm(a: SparseMatrix, solve, solve_t, max_iter: int = 5) -> float:
    """Hager's estimate of ||a||_1 ||a^-1||_1 given solvers for a and a^T."""
    n = a.nrows
    if n == 0:
        return 1.0
    x = np.full(n, 1.0 / n)
    est = 0.0
    for it in range(max_iter):
        y = solve(x)
        est_new = float(np.abs(y).sum())
        if it > 0 and est_new <= est:
            break
        est = est_new
        xi = np.where(y >= 0, 1.0, -1.0)
        w = solve_t(xi)
        j = int(np.argmax(np.abs(w)))
        if np.abs(w[j]) <= w @ x:
            break
        x = np.zeros(n)
        x[j] = 1.0
    if n > 1:
        alt = np.array([(-1.0) ** i * (1 + i / (n - 1)) for i in range(n)])
        est = max(est, 2 * float(np.abs(solve(alt)).sum()) / (3 * n))
    return _onenorm(a) * est


def condest_ztz(z: NullBasis) -> float:
    """1-norm condition estimate of Z^T Z, factorised with the built-in LU."""
    from .direct_solver import factorize_auto, solve

    zz = _as_matrix(z)
    ztz = spgemm(transpose(zz), zz)
    try:
        lu = factorize_auto(ztz)
    except SingularMatrixError as exc:
        raise SingularityError(f"Z^T Z is singular: {exc}", getattr(exc, "column", None)) from exc
    # Z^T Z is symmetric, so a transposed solve is the same solve.
    return condest_1norm(ztz, lambda v: solve(lu, v), lambda v: solve(lu, v))


__all__ = [
    "BasisKind",
    "NullBasis",
    "basis_residual",
    "condest_1norm",
    "condest_ztz",
    "construct_multi",
    "construct_single",
    "dense_row",
    "fundamental_basis",
    "inflation_stats",
    "sigma1_upper_bound",
]
