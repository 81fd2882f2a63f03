"""Sparse LU with threshold partial pivoting, plus a dense oracle.

The factorisation is left-looking.  The columns that may update column k
are taken from the static structure predicted by the column elimination
tree (the pattern of the Cholesky factor of A^T A), which bounds U for
every row-pivoting sequence.  Work therefore scales with that predicted
structure: a dense row, which makes A^T A full, is expensive here exactly
as it is for the symbolic phase of general-purpose solvers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numba import njit

from .errors import (
    DeskScaleOnlyError,
    DimensionError,
    NumericalInstabilityError,
    SingularMatrixError,
)
from .graph_analysis import EliminationTree, _leftmost, column_etree
from .ordering import colamd_like
from .sparse_core import SparseMatrix, permute, transpose

DEFAULT_PIVOT_TOL = 0.1
GROWTH_LIMIT = 1e12
ORACLE_MAX_N = 2000


@dataclass(frozen=True)
class SymbolicPlan:
    col_perm: np.ndarray
    etree: EliminationTree
    predicted_fill: int


@dataclass(frozen=True, eq=False)
class LuFactors:
    """P A Q = L U with row k of PAQ equal to row row_perm[k] of A and
    column k equal to column col_perm[k].  ``l`` holds the strictly lower
    part (unit diagonal implicit)."""

    l: SparseMatrix
    u: SparseMatrix
    row_perm: np.ndarray
    col_perm: np.ndarray
    growth: float

    @property
    def n(self) -> int:
        return self.u.nrows

    @property
    def nnz(self) -> int:
        """nnz(L + U) counting the unit diagonal once."""
        return self.l.nnz + self.u.nnz


# -- symbolic ------------------------------------------------------------------

@njit(cache=True)
def _symbolic_lu_count(n, cp, ri):
    # Column-by-column symbolic LU with diagonal pivots: the pattern of
    # U(:,k) and L(:,k) is the set reachable from A(:,k) through earlier
    # columns of L (depth-first search with an explicit stack).
    lp = np.zeros(n + 1, np.int64)
    cap = max(cp[n], 1) * 2 + n
    li = np.empty(cap, np.int64)
    mark = np.full(n, -1, np.int64)
    stack = np.empty(n, np.int64)
    ptr = np.empty(n, np.int64)
    total = 0
    for k in range(n):
        nl = 0
        ucount = 0
        mark[k] = k
        start = lp[k]
        for p in range(cp[k], cp[k + 1]):
            r = ri[p]
            if mark[r] == k:
                continue
            # dfs from r through L columns j < k
            top = 0
            stack[0] = r
            mark[r] = k
            if r < k:
                ptr[0] = lp[r]
            while top >= 0:
                j = stack[top]
                if j < k:
                    advanced = False
                    while ptr[top] < lp[j + 1]:
                        i = li[ptr[top]]
                        ptr[top] += 1
                        if mark[i] != k:
                            mark[i] = k
                            top += 1
                            stack[top] = i
                            if i < k:
                                ptr[top] = lp[i]
                            advanced = True
                            break
                    if advanced:
                        continue
                    ucount += 1
                    top -= 1
                else:
                    if start + nl >= li.shape[0]:
                        grown = np.empty(li.shape[0] * 2, np.int64)
                        grown[: li.shape[0]] = li
                        li = grown
                    li[start + nl] = j
                    nl += 1
                    top -= 1
        lp[k + 1] = start + nl
        total += ucount + nl + 1
    return total


def symbolic(a: SparseMatrix) -> SymbolicPlan:
    """Fill-reducing column order, column elimination tree and the nnz(L+U)
    predicted for diagonal pivots under that order."""
    if a.nrows != a.ncols:
        raise DimensionError("symbolic analysis needs a square matrix")
    q = colamd_like(a)
    aq = permute(a, q, q)
    tree = column_etree(permute(a, None, q))
    at = transpose(aq)
    fill = int(_symbolic_lu_count(a.ncols, at.row_ptr, at.col_idx)) if a.ncols else 0
    return SymbolicPlan(q, tree, fill)


# -- numeric -------------------------------------------------------------------

@njit(cache=True)
def _grow_i(arr, need):
    if need <= arr.shape[0]:
        return arr
    out = np.empty(max(need, 2 * arr.shape[0]), np.int64)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True)
def _grow_f(arr, need):
    if need <= arr.shape[0]:
        return arr
    out = np.empty(max(need, 2 * arr.shape[0]), np.float64)
    out[: arr.shape[0]] = arr
    return out


@njit(cache=True)
def _lu_left(n, acp, ari, arx, leftmost, parent, diag_row, tol, amax, growth_limit):
    """Returns (status, info, lp, li, lx, up, ui, ux, prow, growth).

    status 0 ok, 1 singular at column info, 2 growth abort,
    3 a pivotal row fell outside the predicted structure."""
    cap = 2 * acp[n] + n + 16
    lp = np.zeros(n + 1, np.int64)
    li = np.empty(cap, np.int64)
    lx = np.empty(cap, np.float64)
    up = np.zeros(n + 1, np.int64)
    ui = np.empty(cap, np.int64)
    ux = np.empty(cap, np.float64)
    prow = np.full(n, -1, np.int64)
    pinv = np.full(n, -1, np.int64)
    x = np.zeros(n)
    touched = np.empty(n, np.int64)
    tstamp = np.full(n, -1, np.int64)
    mark = np.full(n, -1, np.int64)
    s = np.empty(n, np.int64)
    path = np.empty(n, np.int64)
    umax = 0.0
    for k in range(n):
        # R(:,k): etree paths from leftmost(r) for rows r of column k, pushed
        # so that s[top:] lists every node before its ancestors.
        top = n
        mark[k] = k
        for p in range(acp[k], acp[k + 1]):
            i = leftmost[ari[p]]
            length = 0
            while i != -1 and i < k and mark[i] != k:
                path[length] = i
                length += 1
                mark[i] = k
                i = parent[i]
            while length > 0:
                length -= 1
                top -= 1
                s[top] = path[length]
        # scatter A(:,k)
        nt = 0
        for p in range(acp[k], acp[k + 1]):
            r = ari[p]
            x[r] = arx[p]
            tstamp[r] = k
            touched[nt] = r
            nt += 1
        # sparse triangular solve in topological order
        for t in range(top, n):
            j = s[t]
            xj = x[prow[j]]
            if xj == 0.0:
                continue
            for q in range(lp[j], lp[j + 1]):
                i = li[q]
                if tstamp[i] != k:
                    tstamp[i] = k
                    touched[nt] = i
                    nt += 1
                x[i] -= lx[q] * xj
        # U(:,k) off-diagonal part
        unew = up[k] + (n - top) + 1
        ui = _grow_i(ui, unew)
        ux = _grow_f(ux, unew)
        pos = up[k]
        for t in range(top, n):
            j = s[t]
            v = x[prow[j]]
            if v != 0.0:
                ui[pos] = j
                ux[pos] = v
                pos += 1
                av = abs(v)
                if av > umax:
                    umax = av
        # pivot search among non-pivotal touched rows
        best = -1
        bmax = 0.0
        for t in range(nt):
            r = touched[t]
            if pinv[r] >= 0:
                if x[r] != 0.0 and mark[pinv[r]] != k:
                    return 3, k, lp, li, lx, up, ui, ux, prow, 0.0
                continue
            av = abs(x[r])
            if av > bmax:
                bmax = av
                best = r
        if best < 0:
            for t in range(nt):
                x[touched[t]] = 0.0
            return 1, k, lp, li, lx, up, ui, ux, prow, 0.0
        d = diag_row[k]
        if d != best and tstamp[d] == k and pinv[d] < 0 and abs(x[d]) >= tol * bmax and x[d] != 0.0:
            best = d
        piv = x[best]
        prow[k] = best
        pinv[best] = k
        ui[pos] = k
        ux[pos] = piv
        pos += 1
        up[k + 1] = pos
        if abs(piv) > umax:
            umax = abs(piv)
        if umax > growth_limit * amax:
            return 2, k, lp, li, lx, up, ui, ux, prow, umax / amax
        # L(:,k)
        lnew = lp[k] + nt
        li = _grow_i(li, lnew)
        lx = _grow_f(lx, lnew)
        pos = lp[k]
        for t in range(nt):
            r = touched[t]
            if pinv[r] < 0 and x[r] != 0.0:
                li[pos] = r
                lx[pos] = x[r] / piv
                pos += 1
            x[r] = 0.0
        lp[k + 1] = pos
    g = umax / amax if amax > 0 else 0.0
    return 0, -1, lp, li, lx, up, ui, ux, prow, g


def _csc_to_csr(nrows, ncols, cp, ri, vx):
    counts = np.bincount(ri, minlength=nrows)
    rp = np.zeros(nrows + 1, np.int64)
    np.cumsum(counts, out=rp[1:])
    cols = np.repeat(np.arange(ncols, dtype=np.int64), np.diff(cp))
    order = np.lexsort((cols, ri))
    return SparseMatrix(nrows, ncols, rp, cols[order], vx[order])


def factorize(a: SparseMatrix, plan: SymbolicPlan | None = None,
              pivot_tol: float = DEFAULT_PIVOT_TOL, growth_limit: float = GROWTH_LIMIT) -> LuFactors:
    """Left-looking LU with threshold partial pivoting.

    A candidate on the diagonal is kept when its magnitude is at least
    ``pivot_tol`` times the largest candidate in the column.
    """
    if a.nrows != a.ncols:
        raise DimensionError("factorize needs a square matrix")
    n = a.ncols
    if plan is None:
        plan = symbolic(a)
    q = np.asarray(plan.col_perm, np.int64)
    aq = permute(a, None, q)
    at = transpose(aq)  # row k of at is column k of A Q
    leftmost = _leftmost(n, aq.row_ptr, aq.col_idx)
    amax = float(np.abs(a.values).max()) if a.nnz else 0.0
    status, info, lp, li, lx, up, ui, ux, prow, growth = _lu_left(
        n, at.row_ptr, at.col_idx, at.values, leftmost, plan.etree.parent, q, float(pivot_tol), amax, float(growth_limit))
    if status == 1:
        raise SingularMatrixError(
            f"no nonzero pivot in column {int(q[info])} (elimination step {info})", column=int(q[info]))
    if status == 2:
        raise NumericalInstabilityError(growth)
    if status == 3:
        raise RuntimeError(f"structure prediction missed an update at step {info}")
    pinv = np.empty(n, np.int64)
    pinv[prow] = np.arange(n)
    lnnz, unnz = lp[n], up[n]
    l = _csc_to_csr(n, n, lp, pinv[li[:lnnz]], lx[:lnnz].copy())
    u = _csc_to_csr(n, n, up, ui[:unnz].copy(), ux[:unnz].copy())
    return LuFactors(l, u, prow, q, float(growth))


def factorize_auto(a: SparseMatrix, pivot_tol: float = DEFAULT_PIVOT_TOL) -> LuFactors:
    return factorize(a, symbolic(a), pivot_tol)


# -- triangular solves ---------------------------------------------------------

@njit(cache=True)
def _solve(n, lp, li, lx, up, ui, ux, c):
    y = c.copy()
    for i in range(n):
        s = y[i]
        for p in range(lp[i], lp[i + 1]):
            s -= lx[p] * y[li[p]]
        y[i] = s
    for i in range(n - 1, -1, -1):
        s = y[i]
        d = 0.0
        for p in range(up[i], up[i + 1]):
            j = ui[p]
            if j == i:
                d = ux[p]
            else:
                s -= ux[p] * y[j]
        y[i] = s / d
    return y


@njit(cache=True)
def _solve_t(n, lp, li, lx, up, ui, ux, c):
    y = c.copy()
    # U^T w = c: forward, U stored by rows
    for i in range(n):
        d = 0.0
        for p in range(up[i], up[i + 1]):
            if ui[p] == i:
                d = ux[p]
                break
        y[i] = y[i] / d
        for p in range(up[i], up[i + 1]):
            j = ui[p]
            if j != i:
                y[j] -= ux[p] * y[i]
    # L^T z = w: backward, L stored by rows
    for i in range(n - 1, -1, -1):
        for p in range(lp[i], lp[i + 1]):
            y[li[p]] -= lx[p] * y[i]
    return y


def solve(factors: LuFactors, b) -> np.ndarray:
    n = factors.n
    b = np.ascontiguousarray(b, np.float64)
    if b.shape != (n,):
        raise DimensionError(f"rhs has shape {b.shape}, expected ({n},)")
    l, u = factors.l, factors.u
    y = _solve(n, l.row_ptr, l.col_idx, l.values, u.row_ptr, u.col_idx, u.values, b[factors.row_perm])
    x = np.empty(n)
    x[factors.col_perm] = y
    return x


def solve_transpose(factors: LuFactors, b) -> np.ndarray:
    n = factors.n
    b = np.ascontiguousarray(b, np.float64)
    if b.shape != (n,):
        raise DimensionError(f"rhs has shape {b.shape}, expected ({n},)")
    l, u = factors.l, factors.u
    w = _solve_t(n, l.row_ptr, l.col_idx, l.values, u.row_ptr, u.col_idx, u.values, b[factors.col_perm])
    z = np.empty(n)
    z[factors.row_perm] = w
    return z


def sparse_solve(a: SparseMatrix, b, pivot_tol: float = DEFAULT_PIVOT_TOL) -> np.ndarray:
    """symbolic + factorize + solve in one call."""
    return solve(factorize(a, symbolic(a), pivot_tol), b)


def factor_residual(a: SparseMatrix, f: LuFactors) -> float:
    """||P A Q - L U||_inf / ||A||_inf (dense; test-sized inputs only)."""
    paq = a.to_dense()[np.ix_(f.row_perm, f.col_perm)]
    lu = (f.l.to_dense() + np.eye(f.n)) @ f.u.to_dense()
    denom = a.norm_inf() or 1.0
    return float(np.abs(paq - lu).sum(axis=1).max() / denom)


# -- dense oracle --------------------------------------------------------------

def dense_oracle_solve(a, b) -> np.ndarray:
    """Dense LU with partial pivoting (LAPACK); small systems only."""
    dense = a.to_dense() if isinstance(a, SparseMatrix) else np.asarray(a, np.float64)
    n = dense.shape[0]
    if dense.shape != (n, n):
        raise DimensionError("oracle needs a square matrix")
    if n > ORACLE_MAX_N:
        raise DeskScaleOnlyError(f"dense oracle limited to n <= {ORACLE_MAX_N}, got {n}")
    b = np.asarray(b, np.float64)
    if b.shape != (n,):
        raise DimensionError(f"rhs has shape {b.shape}, expected ({n},)")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(dense, check_finite=True)
    zero = np.flatnonzero(np.diag(lu) == 0)
    if zero.size:
        raise SingularMatrixError(f"exactly singular: zero pivot at step {zero[0]}", column=int(zero[0]))
    return scipy.linalg.lu_solve((lu, piv), b)
