"""Null space methods for block systems

    [ A   B1^T ] [x]   [f]
    [ B2  C    ] [y] = [g]

The two-sided method (C = 0) eliminates both constraint blocks with null
bases Z1, Z2 and solves Z1^T A Z2 v = Z1^T (f - A x*).  The one-sided
method keeps C: it builds one basis for the row block [B2 C] (or the
column block [B1 C^T]) and solves an n x n system.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable

import numpy as np
import scipy.linalg

from .direct_solver import DEFAULT_PIVOT_TOL, dense_oracle_solve, factorize, solve, symbolic
from .errors import (
    DeskScaleOnlyError,
    DimensionError,
    InconsistentConstraintError,
    RequiresOneSidedError,
    SingularMatrixError,
    SingularReducedSystemError,
)
from .null_basis import NullBasis, construct_multi
from .sparse_core import (
    SparseMatrix,
    bmat,
    row_slab,
    spgemm,
    spmv,
    spmv_transpose,
    transpose,
    triple_product,
)

VERIFY_MAX_SIZE = 300


class Mode(str, Enum):
    TWO_SIDED = "two_sided"
    ONE_SIDED_ROW = "one_sided_row"
    ONE_SIDED_COL = "one_sided_col"


@dataclass(frozen=True, eq=False)
class SaddleSystem:
    a: SparseMatrix
    b1: SparseMatrix
    b2: SparseMatrix
    c: SparseMatrix
    f: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        n, m = self.a.nrows, self.b2.nrows
        object.__setattr__(self, "f", np.asarray(self.f, np.float64).reshape(-1))
        object.__setattr__(self, "g", np.asarray(self.g, np.float64).reshape(-1))
        if self.a.shape != (n, n):
            raise DimensionError(f"A must be square, got {self.a.shape}")
        if m < 1:
            raise DimensionError("need at least one constraint row")
        if n < m:
            raise DimensionError(f"need n >= m, got n={n}, m={m}")
        for name, blk in (("B1", self.b1), ("B2", self.b2)):
            if blk.shape != (m, n):
                raise DimensionError(f"{name} must be {m}x{n}, got {blk.shape}")
        if self.c.shape != (m, m):
            raise DimensionError(f"C must be {m}x{m}, got {self.c.shape}")
        if self.f.shape != (n,) or self.g.shape != (m,):
            raise DimensionError("f and g must have lengths n and m")

    @property
    def n(self) -> int:
        return self.a.nrows

    @property
    def m(self) -> int:
        return self.b2.nrows

    @property
    def c_is_zero(self) -> bool:
        return not np.any(self.c.values != 0)

    def to_matrix(self) -> SparseMatrix:
        return bmat([[self.a, transpose(self.b1)], [self.b2, self.c]])

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.f, self.g])

    def nnz(self) -> int:
        return self.a.nnz + self.b1.nnz + self.b2.nnz + self.c.nnz


@dataclass(frozen=True, eq=False)
class PrestructureResult:
    """Reduced system plus what is needed to rebuild (x, y).

    ``z_top`` is the n-row block multiplying v in the x recovery (Z2 for the
    two-sided and row modes, the top of the column-block basis otherwise);
    ``z_c`` is the m-row block of a one-sided basis.
    """

    reduced: SparseMatrix
    rhs: np.ndarray
    z1: NullBasis | None
    z2: NullBasis | None
    z_top: SparseMatrix
    z_c: SparseMatrix | None
    x_star: np.ndarray
    y_star: np.ndarray | None
    mode: Mode
    z_time_s: float = 0.0


@dataclass(frozen=True)
class SaddleSolution:
    x: np.ndarray
    y: np.ndarray
    residual_inf: float
    diff_vs_oracle: float | None = None


@dataclass(frozen=True)
class LuSolver:
    """Callable sparse solver: symbolic analysis, factorisation and solve."""

    pivot_tol: float = DEFAULT_PIVOT_TOL

    def __call__(self, a: SparseMatrix, b) -> np.ndarray:
        return solve(factorize(a, symbolic(a), self.pivot_tol), b)


Solver = Callable[[SparseMatrix, np.ndarray], np.ndarray]


# -- particular solutions ----------------------------------------------------

def particular_solution_row(b, c_entry=None, g: float = 0.0, eps: float = 0.0):
    """Some x* with b x* (+ c y*) = g, using the first numerical nonzero.

    Returns ``(x_star, y_star)``; ``y_star`` is None unless ``c_entry`` is given.
    """
    b = b.to_dense()[0] if isinstance(b, SparseMatrix) else np.asarray(b, np.float64).reshape(-1)
    x = np.zeros(b.size)
    y = None if c_entry is None else 0.0
    if g == 0:
        return x, y
    nz = np.flatnonzero(np.abs(b) > eps)
    if nz.size:
        x[nz[0]] = g / b[nz[0]]
    elif c_entry is not None and abs(c_entry) > eps:
        y = g / c_entry
    else:
        raise InconsistentConstraintError(f"zero constraint row with right-hand side {g}")
    return x, y


def particular_solution(basis: NullBasis, block, g, eps: float = 0.0) -> np.ndarray:
    """x* with block @ x* = g for an m-row block whose nested basis is given.

    Row i is satisfied by a step along Z_{i-1}, which leaves rows < i intact.
    """
    dense = block.to_dense() if isinstance(block, SparseMatrix) else np.atleast_2d(block)
    g = np.asarray(g, np.float64).reshape(-1)
    x = np.zeros(dense.shape[1])
    for i, (level, row) in enumerate(zip(basis.levels, basis.projected_rows)):
        resid = g[i] - dense[i] @ x
        t, _ = particular_solution_row(row, None, resid, eps)
        x += t if level is None else spmv(level, t)
    return x


# -- two-sided -----------------------------------------------------------------

def prestructure_two_sided(s: SaddleSystem, eps: float = 0.0) -> PrestructureResult:
    if not s.c_is_zero:
        raise RequiresOneSidedError("C is nonzero; use prestructure_one_sided")
    t0 = time.perf_counter()
    z2 = construct_multi(s.b2, eps)
    same = s.b1.identical(s.b2)
    z1 = z2 if same else construct_multi(s.b1, eps)
    z_time = time.perf_counter() - t0
    x_star = particular_solution(z2, s.b2, s.g, eps)
    reduced = triple_product(z1.z, s.a, z2.z)
    rhs = spmv_transpose(z1.z, s.f - spmv(s.a, x_star))
    return PrestructureResult(reduced, rhs, z1, z2, z2.z, None, x_star, None, Mode.TWO_SIDED, z_time)


def _solve_reduced(p: PrestructureResult, solver: Solver | None) -> np.ndarray:
    solver = solver or LuSolver()
    try:
        return solver(p.reduced, p.rhs)
    except SingularMatrixError as exc:
        raise SingularReducedSystemError(f"reduced system is singular: {exc}", exc.column) from exc


def _normal_solve(k: SparseMatrix, r: np.ndarray) -> np.ndarray:
    """Solve (K K^T) y = K r for a short, wide K."""
    kr = spmv(k, r)
    if k.nrows == 1:
        return kr / float(k.values @ k.values)
    kkt = spgemm(k, transpose(k)).to_dense()
    return np.linalg.solve(kkt, kr)


def solve_two_sided(p: PrestructureResult, s: SaddleSystem, solver: Solver | None = None) -> SaddleSolution:
    if p.mode != Mode.TWO_SIDED:
        raise ValueError(f"expected a two-sided prestructure, got {p.mode.value}")
    v = _solve_reduced(p, solver)
    x = spmv(p.z_top, v) + p.x_star
    y = _normal_solve(s.b1, s.f - spmv(s.a, x))
    return SaddleSolution(x, y, residual_inf(s, x, y))


# -- one-sided -------------------------------------------------------------------

def prestructure_one_sided(s: SaddleSystem, target: str = "row", eps: float = 0.0) -> PrestructureResult:
    target = getattr(target, "value", target)
    n = s.n
    if target in ("row", Mode.ONE_SIDED_ROW.value):
        block = bmat([[s.b2, s.c]])
        t0 = time.perf_counter()
        basis = construct_multi(block, eps)
        z_time = time.perf_counter() - t0
        zhat = basis.z
        z_top, z_c = row_slab(zhat, 0, n), row_slab(zhat, n, n + s.m)
        xy = particular_solution(basis, block, s.g, eps)
        x_star, y_star = xy[:n], xy[n:]
        reduced = spgemm(bmat([[s.a, transpose(s.b1)]]), zhat)
        rhs = s.f - spmv(s.a, x_star) - spmv_transpose(s.b1, y_star)
        return PrestructureResult(reduced, rhs, None, basis, z_top, z_c, x_star, y_star,
                                  Mode.ONE_SIDED_ROW, z_time)
    if target in ("column", "col", Mode.ONE_SIDED_COL.value):
        block = bmat([[s.b1, transpose(s.c)]])
        t0 = time.perf_counter()
        basis = construct_multi(block, eps)
        z_time = time.perf_counter() - t0
        zhat = basis.z
        z_top, z_c = row_slab(zhat, 0, n), row_slab(zhat, n, n + s.m)
        reduced = spgemm(transpose(zhat), bmat([[s.a], [s.b2]]))
        rhs = spmv_transpose(zhat, s.rhs())
        return PrestructureResult(reduced, rhs, basis, None, z_top, z_c, np.zeros(n), np.zeros(s.m),
                                  Mode.ONE_SIDED_COL, z_time)
    raise ValueError(f"target must be 'row' or 'column', got {target!r}")


def solve_one_sided(p: PrestructureResult, s: SaddleSystem, solver: Solver | None = None) -> SaddleSolution:
    if p.mode == Mode.ONE_SIDED_ROW:
        v = _solve_reduced(p, solver)
        x = spmv(p.z_top, v) + p.x_star
        y = spmv(p.z_c, v) + p.y_star
    elif p.mode == Mode.ONE_SIDED_COL:
        x = _solve_reduced(p, solver)
        k = bmat([[s.b1, transpose(s.c)]])
        y = _normal_solve(k, np.concatenate([s.f - spmv(s.a, x), s.g - spmv(s.b2, x)]))
    else:
        raise ValueError(f"expected a one-sided prestructure, got {p.mode.value}")
    return SaddleSolution(x, y, residual_inf(s, x, y))


def prestructure(s: SaddleSystem, mode: Mode | str, eps: float = 0.0) -> PrestructureResult:
    mode = Mode(mode)
    if mode == Mode.TWO_SIDED:
        return prestructure_two_sided(s, eps)
    return prestructure_one_sided(s, "row" if mode == Mode.ONE_SIDED_ROW else "column", eps)


def solve_prestructured(p: PrestructureResult, s: SaddleSystem, solver: Solver | None = None) -> SaddleSolution:
    if p.mode == Mode.TWO_SIDED:
        return solve_two_sided(p, s, solver)
    return solve_one_sided(p, s, solver)


def solve_standard(s: SaddleSystem, solver: Solver | None = None) -> SaddleSolution:
    """Solve the assembled block matrix directly."""
    solver = solver or LuSolver()
    u = solver(s.to_matrix(), s.rhs())
    x, y = u[: s.n], u[s.n:]
    return SaddleSolution(x, y, residual_inf(s, x, y))


# -- diagnostics ---------------------------------------------------------------

def residual_inf(s: SaddleSystem, x, y) -> float:
    """||M (x; y) - (f; g)||_inf / ||(f; g)||_inf on the original blocks."""
    r1 = spmv(s.a, x) + spmv_transpose(s.b1, y) - s.f
    r2 = spmv(s.b2, x) + spmv(s.c, y) - s.g
    num = max(np.abs(r1).max(initial=0.0), np.abs(r2).max(initial=0.0))
    den = max(np.abs(s.f).max(initial=0.0), np.abs(s.g).max(initial=0.0))
    return float(num / den) if den > 0 else float(num)


def relative_diff(u, ref) -> float:
    """||u - ref||_inf / ||ref||_inf (absolute when ref is zero)."""
    u, ref = np.asarray(u), np.asarray(ref)
    den = np.abs(ref).max(initial=0.0)
    num = np.abs(u - ref).max(initial=0.0)
    return float(num / den) if den > 0 else float(num)


def oracle_solution(s: SaddleSystem):
    """(x, y) from dense LU with partial pivoting on the assembled matrix."""
    u = dense_oracle_solve(s.to_matrix(), s.rhs())
    return u[: s.n], u[s.n:]


def with_oracle_diff(sol: SaddleSolution, s: SaddleSystem) -> SaddleSolution:
    xo, yo = oracle_solution(s)
    d = max(relative_diff(sol.x, xo), relative_diff(sol.y, yo))
    return SaddleSolution(sol.x, sol.y, sol.residual_inf, d)


@dataclass(frozen=True)
class InvertibilityReport:
    b1_full_row_rank: bool
    b2_full_row_rank: bool
    null_a_b2_trivial: bool
    range_intersection_trivial: bool
    matrix_invertible: bool

    @property
    def conditions_hold(self) -> bool:
        return (self.b1_full_row_rank and self.b2_full_row_rank
                and self.null_a_b2_trivial and self.range_intersection_trivial)


def verify_invertibility_conditions(s: SaddleSystem) -> InvertibilityReport:
    """Dense rank checks of the conditions equivalent to invertibility when C = 0."""
    n, m = s.n, s.m
    if n + m > VERIFY_MAX_SIZE:
        raise DeskScaleOnlyError(f"verification limited to n + m <= {VERIFY_MAX_SIZE}, got {n + m}")
    a, b1, b2 = s.a.to_dense(), s.b1.to_dense(), s.b2.to_dense()
    rank = np.linalg.matrix_rank
    b1_ok = rank(b1) == m
    b2_ok = rank(b2) == m
    null_ok = rank(np.vstack([a, b2])) == n
    z2 = scipy.linalg.null_space(b2)
    az2 = a @ z2
    overlap = rank(az2) + rank(b1.T) - rank(np.hstack([az2, b1.T])) if z2.size else 0
    inv = rank(s.to_matrix().to_dense()) == n + m
    return InvertibilityReport(bool(b1_ok), bool(b2_ok), bool(null_ok), bool(overlap == 0), bool(inv))
