from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_pattern
from densepre.direct_solver import (
    factor_residual,
    factorize,
    dense_oracle_solve,
    solve,
    solve_transpose,
    sparse_solve,
    symbolic,
)
from densepre.errors import (
    DeskScaleOnlyError,
    DimensionError,
    NumericalInstabilityError,
    SingularMatrixError,
)
from densepre.generators import ArrowheadSpec, arrowhead
from densepre.graph_analysis import symbolic_fill_bound
from densepre.sparse_core import SparseMatrix, add, coo, spmv


def tridiagonal(n, diag=2.0, off=-1.0):
    i = np.arange(n)
    rows = np.concatenate([i, i[1:], i[:-1]])
    cols = np.concatenate([i, i[:-1], i[1:]])
    vals = np.concatenate([np.full(n, diag), np.full(2 * (n - 1), off)])
    return coo(n, n, rows, cols, vals)


def dominant(rng, n, density):
    a = random_pattern(rng, n, n, density)
    a = SparseMatrix(n, n, a.row_ptr, a.col_idx, a.values * rng.choice([-1.0, 1.0], a.nnz))
    return add(a, SparseMatrix.identity(n), beta=float(n * density + 2))


def exact_solve(a, b):
    """Gauss-Jordan over the rationals."""
    n = len(b)
    m = [[Fraction(a[i][j]) for j in range(n)] + [Fraction(b[i])] for i in range(n)]
    for k in range(n):
        p = next(i for i in range(k, n) if m[i][k] != 0)
        m[k], m[p] = m[p], m[k]
        for i in range(n):
            if i != k and m[i][k] != 0:
                f = m[i][k] / m[k][k]
                m[i] = [x - f * y for x, y in zip(m[i], m[k])]
    return [m[i][n] / m[i][i] for i in range(n)]


class TestSymbolic:
    def test_diagonal(self):
        plan = symbolic(SparseMatrix.from_dense(np.diag(np.arange(1.0, 6.0))))
        assert plan.col_perm.tolist() == list(range(5))
        assert plan.predicted_fill == 5

    def test_arrowhead_dense_line_last(self):
        n = 2000
        m = arrowhead(ArrowheadSpec(n=n, c_value=1.0)).to_matrix()
        plan = symbolic(m)
        assert plan.col_perm[-1] == n
        assert plan.predicted_fill == 3 * n + 1
        assert sorted(plan.col_perm.tolist()) == list(range(n + 1))

    def test_tridiagonal_no_fill(self):
        a = tridiagonal(50)
        assert symbolic(a).predicted_fill == a.nnz

    def test_requires_square(self):
        with pytest.raises(DimensionError):
            symbolic(SparseMatrix.zeros(2, 3))

    def test_full_row_gap(self):
        n = 3000
        m = arrowhead(ArrowheadSpec(n=n, c_value=1.0)).to_matrix()
        bound = symbolic_fill_bound(m)
        assert bound > n * n / 2
        assert factorize(m).nnz <= 3 * n + 1

    @given(st.integers(0, 2**32 - 1))
    def test_pattern_deterministic(self, seed):
        rng = np.random.default_rng(seed)
        a = random_pattern(rng, 30, 30, 0.1)
        b = SparseMatrix(a.nrows, a.ncols, a.row_ptr, a.col_idx, rng.normal(size=a.nnz))
        pa, pb = symbolic(a), symbolic(b)
        assert np.array_equal(pa.col_perm, pb.col_perm)
        assert pa.predicted_fill == pb.predicted_fill >= a.nnz
        assert np.array_equal(pa.etree.parent, pb.etree.parent)


class TestFactorize:
    def test_identity(self):
        f = factorize(SparseMatrix.identity(4))
        assert f.l.nnz == 0
        assert f.u.identical(SparseMatrix.identity(4))

    def test_swap(self):
        f = factorize(SparseMatrix.from_dense([[0.0, 1.0], [1.0, 0.0]]))
        assert f.row_perm.tolist() != f.col_perm.tolist()
        assert f.l.nnz == 0
        np.testing.assert_array_equal(np.abs(f.u.to_dense()), np.eye(2))
        assert factor_residual(SparseMatrix.from_dense([[0.0, 1.0], [1.0, 0.0]]), f) == 0.0

    def test_random_dominant_300(self, rng):
        a = dominant(rng, 300, 0.02)
        f = factorize(a)
        assert factor_residual(a, f) < 1e-12

    def test_singular_column_reported(self):
        a = SparseMatrix.from_dense([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 1.0]])
        with pytest.raises(SingularMatrixError) as info:
            factorize(a)
        assert info.value.column in (0, 1)

    def test_structurally_empty_column(self):
        a = SparseMatrix.from_dense([[1.0, 0.0], [1.0, 0.0]])
        with pytest.raises(SingularMatrixError) as info:
            factorize(a)
        assert info.value.column == 1

    def test_growth_abort(self):
        a = SparseMatrix.from_dense([[1e-14, 1.0], [1.0, 1.0]])
        with pytest.raises(NumericalInstabilityError):
            factorize(a, pivot_tol=1e-20)
        assert factor_residual(a, factorize(a)) < 1e-15

    def test_threshold_prefers_diagonal(self):
        a = SparseMatrix.from_dense([[0.5, 1.0], [1.0, 1.0]])
        assert factorize(a, pivot_tol=0.1).row_perm.tolist() == [0, 1]
        assert factorize(a, pivot_tol=1.0).row_perm.tolist() == [1, 0]

    @given(st.integers(0, 2**32 - 1))
    def test_residual_bound(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 60))
        a = add(random_pattern(rng, n, n, rng.uniform(0.02, 0.4)), SparseMatrix.identity(n),
                beta=float(rng.uniform(0.0, 2.0)))
        a = SparseMatrix(n, n, a.row_ptr, a.col_idx, a.values * rng.choice([-1.0, 1.0], a.nnz))
        try:
            f = factorize(a)
        except SingularMatrixError:
            assert np.linalg.matrix_rank(a.to_dense()) < n
            return
        assert factor_residual(a, f) <= 1e-10 * f.growth


class TestSolve:
    def test_identity(self, rng):
        b = rng.normal(size=6)
        np.testing.assert_array_equal(solve(factorize(SparseMatrix.identity(6)), b), b)

    def test_poisson_1d(self):
        a = tridiagonal(100)
        x = sparse_solve(a, spmv(a, np.ones(100)))
        np.testing.assert_allclose(x, 1.0, rtol=0, atol=1e-10)

    def test_arrowhead_against_oracle(self):
        m = arrowhead(ArrowheadSpec(n=1000, c_value=1.0, seed=4))
        a = m.to_matrix()
        b = m.rhs()
        x = sparse_solve(a, b)
        ref = dense_oracle_solve(a, b)
        assert np.abs(x - ref).max() / np.abs(ref).max() < 1e-9

    def test_transpose_solve(self, rng):
        a = dominant(rng, 80, 0.05)
        b = rng.normal(size=80)
        x = solve_transpose(factorize(a), b)
        np.testing.assert_allclose(a.to_dense().T @ x, b, atol=1e-12)

    def test_rhs_shape(self):
        with pytest.raises(DimensionError):
            solve(factorize(SparseMatrix.identity(3)), np.ones(4))

    @given(st.integers(0, 2**32 - 1))
    def test_well_conditioned_residual(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 120))
        a = dominant(rng, n, rng.uniform(0.01, 0.2))
        b = rng.normal(size=n)
        x = sparse_solve(a, b)
        r = np.abs(spmv(a, x) - b).max() / (a.norm_inf() * np.abs(x).max() + np.abs(b).max())
        assert r < 1e-9


class TestDenseOracle:
    def test_identity(self):
        b = np.arange(4.0)
        np.testing.assert_array_equal(dense_oracle_solve(SparseMatrix.identity(4), b), b)

    def test_hilbert(self):
        n = 8
        h = [[Fraction(1, i + j + 1) for j in range(n)] for i in range(n)]
        b = [Fraction(1)] * n
        exact = np.array([float(v) for v in exact_solve(h, b)])
        got = dense_oracle_solve(np.array(h, dtype=float), np.ones(n))
        assert np.abs(got - exact).max() / np.abs(exact).max() < 1e-6

    def test_rank_one(self):
        a = SparseMatrix.from_dense(np.outer([1.0, 2.0, 3.0], [1.0, 1.0, 1.0]))
        with pytest.raises(SingularMatrixError):
            dense_oracle_solve(a, np.ones(3))

    def test_size_guard(self):
        with pytest.raises(DeskScaleOnlyError):
            dense_oracle_solve(SparseMatrix.identity(2001), np.ones(2001))
