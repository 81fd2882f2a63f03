import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from densepre.errors import (
    DeskScaleOnlyError,
    DimensionError,
    InconsistentConstraintError,
    RequiresOneSidedError,
    SingularReducedSystemError,
    SingularityError,
    ZeroRowError,
)
from densepre.generators import ArrowheadSpec, arrowhead, random_saddle
from densepre.null_basis import condest_ztz, construct_multi, inflation_stats
from densepre.saddle_solve import (
    LuSolver,
    Mode,
    SaddleSystem,
    oracle_solution,
    particular_solution,
    particular_solution_row,
    prestructure,
    prestructure_one_sided,
    prestructure_two_sided,
    relative_diff,
    residual_inf,
    solve_one_sided,
    solve_prestructured,
    solve_standard,
    solve_two_sided,
    verify_invertibility_conditions,
    with_oracle_diff,
)
from densepre.sparse_core import SparseMatrix, spgemm, spmv


def row(values):
    return SparseMatrix.from_dense([values])


def system(a, b1, b2, c, f, g):
    return SaddleSystem(SparseMatrix.from_dense(a), SparseMatrix.from_dense(b1),
                        SparseMatrix.from_dense(b2), SparseMatrix.from_dense(c), f, g)


def oracle_diff(sol, s):
    xo, yo = oracle_solution(s)
    return max(relative_diff(sol.x, xo), relative_diff(sol.y, yo))


class TestSystem:
    def test_shape_validation(self):
        with pytest.raises(DimensionError):
            system(np.eye(3), [[1, 1, 1]], [[1, 1]], [[0]], np.ones(3), [0.0])
        with pytest.raises(DimensionError):
            system(np.eye(3), [[1, 1, 1]], [[1, 1, 1]], [[0]], np.ones(2), [0.0])

    def test_assembly(self):
        s = system(np.eye(2), [[1.0, 2.0]], [[3.0, 4.0]], [[5.0]], [1.0, 2.0], [3.0])
        np.testing.assert_array_equal(s.to_matrix().to_dense(),
                                      [[1, 0, 1], [0, 1, 2], [3, 4, 5]])
        assert s.nnz() == 7 and not s.c_is_zero


class TestParticular:
    def test_zero_rhs_is_trivial(self, rng):
        x, y = particular_solution_row(rng.normal(size=6), g=0.0)
        assert not x.any() and y is None

    def test_first_nonzero(self):
        x, _ = particular_solution_row([0.0, 2.0, 5.0], g=4.0)
        assert x.tolist() == [0.0, 2.0, 0.0]

    def test_lands_on_c(self):
        x, y = particular_solution_row([0.0, 0.0], c_entry=3.0, g=6.0)
        assert not x.any() and y == 2.0

    def test_inconsistent(self):
        with pytest.raises(InconsistentConstraintError):
            particular_solution_row([0.0, 0.0, 0.0], g=1.0)

    @given(st.integers(2, 4), st.integers(0, 2**32 - 1))
    def test_nested(self, m, seed):
        rng = np.random.default_rng(seed)
        b = rng.uniform(-1, 1, (m, m + 5))
        g = rng.normal(size=m)
        x = particular_solution(construct_multi(b), b, g)
        np.testing.assert_allclose(b @ x, g, atol=1e-9 * (1 + np.abs(x).max()))


class TestTwoSided:
    def test_small_dense_example(self, rng):
        s = SaddleSystem(SparseMatrix.identity(4), row([1.0] * 4), row([1.0] * 4),
                         SparseMatrix.zeros(1, 1), rng.uniform(size=4), [0.0])
        p = prestructure_two_sided(s)
        assert p.reduced.shape == (3, 3)
        sol = solve_two_sided(p, s)
        assert oracle_diff(sol, s) < 1e-12

    def test_elementary_row(self):
        f = np.array([1.0, 2.0, 3.0, 4.0])
        e = row([1.0, 0.0, 0.0, 0.0])
        s = SaddleSystem(SparseMatrix.identity(4), e, e, SparseMatrix.zeros(1, 1), f, [0.0])
        p = prestructure_two_sided(s)
        assert p.reduced.identical(SparseMatrix.identity(3))
        np.testing.assert_array_equal(p.rhs, [2.0, 3.0, 4.0])

    def test_consistent_rhs_gives_zero_v(self, rng):
        s0 = random_saddle(8, 1, 0.3, seed=5)
        xs, _ = particular_solution_row(s0.b2, g=0.7)
        s = SaddleSystem(s0.a, s0.b1, s0.b2, s0.c, spmv(s0.a, xs), [0.7])
        p = prestructure_two_sided(s)
        assert not p.rhs.any()
        sol = solve_two_sided(p, s)
        np.testing.assert_array_equal(sol.x, xs)

    def test_random_six_by_six(self):
        s = random_saddle(5, 1, 0.6, seed=11)
        sol = solve_two_sided(prestructure_two_sided(s), s)
        assert oracle_diff(sol, s) < 1e-10

    def test_200_sparse(self):
        s = random_saddle(200, 1, 0.02, seed=3, b_density=1.0)
        sol = solve_two_sided(prestructure_two_sided(s), s)
        assert sol.residual_inf < 1e-9

    def test_nonzero_c_rejected(self):
        s = arrowhead(ArrowheadSpec(n=5))
        with pytest.raises(RequiresOneSidedError):
            prestructure_two_sided(s)

    def test_singular_reduced(self):
        # A vanishes on the null space of B: Z^T A Z = 0
        s = system([[1.0, 1.0], [1.0, 1.0]], [[1.0, 1.0]], [[1.0, 1.0]], [[0.0]], [1.0, 0.0], [1.0])
        p = prestructure_two_sided(s)
        with pytest.raises(SingularReducedSystemError):
            solve_two_sided(p, s)

    def test_shared_basis(self):
        b = row([1.0, 2.0, 3.0])
        s = SaddleSystem(SparseMatrix.identity(3), b, b, SparseMatrix.zeros(1, 1), np.ones(3), [0.0])
        p = prestructure_two_sided(s)
        assert p.z1 is p.z2

    def test_multi_row(self):
        s = random_saddle(30, 3, 0.1, seed=2)
        p = prestructure(s, Mode.TWO_SIDED)
        assert p.reduced.shape == (27, 27)
        sol = solve_prestructured(p, s)
        assert oracle_diff(sol, s) < 1e-8
        np.testing.assert_allclose(spmv(s.b2, sol.x), s.g, rtol=1e-12)


class TestOneSided:
    def test_arrowhead_structure(self):
        n = 300
        s = arrowhead(ArrowheadSpec(n=n, seed=2))
        p = prestructure_one_sided(s)
        assert p.reduced.shape == (n, n)
        d = p.reduced.to_dense()
        # unit lower bidiagonal apart from the last column, which is full
        body = d[:, :-1]
        np.testing.assert_array_equal(np.diag(body), 1.0)
        assert np.count_nonzero(body) == 2 * (n - 1)
        assert all(body[i + 1, i] != 0 for i in range(n - 1))
        assert np.count_nonzero(d[:, -1]) == n
        assert p.reduced.nnz <= 2 * s.a.nnz + s.b1.nnz

    def test_c_block_on_unit_row(self):
        s = system(np.eye(2), [[1.0, 1.0]], [[1.0, 0.0]], [[0.0]], [1.0, 2.0], [3.0])
        p = prestructure_one_sided(s)
        assert p.reduced.shape == (2, 2)
        sol = solve_one_sided(p, s)
        assert oracle_diff(sol, s) < 1e-14

    def test_consistent_gives_zero_v(self):
        s0 = arrowhead(ArrowheadSpec(n=20, seed=1))
        xs = np.zeros(20)
        xs[0] = s0.g[0] / s0.b2.values[0]
        s = SaddleSystem(s0.a, s0.b1, s0.b2, s0.c, spmv(s0.a, xs), s0.g)
        p = prestructure_one_sided(s)
        assert not p.rhs.any()

    def test_arrowhead_1000(self):
        s = arrowhead(ArrowheadSpec(n=1000, seed=9))
        sol = solve_one_sided(prestructure_one_sided(s), s)
        assert oracle_diff(sol, s) < 1e-8

    def test_columns_without_c_part(self):
        s = random_saddle(40, 2, 0.1, c_mode="identity", seed=4, b_density=0.2)
        p = prestructure_one_sided(s)
        zc = p.z_c.to_dense()
        keep = np.flatnonzero(~zc.any(axis=0))
        assert keep.size > 0
        az = spgemm(s.a, p.z_top).to_dense()
        np.testing.assert_array_equal(p.reduced.to_dense()[:, keep], az[:, keep])
        np.testing.assert_allclose(s.b2.to_dense() @ p.z_top.to_dense()[:, keep], 0.0, atol=1e-13)

    @pytest.mark.parametrize("target", ["row", "column"])
    def test_modes_agree_with_oracle(self, target):
        s = random_saddle(60, 2, 0.08, c_mode="random_spd", seed=8)
        p = prestructure_one_sided(s, target)
        assert p.reduced.shape == (60, 60)
        assert oracle_diff(solve_one_sided(p, s), s) < 1e-8

    def test_zero_row(self):
        s = system(np.eye(2), [[1.0, 1.0]], [[0.0, 0.0]], [[0.0]], [1.0, 2.0], [0.0])
        with pytest.raises(ZeroRowError):
            prestructure_one_sided(s)

    def test_unknown_target(self):
        with pytest.raises(ValueError):
            prestructure_one_sided(arrowhead(ArrowheadSpec(n=4)), "diagonal")

    @given(st.integers(0, 2**32 - 1))
    def test_one_sided_bound(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 80))
        s = random_saddle(n, 1, float(rng.uniform(0.02, 0.4)), c_mode="identity", seed=seed,
                          b_density=float(rng.uniform(0.05, 1.0)))
        p = prestructure_one_sided(s)
        assert p.reduced.nnz <= 2 * s.a.nnz + s.b1.nnz


def basis_condest(p):
    try:
        return max(condest_ztz(b) for b in (p.z1, p.z2) if b is not None)
    except SingularityError:
        return np.inf


class TestOracleEquivalence:
    @given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]),
           st.sampled_from(["zero", "identity", "random_spd"]))
    def test_paths_agree(self, seed, m, c_mode):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(m + 2, 60))
        s = random_saddle(n, m, float(rng.uniform(0.05, 0.5)), c_mode=c_mode, seed=seed)
        assume(np.linalg.cond(s.to_matrix().to_dense()) < 1e10)
        mode = Mode.TWO_SIDED if c_mode == "zero" else Mode.ONE_SIDED_ROW
        p = prestructure(s, mode)
        assert p.reduced.shape == ((n - m, n - m) if mode == Mode.TWO_SIDED else (n, n))
        # accuracy is only promised for well-conditioned bases
        assume(basis_condest(p) < 1e8)
        sol = solve_prestructured(p, s)
        assert sol.residual_inf < 1e-9
        assert oracle_diff(sol, s) < 1e-8
        if mode == Mode.TWO_SIDED:
            np.testing.assert_allclose(spmv(s.b2, sol.x), s.g, rtol=1e-12, atol=1e-12)

    def test_standard_solve(self):
        s = random_saddle(40, 2, 0.1, c_mode="identity", seed=1)
        sol = with_oracle_diff(solve_standard(s, LuSolver()), s)
        assert sol.diff_vs_oracle < 1e-12
        assert sol.residual_inf == residual_inf(s, sol.x, sol.y)


class TestInvertibility:
    def test_identity_a(self, rng):
        s = SaddleSystem(SparseMatrix.identity(6), row(rng.uniform(size=6)), row(rng.uniform(size=6)),
                         SparseMatrix.zeros(1, 1), np.ones(6), [0.0])
        rep = verify_invertibility_conditions(s)
        assert rep.conditions_hold and rep.matrix_invertible

    def test_zero_b1(self):
        s = system(np.eye(3), [[0.0, 0.0, 0.0]], [[1.0, 1.0, 1.0]], [[0.0]], np.ones(3), [0.0])
        rep = verify_invertibility_conditions(s)
        assert not rep.b1_full_row_rank and not rep.matrix_invertible

    def test_random(self):
        s = random_saddle(20, 2, 0.2, seed=6)
        rep = verify_invertibility_conditions(s)
        assert rep.conditions_hold
        assert np.linalg.det(s.to_matrix().to_dense()) != 0

    def test_guard(self):
        with pytest.raises(DeskScaleOnlyError):
            verify_invertibility_conditions(random_saddle(300, 1, 0.01, seed=0))

    @given(st.integers(0, 2**32 - 1))
    def test_conditions_iff_invertible(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(2, 8))
        a = np.where(rng.random((n, n)) < 0.3, 1.0, 0.0)
        b1 = np.where(rng.random((1, n)) < 0.5, 1.0, 0.0)
        b2 = np.where(rng.random((1, n)) < 0.5, 1.0, 0.0)
        s = system(a, b1, b2, [[0.0]], np.ones(n), [0.0])
        rep = verify_invertibility_conditions(s)
        assert rep.conditions_hold == rep.matrix_invertible


def test_inflation_of_reduced(rng):
    s = random_saddle(50, 1, 0.1, seed=7, b_density=1.0)
    p = prestructure_two_sided(s)
    red, infl = inflation_stats(s.a, p.z1, p.z2, s.nnz())
    assert red == p.reduced.nnz and infl == red / s.nnz()
