"""Null space prestructuring of sparse block systems with dense rows."""

from .direct_solver import (
    LuFactors,
    SymbolicPlan,
    dense_oracle_solve,
    factorize,
    solve,
    solve_transpose,
    sparse_solve,
    symbolic,
)
from .errors import DensepreError
from .generators import ArrowheadSpec, MeshSpec, arrowhead, poisson_neumann, random_saddle
from .graph_analysis import (
    DensityReport,
    EliminationTree,
    column_etree,
    detect_dense_rows,
    predict_product_nnz,
    symbolic_fill_bound,
)
from .null_basis import (
    BasisKind,
    NullBasis,
    condest_ztz,
    construct_multi,
    construct_single,
    fundamental_basis,
    inflation_stats,
    sigma1_upper_bound,
)
from .saddle_solve import (
    LuSolver,
    Mode,
    PrestructureResult,
    SaddleSolution,
    SaddleSystem,
    particular_solution_row,
    prestructure_one_sided,
    prestructure_two_sided,
    solve_one_sided,
    solve_standard,
    solve_two_sided,
    verify_invertibility_conditions,
)
from .sparse_core import (
    SparseMatrix,
    Triplets,
    from_triplets,
    read_matrix_market,
    spgemm,
    spmv,
    spmv_transpose,
    transpose,
    triple_product,
    write_matrix_market,
)

__version__ = "0.1.0"
