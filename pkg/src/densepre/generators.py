"""Test problems: arrowhead systems, P1 Poisson with pure Neumann conditions
and a mean-value multiplier, and random block systems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import ConstructionError
from .saddle_solve import SaddleSystem
from .sparse_core import SparseMatrix, coo, permute, prune


def _row(n, cols, vals) -> SparseMatrix:
    return coo(1, n, np.zeros(len(cols), np.int64), cols, vals)


def _scalar(value) -> SparseMatrix:
    if value == 0:
        return SparseMatrix.zeros(1, 1)
    return SparseMatrix.from_dense([[value]])


# -- arrowhead ---------------------------------------------------------------

@dataclass(frozen=True)
class ArrowheadSpec:
    """A = I_n bordered by one constraint row.

    ``b_nnz`` (if set) fixes nnz(B2); otherwise ``round(b_density * n)``.
    ``b1_pattern="full"`` gives a full B1; ``"match"`` reuses the B2
    positions with independent values.
    """

    n: int
    b_density: float = 1.0
    b_nnz: int | None = None
    c_value: float = 1.0
    seed: int = 0
    b1_pattern: Literal["full", "match"] = "full"

    def __post_init__(self):
        if self.n < 2:
            raise ConstructionError("arrowhead needs n >= 2")
        if not 0.0 <= self.b_density <= 1.0:
            raise ConstructionError(f"b_density must lie in [0, 1], got {self.b_density}")
        if self.b_nnz is not None and not 0 <= self.b_nnz <= self.n:
            raise ConstructionError(f"b_nnz must lie in [0, n={self.n}], got {self.b_nnz}")
        if self.b1_pattern not in ("full", "match"):
            raise ConstructionError(f"unknown b1_pattern {self.b1_pattern!r}")

    @property
    def nnz_b2(self) -> int:
        return self.b_nnz if self.b_nnz is not None else int(round(self.b_density * self.n))


def arrowhead(spec: ArrowheadSpec) -> SaddleSystem:
    n = spec.n
    rng = np.random.default_rng(spec.seed)
    k = spec.nnz_b2
    pos = np.arange(n) if k == n else np.sort(rng.choice(n, size=k, replace=False))
    b2 = _row(n, pos, rng.uniform(0.0, 1.0, k))
    b1_pos = np.arange(n) if spec.b1_pattern == "full" else pos
    b1 = _row(n, b1_pos, rng.uniform(0.0, 1.0, b1_pos.size))
    f = rng.uniform(0.0, 1.0, n)
    g = rng.uniform(0.0, 1.0, 1)
    return SaddleSystem(SparseMatrix.identity(n), b1, b2, _scalar(spec.c_value), f, g)


# -- Poisson with pure Neumann conditions ------------------------------------

@dataclass(frozen=True)
class MeshSpec:
    """k x k vertex grid on the unit square, each cell cut along one diagonal."""

    k: int
    diagonal: Literal["right_up"] = "right_up"

    def __post_init__(self):
        if self.k < 2:
            raise ConstructionError("mesh needs k >= 2")
        if self.diagonal != "right_up":
            raise ConstructionError(f"unsupported diagonal {self.diagonal!r}")

    @property
    def n(self) -> int:
        return self.k * self.k


def square_mesh(spec: MeshSpec):
    """Vertex coordinates (row-major, x fastest) and triangle vertex triples."""
    k = spec.k
    t = np.linspace(0.0, 1.0, k)
    x, y = np.meshgrid(t, t)
    pts = np.column_stack([x.ravel(), y.ravel()])
    i, j = np.meshgrid(np.arange(k - 1), np.arange(k - 1))
    v0 = (j * k + i).ravel()
    v1, v2, v3 = v0 + 1, v0 + k, v0 + k + 1
    tris = np.concatenate([np.column_stack([v0, v1, v3]), np.column_stack([v0, v3, v2])])
    return pts, tris


def p1_stiffness(pts, tris):
    """Stiffness matrix of -Laplace and the lumped mass vector (area / 3 per vertex)."""
    n = len(pts)
    p = pts[tris]  # (ntri, 3, 2)
    # edge opposite each vertex
    e = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    area = 0.5 * np.abs(e[:, 1, 0] * e[:, 2, 1] - e[:, 1, 1] * e[:, 2, 0])
    local = np.einsum("tad,tbd->tab", e, e) / (4.0 * area)[:, None, None]
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    stiff = prune(coo(n, n, rows, cols, local.ravel()))
    mass = np.bincount(tris.ravel(), weights=np.repeat(area / 3.0, 3), minlength=n)
    return stiff, mass


def poisson_neumann(spec: MeshSpec) -> SaddleSystem:
    """-Laplace u = f with homogeneous Neumann data, mean of u fixed by a
    multiplier: blocks A (stiffness), B1 = B2 = integrals of the hat
    functions, C empty, load cos(pi x) cos(pi y) by vertex quadrature."""
    pts, tris = square_mesh(spec)
    a, mass = p1_stiffness(pts, tris)
    n = len(pts)
    b = _row(n, np.arange(n), mass)
    f = mass * np.cos(np.pi * pts[:, 0]) * np.cos(np.pi * pts[:, 1])
    return SaddleSystem(a, b, b, SparseMatrix.zeros(1, 1), f, np.zeros(1))


def permute_system(s: SaddleSystem, seed: int) -> SaddleSystem:
    """Apply one random symmetric permutation to the unknowns x."""
    perm = np.random.default_rng(seed).permutation(s.n)
    return SaddleSystem(permute(s.a, perm, perm), permute(s.b1, None, perm), permute(s.b2, None, perm),
                        s.c, s.f[perm], s.g)


# -- random systems ----------------------------------------------------------

def _random_sparse(rng, nrows, ncols, density):
    mask = rng.random((nrows, ncols)) < density
    rows, cols = np.nonzero(mask)
    return coo(nrows, ncols, rows, cols, rng.uniform(0.0, 1.0, rows.size))


def random_saddle(n: int, m: int, density: float, c_mode: str = "zero", seed: int = 0,
                  b_density: float | None = None) -> SaddleSystem:
    """Random A (plus identity) with random constraint rows, each with at
    least one nonzero.  ``c_mode`` is one of zero, identity, random_spd."""
    if not 1 <= m < n:
        raise ConstructionError(f"need 1 <= m < n, got m={m}, n={n}")
    if not 0.0 < density <= 1.0:
        raise ConstructionError(f"density must lie in (0, 1], got {density}")
    bd = density if b_density is None else b_density
    rng = np.random.default_rng(seed)
    a = _random_sparse(rng, n, n, density)
    a = coo(n, n, np.concatenate([a.row_indices(), np.arange(n)]),
            np.concatenate([a.col_idx, np.arange(n)]), np.concatenate([a.values, np.ones(n)]))
    blocks = []
    for _ in range(2):
        dense = np.where(rng.random((m, n)) < bd, rng.uniform(0.0, 1.0, (m, n)), 0.0)
        for i in range(m):
            if not dense[i].any():
                dense[i, rng.integers(n)] = rng.uniform(0.0, 1.0)
        blocks.append(SparseMatrix.from_dense(dense))
    if c_mode == "zero":
        c = SparseMatrix.zeros(m, m)
    elif c_mode == "identity":
        c = SparseMatrix.identity(m)
    elif c_mode == "random_spd":
        r = rng.uniform(0.0, 1.0, (m, m))
        c = SparseMatrix.from_dense(r @ r.T + m * np.eye(m))
    else:
        raise ConstructionError(f"unknown c_mode {c_mode!r}")
    f = rng.uniform(0.0, 1.0, n)
    g = rng.uniform(0.0, 1.0, m)
    return SaddleSystem(a, blocks[0], blocks[1], c, f, g)
