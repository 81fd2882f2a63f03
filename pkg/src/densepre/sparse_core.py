"""Compressed sparse row storage, arithmetic kernels and Matrix Market I/O.

Stored entries are structural nonzeros: arithmetic never drops an entry
because its value happens to be zero.  Call :func:`prune` to opt in to
numerical dropping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from numba import njit

from .errors import ConstructionError, DimensionError, MatrixMarketError

INDEX = np.int64
REAL = np.float64


def _frozen(arr, dtype):
    out = np.ascontiguousarray(arr, dtype=dtype)
    if out.flags.writeable and out.base is None:
        out.flags.writeable = False
    elif out.flags.writeable:
        out = out.copy()
        out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """CSR matrix with sorted, duplicate-free column indices in every row."""

    nrows: int
    ncols: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "nrows", int(self.nrows))
        object.__setattr__(self, "ncols", int(self.ncols))
        object.__setattr__(self, "row_ptr", _frozen(self.row_ptr, INDEX))
        object.__setattr__(self, "col_idx", _frozen(self.col_idx, INDEX))
        object.__setattr__(self, "values", _frozen(self.values, REAL))
        self._check()

    def _check(self):
        m, n = self.nrows, self.ncols
        if m < 0 or n < 0:
            raise ConstructionError("negative dimension")
        rp, ci = self.row_ptr, self.col_idx
        if rp.shape != (m + 1,):
            raise ConstructionError("row_ptr must have length nrows + 1")
        if rp[0] != 0 or np.any(np.diff(rp) < 0):
            raise ConstructionError("row_ptr must start at 0 and be nondecreasing")
        nnz = int(rp[-1])
        if ci.shape != (nnz,) or self.values.shape != (nnz,):
            raise ConstructionError("col_idx/values length must equal row_ptr[-1]")
        if nnz:
            if ci.min() < 0 or ci.max() >= n:
                raise ConstructionError("column index out of range")
            step = np.diff(ci)
            same_row = np.ones(nnz - 1, dtype=bool)
            starts = rp[1:-1]
            starts = starts[(starts > 0) & (starts < nnz)]
            same_row[starts - 1] = False
            if np.any(step[same_row] <= 0):
                raise ConstructionError("column indices must be strictly increasing within a row")

    # -- basic queries -----------------------------------------------------
    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return int(self.row_ptr[-1])

    def row_counts(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def col_counts(self) -> np.ndarray:
        return np.bincount(self.col_idx, minlength=self.ncols)

    def row_indices(self) -> np.ndarray:
        """Row index of every stored entry (COO view)."""
        return np.repeat(np.arange(self.nrows, dtype=INDEX), self.row_counts())

    def row(self, i):
        lo, hi = self.row_ptr[i], self.row_ptr[i + 1]
        return self.col_idx[lo:hi], self.values[lo:hi]

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.row_indices(), self.col_idx] = self.values
        return out

    def pattern_equal(self, other: "SparseMatrix") -> bool:
        return (
            self.shape == other.shape
            and np.array_equal(self.row_ptr, other.row_ptr)
            and np.array_equal(self.col_idx, other.col_idx)
        )

    def identical(self, other: "SparseMatrix") -> bool:
        """Bit-exact equality of pattern and values."""
        return self.pattern_equal(other) and np.array_equal(
            self.values.view(np.int64), other.values.view(np.int64)
        )

    def norm_inf(self) -> float:
        if self.nnz == 0:
            return 0.0
        sums = np.add.reduceat(np.abs(self.values), self.row_ptr[:-1][self.row_counts() > 0])
        return float(sums.max())

    def __repr__(self):
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"

    # -- constructors ------------------------------------------------------
    @classmethod
    def zeros(cls, nrows, ncols):
        return cls(nrows, ncols, np.zeros(nrows + 1, INDEX), np.empty(0, INDEX), np.empty(0, REAL))

    @classmethod
    def identity(cls, n, value=1.0):
        idx = np.arange(n, dtype=INDEX)
        return cls(n, n, np.arange(n + 1, dtype=INDEX), idx, np.full(n, value, REAL))

    @classmethod
    def from_dense(cls, arr, keep_zeros=False):
        arr = np.atleast_2d(np.asarray(arr, dtype=REAL))
        mask = np.ones(arr.shape, bool) if keep_zeros else arr != 0
        rows, cols = np.nonzero(mask)
        row_ptr = np.zeros(arr.shape[0] + 1, INDEX)
        np.cumsum(np.bincount(rows, minlength=arr.shape[0]), out=row_ptr[1:])
        return cls(arr.shape[0], arr.shape[1], row_ptr, cols, arr[rows, cols])

    @classmethod
    def from_row(cls, values, keep_zeros=False):
        """1 x n matrix from a dense vector."""
        return cls.from_dense(np.asarray(values, REAL).reshape(1, -1), keep_zeros=keep_zeros)


@dataclass
class Triplets:
    """Assembly buffer: coordinate entries, duplicates allowed."""

    nrows: int
    ncols: int
    rows: np.ndarray = field(default_factory=lambda: np.empty(0, INDEX))
    cols: np.ndarray = field(default_factory=lambda: np.empty(0, INDEX))
    vals: np.ndarray = field(default_factory=lambda: np.empty(0, REAL))

    @classmethod
    def from_entries(cls, nrows, ncols, entries: Iterable[Sequence]):
        entries = list(entries)
        if not entries:
            return cls(nrows, ncols)
        r, c, v = zip(*entries)
        return cls(nrows, ncols, np.asarray(r), np.asarray(c), np.asarray(v, REAL))

    def __len__(self):
        return len(self.rows)


def from_triplets(t: Triplets) -> SparseMatrix:
    """Compress coordinate entries to CSR, summing duplicates.

    Duplicates are summed in a canonical order, so the result does not
    depend on the order in which entries were supplied.
    """
    rows = np.asarray(t.rows)
    cols = np.asarray(t.cols)
    vals = np.asarray(t.vals, REAL)
    if not (rows.shape == cols.shape == vals.shape) or rows.ndim != 1:
        raise ConstructionError("rows, cols and vals must be 1-d arrays of equal length")
    if rows.size and not (np.issubdtype(rows.dtype, np.integer) and np.issubdtype(cols.dtype, np.integer)):
        if not (np.all(rows == np.round(rows)) and np.all(cols == np.round(cols))):
            raise ConstructionError("indices must be integers")
    rows = rows.astype(INDEX)
    cols = cols.astype(INDEX)
    m, n = int(t.nrows), int(t.ncols)
    if rows.size:
        bad = (rows < 0) | (rows >= m) | (cols < 0) | (cols >= n)
        if np.any(bad):
            k = int(np.argmax(bad))
            raise ConstructionError(
                f"entry ({rows[k]}, {cols[k]}) out of range for a {m}x{n} matrix"
            )
    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    if rows.size:
        new = np.ones(rows.size, bool)
        new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
        starts = np.flatnonzero(new)
        vals = np.add.reduceat(vals, starts) if starts.size < rows.size else vals
        rows, cols = rows[starts], cols[starts]
    row_ptr = np.zeros(m + 1, INDEX)
    np.cumsum(np.bincount(rows, minlength=m), out=row_ptr[1:])
    return SparseMatrix(m, n, row_ptr, cols, vals)


def coo(nrows, ncols, rows, cols, vals) -> SparseMatrix:
    return from_triplets(Triplets(nrows, ncols, rows, cols, vals))


def transpose(a: SparseMatrix) -> SparseMatrix:
    order = np.argsort(a.col_idx, kind="stable")
    row_ptr = np.zeros(a.ncols + 1, INDEX)
    np.cumsum(a.col_counts(), out=row_ptr[1:])
    return SparseMatrix(a.ncols, a.nrows, row_ptr, a.row_indices()[order], a.values[order])


def prune(a: SparseMatrix, eps: float = 0.0) -> SparseMatrix:
    """Drop stored entries with |value| <= eps."""
    keep = np.abs(a.values) > eps
    rows = a.row_indices()[keep]
    row_ptr = np.zeros(a.nrows + 1, INDEX)
    np.cumsum(np.bincount(rows, minlength=a.nrows), out=row_ptr[1:])
    return SparseMatrix(a.nrows, a.ncols, row_ptr, a.col_idx[keep], a.values[keep])


def scale(a: SparseMatrix, alpha: float) -> SparseMatrix:
    return SparseMatrix(a.nrows, a.ncols, a.row_ptr, a.col_idx, alpha * a.values)


# -- kernels -----------------------------------------------------------------

@njit(cache=True)
def _spgemm(m, n, ap, ai, ax, bp, bi, bx):
    mark = np.full(n, -1, np.int64)
    cp = np.zeros(m + 1, np.int64)
    for i in range(m):
        cnt = 0
        for ka in range(ap[i], ap[i + 1]):
            k = ai[ka]
            for kb in range(bp[k], bp[k + 1]):
                j = bi[kb]
                if mark[j] != i:
                    mark[j] = i
                    cnt += 1
        cp[i + 1] = cp[i] + cnt
    ci = np.empty(cp[m], np.int64)
    cx = np.empty(cp[m], np.float64)
    acc = np.zeros(n)
    mark[:] = -1
    for i in range(m):
        pos = cp[i]
        for ka in range(ap[i], ap[i + 1]):
            k = ai[ka]
            av = ax[ka]
            for kb in range(bp[k], bp[k + 1]):
                j = bi[kb]
                if mark[j] != i:
                    mark[j] = i
                    ci[pos] = j
                    pos += 1
                    acc[j] = av * bx[kb]
                else:
                    acc[j] += av * bx[kb]
        if cp[i + 1] - cp[i] > 1:
            ci[cp[i]:cp[i + 1]].sort()
        for p in range(cp[i], cp[i + 1]):
            cx[p] = acc[ci[p]]
    return cp, ci, cx


@njit(cache=True)
def _spadd(m, n, alpha, ap, ai, ax, beta, bp, bi, bx):
    cp = np.zeros(m + 1, np.int64)
    ci = np.empty(ap[m] + bp[m], np.int64)
    cx = np.empty(ap[m] + bp[m], np.float64)
    pos = 0
    for i in range(m):
        pa, pb = ap[i], bp[i]
        ea, eb = ap[i + 1], bp[i + 1]
        while pa < ea or pb < eb:
            if pb >= eb or (pa < ea and ai[pa] < bi[pb]):
                ci[pos] = ai[pa]
                cx[pos] = alpha * ax[pa]
                pa += 1
            elif pa >= ea or bi[pb] < ai[pa]:
                ci[pos] = bi[pb]
                cx[pos] = beta * bx[pb]
                pb += 1
            else:
                ci[pos] = ai[pa]
                cx[pos] = alpha * ax[pa] + beta * bx[pb]
                pa += 1
                pb += 1
            pos += 1
        cp[i + 1] = pos
    return cp, ci[:pos].copy(), cx[:pos].copy()


@njit(cache=True)
def _spmv(m, ap, ai, ax, x):
    y = np.zeros(m)
    for i in range(m):
        s = 0.0
        for p in range(ap[i], ap[i + 1]):
            s += ax[p] * x[ai[p]]
        y[i] = s
    return y


@njit(cache=True)
def _spmv_t(m, n, ap, ai, ax, x):
    y = np.zeros(n)
    for i in range(m):
        xi = x[i]
        for p in range(ap[i], ap[i + 1]):
            y[ai[p]] += ax[p] * xi
    return y


def spgemm(a: SparseMatrix, b: SparseMatrix) -> SparseMatrix:
    """Structural product a @ b (Gustavson, dense accumulator per row)."""
    if a.ncols != b.nrows:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    cp, ci, cx = _spgemm(a.nrows, b.ncols, a.row_ptr, a.col_idx, a.values,
                         b.row_ptr, b.col_idx, b.values)
    return SparseMatrix(a.nrows, b.ncols, cp, ci, cx)


def add(a: SparseMatrix, b: SparseMatrix, alpha=1.0, beta=1.0) -> SparseMatrix:
    """alpha*a + beta*b on the union pattern."""
    if a.shape != b.shape:
        raise DimensionError(f"cannot add {a.shape} and {b.shape}")
    cp, ci, cx = _spadd(a.nrows, a.ncols, float(alpha), a.row_ptr, a.col_idx, a.values,
                        float(beta), b.row_ptr, b.col_idx, b.values)
    return SparseMatrix(a.nrows, a.ncols, cp, ci, cx)


def triple_product(z1: SparseMatrix, a: SparseMatrix, z2: SparseMatrix) -> SparseMatrix:
    """z1^T a z2."""
    return spgemm(spgemm(transpose(z1), a), z2)


def _vec(x, n, what="x"):
    x = np.ascontiguousarray(x, dtype=REAL)
    if x.shape != (n,):
        raise DimensionError(f"{what} has shape {x.shape}, expected ({n},)")
    return x


def spmv(a: SparseMatrix, x) -> np.ndarray:
    return _spmv(a.nrows, a.row_ptr, a.col_idx, a.values, _vec(x, a.ncols))


def spmv_transpose(a: SparseMatrix, x) -> np.ndarray:
    return _spmv_t(a.nrows, a.ncols, a.row_ptr, a.col_idx, a.values, _vec(x, a.nrows))


def permute(a: SparseMatrix, row_perm=None, col_perm=None) -> SparseMatrix:
    """Return P a Q where row k of the result is row row_perm[k] of a and
    column k is column col_perm[k] of a."""
    rows = a.row_indices()
    cols = a.col_idx
    if row_perm is not None:
        inv = np.empty(a.nrows, INDEX)
        inv[np.asarray(row_perm)] = np.arange(a.nrows)
        rows = inv[rows]
    if col_perm is not None:
        inv = np.empty(a.ncols, INDEX)
        inv[np.asarray(col_perm)] = np.arange(a.ncols)
        cols = inv[cols]
    return coo(a.nrows, a.ncols, rows, cols, a.values)


def bmat(blocks) -> SparseMatrix:
    """Assemble a block matrix; ``None`` entries are zero blocks."""
    heights = [None] * len(blocks)
    widths = [None] * len(blocks[0])
    for bi, brow in enumerate(blocks):
        for bj, blk in enumerate(brow):
            if blk is None:
                continue
            if heights[bi] not in (None, blk.nrows) or widths[bj] not in (None, blk.ncols):
                raise DimensionError("inconsistent block sizes")
            heights[bi], widths[bj] = blk.nrows, blk.ncols
    if None in heights or None in widths:
        raise DimensionError("every block row and column needs at least one block")
    roff = np.concatenate([[0], np.cumsum(heights)])
    coff = np.concatenate([[0], np.cumsum(widths)])
    rs, cs, vs = [], [], []
    for bi, brow in enumerate(blocks):
        for bj, blk in enumerate(brow):
            if blk is None or blk.nnz == 0:
                continue
            rs.append(blk.row_indices() + roff[bi])
            cs.append(blk.col_idx + coff[bj])
            vs.append(blk.values)
    if not rs:
        return SparseMatrix.zeros(int(roff[-1]), int(coff[-1]))
    return coo(int(roff[-1]), int(coff[-1]), np.concatenate(rs), np.concatenate(cs), np.concatenate(vs))


def row_slab(a: SparseMatrix, start: int, stop: int) -> SparseMatrix:
    """Rows start..stop-1 of a."""
    lo, hi = a.row_ptr[start], a.row_ptr[stop]
    return SparseMatrix(stop - start, a.ncols, a.row_ptr[start:stop + 1] - lo,
                        a.col_idx[lo:hi], a.values[lo:hi])


# -- Matrix Market -----------------------------------------------------------

_HEADER = "%%MatrixMarket matrix coordinate real general"


def write_matrix_market(a: SparseMatrix, path, comment: str | None = None) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(_HEADER + "\n")
        if comment:
            for line in comment.splitlines():
                fh.write(f"% {line}\n")
        fh.write(f"{a.nrows} {a.ncols} {a.nnz}\n")
        if a.nnz:
            data = np.column_stack([a.row_indices() + 1, a.col_idx + 1])
            lines = [f"{i} {j} {v!r}" for (i, j), v in zip(data.tolist(), a.values.tolist())]
            fh.write("\n".join(lines))
            fh.write("\n")


def read_matrix_market(path) -> SparseMatrix:
    path = Path(path)
    with path.open() as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketError("empty file", line=1)
    head = lines[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket" or head[1].lower() != "matrix":
        raise MatrixMarketError("malformed header", line=1)
    fmt, fld, sym = (h.lower() for h in head[2:])
    if fmt != "coordinate":
        raise MatrixMarketError(f"unsupported format '{fmt}' (only coordinate)", line=1)
    if fld != "real":
        raise MatrixMarketError(f"unsupported field '{fld}' (only real)", line=1)
    if sym not in ("general", "symmetric"):
        raise MatrixMarketError(f"unsupported symmetry '{sym}'", line=1)
    k = 1
    while k < len(lines) and (not lines[k].strip() or lines[k].lstrip().startswith("%")):
        k += 1
    if k == len(lines):
        raise MatrixMarketError("missing size line", line=k + 1)
    size = lines[k].split()
    try:
        m, n, nnz = (int(s) for s in size)
    except ValueError:
        raise MatrixMarketError("size line must hold 'nrows ncols nnz'", line=k + 1) from None
    if min(m, n, nnz) < 0:
        raise MatrixMarketError("negative size", line=k + 1)
    rows = np.empty(nnz, INDEX)
    cols = np.empty(nnz, INDEX)
    vals = np.empty(nnz, REAL)
    got = 0
    for ln in range(k + 1, len(lines)):
        text = lines[ln].strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if got >= nnz:
            raise MatrixMarketError("more entries than declared", line=ln + 1)
        if len(parts) != 3:
            raise MatrixMarketError("entry must be 'i j value'", line=ln + 1)
        try:
            i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
        except ValueError:
            raise MatrixMarketError(f"cannot parse entry '{text}'", line=ln + 1) from None
        if not (1 <= i <= m and 1 <= j <= n):
            raise MatrixMarketError(f"index ({i}, {j}) out of bounds for {m}x{n}", line=ln + 1)
        rows[got], cols[got], vals[got] = i - 1, j - 1, v
        got += 1
    if got != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {got}", line=len(lines))
    if sym == "symmetric":
        off = rows != cols
        rows, cols, vals = (np.concatenate([rows, cols[off]]), np.concatenate([cols, rows[off]]),
                            np.concatenate([vals, vals[off]]))
    return coo(m, n, rows, cols, vals)


def write_vector(x, path) -> None:
    """Store a dense vector as an n x 1 coordinate matrix (every entry kept)."""
    x = np.asarray(x, REAL)
    write_matrix_market(SparseMatrix.from_dense(x.reshape(-1, 1), keep_zeros=True), path)


def read_vector(path) -> np.ndarray:
    a = read_matrix_market(path)
    if a.ncols != 1:
        raise MatrixMarketError(f"expected an n x 1 vector, got {a.nrows}x{a.ncols}")
    return a.to_dense()[:, 0]
