"""Sparse matrix containers.

``SparseMatrix`` is the validated boundary form (construction, file I/O,
assembly, oracle input): compressed row storage with a column-major view
rebuilt on demand.  ``MutableMatrix`` is the presolve working form: paired
row/column dictionaries supporting cheap entry, row, and column removal while
keeping indices stable.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np


class SparseMatrix:
    """Immutable-by-convention CSR matrix with no explicit zeros."""

    __slots__ = ("nrows", "ncols", "indptr", "indices", "values", "_colview")

    def __init__(self, nrows: int, ncols: int, indptr, indices, values):
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.values = np.asarray(values, dtype=np.float64)
        self._colview = None

    @classmethod
    def from_triplets(
        cls, nrows: int, ncols: int, triplets: Iterable[tuple[int, int, float]]
    ) -> "SparseMatrix":
        rows: list[list[tuple[int, float]]] = [[] for _ in range(nrows)]
        for r, c, v in triplets:
            if v != 0.0:
                rows[r].append((c, v))
        indptr = [0]
        indices: list[int] = []
        values: list[float] = []
        for entries in rows:
            entries.sort()
            for c, v in entries:
                indices.append(c)
                values.append(v)
            indptr.append(len(indices))
        return cls(nrows, ncols, indptr, indices, values)

    @classmethod
    def zeros(cls, nrows: int, ncols: int) -> "SparseMatrix":
        return cls(nrows, ncols, [0] * (nrows + 1), [], [])

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrix":
        dense = np.asarray(dense, dtype=np.float64)
        triplets = [
            (int(r), int(c), float(dense[r, c]))
            for r, c in zip(*np.nonzero(dense))
        ]
        return cls.from_triplets(dense.shape[0], dense.shape[1], triplets)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.values[lo:hi]

    def iter_rows(self) -> Iterator[tuple[int, np.ndarray, np.ndarray]]:
        for i in range(self.nrows):
            cols, vals = self.row(i)
            yield i, cols, vals

    def col_view(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Column-major (indptr, row indices, values); cached until rebuilt."""
        if self._colview is None:
            counts = np.zeros(self.ncols + 1, dtype=np.int64)
            for c in self.indices:
                counts[c + 1] += 1
            cptr = np.cumsum(counts)
            crows = np.empty(self.nnz, dtype=np.int64)
            cvals = np.empty(self.nnz, dtype=np.float64)
            cursor = cptr[:-1].copy()
            for i in range(self.nrows):
                lo, hi = self.indptr[i], self.indptr[i + 1]
                for k in range(lo, hi):
                    c = self.indices[k]
                    p = cursor[c]
                    crows[p] = i
                    cvals[p] = self.values[k]
                    cursor[c] = p + 1
            self._colview = (cptr, crows, cvals)
        return self._colview

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.nrows, self.ncols))
        for i in range(self.nrows):
            cols, vals = self.row(i)
            out[i, cols] = vals
        return out

    def validate(self) -> list[str]:
        """Structural invariant violations (empty list when well formed)."""
        bad: list[str] = []
        if len(self.indptr) != self.nrows + 1:
            bad.append(f"indptr length {len(self.indptr)} != nrows+1")
            return bad
        if self.indptr[0] != 0 or self.indptr[-1] != len(self.values):
            bad.append("indptr endpoints inconsistent with entry count")
        if np.any(np.diff(self.indptr) < 0):
            bad.append("indptr not monotone nondecreasing")
        if len(self.indices) != len(self.values):
            bad.append("indices/values length mismatch")
        for i in range(self.nrows):
            cols, vals = self.row(i)
            if len(cols) and (cols.min() < 0 or cols.max() >= self.ncols):
                bad.append(f"row {i}: column index out of range")
            if np.any(np.diff(cols) <= 0):
                bad.append(f"row {i}: column indices not strictly increasing")
            if np.any(vals == 0.0):
                bad.append(f"row {i}: explicit zero stored")
        return bad

    def equal(self, other: "SparseMatrix") -> bool:
        return (
            self.nrows == other.nrows
            and self.ncols == other.ncols
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz})"


class MutableMatrix:
    """Row/column dictionary pair kept in mirror.

    Rows and columns are integer slots; deleting entities leaves their slots
    allocated (tombstoning is managed by the owner), so slot indices stay
    stable until the owner compacts.
    """

    __slots__ = ("rows", "cols")

    def __init__(self):
        self.rows: dict[int, dict[int, float]] = {}
        self.cols: dict[int, dict[int, float]] = {}

    def set(self, r: int, c: int, v: float) -> None:
        if v == 0.0:
            self.discard(r, c)
            return
        self.rows.setdefault(r, {})[c] = v
        self.cols.setdefault(c, {})[r] = v

    def get(self, r: int, c: int) -> float:
        return self.rows.get(r, {}).get(c, 0.0)

    def discard(self, r: int, c: int) -> float:
        row = self.rows.get(r)
        if row is None or c not in row:
            return 0.0
        v = row.pop(c)
        if not row:
            del self.rows[r]
        col = self.cols[c]
        del col[r]
        if not col:
            del self.cols[c]
        return v

    def row_items(self, r: int) -> list[tuple[int, float]]:
        return list(self.rows.get(r, {}).items())

    def col_items(self, c: int) -> list[tuple[int, float]]:
        return list(self.cols.get(c, {}).items())

    def row_nnz(self, r: int) -> int:
        return len(self.rows.get(r, ()))

    def col_nnz(self, c: int) -> int:
        return len(self.cols.get(c, ()))

    def remove_row(self, r: int) -> list[tuple[int, float]]:
        items = self.row_items(r)
        for c, _ in items:
            self.discard(r, c)
        return items

    def remove_col(self, c: int) -> list[tuple[int, float]]:
        items = self.col_items(c)
        for r, _ in items:
            self.discard(r, c)
        return items

    def nnz(self) -> int:
        return sum(len(row) for row in self.rows.values())
