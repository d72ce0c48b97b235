"""Arrowhead LP data model.

A problem instance is distributed over ranks: each diagonal block lives on
exactly one rank together with its matrices and vectors, while the 0-block
data (rows over the linking variables, linking-row bounds, linking-variable
data) is replicated on every rank.  ``MonolithicLP`` is the flat single-matrix
form used by file I/O and the reference solver.

Row and column identities are carried by immutable integer uids assigned at
construction (their index in the monolithic ordering).  Reductions and moves
never reuse or renumber uids, which keeps postsolve records stable.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .comm import Communicator
from .sparse import SparseMatrix

INF = float("inf")
LINK = -1  # row owner tag for linking rows


@dataclass
class MonolithicLP:
    """min c'x  s.t.  A x = b,  d <= C x <= f,  l <= x <= u."""

    A: SparseMatrix
    b: np.ndarray
    C: SparseMatrix
    d: np.ndarray
    f: np.ndarray
    l: np.ndarray
    u: np.ndarray
    c: np.ndarray
    offset: float = 0.0
    name: str = "lp"
    eq_names: Optional[list[str]] = None
    ineq_names: Optional[list[str]] = None
    col_names: Optional[list[str]] = None

    @property
    def ncols(self) -> int:
        return self.A.ncols

    @property
    def n_eq(self) -> int:
        return self.A.nrows

    @property
    def n_ineq(self) -> int:
        return self.C.nrows

    def nnz(self) -> int:
        return self.A.nnz + self.C.nnz

    def validate(self) -> list[str]:
        bad = [f"A: {m}" for m in self.A.validate()]
        bad += [f"C: {m}" for m in self.C.validate()]
        if self.A.ncols != self.C.ncols:
            bad.append("A and C column counts differ")
        if len(self.b) != self.A.nrows:
            bad.append("b length mismatch")
        if len(self.d) != self.C.nrows or len(self.f) != self.C.nrows:
            bad.append("d/f length mismatch")
        for name, arr in (("l", self.l), ("u", self.u), ("c", self.c)):
            if len(arr) != self.A.ncols:
                bad.append(f"{name} length mismatch")
        if np.any(~np.isfinite(self.b)):
            bad.append("equality rhs contains non-finite entries")
        if np.any(self.d > self.f):
            bad.append("inequality bounds inverted (d > f)")
        if np.any(self.l > self.u):
            bad.append("variable bounds inverted (l > u)")
        return bad


@dataclass
class VarGroup:
    """Bounds, costs and uids of one column group."""

    lower: np.ndarray
    upper: np.ndarray
    cost: np.ndarray
    uids: np.ndarray

    @property
    def n(self) -> int:
        return len(self.uids)

    def copy(self) -> "VarGroup":
        return VarGroup(
            self.lower.copy(), self.upper.copy(), self.cost.copy(), self.uids.copy()
        )


@dataclass
class LocalBlock:
    """One diagonal block: rows [A|B], [C|D] and its slice F, G of the border."""

    index: int
    A: SparseMatrix  # eq rows x n0
    B: SparseMatrix  # eq rows x n_i
    C: SparseMatrix  # ineq rows x n0
    D: SparseMatrix  # ineq rows x n_i
    F: SparseMatrix  # linking eq rows x n_i
    G: SparseMatrix  # linking ineq rows x n_i
    b: np.ndarray
    d: np.ndarray
    f: np.ndarray
    vars: VarGroup
    eq_uids: np.ndarray
    ineq_uids: np.ndarray


@dataclass
class ZeroBlock:
    """Replicated data: 0-block rows, border slices over x0, linking bounds."""

    A0: SparseMatrix  # eq rows x n0
    C0: SparseMatrix  # ineq rows x n0
    F0: SparseMatrix  # linking eq rows x n0
    G0: SparseMatrix  # linking ineq rows x n0
    b0: np.ndarray
    d0: np.ndarray
    f0: np.ndarray
    link_b: np.ndarray
    link_d: np.ndarray
    link_f: np.ndarray
    vars: VarGroup  # x0
    eq0_uids: np.ndarray
    ineq0_uids: np.ndarray
    link_eq_uids: np.ndarray
    link_ineq_uids: np.ndarray


@dataclass
class BlockProblem:
    """Per-rank slice of a distributed arrowhead LP."""

    nblocks: int
    blocks: dict[int, LocalBlock]
    zero: ZeroBlock
    obj_offset: float = 0.0

    @property
    def owned(self) -> list[int]:
        return sorted(self.blocks)

    def n0(self) -> int:
        return self.zero.vars.n


@dataclass
class BlockAssignment:
    """Owner tags for every original row/column plus the derived permutation."""

    nblocks: int
    eq_row_block: np.ndarray  # 0..N, or LINK
    ineq_row_block: np.ndarray
    col_block: np.ndarray  # 0..N (0 = linking variable)

    def validate(self, lp: MonolithicLP) -> list[str]:
        bad: list[str] = []
        if len(self.eq_row_block) != lp.n_eq:
            bad.append("eq row tag count mismatch")
        if len(self.ineq_row_block) != lp.n_ineq:
            bad.append("ineq row tag count mismatch")
        if len(self.col_block) != lp.ncols:
            bad.append("column tag count mismatch")
        if bad:
            return bad
        for tags, kind in ((self.eq_row_block, "eq"), (self.ineq_row_block, "ineq")):
            for i, t in enumerate(tags):
                if t != LINK and not (0 <= t <= self.nblocks):
                    bad.append(f"{kind} row {i}: tag {t} out of range")
        for j, t in enumerate(self.col_block):
            if not (0 <= t <= self.nblocks):
                bad.append(f"column {j}: tag {t} out of range")
        if bad:
            return bad
        for mat, tags, kind in (
            (lp.A, self.eq_row_block, "eq"),
            (lp.C, self.ineq_row_block, "ineq"),
        ):
            for i in range(mat.nrows):
                t = tags[i]
                if t == LINK:
                    continue
                cols, _ = mat.row(i)
                for c in cols:
                    cb = self.col_block[c]
                    if t == 0 and cb != 0:
                        bad.append(f"{kind} row {i} (block 0) touches column {c} of block {cb}")
                    elif t != 0 and cb not in (0, t):
                        bad.append(f"{kind} row {i} (block {t}) touches column {c} of block {cb}")
        return bad


@dataclass
class IndexMaps:
    """Monolithic position -> uid, per entity kind, in assembly order."""

    eq_uids: np.ndarray
    ineq_uids: np.ndarray
    col_uids: np.ndarray


def _rank_of_block(block: int, nblocks: int, nranks: int) -> int:
    # Contiguous ranges: block i>=1 goes to rank (i-1)*nranks // nblocks.
    return (block - 1) * nranks // nblocks


def blocks_of_rank(rank: int, nblocks: int, nranks: int) -> list[int]:
    return [i for i in range(1, nblocks + 1) if _rank_of_block(i, nblocks, nranks) == rank]


def split_monolithic(
    lp: MonolithicLP, asg: BlockAssignment, nranks: int = 1
) -> list[BlockProblem]:
    """Distribute a monolithic LP into per-rank block problems.

    Row/column uids are the monolithic indices.  Local ordering within each
    group follows ascending original index, which makes the assemble/split
    round trip the identity.
    """
    bad = asg.validate(lp)
    if bad:
        raise ValueError("invalid block assignment: " + "; ".join(bad[:5]))
    N = asg.nblocks
    if not (1 <= nranks <= max(N, 1)):
        raise ValueError(f"rank count {nranks} outside [1, {max(N, 1)}]")

    col_of_block: dict[int, list[int]] = {i: [] for i in range(N + 1)}
    for j, t in enumerate(asg.col_block):
        col_of_block[int(t)].append(j)
    colpos = {}  # uid -> position within its group
    for i in range(N + 1):
        for p, j in enumerate(col_of_block[i]):
            colpos[j] = p

    eq_of: dict[int, list[int]] = {i: [] for i in range(N + 1)}
    eq_link: list[int] = []
    for r, t in enumerate(asg.eq_row_block):
        (eq_link if t == LINK else eq_of[int(t)]).append(r)
    ineq_of: dict[int, list[int]] = {i: [] for i in range(N + 1)}
    ineq_link: list[int] = []
    for r, t in enumerate(asg.ineq_row_block):
        (ineq_link if t == LINK else ineq_of[int(t)]).append(r)

    n0 = len(col_of_block[0])

    def subrows(mat: SparseMatrix, row_ids: list[int], keep_block: int, ncols: int):
        trip = []
        for lr, r in enumerate(row_ids):
            cols, vals = mat.row(r)
            for c, v in zip(cols, vals):
                if asg.col_block[c] == keep_block:
                    trip.append((lr, colpos[int(c)], float(v)))
        return SparseMatrix.from_triplets(len(row_ids), ncols, trip)

    def vargroup(block: int) -> VarGroup:
        ids = col_of_block[block]
        return VarGroup(
            lp.l[ids].copy(), lp.u[ids].copy(), lp.c[ids].copy(),
            np.asarray(ids, dtype=np.int64),
        )

    zero = ZeroBlock(
        A0=subrows(lp.A, eq_of[0], 0, n0),
        C0=subrows(lp.C, ineq_of[0], 0, n0),
        F0=subrows(lp.A, eq_link, 0, n0),
        G0=subrows(lp.C, ineq_link, 0, n0),
        b0=lp.b[eq_of[0]].copy(),
        d0=lp.d[ineq_of[0]].copy(),
        f0=lp.f[ineq_of[0]].copy(),
        link_b=lp.b[eq_link].copy(),
        link_d=lp.d[ineq_link].copy(),
        link_f=lp.f[ineq_link].copy(),
        vars=vargroup(0),
        eq0_uids=np.asarray(eq_of[0], dtype=np.int64),
        ineq0_uids=np.asarray(ineq_of[0], dtype=np.int64),
        link_eq_uids=np.asarray(eq_link, dtype=np.int64),
        link_ineq_uids=np.asarray(ineq_link, dtype=np.int64),
    )

    out = []
    for rank in range(nranks):
        blocks = {}
        for i in blocks_of_rank(rank, N, nranks):
            ni = len(col_of_block[i])
            blocks[i] = LocalBlock(
                index=i,
                A=subrows(lp.A, eq_of[i], 0, n0),
                B=subrows(lp.A, eq_of[i], i, ni),
                C=subrows(lp.C, ineq_of[i], 0, n0),
                D=subrows(lp.C, ineq_of[i], i, ni),
                F=subrows(lp.A, eq_link, i, ni),
                G=subrows(lp.C, ineq_link, i, ni),
                b=lp.b[eq_of[i]].copy(),
                d=lp.d[ineq_of[i]].copy(),
                f=lp.f[ineq_of[i]].copy(),
                vars=vargroup(i),
                eq_uids=np.asarray(eq_of[i], dtype=np.int64),
                ineq_uids=np.asarray(ineq_of[i], dtype=np.int64),
            )
        zr = ZeroBlock(
            A0=zero.A0, C0=zero.C0, F0=zero.F0, G0=zero.G0,
            b0=zero.b0.copy(), d0=zero.d0.copy(), f0=zero.f0.copy(),
            link_b=zero.link_b.copy(), link_d=zero.link_d.copy(),
            link_f=zero.link_f.copy(),
            vars=zero.vars.copy(),
            eq0_uids=zero.eq0_uids.copy(), ineq0_uids=zero.ineq0_uids.copy(),
            link_eq_uids=zero.link_eq_uids.copy(),
            link_ineq_uids=zero.link_ineq_uids.copy(),
        )
        out.append(BlockProblem(nblocks=N, blocks=blocks, zero=zr,
                                obj_offset=lp.offset))
    return out


def assemble_monolithic(
    p: BlockProblem, asg: Optional[BlockAssignment] = None
) -> tuple[MonolithicLP, IndexMaps]:
    """Stack a fully-local block problem back into Eq-form.

    Row order: 0-block rows, then block 1..N local rows, then linking rows
    (equalities and inequalities independently); columns: x0 then x1..xN.
    ``p`` must hold every block (gather first in distributed settings).
    """
    N = p.nblocks
    if sorted(p.blocks) != list(range(1, N + 1)):
        raise ValueError("assemble requires all blocks present on this rank")
    z = p.zero
    n0 = z.vars.n
    col_uids = [int(u) for u in z.vars.uids]
    col_off = {0: 0}
    off = n0
    lower = [z.vars.lower]
    upper = [z.vars.upper]
    cost = [z.vars.cost]
    for i in range(1, N + 1):
        blk = p.blocks[i]
        col_off[i] = off
        off += blk.vars.n
        col_uids.extend(int(u) for u in blk.vars.uids)
        lower.append(blk.vars.lower)
        upper.append(blk.vars.upper)
        cost.append(blk.vars.cost)
    ncols = off

    def stack(kind: str):
        trip: list[tuple[int, int, float]] = []
        uids: list[int] = []
        rhs_parts: list[np.ndarray] = []
        row = 0
        if kind == "eq":
            zmat, zrhs, zuid = z.A0, (z.b0,), z.eq0_uids
        else:
            zmat, zrhs, zuid = z.C0, (z.d0, z.f0), z.ineq0_uids
        for r in range(zmat.nrows):
            cols, vals = zmat.row(r)
            trip.extend((row, int(c), float(v)) for c, v in zip(cols, vals))
            row += 1
        uids.extend(int(u) for u in zuid)
        rhs_parts.append(zrhs)
        for i in range(1, N + 1):
            blk = p.blocks[i]
            if kind == "eq":
                m0, mi, rhs, ruid = blk.A, blk.B, (blk.b,), blk.eq_uids
            else:
                m0, mi, rhs, ruid = blk.C, blk.D, (blk.d, blk.f), blk.ineq_uids
            for r in range(m0.nrows):
                cols, vals = m0.row(r)
                trip.extend((row, int(c), float(v)) for c, v in zip(cols, vals))
                cols, vals = mi.row(r)
                trip.extend(
                    (row, col_off[i] + int(c), float(v)) for c, v in zip(cols, vals)
                )
                row += 1
            uids.extend(int(u) for u in ruid)
            rhs_parts.append(rhs)
        if kind == "eq":
            l0, luid, lrhs = z.F0, z.link_eq_uids, (z.link_b,)
        else:
            l0, luid, lrhs = z.G0, z.link_ineq_uids, (z.link_d, z.link_f)
        link_rows = l0.nrows
        for r in range(link_rows):
            cols, vals = l0.row(r)
            trip.extend((row + r, int(c), float(v)) for c, v in zip(cols, vals))
        for i in range(1, N + 1):
            blk = p.blocks[i]
            mat = blk.F if kind == "eq" else blk.G
            for r in range(mat.nrows):
                cols, vals = mat.row(r)
                trip.extend(
                    (row + r, col_off[i] + int(c), float(v)) for c, v in zip(cols, vals)
                )
        row += link_rows
        uids.extend(int(u) for u in luid)
        rhs_parts.append(lrhs)
        mat = SparseMatrix.from_triplets(row, ncols, trip)
        rhs_stacked = [
            np.concatenate([part[k] for part in rhs_parts])
            for k in range(len(rhs_parts[0]))
        ]
        return mat, rhs_stacked, np.asarray(uids, dtype=np.int64)

    A, (b,), eq_uids = stack("eq")
    C, (d, f), ineq_uids = stack("ineq")
    lp = MonolithicLP(
        A=A, b=b, C=C, d=d, f=f,
        l=np.concatenate(lower), u=np.concatenate(upper), c=np.concatenate(cost),
        offset=p.obj_offset,
    )
    maps = IndexMaps(eq_uids, ineq_uids, np.asarray(col_uids, dtype=np.int64))
    if asg is not None:
        bad = asg.validate(lp_reindexed_by(lp, maps, asg))
        if bad:
            raise ValueError("assignment inconsistent: " + bad[0])
    return lp, maps


def lp_reindexed_by(
    lp: MonolithicLP, maps: IndexMaps, asg: BlockAssignment
) -> MonolithicLP:
    """Permute an assembled LP back into original uid order (dense uids only)."""
    eq_perm = np.argsort(maps.eq_uids, kind="stable")
    ineq_perm = np.argsort(maps.ineq_uids, kind="stable")
    col_perm = np.argsort(maps.col_uids, kind="stable")
    col_inv = np.empty(len(col_perm), dtype=np.int64)
    col_inv[col_perm] = np.arange(len(col_perm))

    def permute(mat: SparseMatrix, perm, ncols):
        trip = []
        for new_r, old_r in enumerate(perm):
            cols, vals = mat.row(int(old_r))
            trip.extend((new_r, int(col_inv[c]), float(v)) for c, v in zip(cols, vals))
        return SparseMatrix.from_triplets(mat.nrows, ncols, trip)

    return MonolithicLP(
        A=permute(lp.A, eq_perm, lp.ncols), b=lp.b[eq_perm],
        C=permute(lp.C, ineq_perm, lp.ncols), d=lp.d[ineq_perm], f=lp.f[ineq_perm],
        l=lp.l[col_perm], u=lp.u[col_perm], c=lp.c[col_perm], offset=lp.offset,
    )


def gather_problem(p: BlockProblem, comm: Communicator) -> BlockProblem:
    """All-gather owned blocks so every rank holds the full problem (read-only)."""
    payload = [(i, p.blocks[i]) for i in p.owned]
    gathered = comm.allgather(payload)
    blocks = {i: blk for i, blk in gathered}
    return BlockProblem(
        nblocks=p.nblocks, blocks=blocks, zero=p.zero, obj_offset=p.obj_offset
    )


def _replication_checksum(p: BlockProblem) -> str:
    z = p.zero
    h = hashlib.sha256()
    for mat in (z.A0, z.C0, z.F0, z.G0):
        h.update(mat.indptr.tobytes())
        h.update(mat.indices.tobytes())
        h.update(mat.values.tobytes())
    for arr in (
        z.b0, z.d0, z.f0, z.link_b, z.link_d, z.link_f,
        z.vars.lower, z.vars.upper, z.vars.cost, z.vars.uids,
        z.eq0_uids, z.ineq0_uids, z.link_eq_uids, z.link_ineq_uids,
    ):
        h.update(np.ascontiguousarray(arr).tobytes())
    h.update(np.float64(p.obj_offset).tobytes())
    return h.hexdigest()


def validate_arrowhead(
    p: BlockProblem, comm: Optional[Communicator] = None
) -> list[str]:
    """All structural violations of the block form (empty means valid)."""
    bad: list[str] = []
    z = p.zero
    n0 = z.vars.n
    link_eq = z.F0.nrows
    link_ineq = z.G0.nrows

    def check_mat(mat: SparseMatrix, name: str, nrows: int, ncols: int):
        if mat.nrows != nrows:
            bad.append(f"{name}: {mat.nrows} rows, expected {nrows}")
        if mat.ncols != ncols:
            bad.append(f"{name}: {mat.ncols} cols, expected {ncols}")
        bad.extend(f"{name}: {m}" for m in mat.validate())

    check_mat(z.A0, "A0", len(z.b0), n0)
    check_mat(z.C0, "C0", len(z.d0), n0)
    check_mat(z.F0, "F0", len(z.link_b), n0)
    check_mat(z.G0, "G0", len(z.link_d), n0)
    if np.any(~np.isfinite(z.b0)) or np.any(~np.isfinite(z.link_b)):
        bad.append("equality rhs contains non-finite entries")
    if np.any(z.d0 > z.f0) or np.any(z.link_d > z.link_f):
        bad.append("inequality row bounds inverted")
    if np.any(z.vars.lower > z.vars.upper):
        bad.append("x0 bounds inverted")
    for i in p.owned:
        blk = p.blocks[i]
        m_eq, m_ineq, ni = len(blk.b), len(blk.d), blk.vars.n
        check_mat(blk.A, f"A{i}", m_eq, n0)
        check_mat(blk.B, f"B{i}", m_eq, ni)
        check_mat(blk.C, f"C{i}", m_ineq, n0)
        check_mat(blk.D, f"D{i}", m_ineq, ni)
        check_mat(blk.F, f"F{i}", link_eq, ni)
        check_mat(blk.G, f"G{i}", link_ineq, ni)
        if len(blk.f) != m_ineq:
            bad.append(f"block {i}: d/f length mismatch")
        if np.any(~np.isfinite(blk.b)):
            bad.append(f"block {i}: equality rhs non-finite")
        if np.any(blk.d > blk.f):
            bad.append(f"block {i}: inequality bounds inverted")
        if np.any(blk.vars.lower > blk.vars.upper):
            bad.append(f"block {i}: variable bounds inverted")
    if comm is not None:
        sums = comm.allgather([_replication_checksum(p)])
        if len(set(sums)) > 1:
            bad.append(f"replicated 0-block data diverges across ranks: {sums}")
    return bad


def nnz_counts(p: BlockProblem, comm: Optional[Communicator] = None) -> tuple[int, int, int]:
    """(nonzeros, rows, cols) of the whole problem; replicated data counted once."""
    local_nnz = 0
    local_rows = 0
    local_cols = 0
    for i in p.owned:
        blk = p.blocks[i]
        local_nnz += blk.A.nnz + blk.B.nnz + blk.C.nnz + blk.D.nnz + blk.F.nnz + blk.G.nnz
        local_rows += len(blk.b) + len(blk.d)
        local_cols += blk.vars.n
    if comm is None or comm.rank == 0:
        z = p.zero
        local_nnz += z.A0.nnz + z.C0.nnz + z.F0.nnz + z.G0.nnz
        local_rows += len(z.b0) + len(z.d0) + len(z.link_b) + len(z.link_d)
        local_cols += z.vars.n
    if comm is None:
        return local_nnz, local_rows, local_cols
    total = comm.allreduce([local_nnz, local_rows, local_cols])
    return total[0], total[1], total[2]
