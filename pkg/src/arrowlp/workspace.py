"""Mutable per-rank presolve state.

The workspace flattens a rank's ``BlockProblem`` slice into two mutable
matrices (equalities, inequalities) over registries of rows and columns.
Registry slots are stable within a presolve round: deletions tombstone the
slot (alive flag) and ``compact`` rebuilds storage at round end.  Replicated
entities (0-block rows, linking rows, x0 columns) occupy identical registry
positions on every rank; all mutations of replicated state happen in
replicated code paths, which a checksum validates.

Cross-round identity is carried by uids; the postsolve stack references uids
exclusively.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .comm import Communicator, OP_MAX, OP_SUM
from .problem import BlockProblem, LocalBlock, VarGroup, ZeroBlock
from .sparse import MutableMatrix, SparseMatrix
from .tracking import EQ, GROUP_LINK, INEQ, TrackingState

INF = float("inf")

OK, INFEASIBLE, UNBOUNDED = 0, 2, 3

KINDS = (EQ, INEQ)


@dataclass
class Counter:
    rows_deleted: int = 0
    cols_deleted: int = 0
    entries_deleted: int = 0
    bounds_tightened: int = 0
    vars_fixed: int = 0
    rows_moved: int = 0
    cols_moved: int = 0

    def total(self) -> int:
        return (
            self.rows_deleted + self.cols_deleted + self.entries_deleted
            + self.bounds_tightened + self.vars_fixed + self.rows_moved
            + self.cols_moved
        )

    def merged(self, other: "Counter") -> "Counter":
        return Counter(*(getattr(self, f) + getattr(other, f)
                         for f in self.__dataclass_fields__))


class Workspace:
    def __init__(self, p: BlockProblem, comm: Optional[Communicator], cfg):
        self.comm = comm
        self.rank = comm.rank if comm else 0
        self.nranks = comm.size if comm else 1
        self.rank0 = self.rank == 0
        self.cfg = cfg
        self.nblocks = p.nblocks
        self.owned = p.owned

        self.col_group: list[int] = []
        self.col_uid: list[int] = []
        self.col_lower: list[float] = []
        self.col_upper: list[float] = []
        self.col_cost: list[float] = []
        self.col_alive: list[bool] = []
        self.col_index: dict[int, int] = {}

        self.row_group = {EQ: [], INEQ: []}
        self.row_uid = {EQ: [], INEQ: []}
        self.row_alive = {EQ: [], INEQ: []}
        self.row_index = {EQ: {}, INEQ: {}}
        self.eq_b: list[float] = []
        self.ineq_d: list[float] = []
        self.ineq_f: list[float] = []

        self.mat = {EQ: MutableMatrix(), INEQ: MutableMatrix()}
        self.tracking = TrackingState(self.rank0)
        self.stack: list = []
        self.counters: dict[str, Counter] = {}
        self.current_presolver = "setup"
        self.offset_repl = p.obj_offset
        self.offset_local = 0.0
        self.status = OK
        self.status_msg = ""

        self._build(p)
        self.compute_tracking()

    # -- construction ------------------------------------------------------

    def _add_col(self, group: int, uid: int, lo: float, up: float, cost: float) -> int:
        cidx = len(self.col_group)
        self.col_group.append(group)
        self.col_uid.append(int(uid))
        self.col_lower.append(float(lo))
        self.col_upper.append(float(up))
        self.col_cost.append(float(cost))
        self.col_alive.append(True)
        self.col_index[int(uid)] = cidx
        self.tracking.append_col()
        return cidx

    def _add_row(self, kind: str, group: int, uid: int, lo: float, hi: float) -> int:
        ridx = len(self.row_group[kind])
        self.row_group[kind].append(group)
        self.row_uid[kind].append(int(uid))
        self.row_alive[kind].append(True)
        self.row_index[kind][int(uid)] = ridx
        if kind == EQ:
            self.eq_b.append(float(lo))
        else:
            self.ineq_d.append(float(lo))
            self.ineq_f.append(float(hi))
        self.tracking.append_row(kind, group == GROUP_LINK)
        return ridx

    def _insert_csr(self, kind: str, ridx: int, mat: SparseMatrix, local_row: int,
                    col_positions: list[int]) -> None:
        cols, vals = mat.row(local_row)
        m = self.mat[kind]
        for c, v in zip(cols, vals):
            m.set(ridx, col_positions[int(c)], float(v))

    def _build(self, p: BlockProblem) -> None:
        z = p.zero
        x0_pos = [
            self._add_col(0, z.vars.uids[j], z.vars.lower[j], z.vars.upper[j],
                          z.vars.cost[j])
            for j in range(z.vars.n)
        ]
        blk_pos: dict[int, list[int]] = {}
        for i in self.owned:
            blk = p.blocks[i]
            blk_pos[i] = [
                self._add_col(i, blk.vars.uids[j], blk.vars.lower[j],
                              blk.vars.upper[j], blk.vars.cost[j])
                for j in range(blk.vars.n)
            ]
        for r in range(z.A0.nrows):
            ridx = self._add_row(EQ, 0, z.eq0_uids[r], z.b0[r], z.b0[r])
            self._insert_csr(EQ, ridx, z.A0, r, x0_pos)
        for i in self.owned:
            blk = p.blocks[i]
            for r in range(blk.B.nrows):
                ridx = self._add_row(EQ, i, blk.eq_uids[r], blk.b[r], blk.b[r])
                self._insert_csr(EQ, ridx, blk.A, r, x0_pos)
                self._insert_csr(EQ, ridx, blk.B, r, blk_pos[i])
        self.link_eq_rows: list[int] = []
        for r in range(z.F0.nrows):
            ridx = self._add_row(EQ, GROUP_LINK, z.link_eq_uids[r], z.link_b[r],
                                 z.link_b[r])
            self._insert_csr(EQ, ridx, z.F0, r, x0_pos)
            self.link_eq_rows.append(ridx)
        for i in self.owned:
            blk = p.blocks[i]
            for r in range(blk.F.nrows):
                self._insert_csr(EQ, self.link_eq_rows[r], blk.F, r, blk_pos[i])
        for r in range(z.C0.nrows):
            ridx = self._add_row(INEQ, 0, z.ineq0_uids[r], z.d0[r], z.f0[r])
            self._insert_csr(INEQ, ridx, z.C0, r, x0_pos)
        for i in self.owned:
            blk = p.blocks[i]
            for r in range(blk.D.nrows):
                ridx = self._add_row(INEQ, i, blk.ineq_uids[r], blk.d[r], blk.f[r])
                self._insert_csr(INEQ, ridx, blk.C, r, x0_pos)
                self._insert_csr(INEQ, ridx, blk.D, r, blk_pos[i])
        self.link_ineq_rows: list[int] = []
        for r in range(z.G0.nrows):
            ridx = self._add_row(INEQ, GROUP_LINK, z.link_ineq_uids[r], z.link_d[r],
                                 z.link_f[r])
            self._insert_csr(INEQ, ridx, z.G0, r, x0_pos)
            self.link_ineq_rows.append(ridx)
        for i in self.owned:
            blk = p.blocks[i]
            for r in range(blk.G.nrows):
                self._insert_csr(INEQ, self.link_ineq_rows[r], blk.G, r, blk_pos[i])

    # -- basic accessors ----------------------------------------------------

    def is_x0(self, cidx: int) -> bool:
        return self.col_group[cidx] == 0

    def alive_rows(self, kind: str, groups=None) -> Iterable[int]:
        alive = self.row_alive[kind]
        grp = self.row_group[kind]
        for ridx in range(len(alive)):
            if alive[ridx] and (groups is None or grp[ridx] in groups):
                yield ridx

    def alive_cols(self, groups=None) -> Iterable[int]:
        for cidx in range(len(self.col_alive)):
            if self.col_alive[cidx] and (
                groups is None or self.col_group[cidx] in groups
            ):
                yield cidx

    def x0_cols(self) -> list[int]:
        return [c for c in range(len(self.col_group)) if self.col_group[c] == 0]

    def link_rows(self) -> dict[str, list[int]]:
        return {EQ: list(self.link_eq_rows), INEQ: list(self.link_ineq_rows)}

    def row_bounds(self, kind: str, ridx: int) -> tuple[float, float]:
        if kind == EQ:
            b = self.eq_b[ridx]
            return b, b
        return self.ineq_d[ridx], self.ineq_f[ridx]

    def row_act(self, kind: str, ridx: int):
        """Authoritative activity record (global one for linking rows)."""
        if self.row_group[kind][ridx] == GROUP_LINK:
            return self.tracking.link_global[kind][ridx]
        return self.tracking.act[kind][ridx]

    def row_nnz_global(self, kind: str, ridx: int) -> int:
        if self.row_group[kind][ridx] == GROUP_LINK:
            return self.tracking.link_row_nnz_global[kind][ridx]
        return self.tracking.row_nnz[kind][ridx]

    def col_nnz_global(self, cidx: int) -> int:
        if self.is_x0(cidx):
            return self.tracking.col0_nnz_global[cidx]
        return self.tracking.col_nnz[cidx]

    def row_entries(self, kind: str, ridx: int) -> list[tuple[int, float]]:
        return self.mat[kind].row_items(ridx)

    def col_entries_all(self, cidx: int) -> list[tuple[str, int, float]]:
        out = [(EQ, r, a) for r, a in self.mat[EQ].col_items(cidx)]
        out += [(INEQ, r, a) for r, a in self.mat[INEQ].col_items(cidx)]
        return out

    def col_entries_split(self, cidx: int, exclude=None):
        """(local, repl) column snapshots as (kind, row_uid, coeff) tuples.

        ``repl`` holds entries in replicated rows (0-block and linking);
        ``local`` the rows of owned blocks.  ``exclude``: (kind, ridx) to omit.
        """
        local, repl = [], []
        for kind, ridx, a in self.col_entries_all(cidx):
            if exclude is not None and (kind, ridx) == exclude:
                continue
            item = (kind, self.row_uid[kind][ridx], a)
            if self.row_group[kind][ridx] in (0, GROUP_LINK):
                repl.append(item)
            else:
                local.append(item)
        local.sort(key=lambda t: (t[0], t[1]))
        repl.sort(key=lambda t: (t[0], t[1]))
        return tuple(local), tuple(repl)

    def row_snapshot(self, kind: str, ridx: int, exclude_col: Optional[int] = None,
                     split: bool = False):
        """Row as (col_uid, coeff) tuples; optionally split local/replicated."""
        if not split:
            items = [
                (self.col_uid[c], a)
                for c, a in self.row_entries(kind, ridx)
                if c != exclude_col
            ]
            items.sort()
            return tuple(items)
        local, repl = [], []
        for c, a in self.row_entries(kind, ridx):
            if c == exclude_col:
                continue
            (repl if self.is_x0(c) else local).append((self.col_uid[c], a))
        local.sort()
        repl.sort()
        return tuple(local), tuple(repl)

    def count(self, fieldname: str, n: int = 1) -> None:
        ctr = self.counters.setdefault(self.current_presolver, Counter())
        setattr(ctr, fieldname, getattr(ctr, fieldname) + n)

    def set_status(self, code: int, msg: str) -> None:
        if self.status == OK:
            self.status = code
            self.status_msg = f"{self.current_presolver}: {msg}"

    # -- mutations -----------------------------------------------------------

    def _touching(self, cidx: int):
        grp = self.row_group
        out = []
        for kind in KINDS:
            for ridx, a in self.mat[kind].col_items(cidx):
                out.append((kind, ridx, grp[kind][ridx], a))
        return out

    def remove_entry(self, kind: str, ridx: int, cidx: int, count: bool = True) -> float:
        a = self.mat[kind].discard(ridx, cidx)
        if a != 0.0:
            self.tracking.entry_changed(
                kind, ridx, self.row_group[kind][ridx], self.is_x0(cidx), a,
                self.col_lower[cidx], self.col_upper[cidx], cidx, -1,
            )
            if count:
                self.count("entries_deleted")
        return a

    def add_entry(self, kind: str, ridx: int, cidx: int, a: float) -> None:
        if a == 0.0:
            return
        assert self.mat[kind].get(ridx, cidx) == 0.0
        self.mat[kind].set(ridx, cidx, a)
        self.tracking.entry_changed(
            kind, ridx, self.row_group[kind][ridx], self.is_x0(cidx), a,
            self.col_lower[cidx], self.col_upper[cidx], cidx, +1,
        )

    def remove_row(self, kind: str, ridx: int, count: bool = True) -> None:
        """Delete a row: clears this rank's entries and tombstones the slot.

        For replicated rows (0-block, linking) every rank must make this call
        in the same program position.
        """
        for cidx, _ in self.mat[kind].row_items(ridx):
            self.remove_entry(kind, ridx, cidx, count=False)
        self.row_alive[kind][ridx] = False
        if count:
            self.count("rows_deleted")

    def remove_col(self, cidx: int, count: bool = True) -> None:
        for kind, ridx, _ in self.col_entries_all(cidx):
            self.remove_entry(kind, ridx, cidx, count=False)
        self.col_alive[cidx] = False
        if count:
            self.count("cols_deleted")

    def shift_row_bounds(self, kind: str, ridx: int, shift: float) -> None:
        """Subtract a fixed contribution from the row right-hand sides."""
        if shift == 0.0:
            return
        group = self.row_group[kind][ridx]
        if group == GROUP_LINK:
            # Replicated rhs: route through the buffered sync.  x0 entries are
            # rank 0's responsibility; callers pass shift only when owning.
            if kind == EQ:
                self.tracking.rhs_shift(EQ, ridx, 0, -shift)
            else:
                if self.ineq_d[ridx] != -INF:
                    self.tracking.rhs_shift(INEQ, ridx, 0, -shift)
                if self.ineq_f[ridx] != INF:
                    self.tracking.rhs_shift(INEQ, ridx, 1, -shift)
            return
        if kind == EQ:
            self.eq_b[ridx] -= shift
        else:
            if self.ineq_d[ridx] != -INF:
                self.ineq_d[ridx] -= shift
            if self.ineq_f[ridx] != INF:
                self.ineq_f[ridx] -= shift

    def change_bounds(self, cidx: int, new_l: float, new_u: float,
                      count: bool = True) -> None:
        old_l, old_u = self.col_lower[cidx], self.col_upper[cidx]
        if new_l == old_l and new_u == old_u:
            return
        self.tracking.bound_changed(
            self._touching(cidx), old_l, old_u, new_l, new_u, self.is_x0(cidx)
        )
        self.col_lower[cidx] = new_l
        self.col_upper[cidx] = new_u
        if count:
            self.count("bounds_tightened")

    def fix_col(self, cidx: int, value: float) -> None:
        """Fix a column: substitute its value into every row and drop it.

        The caller is responsible for stack records and for collective
        discipline on x0 columns (every rank calls identically).
        """
        self.change_bounds(cidx, value, value, count=False)
        x0 = self.is_x0(cidx)
        for kind, ridx, a in self.col_entries_all(cidx):
            group = self.row_group[kind][ridx]
            if group == GROUP_LINK and x0 and not self.rank0:
                pass  # rank 0 carries the replicated rhs shift
            else:
                self.shift_row_bounds(kind, ridx, a * value)
            self.remove_entry(kind, ridx, cidx, count=False)
        self.col_alive[cidx] = False
        contrib = self.col_cost[cidx] * value
        if contrib != 0.0:
            if x0:
                self.offset_repl += contrib
            else:
                self.offset_local += contrib
        self.count("vars_fixed")

    # -- synchronization and checks ------------------------------------------

    def sync(self) -> None:
        self.tracking.sync(
            self.comm,
            {EQ: self.link_eq_rows, INEQ: self.link_ineq_rows},
            self.x0_cols(),
            {EQ: (self.eq_b,), INEQ: (self.ineq_d, self.ineq_f)},
        )

    def compute_tracking(self) -> None:
        """Rebuild all activity records and counters from current storage."""
        t = TrackingState(self.rank0)
        for _ in range(len(self.col_group)):
            t.append_col()
        for kind in KINDS:
            for ridx in range(len(self.row_group[kind])):
                t.append_row(kind, self.row_group[kind][ridx] == GROUP_LINK)
        for kind in KINDS:
            for ridx in range(len(self.row_group[kind])):
                for cidx, a in self.mat[kind].row_items(ridx):
                    t.entry_changed(
                        kind, ridx, self.row_group[kind][ridx], self.is_x0(cidx),
                        a, self.col_lower[cidx], self.col_upper[cidx], cidx, +1,
                    )
        t.sync(
            self.comm,
            {EQ: self.link_eq_rows, INEQ: self.link_ineq_rows},
            self.x0_cols(),
            {EQ: (self.eq_b,), INEQ: (self.ineq_d, self.ineq_f)},
        )
        t.layout_id = self.tracking.layout_id + 1
        t.stats = self.tracking.stats
        self.tracking = t

    def check_status(self) -> tuple[int, str]:
        """Collective status agreement; returns the global (code, message)."""
        if self.comm is None:
            return self.status, self.status_msg
        codes = self.comm.allreduce([self.status], OP_MAX)
        if codes[0] == OK:
            return OK, ""
        msgs = self.comm.allgather(
            [(self.rank, self.status, self.status_msg)] if self.status != OK else []
        )
        msgs.sort()
        return codes[0], msgs[0][2]

    def linking_counts(self) -> tuple[int, int]:
        rows = sum(1 for r in self.link_eq_rows if self.row_alive[EQ][r])
        rows += sum(1 for r in self.link_ineq_rows if self.row_alive[INEQ][r])
        cols = sum(1 for c in self.x0_cols() if self.col_alive[c])
        return rows, cols

    def total_size(self) -> int:
        """Global rows + cols + entries (alive), for the round-limit rule."""
        rows = sum(
            1 for kind in KINDS for r in self.alive_rows(kind)
            if self.rank0 or self.row_group[kind][r] not in (0, GROUP_LINK)
        )
        cols = sum(
            1 for c in self.alive_cols() if self.rank0 or not self.is_x0(c)
        )
        entries = 0
        for kind in KINDS:
            for ridx in self.alive_rows(kind):
                grp = self.row_group[kind][ridx]
                for cidx, _ in self.mat[kind].row_items(ridx):
                    repl = self.is_x0(cidx) and grp in (0, GROUP_LINK)
                    if self.rank0 or not repl:
                        entries += 1
        if self.comm is None:
            return rows + cols + entries
        return self.comm.allreduce([rows + cols + entries], OP_SUM)[0]

    # -- output ----------------------------------------------------------------

    def compact(self) -> None:
        """Physically drop dead rows/columns; registry indices change."""
        new = Workspace.__new__(Workspace)
        new.comm = self.comm
        new.rank = self.rank
        new.nranks = self.nranks
        new.rank0 = self.rank0
        new.cfg = self.cfg
        new.nblocks = self.nblocks
        new.owned = self.owned
        new.col_group, new.col_uid = [], []
        new.col_lower, new.col_upper, new.col_cost = [], [], []
        new.col_alive, new.col_index = [], {}
        new.row_group = {EQ: [], INEQ: []}
        new.row_uid = {EQ: [], INEQ: []}
        new.row_alive = {EQ: [], INEQ: []}
        new.row_index = {EQ: {}, INEQ: {}}
        new.eq_b, new.ineq_d, new.ineq_f = [], [], []
        new.mat = {EQ: MutableMatrix(), INEQ: MutableMatrix()}
        new.tracking = TrackingState(self.rank0)
        new.stack = self.stack
        new.counters = self.counters
        new.current_presolver = self.current_presolver
        new.offset_repl = self.offset_repl
        new.offset_local = self.offset_local
        new.status = self.status
        new.status_msg = self.status_msg

        colmap: dict[int, int] = {}
        order = sorted(
            range(len(self.col_group)),
            key=lambda c: (self.col_group[c] != 0, self.col_group[c], c),
        )
        for cidx in order:
            if self.col_alive[cidx]:
                colmap[cidx] = new._add_col(
                    self.col_group[cidx], self.col_uid[cidx], self.col_lower[cidx],
                    self.col_upper[cidx], self.col_cost[cidx],
                )
        new.link_eq_rows, new.link_ineq_rows = [], []
        for kind in KINDS:
            n = len(self.row_group[kind])
            order_r = sorted(
                range(n),
                key=lambda r: (
                    0 if self.row_group[kind][r] == 0
                    else (2 if self.row_group[kind][r] == GROUP_LINK else 1),
                    self.row_group[kind][r],
                    r,
                ),
            )
            for ridx in order_r:
                if not self.row_alive[kind][ridx]:
                    continue
                lo, hi = self.row_bounds(kind, ridx)
                nridx = new._add_row(
                    kind, self.row_group[kind][ridx], self.row_uid[kind][ridx], lo, hi
                )
                if self.row_group[kind][ridx] == GROUP_LINK:
                    (new.link_eq_rows if kind == EQ else new.link_ineq_rows).append(nridx)
                for cidx, a in sorted(self.mat[kind].row_items(ridx)):
                    new.mat[kind].set(nridx, colmap[cidx], a)
        new.compute_tracking()
        new.tracking.layout_id = self.tracking.layout_id + 1
        new.tracking.stats = self.tracking.stats
        self.__dict__.update(new.__dict__)

    def to_block_problem(self) -> BlockProblem:
        """Materialize the alive problem as a per-rank BlockProblem (CSR)."""
        x0_idx = [c for c in self.x0_cols() if self.col_alive[c]]
        x0_pos = {c: k for k, c in enumerate(x0_idx)}

        def vg(idxs: list[int]) -> VarGroup:
            return VarGroup(
                np.array([self.col_lower[c] for c in idxs]),
                np.array([self.col_upper[c] for c in idxs]),
                np.array([self.col_cost[c] for c in idxs]),
                np.array([self.col_uid[c] for c in idxs], dtype=np.int64),
            )

        def rows_to_csr(kind: str, rows: list[int], pos: dict[int, int], ncols: int):
            trip = []
            for lr, ridx in enumerate(rows):
                for cidx, a in self.mat[kind].row_items(ridx):
                    p = pos.get(cidx)
                    if p is not None:
                        trip.append((lr, p, a))
            return SparseMatrix.from_triplets(len(rows), ncols, trip)

        eq0 = [r for r in self.alive_rows(EQ, groups=(0,))]
        ineq0 = [r for r in self.alive_rows(INEQ, groups=(0,))]
        link_eq = [r for r in self.link_eq_rows if self.row_alive[EQ][r]]
        link_ineq = [r for r in self.link_ineq_rows if self.row_alive[INEQ][r]]
        zero = ZeroBlock(
            A0=rows_to_csr(EQ, eq0, x0_pos, len(x0_idx)),
            C0=rows_to_csr(INEQ, ineq0, x0_pos, len(x0_idx)),
            F0=rows_to_csr(EQ, link_eq, x0_pos, len(x0_idx)),
            G0=rows_to_csr(INEQ, link_ineq, x0_pos, len(x0_idx)),
            b0=np.array([self.eq_b[r] for r in eq0]),
            d0=np.array([self.ineq_d[r] for r in ineq0]),
            f0=np.array([self.ineq_f[r] for r in ineq0]),
            link_b=np.array([self.eq_b[r] for r in link_eq]),
            link_d=np.array([self.ineq_d[r] for r in link_ineq]),
            link_f=np.array([self.ineq_f[r] for r in link_ineq]),
            vars=vg(x0_idx),
            eq0_uids=np.array([self.row_uid[EQ][r] for r in eq0], dtype=np.int64),
            ineq0_uids=np.array([self.row_uid[INEQ][r] for r in ineq0], dtype=np.int64),
            link_eq_uids=np.array([self.row_uid[EQ][r] for r in link_eq], dtype=np.int64),
            link_ineq_uids=np.array(
                [self.row_uid[INEQ][r] for r in link_ineq], dtype=np.int64
            ),
        )
        blocks = {}
        for i in self.owned:
            bi = [c for c in self.alive_cols(groups=(i,))]
            bpos = {c: k for k, c in enumerate(bi)}
            eqr = [r for r in self.alive_rows(EQ, groups=(i,))]
            ineqr = [r for r in self.alive_rows(INEQ, groups=(i,))]
            blocks[i] = LocalBlock(
                index=i,
                A=rows_to_csr(EQ, eqr, x0_pos, len(x0_idx)),
                B=rows_to_csr(EQ, eqr, bpos, len(bi)),
                C=rows_to_csr(INEQ, ineqr, x0_pos, len(x0_idx)),
                D=rows_to_csr(INEQ, ineqr, bpos, len(bi)),
                F=rows_to_csr(EQ, link_eq, bpos, len(bi)),
                G=rows_to_csr(INEQ, link_ineq, bpos, len(bi)),
                b=np.array([self.eq_b[r] for r in eqr]),
                d=np.array([self.ineq_d[r] for r in ineqr]),
                f=np.array([self.ineq_f[r] for r in ineqr]),
                vars=vg(bi),
                eq_uids=np.array([self.row_uid[EQ][r] for r in eqr], dtype=np.int64),
                ineq_uids=np.array([self.row_uid[INEQ][r] for r in ineqr], dtype=np.int64),
            )
        offset = self.offset_repl
        if self.comm is not None:
            offset += self.comm.allreduce([self.offset_local], OP_SUM)[0]
        else:
            offset += self.offset_local
        return BlockProblem(
            nblocks=self.nblocks, blocks=blocks, zero=zero, obj_offset=offset
        )
