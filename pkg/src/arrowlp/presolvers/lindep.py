"""Rank detection in the equality matrix (linking rows excluded).

Each diagonal block eliminates [B_i | I] with Markowitz ordering and
threshold partial pivoting, pivots restricted to the block's own columns.
Rows eliminated to zero in the block part are linear combinations of kept
rows: if their remaining linking-variable part is (numerically) empty they
are either redundant or prove infeasibility via the transformed right-hand
side; otherwise the transformed row moves to the 0-block.  A final identical
elimination on the replicated 0-block rows removes the dependencies there.
The accumulated combination weights go onto the stack so the duals of the
eliminated rows can be reconstructed.
"""

from __future__ import annotations

from ..stack import EQ, LOCAL, REPL, LinDepCombination
from ..workspace import INFEASIBLE, Workspace


class _Elim:
    """Working copy of one block's equality rows for elimination."""

    def __init__(self, ws: Workspace, rows: list[int], pivot_cols: set[int]):
        self.ws = ws
        self.rows = rows
        self.piv: dict[int, dict[int, float]] = {}
        self.rest: dict[int, dict[int, float]] = {}
        self.rhs: dict[int, float] = {}
        self.comb: dict[int, dict[int, float]] = {}
        for ridx in rows:
            prow, orow = {}, {}
            for cidx, a in sorted(ws.row_entries(EQ, ridx)):
                (prow if cidx in pivot_cols else orow)[cidx] = a
            self.piv[ridx] = prow
            self.rest[ridx] = orow
            self.rhs[ridx] = ws.eq_b[ridx]
            self.comb[ridx] = {ridx: 1.0}

    def run(self, pivot_threshold: float, zero_tol: float) -> list[int]:
        """Eliminate; returns the rows with no admissible pivot (K2 rows)."""
        ws = self.ws
        active_rows = set(self.rows)
        active_cols = {c for r in self.rows for c in self.piv[r]}
        col_rows: dict[int, set[int]] = {c: set() for c in active_cols}
        for r in active_rows:
            for c in self.piv[r]:
                col_rows[c].add(r)
        while True:
            best = None
            for r in sorted(active_rows, key=lambda t: ws.row_uid[EQ][t]):
                prow = self.piv[r]
                live = [(c, v) for c, v in prow.items() if c in active_cols]
                if not live:
                    continue
                rowmax = max(abs(v) for _, v in live)
                if rowmax <= zero_tol:
                    continue
                for c, v in sorted(live):
                    if abs(v) < pivot_threshold * rowmax or abs(v) <= zero_tol:
                        continue
                    cost = (len(live) - 1) * (len(col_rows[c]) - 1)
                    key = (cost, ws.row_uid[EQ][r], ws.col_uid[c])
                    if best is None or key < best[0]:
                        best = (key, r, c)
            if best is None:
                break
            _, pr, pc = best
            pval = self.piv[pr][pc]
            for r in sorted(col_rows[pc] - {pr}, key=lambda t: ws.row_uid[EQ][t]):
                if r not in active_rows:
                    continue
                mult = self.piv[r].get(pc, 0.0) / pval
                if mult == 0.0:
                    continue
                self._axpy(r, pr, -mult, col_rows)
            active_rows.discard(pr)
            active_cols.discard(pc)
        out = []
        for r in sorted(active_rows, key=lambda t: ws.row_uid[EQ][t]):
            live = [v for c, v in self.piv[r].items() if c in active_cols]
            if not live or max(abs(v) for v in live) <= zero_tol:
                out.append(r)
        return out

    def _axpy(self, r: int, pr: int, mult: float, col_rows) -> None:
        for part_r, part_p, track in (
            (self.piv[r], self.piv[pr], col_rows),
            (self.rest[r], self.rest[pr], None),
        ):
            for c, v in part_p.items():
                nv = part_r.get(c, 0.0) + mult * v
                if nv == 0.0:
                    part_r.pop(c, None)
                    if track is not None and c in track:
                        track[c].discard(r)

                else:
                    if track is not None and c not in part_r:
                        track.setdefault(c, set()).add(r)
                    part_r[c] = nv
        self.rhs[r] += mult * self.rhs[pr]
        comb_r = self.comb[r]
        for orig, w in self.comb[pr].items():
            nw = comb_r.get(orig, 0.0) + mult * w
            if nw == 0.0:
                comb_r.pop(orig, None)
            else:
                comb_r[orig] = nw


def _weights_tuple(ws: Workspace, comb: dict[int, float], self_row: int):
    out = []
    for r, w in comb.items():
        if r != self_row and w != 0.0:
            out.append((ws.row_uid[EQ][r], w))
    out.sort()
    return tuple(out)


def _classify(ws: Workspace, elim: _Elim, k2_rows: list[int], scope: str,
              moved_out: list) -> bool:
    zero_tol = ws.cfg.zero_pivot_tol
    feastol = ws.cfg.feastol
    for r in k2_rows:
        rest = {c: v for c, v in elim.rest[r].items() if abs(v) > zero_tol}
        rhs = elim.rhs[r]
        uid = ws.row_uid[EQ][r]
        weights = _weights_tuple(ws, elim.comb[r], r)
        if not rest:
            if abs(rhs) > feastol * (1.0 + abs(rhs)):
                ws.set_status(
                    INFEASIBLE,
                    f"equality row uid={uid} is a dependent combination with "
                    f"residual rhs {rhs:.6g}",
                )
                return False
            ws.remove_row(EQ, r)
            ws.stack.append(LinDepCombination(uid, weights, False, scope))
        else:
            moved_out.append((uid, rhs, tuple(sorted(
                (ws.col_uid[c], v) for c, v in rest.items()
            )), weights))
    return True


def lin_dependencies(ws: Workspace) -> None:
    """Runs once, after the rounds; equality rows of the blocks and 0-block."""
    thresh = ws.cfg.pivot_threshold
    zero_tol = ws.cfg.zero_pivot_tol
    moved: list = []
    for i in ws.owned:
        rows = list(ws.alive_rows(EQ, groups=(i,)))
        if not rows:
            continue
        cols = set(ws.alive_cols(groups=(i,)))
        elim = _Elim(ws, rows, cols)
        k2 = elim.run(thresh, zero_tol)
        local_moved: list = []
        if not _classify(ws, elim, k2, LOCAL, local_moved):
            return
        for uid, rhs, entries, weights in local_moved:
            ws.remove_row(EQ, ws.row_index[EQ][uid])
            ws.stack.append(LinDepCombination(uid, weights, True, LOCAL))
            ws.count("rows_moved")
        moved.extend(local_moved)
    gathered = ws.comm.allgather(moved) if ws.comm is not None else moved
    for uid, rhs, entries, _ in gathered:
        nridx = ws._add_row(EQ, 0, uid, rhs, rhs)
        for cuid, a in entries:
            ws.add_entry(EQ, nridx, ws.col_index[cuid], a)
    # Joint pass over the replicated 0-block rows, identical on every rank.
    rows0 = list(ws.alive_rows(EQ, groups=(0,)))
    if rows0:
        cols0 = set(c for c in ws.x0_cols() if ws.col_alive[c])
        elim = _Elim(ws, rows0, cols0)
        k2 = elim.run(thresh, zero_tol)
        if not _classify(ws, elim, k2, REPL, []):
            return
