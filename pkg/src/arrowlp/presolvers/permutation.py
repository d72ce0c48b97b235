"""Placement maintenance for the arrowhead form.

Moves, iterated to a fixpoint (each move strictly reduces coupling, so the
loop terminates):

* linking row with no diagonal-block entries        -> 0-block row
* linking row populated in exactly one block        -> local row (the x0
  slice lands in that block's border-column part)
* local row empty in its diagonal block             -> 0-block row
* linking column in exactly one block, no 0-row use -> local column
* local column empty in its diagonal block          -> 0-link column (its
  linking-row entries move into the replicated border)

Values never change; rows and columns keep their uids, so the postsolve
record is a pure relocation marker.
"""

from __future__ import annotations

from ..comm import OP_MAX, OP_OR, OP_SUM, op_tuple
from ..stack import EQ, INEQ, PermutationMove, REPL
from ..tracking import GROUP_LINK
from ..workspace import KINDS, Workspace

_OP_PRESENCE = op_tuple(OP_SUM, OP_MAX)
_KC = {EQ: 0, INEQ: 1}
_CK = {0: EQ, 1: INEQ}


def _row_phase(ws: Workspace) -> bool:
    moved = False
    link = [(k, r) for k in KINDS for r in ws.alive_rows(k, groups=(GROUP_LINK,))]
    payload = []
    for kind, ridx in link:
        blocks = {
            ws.col_group[c]
            for c, _ in ws.row_entries(kind, ridx)
            if ws.col_group[c] != 0
        }
        payload.append((len(blocks), max(blocks) if blocks else -1))
    if ws.comm is not None:
        payload = ws.comm.allreduce(payload, _OP_PRESENCE)
    for (kind, ridx), (nblocks, blk) in zip(link, payload):
        uid = ws.row_uid[kind][ridx]
        lo, hi = ws.row_bounds(kind, ridx)
        if nblocks == 0:
            x0_slice = [(c, a) for c, a in ws.row_entries(kind, ridx)]
            ws.remove_row(kind, ridx, count=False)
            nridx = ws._add_row(kind, 0, uid, lo, hi)
            for c, a in x0_slice:
                ws.add_entry(kind, nridx, c, a)
            ws.stack.append(PermutationMove(f"{kind}-row", uid, GROUP_LINK, 0, REPL))
            if ws.rank0:
                ws.count("rows_moved")
            moved = True
        elif nblocks == 1:
            my_slice = list(ws.row_entries(kind, ridx))
            ws.remove_row(kind, ridx, count=False)
            if blk in ws.owned:
                nridx = ws._add_row(kind, blk, uid, lo, hi)
                for c, a in my_slice:
                    ws.add_entry(kind, nridx, c, a)
                ws.count("rows_moved")
            ws.stack.append(PermutationMove(f"{kind}-row", uid, GROUP_LINK, blk, REPL))
            moved = True
    # Local rows with an empty diagonal-block part become 0-block rows.
    outgoing = []
    for i in ws.owned:
        for kind in KINDS:
            for ridx in list(ws.alive_rows(kind, groups=(i,))):
                entries = ws.row_entries(kind, ridx)
                if any(ws.col_group[c] == i for c, _ in entries):
                    continue
                lo, hi = ws.row_bounds(kind, ridx)
                outgoing.append((
                    _KC[kind], ws.row_uid[kind][ridx], lo, hi,
                    tuple((ws.col_uid[c], a) for c, a in entries), i,
                ))
                ws.remove_row(kind, ridx, count=False)
                ws.count("rows_moved")
    gathered = ws.comm.allgather(outgoing) if ws.comm is not None else outgoing
    for kc, uid, lo, hi, entries, src in gathered:
        kind = _CK[kc]
        nridx = ws._add_row(kind, 0, uid, lo, hi)
        for cuid, a in entries:
            ws.add_entry(kind, nridx, ws.col_index[cuid], a)
        ws.stack.append(PermutationMove(f"{kind}-row", uid, src, 0, REPL))
        moved = True
    return moved


def _col_phase(ws: Workspace) -> bool:
    moved = False
    x0 = [c for c in ws.x0_cols() if ws.col_alive[c]]
    payload = []
    for c in x0:
        blocks = set()
        for kind in KINDS:
            for ridx, _ in ws.mat[kind].col_items(c):
                g = ws.row_group[kind][ridx]
                if g not in (0, GROUP_LINK):
                    blocks.add(g)
        payload.append((len(blocks), max(blocks) if blocks else -1))
    if ws.comm is not None:
        payload = ws.comm.allreduce(payload, _OP_PRESENCE)
    for c, (nblocks, blk) in zip(x0, payload):
        if nblocks != 1:
            continue
        zero_used = any(
            ws.row_group[kind][ridx] == 0
            for kind in KINDS
            for ridx, _ in ws.mat[kind].col_items(c)
        )
        if zero_used:
            continue
        uid = ws.col_uid[c]
        link_entries = [
            (kind, ridx, a)
            for kind in KINDS
            for ridx, a in ws.mat[kind].col_items(c)
            if ws.row_group[kind][ridx] == GROUP_LINK
        ]
        if blk in ws.owned:
            block_entries = [
                (kind, ridx, a)
                for kind in KINDS
                for ridx, a in ws.mat[kind].col_items(c)
                if ws.row_group[kind][ridx] == blk
            ]
            for kind, ridx, a in block_entries + link_entries:
                ws.remove_entry(kind, ridx, c, count=False)
            ws.col_alive[c] = False
            nc = ws._add_col(blk, uid, ws.col_lower[c], ws.col_upper[c],
                             ws.col_cost[c])
            for kind, ridx, a in block_entries + link_entries:
                ws.add_entry(kind, ridx, nc, a)
            ws.count("cols_moved")
        else:
            for kind, ridx, a in link_entries:
                ws.remove_entry(kind, ridx, c, count=False)
            ws.col_alive[c] = False
        ws.stack.append(PermutationMove("col", uid, 0, blk, REPL))
        moved = True
    # Local columns absent from their diagonal block become 0-link columns.
    outgoing = []
    for i in ws.owned:
        for c in list(ws.alive_cols(groups=(i,))):
            entries = ws.col_entries_all(c)
            if not entries:
                continue
            if any(ws.row_group[k][r] == i for k, r, _ in entries):
                continue
            # Structure guarantees the rest are linking rows.
            outgoing.append((
                ws.col_uid[c], ws.col_lower[c], ws.col_upper[c], ws.col_cost[c],
                tuple((_KC[k], ws.row_uid[k][r], a) for k, r, a in entries), i,
            ))
            for k, r, a in entries:
                ws.remove_entry(k, r, c, count=False)
            ws.col_alive[c] = False
            ws.count("cols_moved")
    gathered = ws.comm.allgather(outgoing) if ws.comm is not None else outgoing
    for uid, lo, up, cost, entries, src in gathered:
        nc = ws._add_col(0, uid, lo, up, cost)
        for kc, row_uid, a in entries:
            kind = _CK[kc]
            ws.add_entry(kind, ws.row_index[kind][row_uid], nc, a)
        ws.stack.append(PermutationMove("col", uid, src, 0, REPL))
        moved = True
    return moved


def permute(ws: Workspace) -> None:
    while True:
        moved = _row_phase(ws)
        moved = _col_phase(ws) or moved
        if ws.comm is not None:
            moved = ws.comm.allreduce([moved], OP_OR)[0]
        if not moved:
            break
