"""One-constraint activity-based bound tightening.

Local rows tighten their own block's variables immediately.  Candidate
tightenings of linking variables are collected and resolved collectively at
the end of the pass (min-reduce on uppers, max-reduce on lowers), so every
rank applies the same winning bound.  Linking rows are not used as sources:
reverting a tightening may shift duals onto the source row's other variables,
which for a linking row live on other ranks.
"""

from __future__ import annotations

from ..comm import ReduceOperator
from ..stack import EQ, INEQ, LINKC, LOCAL, BoundTightened, BoundTightenedLink
from ..tracking import GROUP_LINK
from ..workspace import INF, INFEASIBLE, KINDS, Workspace

_MIN_PIVOT = 1e-12

# Lexicographic minimum: (value, rank, ...) tuples; neutral = +inf value.
_OP_LEXMIN = ReduceOperator("lexmin", (INF, 1 << 30), min)


def _improves(old: float, new: float, lo: float, up: float, side: str) -> bool:
    if side == "up":
        if old == INF:
            return new < INF
        span = up - lo
        step = 1e-3 * max(1.0, span if span != INF else 0.0)
        return old - new >= step
    if old == -INF:
        return new > -INF
    span = up - lo
    step = 1e-3 * max(1.0, span if span != INF else 0.0)
    return new - old >= step


def bound_tightening(ws: Workspace) -> None:
    tol = ws.cfg.feastol
    # Per linking column: best candidate (value, rank, row_kind, row_uid) plus
    # the winner's row snapshot kept locally until the reduce settles it.
    cand: dict[str, dict[int, tuple]] = {"up": {}, "lo": {}}
    snaps: dict[tuple, tuple] = {}

    def consider(cidx: int, side: str, value: float, kind: str, ridx: int) -> bool:
        lo, up = ws.col_lower[cidx], ws.col_upper[cidx]
        if not _improves(up if side == "up" else lo, value, lo, up, side):
            return False
        group = ws.row_group[kind][ridx]
        if ws.is_x0(cidx):
            key = value if side == "up" else -value
            prev = cand[side].get(cidx)
            entry = (key, ws.rank, kind == INEQ, ws.row_uid[kind][ridx],
                     group == 0)
            if prev is None or entry < prev:
                cand[side][cidx] = entry
                snaps[(cidx, side)] = (
                    kind, ridx, ws.row_snapshot(kind, ridx),
                    *ws.row_bounds(kind, ridx),
                )
            return False
        new_l, new_u = lo, up
        if side == "up":
            new_u = value
        else:
            new_l = value
        if new_l > new_u + tol * (1.0 + abs(new_u)):
            ws.set_status(
                INFEASIBLE,
                f"tightened bounds of column uid={ws.col_uid[cidx]} cross: "
                f"[{new_l:.6g}, {new_u:.6g}]",
            )
            return True
        if new_l > new_u:
            new_l = new_u = 0.5 * (new_l + new_u)
        snapshot = ws.row_snapshot(kind, ridx)
        rlo, rhi = ws.row_bounds(kind, ridx)
        old = up if side == "up" else lo
        ws.change_bounds(cidx, new_l, new_u)
        ws.stack.append(BoundTightened(
            ws.col_uid[cidx], side, old, value, kind, ws.row_uid[kind][ridx],
            snapshot, rlo, rhi, LOCAL,
        ))
        return False

    for kind in KINDS:
        for ridx in list(ws.alive_rows(kind)):
            if ws.row_group[kind][ridx] == GROUP_LINK:
                continue
            rec = ws.tracking.act[kind][ridx]
            rlo, rhi = ws.row_bounds(kind, ridx)
            for cidx, a in ws.row_entries(kind, ridx):
                if abs(a) < _MIN_PIVOT:
                    continue
                lo, up = ws.col_lower[cidx], ws.col_upper[cidx]
                resmin = rec.residual_min(a, lo, up)
                resmax = rec.residual_max(a, lo, up)
                if rhi != INF and resmin is not None:
                    value = (rhi - resmin) / a
                    side = "up" if a > 0.0 else "lo"
                    if consider(cidx, side, value, kind, ridx):
                        return
                if rlo != -INF and resmax is not None:
                    value = (rlo - resmax) / a
                    side = "lo" if a > 0.0 else "up"
                    if consider(cidx, side, value, kind, ridx):
                        return

    # Collective resolution for linking columns.
    x0 = ws.x0_cols()
    neutral = _OP_LEXMIN.identity
    for side in ("up", "lo"):
        buf = [cand[side].get(c, neutral) for c in x0]
        if ws.comm is not None:
            buf = ws.comm.allreduce(buf, _OP_LEXMIN)
        for c, won in zip(x0, buf):
            if won == neutral or not ws.col_alive[c]:
                continue
            value = won[0] if side == "up" else -won[0]
            winner = won[1]
            lo, up = ws.col_lower[c], ws.col_upper[c]
            if not _improves(up if side == "up" else lo, value, lo, up, side):
                continue
            new_l, new_u = (lo, value) if side == "up" else (value, up)
            if new_l > new_u + tol * (1.0 + abs(new_u)):
                ws.set_status(
                    INFEASIBLE,
                    f"linking column uid={ws.col_uid[c]} bounds cross after tightening",
                )
                return
            if new_l > new_u:
                new_l = new_u = 0.5 * (new_l + new_u)
                value = new_l if side == "lo" else new_u
            old = up if side == "up" else lo
            ws.change_bounds(c, new_l, new_u)
            entry = BoundTightenedLink(
                ws.col_uid[c], side, old, value, winner, zero_row=bool(won[4]),
            )
            if won[4]:
                # Replicated source row: every rank can (and must) snapshot it.
                kind = INEQ if won[2] else EQ
                ridx = ws.row_index[kind][won[3]]
                entry.row_kind = kind
                entry.row_uid = won[3]
                entry.row_entries = ws.row_snapshot(kind, ridx)
                entry.row_lo, entry.row_hi = ws.row_bounds(kind, ridx)
            elif winner == ws.rank:
                kind, ridx, snapshot, rlo, rhi = snaps[(c, side)]
                entry.row_kind = kind
                entry.row_uid = won[3]
                entry.row_entries = snapshot
                entry.row_lo = rlo
                entry.row_hi = rhi
            ws.stack.append(entry)
