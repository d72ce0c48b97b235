"""Matrix hygiene: tiny entries, empty columns, redundant and forcing rows,
and fixation of variables with (nearly) equal bounds."""

from __future__ import annotations

from ..stack import (
    EQ, INEQ, LINKC, LOCAL, REPL,
    DeletedRedundantRow, FixedVar, ForcedRow, ForcedVarRec,
)
from ..tracking import GROUP_LINK
from ..workspace import INF, INFEASIBLE, UNBOUNDED, KINDS, Workspace


def tiny_entries(ws: Workspace) -> None:
    """Drop entries whose worst-case contribution is far below feastol.

    Removal is a relaxation bounded by 0.01*feastol per entry, so no
    postsolve record is needed.  Only columns with finite bounds qualify.
    """
    tol = ws.cfg.tiny_entry_tol
    budget = 0.01 * ws.cfg.feastol
    for kind in KINDS:
        for ridx in list(ws.alive_rows(kind)):
            for cidx, a in ws.row_entries(kind, ridx):
                if abs(a) > tol:
                    continue
                lo, up = ws.col_lower[cidx], ws.col_upper[cidx]
                if lo == -INF or up == INF:
                    continue
                if abs(a) * max(abs(lo), abs(up), up - lo) <= budget:
                    ws.remove_entry(kind, ridx, cidx)


def _scale(v: float) -> float:
    return 1.0 + (abs(v) if v not in (INF, -INF) else 0.0)


def _fix_empty_col(ws: Workspace, cidx: int) -> bool:
    cost = ws.col_cost[cidx]
    lo, up = ws.col_lower[cidx], ws.col_upper[cidx]
    if cost > 0.0:
        if lo == -INF:
            ws.set_status(UNBOUNDED, f"empty column uid={ws.col_uid[cidx]} improves without bound")
            return False
        value = lo
    elif cost < 0.0:
        if up == INF:
            ws.set_status(UNBOUNDED, f"empty column uid={ws.col_uid[cidx]} improves without bound")
            return False
        value = up
    else:
        value = min(max(0.0, lo), up)
    scope = LINKC if ws.is_x0(cidx) else LOCAL
    ws.fix_col(cidx, value)
    ws.stack.append(FixedVar(ws.col_uid[cidx], value, cost, (), (), scope))
    return True


def _force_row(ws: Workspace, kind: str, ridx: int, side: str) -> None:
    """Fix every variable of a forcing row at its activity-extreme bound."""
    group = ws.row_group[kind][ridx]
    entries = ws.row_entries(kind, ridx)
    lo_r, hi_r = ws.row_bounds(kind, ridx)
    recs_local, recs_repl = [], []
    for cidx, a in entries:
        if not ws.col_alive[cidx]:
            continue
        at_upper = (a < 0.0) if side == "min" else (a > 0.0)
        value = ws.col_upper[cidx] if at_upper else ws.col_lower[cidx]
        loc, rep = ws.col_entries_split(cidx, exclude=(kind, ridx))
        rec = ForcedVarRec(ws.col_uid[cidx], a, value, at_upper,
                           ws.col_cost[cidx], loc, rep)
        (recs_repl if ws.is_x0(cidx) else recs_local).append(rec)
    for rec in recs_repl + recs_local:
        ws.fix_col(ws.col_index[rec.col_uid], rec.value)
    if group == GROUP_LINK:
        scope = LINKC
        # Leave the (now empty) linking row; the next round's cleanup removes
        # it once the buffered rhs shifts are synchronized.
    else:
        scope = REPL if group == 0 else LOCAL
        flo, fhi = ws.row_bounds(kind, ridx)
        tol = ws.cfg.feastol * _scale(lo_r)
        if (flo != -INF and flo > tol) or (fhi != INF and fhi < -tol):
            ws.set_status(INFEASIBLE,
                          f"forcing row uid={ws.row_uid[kind][ridx]} leaves an infeasible residual")
            return
        ws.remove_row(kind, ridx)
    ws.stack.append(ForcedRow(kind, ws.row_uid[kind][ridx], side, lo_r, hi_r,
                              tuple(recs_local), tuple(recs_repl), scope))


def model_cleanup(ws: Workspace) -> None:
    """Empty columns, then row reductions driven by activity records."""
    tol = ws.cfg.feastol
    for cidx in list(ws.alive_cols()):
        if ws.col_nnz_global(cidx) == 0:
            if not _fix_empty_col(ws, cidx):
                return

    # Linking and 0-block rows first, from the synchronized snapshot; local
    # rows after.  Fixations triggered here only narrow activities, so the
    # snapshot decisions stay valid within this pass.
    ordered = []
    for kind in KINDS:
        ordered += [(kind, r) for r in ws.alive_rows(kind, groups=(GROUP_LINK,))]
        ordered += [(kind, r) for r in ws.alive_rows(kind, groups=(0,))]
    for kind in KINDS:
        ordered += [
            (kind, r) for r in ws.alive_rows(kind)
            if ws.row_group[kind][r] not in (0, GROUP_LINK)
        ]
    for kind, ridx in ordered:
        if not ws.row_alive[kind][ridx]:
            continue
        group = ws.row_group[kind][ridx]
        rec = ws.row_act(kind, ridx)
        lo, hi = ws.row_bounds(kind, ridx)
        amin, amax = rec.min_value(), rec.max_value()
        scope = LINKC if group == GROUP_LINK else (REPL if group == 0 else LOCAL)
        uid = ws.row_uid[kind][ridx]
        if amin > hi + tol * _scale(hi) or amax < lo - tol * _scale(lo):
            ws.set_status(
                INFEASIBLE,
                f"{kind} row uid={uid}: activity [{amin:.6g}, {amax:.6g}] "
                f"outside bounds [{lo:.6g}, {hi:.6g}]",
            )
            return
        nnz = ws.row_nnz_global(kind, ridx)
        if nnz == 0:
            # Degenerate row; bounds already checked against zero activity.
            # For linking rows the synchronized count is authoritative: a
            # zero count implies no rhs shifts can be pending for this row.
            ws.remove_row(kind, ridx)
            ws.stack.append(DeletedRedundantRow(kind, uid, scope))
            continue
        if amin >= lo - tol * _scale(lo) and amax <= hi + tol * _scale(hi):
            ws.remove_row(kind, ridx)
            ws.stack.append(DeletedRedundantRow(kind, uid, scope))
            continue
        if group not in (0, GROUP_LINK) and any(
            ws.is_x0(c) for c, _ in ws.row_entries(kind, ridx)
        ):
            # Forcing a local row with linking variables would change
            # replicated state from one rank; permutation will relocate the
            # row if possible, otherwise the reduction is skipped.
            continue
        if rec.ninf_min == 0 and abs(amin - hi) <= tol * _scale(hi):
            _force_row(ws, kind, ridx, "min")
            if ws.status:
                return
        elif rec.ninf_max == 0 and abs(amax - lo) <= tol * _scale(lo):
            _force_row(ws, kind, ridx, "max")
            if ws.status:
                return


def fix_variables(ws: Workspace) -> None:
    """Fix columns whose bounds agree within feastol."""
    tol = ws.cfg.feastol
    for cidx in list(ws.alive_cols()):
        lo, up = ws.col_lower[cidx], ws.col_upper[cidx]
        if lo == -INF or up == INF or up - lo > tol * max(1.0, abs(lo)):
            continue
        loc, rep = ws.col_entries_split(cidx)
        scope = LINKC if ws.is_x0(cidx) else LOCAL
        ws.fix_col(cidx, lo)
        ws.stack.append(
            FixedVar(ws.col_uid[cidx], lo, ws.col_cost[cidx], loc, rep, scope)
        )
