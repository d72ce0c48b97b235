"""Singleton constraints (one entry per row) and singleton variables
(one entry per column)."""

from __future__ import annotations

from ..stack import (
    EQ, INEQ, LINKC, LOCAL, REPL,
    DeletedRedundantRow, SingletonEqRowFix, SingletonRowBound, SubstitutedCol,
)
from ..tracking import GROUP_LINK
from ..workspace import INF, INFEASIBLE, KINDS, Workspace

_MIN_PIVOT = 1e-12


def singleton_rows(ws: Workspace) -> None:
    """Turn one-entry rows into variable fixations or bound updates.

    Rows in linking position and local rows whose single entry sits on a
    linking variable are skipped: the permutation presolver relocates both
    cases into the 0-block, where the reduction applies replicatedly.
    """
    tol = ws.cfg.feastol
    for kind in KINDS:
        for ridx in list(ws.alive_rows(kind)):
            group = ws.row_group[kind][ridx]
            if group == GROUP_LINK:
                continue
            if ws.tracking.row_nnz[kind][ridx] != 1:
                continue
            ((cidx, a),) = ws.row_entries(kind, ridx)
            if abs(a) < _MIN_PIVOT or not ws.col_alive[cidx]:
                continue
            if ws.is_x0(cidx) and group != 0:
                continue  # wait for permutation to move the row to the 0-block
            scope = REPL if group == 0 else LOCAL
            uid = ws.row_uid[kind][ridx]
            cuid = ws.col_uid[cidx]
            lo, up = ws.col_lower[cidx], ws.col_upper[cidx]
            if kind == EQ:
                value = ws.eq_b[ridx] / a
                if value < lo - tol * (1 + abs(lo)) or value > up + tol * (1 + abs(up)):
                    ws.set_status(
                        INFEASIBLE,
                        f"singleton row uid={uid} fixes column uid={cuid} at "
                        f"{value:.6g}, outside [{lo:.6g}, {up:.6g}]",
                    )
                    return
                loc, rep = ws.col_entries_split(cidx, exclude=(kind, ridx))
                rhs = ws.eq_b[ridx]
                cost = ws.col_cost[cidx]
                ws.remove_row(kind, ridx)
                ws.fix_col(cidx, value)
                ws.stack.append(SingletonEqRowFix(
                    uid, cuid, a, rhs, value, cost, loc, rep, lo, up,
                    LINKC if ws.is_x0(cidx) else scope,
                ))
            else:
                d, f = ws.ineq_d[ridx], ws.ineq_f[ridx]
                if a > 0.0:
                    cand_l = d / a if d != -INF else -INF
                    cand_u = f / a if f != INF else INF
                else:
                    cand_l = f / a if f != INF else -INF
                    cand_u = d / a if d != -INF else INF
                new_l = max(lo, cand_l)
                new_u = min(up, cand_u)
                if new_l > new_u + tol * (1 + abs(new_u)):
                    ws.set_status(
                        INFEASIBLE,
                        f"singleton row uid={uid} empties the domain of column uid={cuid}",
                    )
                    return
                if new_l > new_u:
                    new_l = new_u = 0.5 * (new_l + new_u)
                lo_from = new_l > lo
                up_from = new_u < up
                ws.remove_row(kind, ridx)
                if not (lo_from or up_from):
                    ws.stack.append(DeletedRedundantRow(kind, uid, scope))
                    continue
                ws.change_bounds(cidx, new_l, new_u)
                ws.stack.append(SingletonRowBound(
                    uid, cuid, a, d, f, lo, up, new_l, new_u, lo_from, up_from,
                    scope,
                ))


def singleton_cols(ws: Workspace) -> None:
    """Substitute implied-free singleton columns out of their equality row.

    A local column may be folded into the objective only when the row has no
    linking-variable entries or the column's cost is zero (the replicated
    cost vector of x0 cannot be edited from one rank).  Linking columns are
    substituted only from 0-block rows; single-block linking columns are left
    for the permutation presolver to demote first.
    """
    tol = ws.cfg.feastol
    for cidx in list(ws.alive_cols()):
        if not ws.col_alive[cidx]:
            continue
        x0 = ws.is_x0(cidx)
        if ws.col_nnz_global(cidx) != 1:
            continue
        if x0:
            repl_entries = [
                (k, r, a) for k, r, a in ws.col_entries_all(cidx)
                if ws.row_group[k][r] in (0, GROUP_LINK)
            ]
            if len(repl_entries) != 1:
                continue  # the single entry lives in some rank's local row
            kind, ridx, a = repl_entries[0]
            if kind != EQ or ws.row_group[kind][ridx] != 0:
                continue
            scope = REPL
        else:
            entries = ws.col_entries_all(cidx)
            if len(entries) != 1:
                continue
            kind, ridx, a = entries[0]
            group = ws.row_group[kind][ridx]
            if kind != EQ or group in (0, GROUP_LINK):
                continue
            scope = LOCAL
        if abs(a) < _MIN_PIVOT or not ws.row_alive[kind][ridx]:
            continue
        cost = ws.col_cost[cidx]
        if not x0 and cost != 0.0 and any(
            ws.is_x0(c) for c, _ in ws.row_entries(kind, ridx)
        ):
            continue  # objective folding would touch the replicated x0 costs
        lo, up = ws.col_lower[cidx], ws.col_upper[cidx]
        rec = ws.tracking.act[kind][ridx]
        resmin = rec.residual_min(a, lo, up)
        resmax = rec.residual_max(a, lo, up)
        b = ws.eq_b[ridx]
        if a > 0.0:
            impl_l = -INF if resmax is None else (b - resmax) / a
            impl_u = INF if resmin is None else (b - resmin) / a
        else:
            impl_l = -INF if resmin is None else (b - resmin) / a
            impl_u = INF if resmax is None else (b - resmax) / a
        if impl_l < lo - tol * (1 + abs(lo)) or impl_u > up + tol * (1 + abs(up)):
            continue  # not implied free
        t = cost / a
        row_snapshot = ws.row_snapshot(kind, ridx, exclude_col=cidx)
        if t != 0.0:
            for c2, a2 in ws.row_entries(kind, ridx):
                if c2 != cidx:
                    ws.col_cost[c2] -= t * a2
            if x0:
                ws.offset_repl += t * b
            else:
                ws.offset_local += t * b
        ws.remove_row(kind, ridx)
        ws.remove_col(cidx)
        ws.stack.append(SubstitutedCol(
            ws.col_uid[cidx], ws.row_uid[kind][ridx], a, b, cost, row_snapshot,
            scope,
        ))
