"""Parallel (proportional) constraint detection and reduction.

Two-level hashing: rows are first bucketed by a hash of their support, then
compared within buckets using hashes of coefficients normalized by the first
(lowest column uid) coefficient and quantized on the parallel-tolerance grid.
Hash-equal pairs are verified by exact proportionality before any reduction,
so hash collisions cannot cause wrong reductions.

Local detection (one diagonal block at a time, plus the replicated 0-block
group) needs no communication.  Linking rows are handled globally: per-rank
partial support hashes combine through a commutative wrapping-add allreduce,
local parallelity booleans through an AND-allreduce extended with the
(min, max) of the per-rank scaling ratios, which rejects pairs that are
proportional per rank but with different factors.
"""

from __future__ import annotations

from typing import Optional

from ..comm import OP_WRAP_ADD64, ReduceOperator, op_tuple, OP_AND, OP_MIN, OP_MAX
from ..stack import EQ, INEQ, LINKC, LOCAL, REPL, DeletedParallelRow
from ..tracking import GROUP_LINK
from ..workspace import INF, INFEASIBLE, KINDS, Workspace

_MASK = (1 << 64) - 1


def _h64(x: int) -> int:
    # splitmix64 finalizer
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def support_hash(col_uids) -> int:
    h = 0x51_7CC1B727220A95
    for uid in col_uids:
        h = ((h ^ _h64(uid)) * 0x2545F4914F6CDD1D) & _MASK
    return h


def salted_entry_hash(block: int, col_uid: int) -> int:
    return _h64(((block + 1) << 40) ^ _h64(col_uid))


def coeff_hash(quantized) -> int:
    h = 0x9E3779B97F4A7C15
    for q in quantized:
        h = ((h ^ _h64(q & _MASK)) * 0xD6E8FEB86659FD93) & _MASK
    return h


def quantize(values, ref: float, tol: float):
    return tuple(int(round((v / ref) / tol)) for v in values)


def check_ratio(row_a, row_b, tol: float) -> Optional[float]:
    """lam with row_b = lam*row_a for equal-support sorted snapshots."""
    if len(row_a) != len(row_b):
        return None
    if not row_a:
        return None
    ref_a = row_a[0][1]
    ref_b = row_b[0][1]
    if ref_a == 0.0:
        return None
    lam = ref_b / ref_a
    for (ca, va), (cb, vb) in zip(row_a, row_b):
        if ca != cb:
            return None
        if abs(vb - lam * va) > tol * (1.0 + abs(lam * va)):
            return None
    return lam


def _merge_pair(ws: Workspace, kind_l: str, ridx_l: int, kind_k: str,
                ridx_k: int, lam: float, scope: str,
                kept_local=None, kept_repl=None) -> bool:
    """Reduce the pair (row_k = lam * row_l); returns False on infeasibility."""
    tol = ws.cfg.feastol
    uid_l = ws.row_uid[kind_l][ridx_l]
    uid_k = ws.row_uid[kind_k][ridx_k]
    if kept_local is None:
        kept_local, kept_repl = ws.row_snapshot(kind_l, ridx_l, split=True)
    if kind_l == EQ and kind_k == EQ:
        b_l, b_k = ws.eq_b[ridx_l], ws.eq_b[ridx_k]
        if abs(b_k - lam * b_l) > tol * (1.0 + abs(b_k)):
            ws.set_status(
                INFEASIBLE,
                f"parallel equality rows uid={uid_l}, uid={uid_k} have "
                f"inconsistent right-hand sides",
            )
            return False
        ws.remove_row(EQ, ridx_k)
        ws.stack.append(DeletedParallelRow(
            EQ, uid_l, EQ, uid_k, lam, b_k, b_k, b_l, b_l, b_l, b_l,
            kept_local, kept_repl, scope,
        ))
        return True
    if kind_l != kind_k:
        # One equality: it pins the inequality row's activity to lam*b.
        if kind_l == EQ:
            eq_kind, eq_ridx, q_ridx = kind_l, ridx_l, ridx_k
            act = lam * ws.eq_b[ridx_l]
        else:
            eq_kind, eq_ridx, q_ridx = kind_k, ridx_k, ridx_l
            act = ws.eq_b[ridx_k] / lam
        d, f = ws.ineq_d[q_ridx], ws.ineq_f[q_ridx]
        if act < d - tol * (1.0 + abs(d)) or act > f + tol * (1.0 + abs(f)):
            ws.set_status(
                INFEASIBLE,
                f"equality row uid={ws.row_uid[eq_kind][eq_ridx]} pins parallel "
                f"inequality row uid={ws.row_uid[INEQ][q_ridx]} outside its range",
            )
            return False
        quid = ws.row_uid[INEQ][q_ridx]
        keq = ws.row_uid[eq_kind][eq_ridx]
        if eq_ridx == ridx_l:
            ws.remove_row(INEQ, q_ridx)
            ws.stack.append(DeletedParallelRow(
                EQ, keq, INEQ, quid, lam, d, f,
                ws.eq_b[eq_ridx], ws.eq_b[eq_ridx], ws.eq_b[eq_ridx],
                ws.eq_b[eq_ridx], kept_local, kept_repl, scope,
            ))
        else:
            # Keep the equality row even though it sorted second.
            keep_local, keep_repl = ws.row_snapshot(EQ, eq_ridx, split=True)
            ws.remove_row(INEQ, q_ridx)
            ws.stack.append(DeletedParallelRow(
                EQ, keq, INEQ, quid, 1.0 / lam, d, f,
                ws.eq_b[eq_ridx], ws.eq_b[eq_ridx], ws.eq_b[eq_ridx],
                ws.eq_b[eq_ridx], keep_local, keep_repl, scope,
            ))
        return True
    # Two inequalities: intersect the scaled ranges on the kept row.
    d_l, f_l = ws.ineq_d[ridx_l], ws.ineq_f[ridx_l]
    d_k, f_k = ws.ineq_d[ridx_k], ws.ineq_f[ridx_k]
    if lam > 0.0:
        cd = d_k / lam if d_k != -INF else -INF
        cf = f_k / lam if f_k != INF else INF
    else:
        cd = f_k / lam if f_k != INF else -INF
        cf = d_k / lam if d_k != -INF else INF
    nd, nf = max(d_l, cd), min(f_l, cf)
    if nd > nf + tol * (1.0 + abs(nf) if nf not in (INF, -INF) else 1.0):
        ws.set_status(
            INFEASIBLE,
            f"parallel inequality rows uid={uid_l}, uid={uid_k} have disjoint ranges",
        )
        return False
    if nd > nf:
        nd = nf = 0.5 * (nd + nf)
    ws.remove_row(INEQ, ridx_k)
    ws.ineq_d[ridx_l] = nd
    ws.ineq_f[ridx_l] = nf
    ws.stack.append(DeletedParallelRow(
        INEQ, uid_l, INEQ, uid_k, lam, d_k, f_k, d_l, f_l, nd, nf,
        kept_local, kept_repl, scope,
    ))
    return True


def _detect_in_group(ws: Workspace, rows: list[tuple[str, int]], scope: str) -> None:
    """Algorithm 1 on one group of rows living entirely on this rank."""
    tol = ws.cfg.parallel_tol
    items = []
    for kind, ridx in rows:
        snap = ws.row_snapshot(kind, ridx)
        if not snap:
            continue
        support = tuple(c for c, _ in snap)
        items.append((support_hash(support), kind, ws.row_uid[kind][ridx],
                      ridx, snap))
    items.sort(key=lambda t: (t[0], t[1], t[2]))
    i = 0
    n = len(items)
    while i < n:
        j = i
        while j + 1 < n and items[j + 1][0] == items[i][0]:
            j += 1
        if j > i:
            hashes = {}
            for t in items[i:j + 1]:
                snap = t[4]
                ref = snap[0][1]
                hashes[t[3], t[1]] = coeff_hash(quantize(
                    [v for _, v in snap], ref, tol))
            for pi in range(i, j + 1):
                for pj in range(pi + 1, j + 1):
                    _, kind_l, _, ridx_l, snap_l = items[pi]
                    _, kind_k, _, ridx_k, snap_k = items[pj]
                    if not (ws.row_alive[kind_l][ridx_l] and ws.row_alive[kind_k][ridx_k]):
                        continue
                    if hashes[ridx_l, kind_l] != hashes[ridx_k, kind_k]:
                        continue
                    lam = check_ratio(
                        ws.row_snapshot(kind_l, ridx_l),
                        ws.row_snapshot(kind_k, ridx_k), tol,
                    )
                    if lam is None:
                        continue
                    if not _merge_pair(ws, kind_l, ridx_l, kind_k, ridx_k, lam,
                                       scope):
                        return
        i = j + 1


def parallel_rows_local(ws: Workspace) -> None:
    """Detect parallel rows within each diagonal block and within the 0-block.

    Changed nonzero counts of linking columns are buffered by the removals and
    synchronized at the presolver boundary, before linking detection runs.
    """
    groups: list[tuple[list[tuple[str, int]], str]] = []
    zero_rows = [(k, r) for k in KINDS for r in ws.alive_rows(k, groups=(0,))]
    groups.append((zero_rows, REPL))
    for i in ws.owned:
        rows = [(k, r) for k in KINDS for r in ws.alive_rows(k, groups=(i,))]
        groups.append((rows, LOCAL))
    for rows, scope in groups:
        _detect_in_group(ws, rows, scope)
        if ws.status:
            return


_OP_PAIR = op_tuple(OP_AND, OP_MIN, OP_MAX)


def parallel_rows_linking(ws: Workspace) -> None:
    """Algorithm 2: global two-level hashing over the linking rows."""
    if ws.comm is None:
        rows = [(k, r) for k in KINDS
                for r in ws.alive_rows(k, groups=(GROUP_LINK,))]
        _detect_in_group(ws, rows, LINKC)
        return
    tol = ws.cfg.parallel_tol
    rows = [(k, r) for k in KINDS for r in ws.alive_rows(k, groups=(GROUP_LINK,))
            if ws.row_nnz_global(k, r) > 0]
    # Per-rank partial support hashes, wrapping-add combined.  The replicated
    # x0 slice enters through rank 0 only.
    partial = []
    local_slices = []
    for kind, ridx in rows:
        h = 0
        slc = []
        for cidx, a in ws.row_entries(kind, ridx):
            grp = ws.col_group[cidx]
            if grp == 0 and not ws.rank0:
                continue
            h = (h + salted_entry_hash(grp, ws.col_uid[cidx])) & _MASK
            slc.append((ws.col_uid[cidx], a))
        slc.sort()
        partial.append(h)
        local_slices.append(tuple(slc))
    global_hash = ws.comm.allreduce(partial, OP_WRAP_ADD64)
    order = sorted(
        range(len(rows)),
        key=lambda t: (global_hash[t], rows[t][0], ws.row_uid[rows[t][0]][rows[t][1]]),
    )
    # Buckets of equal global support hash; buffered for the second pass.
    buckets: list[list[int]] = []
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and global_hash[order[j + 1]] == global_hash[order[i]]:
            j += 1
        if j > i:
            buckets.append([order[t] for t in range(i, j + 1)])
        i = j + 1
    pairs: list[tuple[int, int]] = []
    payload: list[tuple] = []
    for bucket in buckets:
        for pi in range(len(bucket)):
            for pj in range(pi + 1, len(bucket)):
                a, b = bucket[pi], bucket[pj]
                pairs.append((a, b))
                sa, sb = local_slices[a], local_slices[b]
                if not sa and not sb:
                    payload.append((True, INF, -INF))
                    continue
                lam = check_ratio(sa, sb, tol)
                if lam is None:
                    payload.append((False, INF, -INF))
                else:
                    payload.append((True, lam, lam))
    verdict = ws.comm.allreduce(payload, _OP_PAIR)
    # Second pass: apply reductions, identically on every rank.
    for (a, b), (ok, lam_min, lam_max) in zip(pairs, verdict):
        if not ok or lam_max == -INF:
            continue
        if lam_max - lam_min > tol * (1.0 + abs(lam_min)):
            continue
        kind_l, ridx_l = rows[a]
        kind_k, ridx_k = rows[b]
        if not (ws.row_alive[kind_l][ridx_l] and ws.row_alive[kind_k][ridx_k]):
            continue
        kept_local = tuple(
            (ws.col_uid[c], v) for c, v in sorted(ws.row_entries(kind_l, ridx_l))
            if not ws.is_x0(c)
        )
        kept_repl = tuple(
            (ws.col_uid[c], v) for c, v in sorted(ws.row_entries(kind_l, ridx_l))
            if ws.is_x0(c)
        )
        if not _merge_pair(ws, kind_l, ridx_l, kind_k, ridx_k, lam_min, LINKC,
                           kept_local, kept_repl):
            return
