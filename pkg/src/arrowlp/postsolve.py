"""Reverse replay of the reduction stacks.

Each rank replays its own stack newest-first.  Records scoped ``local`` touch
only rank-owned data; ``repl`` records were pushed identically by every rank
and replay redundantly; ``link`` records are rendezvous points whose replay
folds rank-local contributions through the communicator.  Writes from local
records to *originally shared* entities (linking rows, 0-block rows, linking
variables - including entities the permutation later relocated) are applied
locally at once and queued for the peers; the queues drain at the recorded
synchronization events, which every rank replays in the same order.

The dual recovery rules are intentionally oracle-checked: the test suite
validates every rule against the KKT checker on the original problem rather
than trusting the derivations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .comm import Communicator, OP_MAX, OP_MIN, OP_SUM
from .solution import PrimalDualSolution, kkt_check  # re-export: kkt_check
from .stack import (
    EQ, INEQ, LINKC, LOCAL, REPL,
    BoundTightened, BoundTightenedLink, DeletedParallelRow, DeletedRedundantRow,
    FixedVar, ForcedRow, LinDepCombination, PermutationMove, SingletonEqRowFix,
    SingletonRowBound, SubstitutedCol, SyncEvent,
)

__all__ = ["ReplayState", "postsolve_run", "kkt_check", "StackCorruption"]

_TINY = 1e-12


class StackCorruption(RuntimeError):
    """Replay referenced state that was never restored, or events misalign."""


def _at(value: float, target: float) -> bool:
    return abs(value - target) <= 1e-7 * (1.0 + abs(target))


@dataclass
class ReplayState:
    comm: Optional[Communicator]
    shared_cols: frozenset
    shared_eq: frozenset
    shared_ineq: frozenset
    x: dict = field(default_factory=dict)
    y: dict = field(default_factory=dict)
    zp: dict = field(default_factory=dict)
    zm: dict = field(default_factory=dict)
    gamma: dict = field(default_factory=dict)
    phi: dict = field(default_factory=dict)
    pending: list = field(default_factory=list)
    events: int = 0

    # -- guarded writes ---------------------------------------------------

    def set_x(self, uid: int, value: float, scope: str) -> None:
        self.x[uid] = value
        if scope == LOCAL and uid in self.shared_cols:
            self.pending.append(("sx", uid, value))

    def set_col_duals(self, uid: int, g: float, p: float, scope: str) -> None:
        self.gamma[uid] = g
        self.phi[uid] = p
        if scope == LOCAL and uid in self.shared_cols:
            self.pending.append(("sc", uid, g, p))

    def add_col_duals(self, uid: int, dg: float, dp: float, scope: str) -> None:
        if dg == 0.0 and dp == 0.0:
            return
        self.gamma[uid] = self.gamma.get(uid, 0.0) + dg
        self.phi[uid] = self.phi.get(uid, 0.0) + dp
        if scope == LOCAL and uid in self.shared_cols:
            self.pending.append(("ac", uid, dg, dp))

    def row_dual(self, kind: str, uid: int) -> float:
        if kind == EQ:
            return self.y.get(uid, 0.0)
        return self.zp.get(uid, 0.0) - self.zm.get(uid, 0.0)

    def set_row_dual(self, kind: str, uid: int, w: float, scope: str) -> None:
        if kind == EQ:
            self.y[uid] = w
        else:
            self.zp[uid] = max(w, 0.0)
            self.zm[uid] = max(-w, 0.0)
        shared = self.shared_eq if kind == EQ else self.shared_ineq
        if scope == LOCAL and uid in shared:
            self.pending.append(("sr", kind, uid, w))

    def add_row_dual(self, kind: str, uid: int, dw: float, scope: str) -> None:
        if dw == 0.0:
            return
        if kind == EQ:
            self.y[uid] = self.y.get(uid, 0.0) + dw
        else:
            net = self.zp.get(uid, 0.0) - self.zm.get(uid, 0.0) + dw
            self.zp[uid] = max(net, 0.0)
            self.zm[uid] = max(-net, 0.0)
        shared = self.shared_eq if kind == EQ else self.shared_ineq
        if scope == LOCAL and uid in shared:
            self.pending.append(("ar", kind, uid, dw))

    def _apply_peer(self, item) -> None:
        tag = item[0]
        if tag == "sx":
            self.x[item[1]] = item[2]
        elif tag == "sc":
            self.gamma[item[1]] = item[2]
            self.phi[item[1]] = item[3]
        elif tag == "ac":
            self.gamma[item[1]] = self.gamma.get(item[1], 0.0) + item[2]
            self.phi[item[1]] = self.phi.get(item[1], 0.0) + item[3]
        elif tag == "sr":
            self.set_row_dual(item[1], item[2], item[3], REPL)
        elif tag == "ar":
            self.add_row_dual(item[1], item[2], item[3], REPL)

    def flush(self, layout_id: int) -> None:
        self.events += 1
        if self.comm is None:
            self.pending.clear()
            return
        rank = self.comm.rank
        lo = self.comm.allreduce([layout_id], OP_MIN)[0]
        hi = self.comm.allreduce([layout_id], OP_MAX)[0]
        if lo != hi:
            raise StackCorruption(
                f"synchronization events misaligned: ids {lo} vs {hi}"
            )
        gathered = self.comm.allgather([(rank, tuple(self.pending))])
        for src, items in gathered:
            if src == rank:
                continue
            for item in items:
                self._apply_peer(item)
        self.pending.clear()

    # -- helpers ------------------------------------------------------------

    def col_dot(self, entries) -> float:
        """Column snapshot (row_kind, row_uid, a) against current row duals."""
        return sum(a * self.row_dual(kind, uid) for kind, uid, a in entries)

    def x_dot(self, entries) -> float:
        total = 0.0
        for uid, a in entries:
            if uid not in self.x:
                raise StackCorruption(f"column uid={uid} replayed before its value")
            total += a * self.x[uid]
        return total


def _reduced_cost(st: ReplayState, cost, local_entries, repl_entries, scope):
    ld = st.col_dot(local_entries)
    if scope == LINKC and st.comm is not None:
        ld = st.comm.allreduce([ld], OP_SUM)[0]
    return cost - ld - st.col_dot(repl_entries)


def _replay_fixed_var(st: ReplayState, e: FixedVar) -> None:
    r = _reduced_cost(st, e.cost, e.local_entries, e.repl_entries, e.scope)
    st.set_x(e.col_uid, e.value, e.scope)
    st.set_col_duals(e.col_uid, max(r, 0.0), max(-r, 0.0), e.scope)


def _replay_singleton_eq(st: ReplayState, e: SingletonEqRowFix) -> None:
    st.set_x(e.col_uid, e.value, e.scope)
    rho = _reduced_cost(st, e.cost, e.local_entries, e.repl_entries, e.scope)
    st.set_row_dual(EQ, e.row_uid, rho / e.a, e.scope)
    st.set_col_duals(e.col_uid, 0.0, 0.0, e.scope)


def _replay_singleton_bound(st: ReplayState, e: SingletonRowBound) -> None:
    xj = st.x.get(e.col_uid)
    if xj is None:
        raise StackCorruption(f"column uid={e.col_uid} has no value at replay")
    g = st.gamma.get(e.col_uid, 0.0)
    p = st.phi.get(e.col_uid, 0.0)
    w = 0.0
    if e.up_from_row and p > _TINY and _at(xj, e.new_upper):
        # x sits on the bound this row implied: its dual belongs to the row.
        w += -p / e.a
        st.add_col_duals(e.col_uid, 0.0, -p, e.scope)
    if e.lo_from_row and g > _TINY and _at(xj, e.new_lower):
        w += g / e.a
        st.add_col_duals(e.col_uid, -g, 0.0, e.scope)
    if w != 0.0:
        st.add_row_dual(INEQ, e.row_uid, w, e.scope)


def _replay_substituted(st: ReplayState, e: SubstitutedCol) -> None:
    value = (e.rhs - st.x_dot(e.row_entries)) / e.a
    st.set_x(e.col_uid, value, e.scope)
    st.set_row_dual(EQ, e.row_uid, e.cost / e.a, e.scope)
    st.set_col_duals(e.col_uid, 0.0, 0.0, e.scope)


def _replay_forced_row(st: ReplayState, e: ForcedRow) -> None:
    for rec in e.fixed_repl:
        st.set_x(rec.col_uid, rec.value, REPL)
    for rec in e.fixed_local:
        st.set_x(rec.col_uid, rec.value, LOCAL)
    rhos: dict[int, float] = {}
    if e.scope == LINKC and st.comm is not None:
        dots = [st.col_dot(rec.local_entries) for rec in e.fixed_repl]
        dots = st.comm.allreduce(dots, OP_SUM) if dots else []
        for rec, ld in zip(e.fixed_repl, dots):
            rhos[rec.col_uid] = rec.cost - ld - st.col_dot(rec.repl_entries)
    else:
        for rec in e.fixed_repl:
            rhos[rec.col_uid] = rec.cost - st.col_dot(rec.local_entries) \
                - st.col_dot(rec.repl_entries)
    for rec in e.fixed_local:
        rhos[rec.col_uid] = rec.cost - st.col_dot(rec.local_entries) \
            - st.col_dot(rec.repl_entries)
    # Row dual making every fixed variable's reduced cost sign-feasible.
    ratios = [rhos[rec.col_uid] / rec.a for rec in e.fixed_repl]
    ratios += [rhos[rec.col_uid] / rec.a for rec in e.fixed_local]
    if e.side == "min":
        w = min(ratios) if ratios else float("inf")
        if e.scope == LINKC and st.comm is not None:
            w = st.comm.allreduce([w], OP_MIN)[0]
        if w == float("inf"):
            w = 0.0
        if e.kind == INEQ:
            w = min(w, 0.0)
    else:
        w = max(ratios) if ratios else float("-inf")
        if e.scope == LINKC and st.comm is not None:
            w = st.comm.allreduce([w], OP_MAX)[0]
        if w == float("-inf"):
            w = 0.0
        if e.kind == INEQ:
            w = max(w, 0.0)
    st.set_row_dual(e.kind, e.row_uid, w, REPL if e.scope == LINKC else e.scope)
    for rec, scope in [(r, REPL) for r in e.fixed_repl] + [
        (r, LOCAL) for r in e.fixed_local
    ]:
        rj = rhos[rec.col_uid] - rec.a * w
        if rec.at_upper:
            st.set_col_duals(rec.col_uid, 0.0, max(-rj, 0.0), scope)
        else:
            st.set_col_duals(rec.col_uid, max(rj, 0.0), 0.0, scope)


def _replay_parallel(st: ReplayState, e: DeletedParallelRow) -> None:
    if e.kept_kind == EQ:
        # The surviving equality carries the pair's dual; the deleted row
        # (equality twin or pinned inequality) keeps dual zero.
        if e.del_kind == INEQ:
            st.zp.setdefault(e.del_uid, 0.0)
            st.zm.setdefault(e.del_uid, 0.0)
        else:
            st.y.setdefault(e.del_uid, 0.0)
        return
    w = st.row_dual(INEQ, e.kept_uid)
    st.zp.setdefault(e.del_uid, 0.0)
    st.zm.setdefault(e.del_uid, 0.0)
    if abs(w) <= _TINY:
        return
    # At a stage optimum the sign of the net dual identifies the binding side.
    if w > 0.0:
        binding, own = e.kept_new_lo, e.kept_old_lo
    else:
        binding, own = e.kept_new_hi, e.kept_old_hi
    if _at(binding, own):
        return  # the kept row's own bound binds; nothing moves
    net_k = w / e.lam
    scope = REPL if e.scope in (REPL, LINKC) else e.scope
    st.set_row_dual(INEQ, e.kept_uid, 0.0, scope)
    st.set_row_dual(INEQ, e.del_uid, net_k, scope)


def _replay_lindep(st: ReplayState, e: LinDepCombination) -> None:
    if e.moved:
        w = st.y.get(e.row_uid, 0.0)
    else:
        w = 0.0
        st.set_row_dual(EQ, e.row_uid, 0.0, e.scope)
    if w != 0.0:
        for p_uid, wt in e.weights:
            st.add_row_dual(EQ, p_uid, wt * w, e.scope)


def _transfer_from_row(st: ReplayState, col_uid: int, side: str, dual: float,
                       row_kind: str, row_uid: int, row_entries, scope: str,
                       shared_row: bool) -> None:
    """Move a bound dual onto its source row and the row's other variables."""
    a = None
    for cuid, coef in row_entries:
        if cuid == col_uid:
            a = coef
            break
    if a is None or a == 0.0:
        raise StackCorruption(
            f"bound source row uid={row_uid} lacks column uid={col_uid}"
        )
    dw = (-dual if side == "up" else dual) / a
    st.add_row_dual(row_kind, row_uid, dw,
                    LOCAL if not shared_row else scope)
    if side == "up":
        st.add_col_duals(col_uid, 0.0, -dual, scope)
    else:
        st.add_col_duals(col_uid, -dual, 0.0, scope)
    for cuid, coef in row_entries:
        if cuid == col_uid:
            continue
        val = -coef * dw
        if val > 0.0:
            st.add_col_duals(cuid, val, 0.0, scope)
        elif val < 0.0:
            st.add_col_duals(cuid, 0.0, -val, scope)


def _replay_bound_tightened(st: ReplayState, e: BoundTightened) -> None:
    xj = st.x.get(e.col_uid)
    if xj is None:
        raise StackCorruption(f"column uid={e.col_uid} has no value at replay")
    dual = st.phi.get(e.col_uid, 0.0) if e.side == "up" else st.gamma.get(e.col_uid, 0.0)
    if dual <= _TINY or not _at(xj, e.new_value):
        return
    shared_row = (e.row_uid in (st.shared_eq if e.row_kind == EQ else st.shared_ineq))
    _transfer_from_row(st, e.col_uid, e.side, dual, e.row_kind, e.row_uid,
                       e.row_entries, LOCAL, shared_row)


def _replay_bound_tightened_link(st: ReplayState, e: BoundTightenedLink) -> None:
    xj = st.x.get(e.col_uid)
    if xj is None:
        raise StackCorruption(f"column uid={e.col_uid} has no value at replay")
    dual = st.phi.get(e.col_uid, 0.0) if e.side == "up" else st.gamma.get(e.col_uid, 0.0)
    trigger = dual > _TINY and _at(xj, e.new_value)
    if e.zero_row:
        # Replicated source row: every rank applies the same transfer.
        if trigger:
            _transfer_from_row(st, e.col_uid, e.side, dual, e.row_kind,
                               e.row_uid, e.row_entries, REPL, True)
        return
    if not trigger:
        return
    rank = st.comm.rank if st.comm is not None else 0
    if rank == e.winner_rank:
        # Split the transfer: shared columns go to every rank, own columns
        # and the (local) source row stay here.
        a = None
        for cuid, coef in e.row_entries:
            if cuid == e.col_uid:
                a = coef
                break
        if a in (None, 0.0):
            raise StackCorruption(
                f"bound source row uid={e.row_uid} lacks column uid={e.col_uid}"
            )
        dw = (-dual if e.side == "up" else dual) / a
        shared: list[tuple[int, float, float]] = []
        if e.side == "up":
            shared.append((e.col_uid, 0.0, -dual))
        else:
            shared.append((e.col_uid, -dual, 0.0))
        local_items: list[tuple[int, float, float]] = []
        for cuid, coef in e.row_entries:
            if cuid == e.col_uid:
                continue
            val = -coef * dw
            dg, dp = (val, 0.0) if val > 0.0 else (0.0, -val)
            if dg == 0.0 and dp == 0.0:
                continue
            (shared if cuid in st.shared_cols else local_items).append((cuid, dg, dp))
        shared_row = (
            e.row_uid in (st.shared_eq if e.row_kind == EQ else st.shared_ineq)
        )
        payload = [(e.row_kind, e.row_uid, dw, shared_row, tuple(shared))]
        if not shared_row:
            st.add_row_dual(e.row_kind, e.row_uid, dw, LOCAL)
        for cuid, dg, dp in local_items:
            st.add_col_duals(cuid, dg, dp, LOCAL)
    else:
        payload = []
    if st.comm is not None:
        gathered = st.comm.allgather(payload)
    else:
        gathered = payload
    for row_kind, row_uid, dw, shared_row, shared in gathered:
        if shared_row:
            st.add_row_dual(row_kind, row_uid, dw, REPL)
        for cuid, dg, dp in shared:
            st.add_col_duals(cuid, dg, dp, REPL)


_DISPATCH = {
    FixedVar: _replay_fixed_var,
    SingletonEqRowFix: _replay_singleton_eq,
    SingletonRowBound: _replay_singleton_bound,
    SubstitutedCol: _replay_substituted,
    ForcedRow: _replay_forced_row,
    DeletedParallelRow: _replay_parallel,
    LinDepCombination: _replay_lindep,
    BoundTightened: _replay_bound_tightened,
    BoundTightenedLink: _replay_bound_tightened_link,
}


def postsolve_run(stack: list, st: ReplayState) -> ReplayState:
    """Replay one rank's stack in reverse onto a seeded state.

    Collective entries rendezvous through the state's communicator; the
    caller must invoke this on every rank of the session.
    """
    for entry in reversed(stack):
        if isinstance(entry, SyncEvent):
            st.flush(entry.layout_id)
            continue
        if isinstance(entry, (DeletedRedundantRow, PermutationMove)):
            continue  # dual zero / pure relocation
        fn = _DISPATCH.get(type(entry))
        if fn is None:
            raise StackCorruption(f"unknown stack entry {type(entry).__name__}")
        fn(st, entry)
    return st
