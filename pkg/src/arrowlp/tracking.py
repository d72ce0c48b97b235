"""Incremental row activities and nonzero counters.

Minimum/maximum row activities are kept as a finite part plus counters of
infinite contributions, so removing an unbounded variable's entry is exact and
needs no rescan.  Finite parts use exact accumulators: the tracked value of
any row equals the from-scratch recomputation bit for bit, regardless of the
update order.

Linking rows and linking columns cannot be updated directly: a change may
originate in a single rank.  Such changes accumulate in a buffer and are
folded into the synchronized global records by ``sync`` (an allreduce), which
every reader of linking data must precede.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from ._exactsum import ExactAccumulator, exact_sum_parts
from .comm import OP_EXACT_SUM, OP_SUM, Communicator, op_tuple

INF = float("inf")
EQ = "eq"
INEQ = "ineq"
GROUP_LINK = -1

_SYNC_EQ_OP = op_tuple(OP_EXACT_SUM, OP_EXACT_SUM, OP_SUM, OP_SUM, OP_SUM, OP_EXACT_SUM)
_SYNC_INEQ_OP = op_tuple(
    OP_EXACT_SUM, OP_EXACT_SUM, OP_SUM, OP_SUM, OP_SUM, OP_EXACT_SUM, OP_EXACT_SUM
)


def contribution(a: float, lower: float, upper: float) -> tuple[Optional[float], Optional[float]]:
    """(min-side, max-side) contribution of one entry; None marks infinite."""
    if a > 0.0:
        cmin = None if lower == -INF else a * lower
        cmax = None if upper == INF else a * upper
    else:
        cmin = None if upper == INF else a * upper
        cmax = None if lower == -INF else a * lower
    return cmin, cmax


class ActivityRecord:
    """Finite activity parts plus infinite-contribution counters."""

    __slots__ = ("min_acc", "max_acc", "ninf_min", "ninf_max")

    def __init__(self):
        self.min_acc = ExactAccumulator()
        self.max_acc = ExactAccumulator()
        self.ninf_min = 0
        self.ninf_max = 0

    def add(self, a: float, lower: float, upper: float, sign: int = 1) -> None:
        cmin, cmax = contribution(a, lower, upper)
        if cmin is None:
            self.ninf_min += sign
        else:
            self.min_acc.add(sign * cmin)
        if cmax is None:
            self.ninf_max += sign
        else:
            self.max_acc.add(sign * cmax)

    @property
    def actmin(self) -> float:
        """Finite part; the true actmin is -inf when ninf_min > 0."""
        return self.min_acc.value()

    @property
    def actmax(self) -> float:
        return self.max_acc.value()

    def min_value(self) -> float:
        return -INF if self.ninf_min else self.min_acc.value()

    def max_value(self) -> float:
        return INF if self.ninf_max else self.max_acc.value()

    def residual_min(self, a: float, lower: float, upper: float) -> Optional[float]:
        """actmin with one entry's contribution removed; None when infinite."""
        cmin, _ = contribution(a, lower, upper)
        ninf = self.ninf_min - (1 if cmin is None else 0)
        if ninf > 0:
            return None
        return self.min_acc.value() - (cmin or 0.0)

    def residual_max(self, a: float, lower: float, upper: float) -> Optional[float]:
        _, cmax = contribution(a, lower, upper)
        ninf = self.ninf_max - (1 if cmax is None else 0)
        if ninf > 0:
            return None
        return self.max_acc.value() - (cmax or 0.0)

    def equal(self, other: "ActivityRecord") -> bool:
        return (
            self.ninf_min == other.ninf_min
            and self.ninf_max == other.ninf_max
            and self.min_acc.value() == other.min_acc.value()
            and self.max_acc.value() == other.max_acc.value()
        )


class _LinkDelta:
    __slots__ = ("dmin", "dmax", "dninf_min", "dninf_max", "dnnz", "drhs")

    def __init__(self, n_rhs: int):
        self.dmin = ExactAccumulator()
        self.dmax = ExactAccumulator()
        self.dninf_min = 0
        self.dninf_max = 0
        self.dnnz = 0
        self.drhs = [ExactAccumulator() for _ in range(n_rhs)]


@dataclass
class SyncStats:
    syncs: int = 0


class TrackingState:
    """Per-rank activity and counter state with a linking-delta buffer.

    Non-linking rows hold authoritative records.  Linking rows hold this
    rank's *partial* record (by convention rank 0's partial includes the
    replicated x0 slice) next to the last synchronized global record.
    """

    def __init__(self, rank0: bool):
        self.rank0 = rank0
        self.act: dict[str, list[Optional[ActivityRecord]]] = {EQ: [], INEQ: []}
        self.link_global: dict[str, list[Optional[ActivityRecord]]] = {EQ: [], INEQ: []}
        self.row_nnz: dict[str, list[int]] = {EQ: [], INEQ: []}
        self.link_row_nnz_global: dict[str, list[int]] = {EQ: [], INEQ: []}
        self.col_nnz: list[int] = []
        self.col0_nnz_global: list[int] = []
        self._buf: dict[tuple[str, int], _LinkDelta] = {}
        self._col_buf: dict[int, int] = {}
        self.layout_id = 0
        self.stats = SyncStats()

    # -- registry growth -------------------------------------------------

    def append_row(self, kind: str, is_link: bool) -> None:
        self.act[kind].append(ActivityRecord())
        self.link_global[kind].append(ActivityRecord() if is_link else None)
        self.row_nnz[kind].append(0)
        self.link_row_nnz_global[kind].append(0)

    def append_col(self) -> None:
        self.col_nnz.append(0)
        self.col0_nnz_global.append(0)

    # -- update routing --------------------------------------------------

    def _link_delta(self, kind: str, ridx: int) -> _LinkDelta:
        key = (kind, ridx)
        d = self._buf.get(key)
        if d is None:
            d = _LinkDelta(1 if kind == EQ else 2)
            self._buf[key] = d
        return d

    def entry_changed(
        self,
        kind: str,
        ridx: int,
        row_group: int,
        col_is_x0: bool,
        a: float,
        lower: float,
        upper: float,
        cidx: int,
        sign: int,
    ) -> None:
        """Account one entry added (sign=+1) or removed (sign=-1)."""
        repl_entry = col_is_x0 and row_group in (0, GROUP_LINK)
        responsible = self.rank0 if repl_entry else True
        if row_group == GROUP_LINK:
            if responsible:
                rec = self.act[kind][ridx]
                rec.add(a, lower, upper, sign)
                d = self._link_delta(kind, ridx)
                cmin, cmax = contribution(a, lower, upper)
                if cmin is None:
                    d.dninf_min += sign
                else:
                    d.dmin.add(sign * cmin)
                if cmax is None:
                    d.dninf_max += sign
                else:
                    d.dmax.add(sign * cmax)
                d.dnnz += sign
        else:
            self.act[kind][ridx].add(a, lower, upper, sign)
            self.row_nnz[kind][ridx] += sign
        if responsible:
            self.col_nnz[cidx] += sign
            if col_is_x0:
                self._col_buf[cidx] = self._col_buf.get(cidx, 0) + sign

    def bound_changed(
        self,
        touching,
        old_lower: float,
        old_upper: float,
        new_lower: float,
        new_upper: float,
        col_is_x0: bool,
    ) -> None:
        """Re-aim activity contributions after a column bound change.

        ``touching`` yields (kind, ridx, row_group, a) for every row holding
        the column on this rank.  Presolve only tightens; widening is a
        contract violation.
        """
        # Tolerance at feastol scale: fixations may sit a hair outside the box.
        if old_lower != -INF and new_lower < old_lower - 1e-6 * (1.0 + abs(old_lower)):
            raise ValueError("bound widening rejected (lower)")
        if old_upper != INF and new_upper > old_upper + 1e-6 * (1.0 + abs(old_upper)):
            raise ValueError("bound widening rejected (upper)")
        for kind, ridx, row_group, a in touching:
            if row_group == GROUP_LINK and col_is_x0 and not self.rank0:
                # Replicated slice of a linking row: rank 0 owns the partial.
                continue
            old_cmin, old_cmax = contribution(a, old_lower, old_upper)
            new_cmin, new_cmax = contribution(a, new_lower, new_upper)
            if row_group == GROUP_LINK:
                rec = self.act[kind][ridx]
                d = self._link_delta(kind, ridx)
                if old_cmin is None:
                    rec.ninf_min -= 1
                    d.dninf_min -= 1
                else:
                    rec.min_acc.sub(old_cmin)
                    d.dmin.sub(old_cmin)
                if new_cmin is None:
                    rec.ninf_min += 1
                    d.dninf_min += 1
                else:
                    rec.min_acc.add(new_cmin)
                    d.dmin.add(new_cmin)
                if old_cmax is None:
                    rec.ninf_max -= 1
                    d.dninf_max -= 1
                else:
                    rec.max_acc.sub(old_cmax)
                    d.dmax.sub(old_cmax)
                if new_cmax is None:
                    rec.ninf_max += 1
                    d.dninf_max += 1
                else:
                    rec.max_acc.add(new_cmax)
                    d.dmax.add(new_cmax)
            else:
                rec = self.act[kind][ridx]
                if old_cmin is None:
                    rec.ninf_min -= 1
                else:
                    rec.min_acc.sub(old_cmin)
                if new_cmin is None:
                    rec.ninf_min += 1
                else:
                    rec.min_acc.add(new_cmin)
                if old_cmax is None:
                    rec.ninf_max -= 1
                else:
                    rec.max_acc.sub(old_cmax)
                if new_cmax is None:
                    rec.ninf_max += 1
                else:
                    rec.max_acc.add(new_cmax)

    def rhs_shift(self, kind: str, ridx: int, which: int, amount: float) -> None:
        """Buffer a linking-row rhs shift (which: 0 = b/d, 1 = f)."""
        d = self._link_delta(kind, ridx)
        d.drhs[which].add(amount)

    # -- synchronization -------------------------------------------------

    def buffers_empty(self) -> bool:
        if self._col_buf and any(v != 0 for v in self._col_buf.values()):
            return False
        for d in self._buf.values():
            if d.dnnz or d.dninf_min or d.dninf_max:
                return False
            if d.dmin.parts or d.dmax.parts:
                return False
            if any(acc.parts for acc in d.drhs):
                return False
        return True

    def sync(self, comm: Optional[Communicator], link_rows: dict[str, list[int]],
             x0_cols: list[int], rhs_arrays) -> None:
        """Fold buffered deltas into global linking records on every rank.

        ``link_rows[kind]`` lists linking row indices (identical across
        ranks); ``x0_cols`` the x0 column indices; ``rhs_arrays[kind]`` the
        replicated rhs arrays ((b,) for eq, (d, f) for ineq) updated in place.
        """
        self.layout_id += 1
        self.stats.syncs += 1
        for kind, op, n_rhs in ((EQ, _SYNC_EQ_OP, 1), (INEQ, _SYNC_INEQ_OP, 2)):
            buf = []
            for ridx in link_rows[kind]:
                d = self._buf.get((kind, ridx))
                if d is None:
                    buf.append(((), (), 0, 0, 0) + ((),) * n_rhs)
                else:
                    buf.append(
                        (d.dmin.snapshot(), d.dmax.snapshot(), d.dninf_min,
                         d.dninf_max, d.dnnz)
                        + tuple(acc.snapshot() for acc in d.drhs)
                    )
            if comm is not None:
                buf = comm.allreduce(buf, op)
            for ridx, tot in zip(link_rows[kind], buf):
                dmin, dmax, dninf_min, dninf_max, dnnz = tot[:5]
                rec = self.link_global[kind][ridx]
                rec.min_acc.add_parts(dmin)
                rec.max_acc.add_parts(dmax)
                rec.ninf_min += dninf_min
                rec.ninf_max += dninf_max
                self.link_row_nnz_global[kind][ridx] += dnnz
                for which in range(n_rhs):
                    shift = exact_sum_parts(tot[5 + which])
                    if shift != 0.0:
                        arr = rhs_arrays[kind][which]
                        if arr[ridx] not in (INF, -INF):
                            arr[ridx] += shift
        col_buf = [self._col_buf.get(c, 0) for c in x0_cols]
        if comm is not None:
            col_buf = comm.allreduce(col_buf, OP_SUM)
        for c, dnnz in zip(x0_cols, col_buf):
            self.col0_nnz_global[c] += dnnz
        self._buf.clear()
        self._col_buf.clear()
