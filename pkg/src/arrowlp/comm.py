"""In-process message passing for N logical ranks.

Collective calls (allreduce / allgather / barrier) are blocking rendezvous
points: a call returns only once every rank has entered the same call at the
same sequence position.  Two execution modes share one test surface:

* ``lockstep``: ranks run round-robin under a baton; exactly one rank executes
  between collective calls, so runs are bit-reproducible and divergent
  collective sequences are detected instead of deadlocking.
* ``threaded``: each rank is an OS thread running freely between collectives.

Reduction results are folded in rank-ascending order in both modes (a
gather-then-fold), so numerical results do not depend on thread scheduling.
Operators declared commutative-associative may opt into arrival-order folding
via ``deterministic=False``.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence

from ._exactsum import merge_snapshots

_RUN, _PENDING, _DONE = 0, 1, 2


class ProtocolFault(RuntimeError):
    """A rank diverged from the collective call sequence."""

    def __init__(self, rank: int, call_index: int, kind: str, detail: str):
        self.rank = rank
        self.call_index = call_index
        self.kind = kind
        super().__init__(
            f"protocol fault at rank {rank}, call #{call_index} ({kind}): {detail}"
        )


class RankFailed(RuntimeError):
    """Wrapper fault used to unblock peers when a rank raises."""


@dataclass(frozen=True)
class ReduceOperator:
    """Binary reduction with an identity element.

    ``commutative`` declares the combine function commutative-associative,
    which permits arrival-order folding and is exercised by shuffle tests.
    """

    name: str
    identity: Any
    combine: Callable[[Any, Any], Any]
    commutative: bool = True


OP_SUM = ReduceOperator("sum", 0, lambda a, b: a + b)
OP_MIN = ReduceOperator("min", float("inf"), min)
OP_MAX = ReduceOperator("max", float("-inf"), max)
OP_AND = ReduceOperator("and", True, lambda a, b: bool(a) and bool(b))
OP_OR = ReduceOperator("or", False, lambda a, b: bool(a) or bool(b))

_U64 = (1 << 64) - 1
OP_WRAP_ADD64 = ReduceOperator("wrap_add64", 0, lambda a, b: (a + b) & _U64)

# Exact float summation over snapshot tuples: value-commutative/associative.
OP_EXACT_SUM = ReduceOperator("exact_sum", (), lambda a, b: merge_snapshots((a, b)))


def op_tuple(*ops: ReduceOperator) -> ReduceOperator:
    """Elementwise combine over fixed-length tuples."""

    def combine(a, b):
        return tuple(op.combine(x, y) for op, x, y in zip(ops, a, b))

    return ReduceOperator(
        "tuple(" + ",".join(o.name for o in ops) + ")",
        tuple(o.identity for o in ops),
        combine,
        all(o.commutative for o in ops),
    )


class _Session:
    def __init__(self, nranks: int, mode: str, timeout: float, deterministic: bool):
        if mode not in ("lockstep", "threaded"):
            raise ValueError(f"unknown mode {mode!r}")
        self.n = nranks
        self.mode = mode
        self.timeout = timeout
        self.deterministic = deterministic
        self.cond = threading.Condition()
        self.state = [_RUN] * nranks
        self.call_index = [0] * nranks
        self.pending: dict[int, tuple[int, str, Any, Any]] = {}
        self.arrival: list[int] = []
        self.gen = 0
        self.result_latest: Any = None
        self.fault: Optional[BaseException] = None
        self.current = 0  # lockstep baton

    # All methods below assume self.cond is held.

    def _fail(self, exc: BaseException) -> None:
        if self.fault is None:
            self.fault = exc
        self.cond.notify_all()

    def _advance_from(self, rank: int) -> None:
        if self.mode != "lockstep":
            return
        for step in range(1, self.n + 1):
            r = (rank + step) % self.n
            if self.state[r] == _RUN:
                self.current = r
                return
        # No runnable rank: either a resolution is imminent (handled by the
        # caller) or the remaining pending ranks can never be joined.
        if self.pending and any(s == _DONE for s in self.state):
            first = min(self.pending)
            seq, kind, _, _ = self.pending[first]
            self._fail(
                ProtocolFault(first, seq, kind, "peer rank exited before joining")
            )

    def _resolve(self) -> None:
        entries = [self.pending[r] for r in range(self.n)]
        seq0, kind0, _, op0 = entries[0]
        for r in range(1, self.n):
            seq, kind, _, _ = entries[r]
            if seq != seq0 or kind != kind0:
                self._fail(
                    ProtocolFault(
                        r,
                        seq,
                        kind,
                        f"diverged from rank 0 (expected call #{seq0} {kind0})",
                    )
                )
                return
        if kind0 == "allreduce":
            lengths = {len(e[2]) for e in entries}
            if len(lengths) > 1:
                self._fail(
                    ProtocolFault(0, seq0, kind0, f"buffer lengths differ: {lengths}")
                )
                return
            order = range(self.n)
            if not self.deterministic and op0.commutative:
                order = self.arrival
            width = lengths.pop()
            out = [op0.identity] * width
            for r in order:
                buf = entries[r][2]
                for i in range(width):
                    out[i] = op0.combine(out[i], buf[i])
            self.result_latest = out
        elif kind0 == "allgather":
            out = []
            for r in range(self.n):
                out.extend(entries[r][2])
            self.result_latest = out
        else:  # barrier
            self.result_latest = None
        self.pending.clear()
        self.arrival = []
        self.gen += 1
        for r in range(self.n):
            if self.state[r] == _PENDING:
                self.state[r] = _RUN
        self.current = 0
        self.cond.notify_all()

    def collective(self, rank: int, kind: str, payload: Any, op: Any) -> Any:
        with self.cond:
            if self.fault is not None:
                raise self.fault
            seq = self.call_index[rank]
            self.call_index[rank] += 1
            if self.pending:
                other = min(self.pending)
                oseq, okind, _, _ = self.pending[other]
                if oseq != seq or okind != kind:
                    self._fail(
                        ProtocolFault(
                            rank,
                            seq,
                            kind,
                            f"rank {other} is in call #{oseq} ({okind})",
                        )
                    )
                    raise self.fault
            if any(s == _DONE for s in self.state):
                done = self.state.index(_DONE)
                self._fail(
                    ProtocolFault(rank, seq, kind, f"rank {done} already exited")
                )
                raise self.fault
            self.state[rank] = _PENDING
            self.pending[rank] = (seq, kind, payload, op)
            self.arrival.append(rank)
            entry_gen = self.gen
            if len(self.pending) == self.n:
                self._resolve()
            else:
                self._advance_from(rank)
                self.cond.notify_all()
            deadline = time.monotonic() + self.timeout
            while True:
                if self.fault is not None:
                    raise self.fault
                if self.gen > entry_gen and (
                    self.mode != "lockstep" or self.current == rank
                ):
                    return self.result_latest
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    self._fail(
                        ProtocolFault(
                            rank, seq, kind, "collective timed out (deadlock?)"
                        )
                    )
                    raise self.fault
                self.cond.wait(remaining)

    def start_gate(self, rank: int) -> None:
        if self.mode != "lockstep":
            return
        with self.cond:
            while self.fault is None and self.current != rank:
                self.cond.wait(self.timeout)
            if self.fault is not None:
                raise self.fault

    def finish(self, rank: int) -> None:
        with self.cond:
            self.state[rank] = _DONE
            if self.pending:
                seq, kind, _, _ = self.pending[min(self.pending)]
                self._fail(
                    ProtocolFault(
                        min(self.pending), seq, kind, f"rank {rank} exited before joining"
                    )
                )
            self._advance_from(rank)
            self.cond.notify_all()

    def abort(self, rank: int, exc: BaseException) -> None:
        with self.cond:
            self._fail(RankFailed(f"rank {rank} raised: {exc!r}"))


class Communicator:
    """Per-rank handle onto a collective session."""

    def __init__(self, session: _Session, rank: int):
        self._session = session
        self.rank = rank
        self.size = session.n
        self.mode = session.mode

    def allreduce(self, buf: Sequence, op: ReduceOperator = OP_SUM) -> list:
        return self._session.collective(self.rank, "allreduce", list(buf), op)

    def allreduce1(self, value, op: ReduceOperator = OP_SUM):
        return self.allreduce([value], op)[0]

    def allgather(self, local: Sequence) -> list:
        return self._session.collective(self.rank, "allgather", list(local), None)

    def barrier(self) -> None:
        self._session.collective(self.rank, "barrier", None, None)


def run_ranks(
    nranks: int,
    fn: Callable[[Communicator], Any],
    *,
    mode: str = "lockstep",
    timeout: float = 300.0,
    deterministic: bool = True,
) -> list:
    """Run ``fn(comm)`` on ``nranks`` logical ranks; returns per-rank results.

    Any exception raised by a rank aborts the whole session (peers are
    unblocked with a fault) and is re-raised here, lowest rank first.
    """
    session = _Session(nranks, mode, timeout, deterministic)
    results: list = [None] * nranks
    errors: list = [None] * nranks

    def runner(rank: int) -> None:
        comm = Communicator(session, rank)
        try:
            session.start_gate(rank)
            results[rank] = fn(comm)
        except BaseException as exc:  # noqa: BLE001 - must unblock peers
            errors[rank] = exc
            session.abort(rank, exc)
        finally:
            session.finish(rank)

    threads = [
        threading.Thread(target=runner, args=(r,), name=f"rank-{r}", daemon=True)
        for r in range(nranks)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    for exc in errors:
        if exc is not None and not isinstance(exc, (ProtocolFault, RankFailed)):
            raise exc
    for exc in errors:
        if exc is not None:
            raise exc
    return results
