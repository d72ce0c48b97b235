"""Presolve driver: rounds, working limits, invariants.

Fixed order: TinyEntries once at the start; rounds of [ModelCleanup,
SingletonConstr, SingletonVar, VarsFixation, BoundTightening,
ParallelConstrs (local then linking), Permutation]; LinDependencies once at
the end.  A new round starts only while the previous round removed at least
``continuation_threshold`` of the problem (rows + columns + entries) and the
round limit is not exhausted.

Every presolver boundary synchronizes the linking buffers, records a
synchronization event on each rank's stack, agrees on the infeasible /
unbounded status collectively, and (optionally) re-validates the arrowhead
structure, asserting that linking rows and columns never increased.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

from . import presolvers as P
from .comm import Communicator, OP_SUM
from .problem import BlockProblem, validate_arrowhead
from .stack import SyncEvent
from .workspace import Counter, INFEASIBLE, OK, UNBOUNDED, Workspace

REDUCED = "reduced"
STATUS_NAME = {INFEASIBLE: "infeasible", UNBOUNDED: "unbounded"}

ALL_PRESOLVERS = (
    "tiny_entries", "model_cleanup", "singleton_rows", "singleton_cols",
    "fix_variables", "bound_tightening", "parallel_rows_local",
    "parallel_rows_linking", "permutation", "lin_dependencies",
)

_ROUND_SEQUENCE: tuple[tuple[str, Callable], ...] = (
    ("model_cleanup", P.model_cleanup),
    ("singleton_rows", P.singleton_rows),
    ("singleton_cols", P.singleton_cols),
    ("fix_variables", P.fix_variables),
    ("bound_tightening", P.bound_tightening),
    ("parallel_rows_local", P.parallel_rows_local),
    ("parallel_rows_linking", P.parallel_rows_linking),
    ("permutation", P.permute),
)


@dataclass(frozen=True)
class PresolveConfig:
    max_rounds: int = 10
    continuation_threshold: float = 1e-4
    feastol: float = 1e-6
    tiny_entry_tol: float = 1e-10
    parallel_tol: float = 1e-10
    zero_pivot_tol: float = 1e-10
    pivot_threshold: float = 0.1
    enabled: frozenset = frozenset(ALL_PRESOLVERS)
    check_invariants: bool = True

    def __post_init__(self):
        if not (0.0 < self.continuation_threshold < 1.0):
            raise ValueError("continuation threshold must lie in (0, 1)")
        for name in ("feastol", "tiny_entry_tol", "parallel_tol",
                     "zero_pivot_tol", "pivot_threshold"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        unknown = set(self.enabled) - set(ALL_PRESOLVERS)
        if unknown:
            raise ValueError(f"unknown presolvers: {sorted(unknown)}")

    def without(self, *names: str) -> "PresolveConfig":
        return replace(self, enabled=self.enabled - set(names))


class StructureViolation(AssertionError):
    """A presolver broke the arrowhead invariants (a bug, not a data error)."""


@dataclass
class PresolveResult:
    status: str
    message: str = ""
    reduced: Optional[BlockProblem] = None
    stack: list = field(default_factory=list)
    counters: dict = field(default_factory=dict)
    rounds: int = 0
    syncs: int = 0


def should_continue(removed: int, size_at_round_start: int, rounds_done: int,
                    cfg: PresolveConfig) -> bool:
    """The round-limit policy; evaluated on identical data by every rank."""
    if rounds_done >= cfg.max_rounds:
        return False
    if removed == 0:
        return False
    return removed >= cfg.continuation_threshold * size_at_round_start


def _round_total(ws: Workspace, baseline: dict[str, Counter]) -> int:
    total = 0
    for name, ctr in ws.counters.items():
        total += ctr.total() - (baseline.get(name, Counter()).total())
    if ws.comm is not None:
        total = ws.comm.allreduce([total], OP_SUM)[0]
    return total


def run_presolve(p: BlockProblem, cfg: PresolveConfig,
                 comm: Optional[Communicator] = None) -> PresolveResult:
    """Reduce one rank's slice; collective when ``comm`` spans several ranks.

    Returns the reduced problem together with this rank's postsolve stack and
    reduction counters, or the collectively agreed infeasible/unbounded
    verdict with the reduction that produced it.
    """
    ws = Workspace(p, comm, cfg)
    sync_counter = 0
    ws.stack.append(SyncEvent(sync_counter))

    def boundary(name: str) -> Optional[PresolveResult]:
        nonlocal sync_counter
        code, msg = ws.check_status()
        if code != OK:
            return PresolveResult(STATUS_NAME[code], msg, None, ws.stack,
                                  ws.counters, rounds)
        if cfg.check_invariants:
            now_rows, now_cols = ws.linking_counts()
            problems = validate_arrowhead(ws.to_block_problem(), comm)
            if problems:
                raise StructureViolation(
                    f"after {name}: " + "; ".join(problems[:3])
                )
            base_rows, base_cols = link_baseline
            if now_rows > base_rows or now_cols > base_cols:
                raise StructureViolation(
                    f"after {name}: linking counts grew "
                    f"({base_rows}, {base_cols}) -> ({now_rows}, {now_cols})"
                )
            link_baseline[0] = min(base_rows, now_rows)
            link_baseline[1] = min(base_cols, now_cols)
        return None

    def run_one(name: str, fn) -> Optional[PresolveResult]:
        nonlocal sync_counter
        ws.sync()
        sync_counter += 1
        ws.stack.append(SyncEvent(sync_counter))
        ws.current_presolver = name
        fn(ws)
        return boundary(name)

    rounds = 0
    link_baseline = list(ws.linking_counts())

    if "tiny_entries" in cfg.enabled:
        res = run_one("tiny_entries", P.tiny_entries)
        if res:
            return res

    while True:
        size0 = ws.total_size()
        baseline = {k: Counter(**vars(v)) for k, v in ws.counters.items()}
        for name, fn in _ROUND_SEQUENCE:
            if name not in cfg.enabled:
                continue
            res = run_one(name, fn)
            if res:
                return res
        rounds += 1
        ws.sync()
        sync_counter += 1
        ws.stack.append(SyncEvent(sync_counter))
        removed = _round_total(ws, baseline)
        ws.compact()
        if not should_continue(removed, size0, rounds, cfg):
            break

    if "lin_dependencies" in cfg.enabled:
        res = run_one("lin_dependencies", P.lin_dependencies)
        if res:
            return res
        ws.sync()
        sync_counter += 1
        ws.stack.append(SyncEvent(sync_counter))
        ws.compact()

    reduced = ws.to_block_problem()
    return PresolveResult(REDUCED, "", reduced, ws.stack, ws.counters, rounds,
                          ws.tracking.stats.syncs)
