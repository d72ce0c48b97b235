"""Postsolve stack records.

Each applied reduction pushes one record holding everything needed to revert
it: values, stage costs, and coefficient snapshots.  Records reference rows
and columns by uid only, so they stay valid across compaction and moves.

Scope of a record:
  * ``local``  - concerns entities owned by this rank; replayed rank-locally.
  * ``repl``   - concerns replicated entities only (0-block rows, x0 data);
                 pushed identically by every rank and replayed redundantly.
  * ``link``   - concerns linking rows or x0 columns whose recovery needs
                 cross-rank data; pushed by every rank (with per-rank slices)
                 and replayed as a collective rendezvous.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

EQ = "eq"
INEQ = "ineq"

LOCAL = "local"
REPL = "repl"
LINKC = "link"

# Entry tuples in column snapshots: (row_kind, row_uid, coefficient).
# Entry tuples in row snapshots: (col_uid, coefficient).


@dataclass
class FixedVar:
    """Column fixed at ``value``; entries removed and rhs shifted."""

    col_uid: int
    value: float
    cost: float
    local_entries: tuple  # this rank's rows touching the column
    repl_entries: tuple  # replicated rows touching the column
    scope: str = LOCAL


@dataclass
class SingletonEqRowFix:
    """Equality singleton row a*x_j = b fixed x_j; row dual recovers c_j/a."""

    row_uid: int
    col_uid: int
    a: float
    rhs: float
    value: float
    cost: float
    local_entries: tuple  # column snapshot excluding the singleton row
    repl_entries: tuple
    old_lower: float = 0.0
    old_upper: float = 0.0
    scope: str = LOCAL


@dataclass
class SingletonRowBound:
    """Inequality singleton row folded into the variable bounds."""

    row_uid: int
    col_uid: int
    a: float
    row_d: float
    row_f: float
    old_lower: float
    old_upper: float
    new_lower: float
    new_upper: float
    lo_from_row: bool
    up_from_row: bool
    scope: str = LOCAL


@dataclass
class SubstitutedCol:
    """Implied-free singleton column substituted out of an equality row."""

    col_uid: int
    row_uid: int
    a: float
    rhs: float
    cost: float
    row_entries: tuple  # (col_uid, coeff) excluding the substituted column
    scope: str = LOCAL


@dataclass
class ForcedVarRec:
    col_uid: int
    a: float
    value: float
    at_upper: bool
    cost: float
    local_entries: tuple  # column snapshot excluding the forcing row
    repl_entries: tuple


@dataclass
class ForcedRow:
    """Row whose activity bound forces every variable to one of its bounds.

    ``side`` is 'min' when the minimum activity attains the relevant bound
    (variables at their activity-minimizing bounds), 'max' symmetric.
    """

    kind: str
    row_uid: int
    side: str
    rhs_lo: float
    rhs_hi: float
    fixed_local: tuple  # ForcedVarRec for this rank's columns
    fixed_repl: tuple  # ForcedVarRec for x0 columns (identical on all ranks)
    scope: str = LOCAL


@dataclass
class DeletedRedundantRow:
    """Row implied by variable bounds; dual zero."""

    kind: str
    row_uid: int
    scope: str = LOCAL


@dataclass
class DeletedParallelRow:
    """Deleted the duplicate of a proportional row pair (deleted = lam * kept)."""

    kept_kind: str
    kept_uid: int
    del_kind: str
    del_uid: int
    lam: float
    del_lo: float
    del_hi: float
    kept_old_lo: float
    kept_old_hi: float
    kept_new_lo: float
    kept_new_hi: float
    kept_local_entries: tuple  # (col_uid, coeff): this rank's slice of kept row
    kept_repl_entries: tuple  # x0 slice of kept row
    scope: str = LOCAL


@dataclass
class LinDepCombination:
    """Equality row eliminated as a linear combination of kept rows."""

    row_uid: int
    weights: tuple  # (row_uid, coeff) over kept pivot rows
    moved: bool  # True: transformed row kept (in the 0-block); False: removed
    scope: str = LOCAL


@dataclass
class BoundTightened:
    """Bound implied by one row; may need a dual transfer when binding."""

    col_uid: int
    side: str  # 'lo' | 'up'
    old_value: float
    new_value: float
    row_kind: str
    row_uid: int
    row_entries: tuple  # (col_uid, coeff) full source-row snapshot
    row_lo: float
    row_hi: float
    scope: str = LOCAL


@dataclass
class BoundTightenedLink:
    """Collectively applied bound change on a linking column.

    Only the winning rank holds the source-row snapshot; peers carry the
    rendezvous record so replay stays aligned.
    """

    col_uid: int
    side: str
    old_value: float
    new_value: float
    winner_rank: int
    row_kind: str = ""
    row_uid: int = -1
    row_entries: tuple = ()
    row_lo: float = 0.0
    row_hi: float = 0.0
    zero_row: bool = False  # source row is replicated (0-block)
    scope: str = LINKC


@dataclass
class PermutationMove:
    """Row/column relocation; values and duals are uid-keyed, so replay is a no-op."""

    entity: str  # 'eq-row' | 'ineq-row' | 'col'
    uid: int
    from_group: int
    to_group: int
    scope: str = LOCAL


@dataclass
class SyncEvent:
    """Collective flush point for buffered dual updates to shared entities."""

    layout_id: int
    scope: str = LINKC


STACK_KINDS = {
    cls.__name__: cls
    for cls in (
        FixedVar, SingletonEqRowFix, SingletonRowBound, SubstitutedCol,
        ForcedRow, ForcedVarRec, DeletedRedundantRow, DeletedParallelRow,
        LinDepCombination, BoundTightened, BoundTightenedLink,
        PermutationMove, SyncEvent,
    )
}


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, (ForcedVarRec,)):
        return {"__kind__": "ForcedVarRec", **{
            k: _plain(getattr(value, k)) for k in value.__dataclass_fields__
        }}
    return value


def entry_to_dict(entry) -> dict:
    d = {"__kind__": type(entry).__name__}
    for name in entry.__dataclass_fields__:
        d[name] = _plain(getattr(entry, name))
    return d


def _revive(value, field_name: str):
    if isinstance(value, list):
        return tuple(_revive(v, field_name) for v in value)
    if isinstance(value, dict) and value.get("__kind__") == "ForcedVarRec":
        kwargs = {k: _revive(v, k) for k, v in value.items() if k != "__kind__"}
        return ForcedVarRec(**kwargs)
    return value


def entry_from_dict(d: dict):
    kind = d.get("__kind__")
    cls = STACK_KINDS.get(kind)
    if cls is None:
        raise ValueError(f"unknown stack entry kind {kind!r}")
    kwargs = {}
    for name in cls.__dataclass_fields__:
        if name not in d:
            raise ValueError(f"stack entry {kind} missing field {name!r}")
        kwargs[name] = _revive(d[name], name)
    return cls(**kwargs)
