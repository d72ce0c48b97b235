"""Exact floating-point accumulation.

Row activities are maintained incrementally (entries enter and leave as the
problem shrinks).  Plain running float sums drift, and the drift depends on
update order, which would make incrementally tracked activities disagree with
a from-scratch recomputation at the bit level.  An expansion accumulator keeps
the *exact* value of the running sum as a list of non-overlapping doubles, so
add/remove sequences in any order reproduce the exact set sum, and reading the
value rounds once.
"""

from __future__ import annotations

import math
from fractions import Fraction

_COMPRESS_AT = 48


def _two_sum(a: float, b: float) -> tuple[float, float]:
    s = a + b
    bv = s - a
    av = s - bv
    return s, (a - av) + (b - bv)


class ExactAccumulator:
    """Running sum of doubles with exact add/subtract.

    The internal representation is a list of doubles whose mathematical sum is
    exactly the accumulated value.  ``value()`` returns the correctly rounded
    double, independent of the order in which terms were added or removed.
    """

    __slots__ = ("parts",)

    def __init__(self, initial: float = 0.0):
        self.parts: list[float] = [initial] if initial else []

    def add(self, x: float) -> None:
        if x == 0.0:
            return
        parts = self.parts
        new: list[float] = []
        for p in parts:
            x, err = _two_sum(x, p)
            if err != 0.0:
                new.append(err)
        if x != 0.0:
            new.append(x)
        self.parts = new
        if len(new) > _COMPRESS_AT:
            self._compress()

    def sub(self, x: float) -> None:
        self.add(-x)

    def _compress(self) -> None:
        total = Fraction(0)
        for p in self.parts:
            total += Fraction(p)
        out: list[float] = []
        while total:
            hi = float(total)
            if math.isinf(hi):  # pragma: no cover - magnitudes out of range
                out = [float(total)]
                break
            out.append(hi)
            total -= Fraction(hi)
        self.parts = out

    def value(self) -> float:
        return math.fsum(self.parts)

    def clear(self) -> None:
        self.parts = []

    def snapshot(self) -> tuple[float, ...]:
        """Exact value as a transferable tuple of doubles."""
        self._compress()
        return tuple(self.parts)

    def add_parts(self, parts) -> None:
        for p in parts:
            self.add(p)

    def copy(self) -> "ExactAccumulator":
        c = ExactAccumulator()
        c.parts = list(self.parts)
        return c

    def __repr__(self) -> str:  # pragma: no cover - debug aid
        return f"ExactAccumulator({self.value()!r})"


def exact_sum_parts(parts) -> float:
    """Correctly rounded sum of a sequence of doubles."""
    return math.fsum(parts)


def merge_snapshots(snaps) -> tuple[float, ...]:
    """Combine exact-sum snapshots; commutative and associative by value."""
    acc = ExactAccumulator()
    for snap in snaps:
        acc.add_parts(snap)
    return acc.snapshot()
