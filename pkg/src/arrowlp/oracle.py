"""Desk-scale reference LP solver and brute-force detectors.

This module is the independent ground truth used by the test suite: a dense
bounded-variable simplex (two-phase, Dantzig pricing with a Bland fallback),
an O(n^2) parallel-row scan, and a full-pivot elimination rank.  None of it
shares code with the presolve path it cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problem import MonolithicLP
from .solution import PrimalDualSolution, kkt_check

DESK_SCALE_CAP = 2000

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

_AT_LOWER, _AT_UPPER, _FREE_NB, _BASIC = 0, 1, 2, 3


class DeskScaleExceeded(ValueError):
    pass


@dataclass
class SolveResult:
    status: str
    value: Optional[float] = None
    solution: Optional[PrimalDualSolution] = None


@dataclass
class DenseLP:
    """Dense snapshot of an LP in equality/inequality/bounds form."""

    A: np.ndarray
    b: np.ndarray
    C: np.ndarray
    d: np.ndarray
    f: np.ndarray
    l: np.ndarray
    u: np.ndarray
    c: np.ndarray
    offset: float = 0.0

    @classmethod
    def from_monolithic(cls, lp: MonolithicLP) -> "DenseLP":
        return cls(
            lp.A.to_dense(), lp.b.astype(float).copy(),
            lp.C.to_dense(), lp.d.astype(float).copy(), lp.f.astype(float).copy(),
            lp.l.astype(float).copy(), lp.u.astype(float).copy(),
            lp.c.astype(float).copy(), lp.offset,
        )


def solve_reference(lp, *, feastol: float = 1e-9, max_iter: int = 200_000) -> SolveResult:
    """Solve a desk-scale LP; Optimal results carry a primal-dual pair.

    Accepts a ``MonolithicLP`` or a ``DenseLP``.  Deterministic for a given
    input.  Refuses problems beyond the desk-scale cap.
    """
    mono = lp if isinstance(lp, MonolithicLP) else None
    dlp = DenseLP.from_monolithic(lp) if mono is not None else lp
    m_a, n = dlp.A.shape
    m_c = dlp.C.shape[0]
    if max(m_a + m_c, n) > DESK_SCALE_CAP:
        raise DeskScaleExceeded(f"problem exceeds desk-scale cap {DESK_SCALE_CAP}")

    m = m_a + m_c
    # Slack form: [A 0; C -I] [x; s] = [b; 0], with s in [d, f].
    E = np.zeros((m, n + m_c))
    E[:m_a, :n] = dlp.A
    E[m_a:, :n] = dlp.C
    for i in range(m_c):
        E[m_a + i, n + i] = -1.0
    lo = np.concatenate([dlp.l, dlp.d])
    hi = np.concatenate([dlp.u, dlp.f])
    nv = n + m_c

    x = np.zeros(nv)
    status = np.empty(nv, dtype=np.int8)
    for j in range(nv):
        if np.isfinite(lo[j]):
            x[j], status[j] = lo[j], _AT_LOWER
        elif np.isfinite(hi[j]):
            x[j], status[j] = hi[j], _AT_UPPER
        else:
            x[j], status[j] = 0.0, _FREE_NB

    rhs = np.concatenate([dlp.b, np.zeros(m_c)])
    resid = rhs - E @ x
    # One artificial per row, signed so each starts at a nonnegative level.
    sig = np.where(resid >= 0.0, 1.0, -1.0)
    Efull = np.hstack([E, np.diag(sig)])
    lo = np.concatenate([lo, np.zeros(m)])
    hi = np.concatenate([hi, np.full(m, np.inf)])
    x = np.concatenate([x, np.abs(resid)])
    status = np.concatenate([status, np.full(m, _BASIC, dtype=np.int8)])
    basis = list(range(nv, nv + m))
    ntot = nv + m

    binv = np.diag(1.0 / sig) if m else np.zeros((0, 0))

    def refactor() -> None:
        nonlocal binv
        if m == 0:
            return
        B = Efull[:, basis]
        binv = np.linalg.inv(B)
        nb_mask = np.ones(ntot, dtype=bool)
        nb_mask[basis] = False
        xn = x.copy()
        xn[basis] = 0.0
        xb = binv @ (rhs - Efull[:, nb_mask] @ xn[nb_mask])
        x[basis] = xb

    def iterate(cost: np.ndarray) -> str:
        nonlocal binv
        bland = False
        stall = 0
        since_refactor = 0
        for _ in range(max_iter):
            y = cost[basis] @ binv
            red = cost - y @ Efull
            movable = hi > lo
            cand_mask = (
                ((status == _AT_LOWER) & (red < -1e-9) & movable)
                | ((status == _AT_UPPER) & (red > 1e-9) & movable)
                | ((status == _FREE_NB) & (np.abs(red) > 1e-9))
            )
            if not cand_mask.any():
                return OPTIMAL
            if bland:
                j = int(np.nonzero(cand_mask)[0][0])
            else:
                j = int(np.argmax(np.where(cand_mask, np.abs(red), 0.0)))
            if status[j] == _AT_UPPER:
                sigma = -1.0
            elif status[j] == _AT_LOWER:
                sigma = 1.0
            else:
                sigma = 1.0 if red[j] < 0 else -1.0
            col = binv @ Efull[:, j]
            # Ratio test: entering moves by t*sigma >= 0.
            own = hi[j] - lo[j]
            t_max = own if np.isfinite(own) else np.inf
            leave, leave_to = -1, 0
            if m:
                dk = -sigma * col
                barr = np.asarray(basis)
                with np.errstate(divide="ignore", invalid="ignore"):
                    up = np.where(dk > 1e-11, (hi[barr] - x[barr]) / dk, np.inf)
                    dn = np.where(dk < -1e-11, (x[barr] - lo[barr]) / -dk, np.inf)
                ratios = np.minimum(up, dn)
                if bland:
                    # Lowest-variable-index tie break among minimal ratios.
                    rmin = ratios.min()
                    if rmin < t_max - 1e-13:
                        ties = np.nonzero(ratios <= rmin + 1e-13)[0]
                        leave = int(ties[np.argmin(barr[ties])])
                else:
                    k = int(np.argmin(ratios))
                    if ratios[k] < t_max - 1e-13:
                        leave = k
                if leave >= 0:
                    t_max = max(float(ratios[leave]), 0.0)
                    leave_to = _AT_UPPER if up[leave] <= dn[leave] else _AT_LOWER
            if not np.isfinite(t_max):
                return UNBOUNDED
            if t_max <= 1e-13:
                stall += 1
                if stall > 2 * (m + 10):
                    bland = True
            else:
                stall = 0
            x[basis] = x[basis] - sigma * t_max * col
            if leave < 0:
                # Bound flip: entering traverses its whole range.
                x[j] = x[j] + sigma * t_max
                status[j] = _AT_UPPER if status[j] == _AT_LOWER else _AT_LOWER
                continue
            out = basis[leave]
            x[out] = lo[out] if leave_to == _AT_LOWER else hi[out]
            status[out] = leave_to
            x[j] = x[j] + sigma * t_max
            status[j] = _BASIC
            basis[leave] = j
            alpha = col[leave]
            binv[leave] /= alpha
            col_k = col.copy()
            col_k[leave] = 0.0
            binv -= np.outer(col_k, binv[leave])
            since_refactor += 1
            if since_refactor >= 100:
                refactor()
                since_refactor = 0
        raise RuntimeError("simplex iteration limit hit")

    # Phase 1: drive artificials to zero.
    if m:
        cost1 = np.zeros(ntot)
        cost1[nv:] = 1.0
        st = iterate(cost1)
        refactor()
        art_level = float(np.sum(x[nv:]))
        if st != OPTIMAL or art_level > feastol * (1.0 + float(np.abs(rhs).max(initial=0.0))):
            return SolveResult(INFEASIBLE)
        hi[nv:] = 0.0
        x[nv:] = np.where(np.array(status[nv:]) == _BASIC, x[nv:], 0.0)

    cost2 = np.zeros(ntot)
    cost2[:n] = dlp.c
    st = iterate(cost2)
    if st == UNBOUNDED:
        return SolveResult(UNBOUNDED)
    refactor()

    y_all = cost2[basis] @ binv if m else np.zeros(0)
    red = cost2 - y_all @ Efull if m else cost2.copy()
    y = y_all[:m_a].copy()
    w = y_all[m_a:].copy()  # net inequality row duals
    zplus = np.maximum(w, 0.0)
    zminus = np.maximum(-w, 0.0)
    gamma = np.zeros(n)
    phi = np.zeros(n)
    for j in range(n):
        if status[j] == _BASIC:
            continue
        r = red[j]
        if r > 0.0 and np.isfinite(dlp.l[j]):
            gamma[j] = r
        elif r < 0.0 and np.isfinite(dlp.u[j]):
            phi[j] = -r
    sol = PrimalDualSolution(x[:n].copy(), y, zplus, zminus, gamma, phi)
    value = float(dlp.c @ sol.x) + dlp.offset
    if mono is not None:
        report = kkt_check(mono, sol, 1e-8)
        if not report.passed(1e-8):  # pragma: no cover - solver defect guard
            raise RuntimeError(f"reference solve failed self-check: {report}")
    return SolveResult(OPTIMAL, value, sol)


def proportional_ratio(
    row_a: dict[int, float], row_b: dict[int, float], tol: float
) -> Optional[float]:
    """lam with row_b == lam*row_a within tol, or None.  Rows must be nonempty."""
    if set(row_a) != set(row_b):
        return None
    first = min(row_a)
    if row_a[first] == 0.0:
        return None
    lam = row_b[first] / row_a[first]
    for k, va in row_a.items():
        if abs(row_b[k] - lam * va) > tol * (1.0 + abs(lam * va)):
            return None
    return lam


def brute_force_parallel_rows(rows, tol: float = 1e-10) -> set[tuple[int, int, float]]:
    """Exact pairwise proportionality scan.

    ``rows`` is a sequence of {col: value} dicts (or a dense 2-D array).
    Returns (i, j, lam) triples with i < j and row_j == lam * row_i.
    Empty rows never pair.
    """
    if isinstance(rows, np.ndarray):
        rows = [
            {int(c): float(v) for c, v in enumerate(r) if v != 0.0} for r in rows
        ]
    out = set()
    n = len(rows)
    for i in range(n):
        if not rows[i]:
            continue
        for j in range(i + 1, n):
            if len(rows[j]) != len(rows[i]):
                continue
            lam = proportional_ratio(rows[i], rows[j], tol)
            if lam is not None:
                out.add((i, j, lam))
    return out


def dense_rank(matrix, tol: float = 1e-10) -> int:
    """Rank by Gaussian elimination with full pivoting at tolerance ``tol``."""
    a = np.array(matrix, dtype=float, copy=True)
    if a.size == 0:
        return 0
    scale = max(1.0, float(np.abs(a).max()))
    rank = 0
    rows = list(range(a.shape[0]))
    cols = list(range(a.shape[1]))
    while rows and cols:
        sub = np.abs(a[np.ix_(rows, cols)])
        k = int(np.argmax(sub))
        ri, ci = divmod(k, len(cols))
        if sub[ri, ci] <= tol * scale:
            break
        piv_r, piv_c = rows[ri], cols[ci]
        rank += 1
        rows.pop(ri)
        cols.pop(ci)
        piv = a[piv_r, piv_c]
        for r in rows:
            factor = a[r, piv_c] / piv
            if factor != 0.0:
                a[r, :] -= factor * a[piv_r, :]
    return rank
