"""Primal-dual solution container and the KKT residual checker."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import MonolithicLP


@dataclass
class PrimalDualSolution:
    """Indexed like the problem it belongs to (reduced or original).

    ``y`` is free per equality row; ``zplus``/``zminus`` are the nonnegative
    duals of the inequality lower/upper sides; ``gamma``/``phi`` those of the
    variable lower/upper bounds.  Duals of infinite bounds are zero.
    """

    x: np.ndarray
    y: np.ndarray
    zplus: np.ndarray
    zminus: np.ndarray
    gamma: np.ndarray
    phi: np.ndarray

    def copy(self) -> "PrimalDualSolution":
        return PrimalDualSolution(
            self.x.copy(), self.y.copy(), self.zplus.copy(), self.zminus.copy(),
            self.gamma.copy(), self.phi.copy(),
        )


@dataclass
class KKTReport:
    max_primal: float
    max_dual: float
    max_compl: float
    obj_gap: float
    primal_objective: float
    dual_objective: float

    def max_violation(self) -> float:
        return max(self.max_primal, self.max_dual, self.max_compl, self.obj_gap)

    def passed(self, tol: float) -> bool:
        return self.max_violation() <= tol

    def __str__(self) -> str:
        return (
            f"primal {self.max_primal:.3e}  dual {self.max_dual:.3e}  "
            f"compl {self.max_compl:.3e}  gap {self.obj_gap:.3e}"
        )


def _dual_objective(lp: MonolithicLP, s: PrimalDualSolution) -> float:
    total = float(lp.b @ s.y) if len(s.y) else 0.0
    for i in range(lp.n_ineq):
        if s.zplus[i]:
            total += lp.d[i] * s.zplus[i]
        if s.zminus[i]:
            total -= lp.f[i] * s.zminus[i]
    for j in range(lp.ncols):
        if s.gamma[j]:
            total += lp.l[j] * s.gamma[j]
        if s.phi[j]:
            total -= lp.u[j] * s.phi[j]
    return total


def kkt_check(lp: MonolithicLP, s: PrimalDualSolution, tol: float = 1e-6) -> KKTReport:
    """Scaled residuals of primal/dual feasibility, complementarity, and gap.

    All residuals are reported relative to their natural scale, so the report
    passes a tolerance ``tol`` when every scaled violation is at most ``tol``.
    Complementarity products are scaled by (1+|dual|)(1+|argument scale|),
    which tolerates pairings where a near-fixed variable carries a dual.
    """
    x, n = s.x, lp.ncols
    max_primal = 0.0
    Ax = _matvec(lp.A, x)
    for i in range(lp.n_eq):
        max_primal = max(max_primal, abs(Ax[i] - lp.b[i]) / (1.0 + abs(lp.b[i])))
    Cx = _matvec(lp.C, x)
    for i in range(lp.n_ineq):
        scale_d = 1.0 + (abs(lp.d[i]) if np.isfinite(lp.d[i]) else 0.0)
        scale_f = 1.0 + (abs(lp.f[i]) if np.isfinite(lp.f[i]) else 0.0)
        if np.isfinite(lp.d[i]):
            max_primal = max(max_primal, (lp.d[i] - Cx[i]) / scale_d)
        if np.isfinite(lp.f[i]):
            max_primal = max(max_primal, (Cx[i] - lp.f[i]) / scale_f)
    for j in range(n):
        if np.isfinite(lp.l[j]):
            max_primal = max(max_primal, (lp.l[j] - x[j]) / (1.0 + abs(lp.l[j])))
        if np.isfinite(lp.u[j]):
            max_primal = max(max_primal, (x[j] - lp.u[j]) / (1.0 + abs(lp.u[j])))

    # Dual feasibility: A'y + C'(z+ - z-) + gamma - phi = c, duals signed.
    resid = -lp.c.astype(float).copy()
    _add_rmatvec(lp.A, s.y, resid)
    _add_rmatvec(lp.C, s.zplus - s.zminus, resid)
    resid += s.gamma - s.phi
    max_dual = 0.0
    for j in range(n):
        max_dual = max(max_dual, abs(resid[j]) / (1.0 + abs(lp.c[j])))
    for arr in (s.zplus, s.zminus, s.gamma, s.phi):
        neg = float(arr.min(initial=0.0))
        if neg < 0.0:
            max_dual = max(max_dual, -neg)

    max_compl = 0.0
    for i in range(lp.n_ineq):
        if np.isfinite(lp.d[i]):
            v = abs(s.zplus[i] * (Cx[i] - lp.d[i]))
            max_compl = max(max_compl, v / ((1.0 + s.zplus[i]) * (1.0 + abs(lp.d[i]))))
        elif s.zplus[i]:
            max_compl = max(max_compl, s.zplus[i])
        if np.isfinite(lp.f[i]):
            v = abs(s.zminus[i] * (lp.f[i] - Cx[i]))
            max_compl = max(max_compl, v / ((1.0 + s.zminus[i]) * (1.0 + abs(lp.f[i]))))
        elif s.zminus[i]:
            max_compl = max(max_compl, s.zminus[i])
    for j in range(n):
        if np.isfinite(lp.l[j]):
            v = abs(s.gamma[j] * (x[j] - lp.l[j]))
            max_compl = max(max_compl, v / ((1.0 + s.gamma[j]) * (1.0 + abs(lp.l[j]))))
        elif s.gamma[j]:
            max_compl = max(max_compl, s.gamma[j])
        if np.isfinite(lp.u[j]):
            v = abs(s.phi[j] * (lp.u[j] - x[j]))
            max_compl = max(max_compl, v / ((1.0 + s.phi[j]) * (1.0 + abs(lp.u[j]))))
        elif s.phi[j]:
            max_compl = max(max_compl, s.phi[j])

    pobj = float(lp.c @ x)
    dobj = _dual_objective(lp, s)
    gap = abs(pobj - dobj) / (1.0 + abs(pobj))
    return KKTReport(max_primal, max_dual, max_compl, gap, pobj + lp.offset,
                     dobj + lp.offset)


def _matvec(mat, x) -> np.ndarray:
    out = np.zeros(mat.nrows)
    for i in range(mat.nrows):
        cols, vals = mat.row(i)
        if len(cols):
            out[i] = float(vals @ x[cols])
    return out


def _add_rmatvec(mat, y, out) -> None:
    for i in range(mat.nrows):
        if y[i] == 0.0:
            continue
        cols, vals = mat.row(i)
        for c, v in zip(cols, vals):
            out[c] += v * y[i]
