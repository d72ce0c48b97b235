"""End-to-end round trip: presolve, solve the reduced problem with the
reference solver, recover a primal-dual solution of the original problem.

Used by the verification CLI and the acceptance suite.  All ranks execute the
same pipeline; the reduced problem is solved once (rank 0) and shared, and
the recovered solution is assembled identically on every rank.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .comm import Communicator, run_ranks
from .engine import PresolveConfig, PresolveResult, REDUCED, run_presolve
from .oracle import OPTIMAL, solve_reference
from .postsolve import ReplayState, StackCorruption, postsolve_run
from .problem import (
    BlockAssignment, BlockProblem, MonolithicLP, assemble_monolithic,
    gather_problem, nnz_counts, split_monolithic,
)
from .solution import KKTReport, PrimalDualSolution, kkt_check
from .stack import EQ, INEQ


@dataclass
class RoundTripOutcome:
    status: str  # 'optimal' | 'infeasible' | 'unbounded'
    message: str = ""
    solution: Optional[PrimalDualSolution] = None
    objective: Optional[float] = None
    reduced_objective: Optional[float] = None
    kkt: Optional[KKTReport] = None
    presolve: Optional[PresolveResult] = None
    reduced_sizes: tuple = ()
    original_sizes: tuple = ()


def shared_uid_sets(p: BlockProblem):
    z = p.zero
    cols = frozenset(int(u) for u in z.vars.uids)
    eq = frozenset(int(u) for u in z.eq0_uids) | frozenset(
        int(u) for u in z.link_eq_uids
    )
    ineq = frozenset(int(u) for u in z.ineq0_uids) | frozenset(
        int(u) for u in z.link_ineq_uids
    )
    return cols, eq, ineq


def _seed_state(st: ReplayState, lp_red: MonolithicLP, maps,
                sol: PrimalDualSolution) -> None:
    for k, uid in enumerate(maps.col_uids):
        uid = int(uid)
        st.x[uid] = float(sol.x[k])
        st.gamma[uid] = float(sol.gamma[k])
        st.phi[uid] = float(sol.phi[k])
    for k, uid in enumerate(maps.eq_uids):
        st.y[int(uid)] = float(sol.y[k])
    for k, uid in enumerate(maps.ineq_uids):
        st.zp[int(uid)] = float(sol.zplus[k])
        st.zm[int(uid)] = float(sol.zminus[k])


def _merge_solution(st: ReplayState, original: BlockProblem,
                    dims: tuple[int, int, int],
                    comm: Optional[Communicator]) -> PrimalDualSolution:
    n, m_eq, m_ineq = dims
    mine_cols: dict[int, tuple] = {}
    mine_eq: dict[int, float] = {}
    mine_ineq: dict[int, tuple] = {}
    rank0 = comm is None or comm.rank == 0

    def grab_col(uid: int) -> None:
        if uid not in st.x:
            raise StackCorruption(f"column uid={uid} was never restored")
        mine_cols[uid] = (st.x[uid], st.gamma.get(uid, 0.0), st.phi.get(uid, 0.0))

    def grab_eq(uid: int) -> None:
        mine_eq[uid] = st.y.get(uid, 0.0)

    def grab_ineq(uid: int) -> None:
        mine_ineq[uid] = (st.zp.get(uid, 0.0), st.zm.get(uid, 0.0))

    for i in original.owned:
        blk = original.blocks[i]
        for u in blk.vars.uids:
            grab_col(int(u))
        for u in blk.eq_uids:
            grab_eq(int(u))
        for u in blk.ineq_uids:
            grab_ineq(int(u))
    if rank0:
        z = original.zero
        for u in z.vars.uids:
            grab_col(int(u))
        for arr, grab in ((z.eq0_uids, grab_eq), (z.link_eq_uids, grab_eq)):
            for u in arr:
                grab(int(u))
        for arr in (z.ineq0_uids, z.link_ineq_uids):
            for u in arr:
                grab_ineq(int(u))
    if comm is not None:
        gathered = comm.allgather([(mine_cols, mine_eq, mine_ineq)])
    else:
        gathered = [(mine_cols, mine_eq, mine_ineq)]
    sol = PrimalDualSolution(
        x=np.zeros(n), y=np.zeros(m_eq),
        zplus=np.zeros(m_ineq), zminus=np.zeros(m_ineq),
        gamma=np.zeros(n), phi=np.zeros(n),
    )
    for cols, eqs, ineqs in gathered:
        for uid, (xv, g, p) in cols.items():
            sol.x[uid] = xv
            sol.gamma[uid] = g
            sol.phi[uid] = p
        for uid, yv in eqs.items():
            sol.y[uid] = yv
        for uid, (a, b) in ineqs.items():
            sol.zplus[uid] = a
            sol.zminus[uid] = b
    return sol


def presolve_and_recover(
    p: BlockProblem,
    cfg: PresolveConfig,
    comm: Optional[Communicator],
    dims: tuple[int, int, int],
    kkt_tol: float = 1e-6,
) -> RoundTripOutcome:
    """Full pipeline on one rank's slice (call on every rank of the session)."""
    original_sizes = nnz_counts(p, comm)
    shared = shared_uid_sets(p)
    res = run_presolve(p, cfg, comm)
    if res.status != REDUCED:
        return RoundTripOutcome(res.status, res.message, presolve=res,
                                original_sizes=original_sizes)
    reduced_sizes = nnz_counts(res.reduced, comm)
    full = gather_problem(res.reduced, comm) if comm is not None else res.reduced
    lp_red, maps = assemble_monolithic(full)
    if comm is None or comm.rank == 0:
        sres = solve_reference(lp_red)
        payload = [(sres.status, sres.value, sres.solution)]
    else:
        payload = []
    if comm is not None:
        payload = comm.allgather(payload)
    status, value, sol = payload[0]
    if status != OPTIMAL:
        return RoundTripOutcome(
            status, f"reduced problem is {status}", presolve=res,
            original_sizes=original_sizes, reduced_sizes=reduced_sizes,
        )
    pre = kkt_check(lp_red, sol, 1e-7)
    if not pre.passed(1e-7):
        raise StackCorruption(f"reduced solution fails its own KKT check: {pre}")
    st = ReplayState(comm, *shared)
    _seed_state(st, lp_red, maps, sol)
    postsolve_run(res.stack, st)
    final = _merge_solution(st, p, dims, comm)
    return RoundTripOutcome(
        "optimal", "", final, None, value, None, res, reduced_sizes,
        original_sizes,
    )


def roundtrip_monolithic(
    lp: MonolithicLP,
    asg: BlockAssignment,
    nranks: int = 1,
    cfg: Optional[PresolveConfig] = None,
    mode: str = "lockstep",
    kkt_tol: float = 1e-6,
) -> RoundTripOutcome:
    """Split, presolve on ``nranks`` ranks, solve, postsolve, check KKT."""
    cfg = cfg or PresolveConfig()
    parts = split_monolithic(lp, asg, nranks)
    dims = (lp.ncols, lp.n_eq, lp.n_ineq)

    if nranks == 1:
        out = presolve_and_recover(parts[0], cfg, None, dims, kkt_tol)
    else:
        results = run_ranks(
            nranks,
            lambda comm: presolve_and_recover(parts[comm.rank], cfg, comm,
                                              dims, kkt_tol),
            mode=mode,
        )
        out = results[0]
    if out.status != "optimal":
        return out
    out.kkt = kkt_check(lp, out.solution, kkt_tol)
    out.objective = float(lp.c @ out.solution.x) + lp.offset
    return out
