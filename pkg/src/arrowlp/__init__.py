"""arrowlp: structure-preserving presolve/postsolve for arrowhead LPs."""

from .comm import Communicator, ProtocolFault, ReduceOperator, run_ranks
from .engine import PresolveConfig, PresolveResult, run_presolve
from .oracle import brute_force_parallel_rows, dense_rank, solve_reference
from .pipeline import RoundTripOutcome, presolve_and_recover, roundtrip_monolithic
from .problem import (
    BlockAssignment, BlockProblem, MonolithicLP, assemble_monolithic,
    gather_problem, nnz_counts, split_monolithic, validate_arrowhead,
)
from .solution import KKTReport, PrimalDualSolution, kkt_check
from .sparse import SparseMatrix

__version__ = "0.1.0"

__all__ = [
    "Communicator", "ProtocolFault", "ReduceOperator", "run_ranks",
    "PresolveConfig", "PresolveResult", "run_presolve",
    "brute_force_parallel_rows", "dense_rank", "solve_reference",
    "RoundTripOutcome", "presolve_and_recover", "roundtrip_monolithic",
    "BlockAssignment", "BlockProblem", "MonolithicLP", "assemble_monolithic",
    "gather_problem", "nnz_counts", "split_monolithic", "validate_arrowhead",
    "KKTReport", "PrimalDualSolution", "kkt_check", "SparseMatrix",
    "__version__",
]
