"""Factor-graph message passing and Blackwell-channel binning codes.

Belief propagation and reinforced belief propagation for binary constraint
satisfaction, a non-linear sparse code construction for the Blackwell
broadcast channel, a Bethe entropy estimator, and a Monte-Carlo harness.
"""

from .blackwell import (
    BinIndices,
    BlackwellCode,
    EncodingFailure,
    ForbiddenPairError,
    RatePair,
    build_code,
    decode,
    encode,
    in_capacity_region,
    pair_to_symbol,
    symbols_to_pairs,
    transmit,
)
from .entropy import EntropyEstimate, bethe_entropy, entropy_sweep
from .factor_graph import FactorGraph, FactorNode, GraphError, build_graph, validate
from .gates import (
    FactorKind,
    GatePool,
    NonlinearGate,
    ProductConstraint,
    TruthTable,
    Xor,
    build_gate_pool,
    is_balanced,
    is_fully_canalized,
    sample_balanced_noncanalized,
)
from .harness import SimulationReport, TrialRecord, iteration_scaling, run_trial, simulate
from .propagation import (
    BeliefState,
    ContradictionError,
    Engine,
    EngineConfig,
    ReinforcementSchedule,
    SolveOutcome,
    Status,
    check_assignment,
    default_cutoff,
    gamma_at,
    hard_decision,
    run_bp,
    run_rbp,
)

__all__ = [name for name in dir() if not name.startswith("_")]
