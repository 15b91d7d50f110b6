"""Belief propagation and reinforced belief propagation over binary factor graphs.

Messages are normalized distributions over {0,1}. The engine keeps per-edge
factor-to-variable messages in log space together with a per-variable field
(the log-sum of all incoming messages), and sweeps the factors one at a time
in a random order each iteration, refreshing the field incrementally. The
sequential sweep is what makes reinforcement reliable on loopy encoding
instances; a synchronous schedule either oscillates or freezes early on the
same graphs.

Reinforcement multiplies each variable-to-factor message by a power gamma(l)
of a memory of the variable's marginal. By default the memory accumulates
across iterations as a leaky sum (m <- field + decay * m); with
cumulative=False it is just the current plain-BP marginal.

The module-level functions (`factor_to_variable`, `variable_to_factor_bp`,
`marginal`, ...) are the scalar reference semantics; `Engine` wraps the
compiled sweep kernel the solvers run on, and the test suite cross-checks
one against the other.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Optional

import numpy as np
from numba import njit

from . import gates
from .factor_graph import FactorGraph

# Floor applied to message components before normalization; keeps the
# sum-product proportionality well-defined without exact zeros.
FLOOR = 1e-300
TIE_TOL = 1e-12
_LOG_FLOOR = math.log(FLOOR)


class ContradictionError(RuntimeError):
    """A message had both components equal to zero."""

    def __init__(self, factor_id: int | None = None):
        self.factor_id = factor_id
        where = f" at factor {factor_id}" if factor_id is not None else ""
        super().__init__(f"contradiction: unnormalizable message{where}")


class BinaryMessage(NamedTuple):
    p0: float
    p1: float


UNIFORM = BinaryMessage(0.5, 0.5)


def _normalize(p0: float, p1: float, factor_id: int | None = None) -> BinaryMessage:
    if p0 <= 0.0 and p1 <= 0.0:
        raise ContradictionError(factor_id)
    p0 = max(p0, FLOOR)
    p1 = max(p1, FLOOR)
    s = p0 + p1
    return BinaryMessage(p0 / s, p1 / s)


class Status(Enum):
    CONVERGED = "converged"
    SOLUTION_FOUND = "solution_found"
    CUTOFF = "cutoff"


@dataclass(frozen=True)
class ReinforcementSchedule:
    gamma0: float
    gamma1: float

    def __post_init__(self):
        for name in ("gamma0", "gamma1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def gamma_at(schedule: ReinforcementSchedule, iteration: int) -> float:
    """Reinforcement exponent 1 - gamma0 * gamma1^iteration, clamped to [0,1]."""
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    g = 1.0 - schedule.gamma0 * schedule.gamma1**iteration
    return min(1.0, max(0.0, g))


def default_cutoff(schedule: ReinforcementSchedule) -> int:
    """ceil(1 / (1 - gamma1)); gamma1 = 1 has no finite default."""
    if schedule.gamma1 >= 1.0:
        raise ValueError("gamma1 = 1 has no finite default cutoff; set max_iterations")
    return math.ceil(1.0 / (1.0 - schedule.gamma1))


@dataclass
class EngineConfig:
    mode: str = "bp"  # "bp" | "rbp"
    max_iterations: Optional[int] = None  # RBP default: ceil(1/(1-gamma1))
    epsilon: float = 1e-6
    seed: int = 0
    schedule: Optional[ReinforcementSchedule] = None
    cumulative: bool = True  # reinforcement memory accumulates across iterations
    memory_decay: float = 0.9  # leak of the cumulative memory per iteration
    restarts: int = 1  # fresh random re-inits after a contradiction
    stall_patience: int = 15  # RBP: restart after this many sweeps without progress

    def __post_init__(self):
        if self.mode not in ("bp", "rbp"):
            raise ValueError(f"mode must be 'bp' or 'rbp', got {self.mode!r}")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be > 0")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0.0 <= self.memory_decay < 1.0:
            raise ValueError("memory_decay must lie in [0, 1)")
        if self.stall_patience < 0:
            raise ValueError("stall_patience must be >= 0")
        if self.mode == "rbp" and self.schedule is None:
            raise ValueError("rbp mode requires a schedule")


@dataclass
class BeliefState:
    var_to_factor: np.ndarray  # (num_edges, 2)
    factor_to_var: np.ndarray  # (num_edges, 2)
    marginals: np.ndarray  # (num_variables, 2)
    iteration: int


@dataclass
class SolveOutcome:
    status: Status
    assignment: np.ndarray  # (num_variables,) of 0/1
    iterations_used: int
    violated_factors: list[int]
    final_state: BeliefState


# ---------------------------------------------------------------------------
# Scalar reference operations


def factor_to_variable(
    kind: gates.FactorKind, incoming, target_position: int, factor_id: int | None = None
) -> BinaryMessage:
    """Sum-product message from a factor to its neighbor at target_position.

    `incoming` holds one message per non-target neighbor, in neighbor order.
    """
    arity = len(incoming) + 1
    table = gates.value_table(kind, arity)
    others = [l for l in range(arity) if l != target_position]
    out = [0.0, 0.0]
    for m in range(1 << arity):
        f = table[m]
        if f == 0.0:
            continue
        w = 1.0
        for msg, l in zip(incoming, others):
            w *= msg[(m >> l) & 1]
        out[(m >> target_position) & 1] += f * w
    return _normalize(out[0], out[1], factor_id)


def variable_to_factor_bp(incoming_others) -> BinaryMessage:
    """Componentwise product of the other factors' messages; empty -> uniform."""
    p0, p1 = 1.0, 1.0
    for msg in incoming_others:
        p0 *= msg[0]
        p1 *= msg[1]
    return _normalize(p0, p1)


def marginal(incoming_all, reinforcement: BinaryMessage | None = None) -> BinaryMessage:
    """Normalized product of all factor messages plus an optional reinforcement."""
    p0, p1 = 1.0, 1.0
    for msg in incoming_all:
        p0 *= msg[0]
        p1 *= msg[1]
    if reinforcement is not None:
        p0 *= reinforcement[0]
        p1 *= reinforcement[1]
    return _normalize(p0, p1)


def reinforcement_message(previous_marginal, gamma: float) -> BinaryMessage:
    """Componentwise power of the previous marginal, renormalized; 0^0 = 1."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    p0 = previous_marginal[0] ** gamma if previous_marginal[0] > 0.0 else float(gamma == 0.0)
    p1 = previous_marginal[1] ** gamma if previous_marginal[1] > 0.0 else float(gamma == 0.0)
    return _normalize(p0, p1)


def hard_decision(marginals) -> np.ndarray:
    """Bit i = 1 iff p1 > p0 beyond the tie tolerance; ties resolve to 0."""
    arr = np.asarray(marginals, dtype=np.float64)
    return ((arr[:, 1] - arr[:, 0]) > TIE_TOL).astype(np.uint8)


def check_assignment(graph: FactorGraph, assignment) -> list[int]:
    """Exact evaluation of every factor; ids of the unsatisfied ones."""
    bits = np.asarray(assignment)
    if bits.shape[0] != graph.num_variables:
        raise ValueError(
            f"assignment length {bits.shape[0]} != num_variables {graph.num_variables}"
        )
    violated = []
    for f in graph.factors:
        if not gates.satisfied(f.kind, [int(bits[v]) for v in f.neighbors]):
            violated.append(f.id)
    return violated


# ---------------------------------------------------------------------------
# Compiled graph


class _FactorGroup:
    """All factors of one arity, batched for vectorized checks and sums."""

    def __init__(self, arity: int, fids, neighbors, edge_ids, tables):
        self.arity = arity
        self.fids = np.asarray(fids, dtype=np.int64)
        self.neighbors = np.asarray(neighbors, dtype=np.int64)  # (F, c)
        self.edge_ids = np.asarray(edge_ids, dtype=np.int64)  # (F, c)
        self.tables = np.asarray(tables, dtype=np.float64)  # (F, 2^c)
        m = np.arange(1 << arity)
        self.bits = ((m[None, :] >> np.arange(arity)[:, None]) & 1).astype(
            np.float64
        )  # (c, 2^c)
        self.cobits = 1.0 - self.bits
        self.powers = (1 << np.arange(arity)).astype(np.int64)


class CompiledGraph:
    """Flat-array form of one immutable FactorGraph.

    Edge e = edge_offsets[f] + j is position j of factor f, so the factor
    tables and neighbor lists concatenate into contiguous arrays the sweep
    kernel can walk without indirection.
    """

    def __init__(self, graph: FactorGraph):
        self.graph = graph
        self.num_variables = graph.num_variables
        self.num_edges = graph.num_edges
        self.num_factors = len(graph.factors)
        self.edge_var = graph.edge_var
        self.edge_offsets = graph.edge_offsets

        table_offsets = [0]
        tables = []
        for f in graph.factors:
            col = gates.value_table(f.kind, len(f.neighbors))
            tables.append(col)
            table_offsets.append(table_offsets[-1] + col.size)
        self.table_offsets = np.array(table_offsets, dtype=np.int64)
        self.tables = (
            np.concatenate(tables) if tables else np.empty(0, dtype=np.float64)
        )

        by_arity: dict[int, list] = {}
        for f in graph.factors:
            by_arity.setdefault(len(f.neighbors), []).append(f)
        self.groups = []
        for arity in sorted(by_arity):
            fs = by_arity[arity]
            self.groups.append(
                _FactorGroup(
                    arity,
                    [f.id for f in fs],
                    [f.neighbors for f in fs],
                    [
                        [graph.edge_index(f.id, pos) for pos in range(arity)]
                        for f in fs
                    ],
                    [gates.value_table(f.kind, arity) for f in fs],
                )
            )

    def check(self, assignment: np.ndarray) -> list[int]:
        """Vectorized satisfiability check; ids of violated factors."""
        bits = np.asarray(assignment, dtype=np.int64)
        violated: list[int] = []
        for g in self.groups:
            idx = bits[g.neighbors] @ g.powers
            ok = g.tables[np.arange(len(g.fids)), idx] > 0.5
            violated.extend(int(i) for i in g.fids[~ok])
        return sorted(violated)


# ---------------------------------------------------------------------------
# Sweep kernel


@njit(cache=True)
def _sweep(perm, offs, nbrs, toffs, tabs, S, M, logf2v, gamma, floor):
    """One sequential pass over all factors; returns the max message change.

    For each factor (in `perm` order): rebuild the incoming variable-to-factor
    messages from the current field S, the reinforcement memory M, and the
    factor's own previous message; recompute every outgoing message with a
    leave-one-out prefix/suffix product over the factor's table; fold the
    change back into S. The change is measured componentwise on the
    normalized factor-to-variable messages.
    """
    delta = 0.0
    log_floor = math.log(floor)
    for idx in range(perm.shape[0]):
        f = perm[idx]
        lo = offs[f]
        c = offs[f + 1] - lo
        V = np.empty((c, 2))
        for j in range(c):
            v = nbrs[lo + j]
            e = lo + j
            a0 = S[v, 0] + gamma * M[v, 0] - logf2v[e, 0]
            a1 = S[v, 1] + gamma * M[v, 1] - logf2v[e, 1]
            mx = a0 if a0 > a1 else a1
            p0 = math.exp(a0 - mx)
            p1 = math.exp(a1 - mx)
            z = p0 + p1
            V[j, 0] = p0 / z
            V[j, 1] = p1 / z
        out = np.zeros((c, 2))
        pre = np.empty(c)
        to = toffs[f]
        for cfg in range(1 << c):
            w = tabs[to + cfg]
            if w == 0.0:
                continue
            acc = 1.0
            for j in range(c):
                pre[j] = acc
                acc *= V[j, (cfg >> j) & 1]
            suf = 1.0
            for j in range(c - 1, -1, -1):
                bit = (cfg >> j) & 1
                out[j, bit] += w * pre[j] * suf
                suf *= V[j, bit]
        for j in range(c):
            e = lo + j
            v = nbrs[lo + j]
            o0 = out[j, 0]
            o1 = out[j, 1]
            if o0 < floor:
                o0 = floor
            if o1 < floor:
                o1 = floor
            z = o0 + o1
            q0 = o0 / z
            q1 = o1 / z
            d0 = abs(q0 - math.exp(logf2v[e, 0]))
            d1 = abs(q1 - math.exp(logf2v[e, 1]))
            if d0 > delta:
                delta = d0
            if d1 > delta:
                delta = d1
            n0 = math.log(q0)
            n1 = math.log(q1)
            if n0 < log_floor:
                n0 = log_floor
            if n1 < log_floor:
                n1 = log_floor
            S[v, 0] += n0 - logf2v[e, 0]
            S[v, 1] += n1 - logf2v[e, 1]
            logf2v[e, 0] = n0
            logf2v[e, 1] = n1
    return delta


# ---------------------------------------------------------------------------
# Engine


class Engine:
    """One message-passing run over one compiled graph.

    `step(gamma)` performs a full sequential sweep (random factor order drawn
    from the engine's generator) and returns the maximum componentwise change
    of the factor-to-variable messages.
    """

    def __init__(
        self,
        graph: FactorGraph | CompiledGraph,
        seed: int | None = None,
        rng: np.random.Generator | None = None,
        cumulative: bool = True,
        memory_decay: float = 0.9,
    ):
        self.cg = graph if isinstance(graph, CompiledGraph) else CompiledGraph(graph)
        self.cumulative = cumulative
        self.memory_decay = memory_decay
        self.reset(rng if rng is not None else np.random.default_rng(seed))

    def reset(self, rng: np.random.Generator) -> None:
        """Fresh random message state; the generator is kept for sweep orders."""
        cg = self.cg
        self._rng = rng
        p1 = np.maximum(rng.random(cg.num_edges), FLOOR)
        p = np.stack([np.maximum(1.0 - p1, FLOOR), p1], axis=1)
        p /= p.sum(axis=1, keepdims=True)
        self.logf2v = np.log(p)
        S = np.zeros((cg.num_variables, 2))
        for x in (0, 1):
            S[:, x] = np.bincount(
                cg.edge_var, weights=self.logf2v[:, x], minlength=cg.num_variables
            )
        self.S = S
        self.M = np.zeros((cg.num_variables, 2))
        self.gamma = 0.0
        self.iteration = 0

    def step(self, gamma: float = 0.0) -> float:
        cg = self.cg
        self.gamma = gamma
        perm = self._rng.permutation(cg.num_factors)
        delta = _sweep(
            perm,
            cg.edge_offsets,
            cg.edge_var,
            cg.table_offsets,
            cg.tables,
            self.S,
            self.M,
            self.logf2v,
            gamma,
            FLOOR,
        )
        new_m = self.S + self.memory_decay * self.M if self.cumulative else self.S
        new_m = new_m - new_m.max(axis=1, keepdims=True)
        np.maximum(new_m, _LOG_FLOOR, out=new_m)
        self.M = new_m
        self.iteration += 1
        return float(delta)

    def _belief_logp(self) -> np.ndarray:
        return self.S + self.gamma * self.M

    def marginals(self) -> np.ndarray:
        p = self._belief_logp()
        p = np.exp(p - p.max(axis=1, keepdims=True))
        np.maximum(p, FLOOR, out=p)
        return p / p.sum(axis=1, keepdims=True)

    def hard_decision(self) -> np.ndarray:
        return hard_decision(self.marginals())

    def belief_state(self) -> BeliefState:
        a = self._belief_logp()[self.cg.edge_var] - self.logf2v
        v2f = np.exp(a - a.max(axis=1, keepdims=True))
        np.maximum(v2f, FLOOR, out=v2f)
        v2f /= v2f.sum(axis=1, keepdims=True)
        return BeliefState(
            var_to_factor=v2f,
            factor_to_var=np.exp(self.logf2v),
            marginals=self.marginals(),
            iteration=self.iteration,
        )


# ---------------------------------------------------------------------------
# Solvers

TraceHook = Callable[[int, float, float, int], None]
StateHook = Callable[[int, BeliefState], None]

_DEFAULT_BP_ITERATIONS = 1000


def run_bp(
    graph: FactorGraph | CompiledGraph,
    config: EngineConfig,
    state_hook: StateHook | None = None,
) -> SolveOutcome:
    """Plain BP to convergence (max factor-message change <= epsilon) or cutoff."""
    if config.mode != "bp":
        raise ValueError("run_bp requires mode 'bp'")
    engine = Engine(graph, seed=config.seed)
    max_it = config.max_iterations or _DEFAULT_BP_ITERATIONS
    status = Status.CUTOFF
    used = max_it
    for l in range(max_it):
        delta = engine.step(0.0)
        if state_hook is not None:
            state_hook(l, engine.belief_state())
        if l >= 1 and delta <= config.epsilon:
            status = Status.CONVERGED
            used = l + 1
            break
    assignment = engine.hard_decision()
    violated = engine.cg.check(assignment)
    return SolveOutcome(status, assignment, used, violated, engine.belief_state())


def run_rbp(
    graph: FactorGraph | CompiledGraph,
    config: EngineConfig,
    trace: TraceHook | None = None,
    state_hook: StateHook | None = None,
) -> SolveOutcome:
    """Reinforced BP: polarizes beliefs toward a single satisfying assignment.

    Succeeds as soon as the hard decisions satisfy every factor; otherwise
    runs to the cutoff (default ceil(1/(1-gamma1))). When the best violation
    count of the current attempt stops improving for `stall_patience` sweeps,
    the state is re-randomized and the schedule restarts, all within the same
    iteration budget; at cutoff the best assignment seen is reported. A
    contradiction likewise triggers a fresh start, up to config.restarts
    times.
    """
    if config.mode != "rbp":
        raise ValueError("run_rbp requires mode 'rbp'")
    schedule = config.schedule
    assert schedule is not None
    cutoff = config.max_iterations or default_cutoff(schedule)
    cg = graph if isinstance(graph, CompiledGraph) else CompiledGraph(graph)

    # With gamma identically zero the run is plain BP and can never make
    # progress on the violation count, so stalling is not a restart signal.
    reinforces = not (schedule.gamma0 == 1.0 and schedule.gamma1 == 1.0)
    patience = config.stall_patience if reinforces else 0

    rng = np.random.default_rng(config.seed)
    engine = Engine(
        cg, rng=rng, cumulative=config.cumulative, memory_decay=config.memory_decay
    )
    total = 0
    contradictions = 0
    best_count = cg.num_factors + 1
    best_assignment: np.ndarray | None = None
    best_violated: list[int] = []
    while total < cutoff:
        attempt_best = cg.num_factors + 1
        since_improved = 0
        stalled = False
        try:
            for l in range(cutoff - total):
                gamma = gamma_at(schedule, l)
                delta = engine.step(gamma)
                if state_hook is not None:
                    state_hook(total + l, engine.belief_state())
                assignment = engine.hard_decision()
                violated = cg.check(assignment)
                if trace is not None:
                    trace(total + l, gamma, delta, len(violated))
                if not violated:
                    return SolveOutcome(
                        Status.SOLUTION_FOUND,
                        assignment,
                        total + l + 1,
                        [],
                        engine.belief_state(),
                    )
                if len(violated) < best_count:
                    best_count = len(violated)
                    best_assignment = assignment
                    best_violated = violated
                if len(violated) < attempt_best:
                    attempt_best = len(violated)
                    since_improved = 0
                else:
                    since_improved += 1
                    if patience and since_improved >= patience:
                        stalled = True
                        total += l + 1
                        break
            else:
                total = cutoff
        except ContradictionError:
            contradictions += 1
            if contradictions > config.restarts:
                break
            total += 1  # the failed sweep still consumed budget
            engine.reset(rng)
            continue
        if not stalled:
            break
        engine.reset(rng)
    if best_assignment is None:
        best_assignment = engine.hard_decision()
        best_violated = cg.check(best_assignment)
    return SolveOutcome(
        Status.CUTOFF, best_assignment, total, best_violated, engine.belief_state()
    )
