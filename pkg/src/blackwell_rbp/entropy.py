"""Bethe estimate of the normalized solution-space size from a BP fixed point.

For indicator factors the estimate is

    log2 N_s  ~=  sum_a log2 Z_a + sum_i log2 Z_i - sum_(i,a) log2 Z_ia

with Z_a the factor partition sum over its neighbors' variable-to-factor
messages, Z_i the overlap of all factor-to-variable messages at a variable,
and Z_ia the per-edge message overlap. The expression is exact on trees,
which anchors the module's tests. Normalization is by channel uses, so the
no-check Blackwell instance lands at log2(3).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .factor_graph import FactorGraph
from .propagation import (
    FLOOR,
    BeliefState,
    CompiledGraph,
    ContradictionError,
    EngineConfig,
    Status,
    run_bp,
)

_LN2 = math.log(2.0)


class NotConvergedError(RuntimeError):
    pass


@dataclass
class EntropyEstimate:
    h_s: float  # bits per channel use
    converged: bool
    iterations: int


def bethe_entropy(
    graph: FactorGraph | CompiledGraph,
    state: BeliefState,
    n_channel_uses: int,
    converged: bool = True,
) -> EntropyEstimate:
    """Entropy estimate from the messages of a converged BP state."""
    if not converged:
        raise NotConvergedError("bethe_entropy needs a converged BP fixed point")
    cg = graph if isinstance(graph, CompiledGraph) else CompiledGraph(graph)
    v2f = state.var_to_factor
    f2v = state.factor_to_var

    # All partition sums are evaluated in log space: near a fully polarized
    # fixed point the per-factor sums underflow in linear space even though
    # their logarithms are perfectly representable.
    log2_z = 0.0
    for g in cg.groups:
        logV = np.log(np.maximum(v2f[g.edge_ids], FLOOR))  # (F, c, 2)
        # Log-product of the incoming messages for every input configuration.
        A = (logV[:, :, 1:2] * g.bits + logV[:, :, 0:1] * g.cobits).sum(axis=1)
        A = np.where(g.tables > 0.0, A, -np.inf)  # (F, 2^c)
        peak = A.max(axis=1)
        if not np.all(np.isfinite(peak)):
            raise ContradictionError(int(g.fids[int(np.argmax(~np.isfinite(peak)))]))
        z_a_log = peak + np.log(np.exp(A - peak[:, None]).sum(axis=1))
        log2_z += float(z_a_log.sum()) / _LN2

    logs = np.log(f2v)
    S = np.empty((cg.num_variables, 2))
    for x in (0, 1):
        S[:, x] = np.bincount(
            cg.edge_var, weights=logs[:, x], minlength=cg.num_variables
        )
    peak = S.max(axis=1)
    z_i_log = peak + np.log(np.exp(S - peak[:, None]).sum(axis=1))
    log2_z += float(z_i_log.sum()) / _LN2

    edge_log = np.log(np.maximum(v2f, FLOOR)) + logs
    peak = edge_log.max(axis=1)
    z_ia_log = peak + np.log(np.exp(edge_log - peak[:, None]).sum(axis=1))
    log2_z -= float(z_ia_log.sum()) / _LN2

    return EntropyEstimate(
        h_s=log2_z / n_channel_uses, converged=True, iterations=state.iteration
    )


@dataclass
class SweepRow:
    rate: float
    c: int
    linear: bool
    trials: int
    mean_hs: float  # nan when every trial failed to converge
    std_hs: float
    nonconverged: int


def entropy_sweep(
    rates,
    n: int,
    c: int,
    pool_size: int,
    linear: bool,
    trials: int,
    seed: int,
    epsilon: float = 1e-6,
    max_iterations: int = 2000,
) -> list[SweepRow]:
    """Mean Bethe entropy per rate over freshly sampled codes and random bins."""
    from . import blackwell  # local import to avoid a cycle

    if not rates:
        raise ValueError("rates must be non-empty")
    rows = []
    for ri, rate in enumerate(rates):
        values = []
        nonconverged = 0
        for t in range(trials):
            rng = np.random.default_rng((seed, ri, t))
            code, _ = blackwell.build_code(
                n, blackwell.RatePair(rate, rate), c, pool_size, linear, rng
            )
            bins = blackwell.BinIndices(
                w1=rng.integers(0, 2, code.k1).astype(np.uint8),
                w2=rng.integers(0, 2, code.k2).astype(np.uint8),
            )
            graph = code.factor_graph(bins)
            config = EngineConfig(
                mode="bp",
                epsilon=epsilon,
                max_iterations=max_iterations,
                seed=int(rng.integers(2**63)),
            )
            outcome = run_bp(graph, config)
            if outcome.status is not Status.CONVERGED:
                nonconverged += 1
                continue
            est = bethe_entropy(graph, outcome.final_state, n)
            values.append(est.h_s)
        mean = float(np.mean(values)) if values else float("nan")
        std = float(np.std(values)) if values else float("nan")
        rows.append(SweepRow(float(rate), c, linear, trials, mean, std, nonconverged))
    return rows
