"""Monte-Carlo experiment driver: FER/BER tables, iteration scaling, CSV I/O.

Per-trial seeds are derived from the master seed through numpy's splittable
SeedSequence, so serial and parallel execution (and any re-run with the same
master seed) produce identical reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import blackwell
from .blackwell import BinIndices, BlackwellCode, EncodingFailure, RatePair
from .propagation import (
    EngineConfig,
    ReinforcementSchedule,
    check_assignment,
    default_cutoff,
)


@dataclass
class TrialRecord:
    index: int
    seed: int
    success: bool
    iterations_used: int
    info_bit_errors: int
    info_bits_total: int


@dataclass
class SimulationReport:
    n: int
    rates: RatePair
    c: int
    gamma0: float
    gamma1: float
    cutoff: int
    trials: int
    master_seed: int
    fer: float
    ber: float
    mean_iterations_on_success: float  # nan when no trial succeeded
    std_iterations: float
    records: list[TrialRecord]


def _repair_assignment(code: BlackwellCode, assignment: np.ndarray) -> np.ndarray:
    """Force any forbidden (1, 1) pair to (0, 0) so symbols are defined."""
    a = np.asarray(assignment).astype(np.uint8).copy()
    n = code.n
    bad = (a[:n] == 1) & (a[n:] == 1)
    a[:n][bad] = 0
    a[n:][bad] = 0
    return a


def run_trial(
    code: BlackwellCode,
    seed: int,
    schedule: ReinforcementSchedule,
    index: int = 0,
    epsilon: float = 1e-6,
    cutoff: Optional[int] = None,
    cumulative: bool = True,
    restarts: int = 1,
) -> TrialRecord:
    """One encoding attempt with fresh uniform bin indices.

    On success the round trip is exact by construction (asserted). On failure
    the forbidden pairs of the best assignment are repaired to (0, 0), both
    sides are decoded from the repaired word, and mismatched information bits
    are counted against the drawn bins.
    """
    rng = np.random.default_rng(seed)
    bins = BinIndices(
        w1=rng.integers(0, 2, code.k1).astype(np.uint8),
        w2=rng.integers(0, 2, code.k2).astype(np.uint8),
    )
    config = EngineConfig(
        mode="rbp",
        max_iterations=cutoff,
        epsilon=epsilon,
        seed=int(rng.integers(2**63)),
        schedule=schedule,
        cumulative=cumulative,
        restarts=restarts,
    )
    total = code.k1 + code.k2
    iterations_seen = [0]

    def _count(iteration, gamma, delta, violations):
        iterations_seen[0] = iteration + 1

    try:
        symbols = blackwell.encode(code, bins, config, trace=_count)
    except EncodingFailure as failure:
        a = _repair_assignment(code, failure.assignment)
        errors = int(
            (blackwell.decode(code, 1, a[: code.n]) != bins.w1).sum()
            + (blackwell.decode(code, 2, a[code.n :]) != bins.w2).sum()
        )
        return TrialRecord(
            index=index,
            seed=seed,
            success=False,
            iterations_used=failure.outcome.iterations_used,
            info_bit_errors=errors,
            info_bits_total=total,
        )

    # Frame-level soundness: the emitted word must round-trip exactly, and
    # the assignment must pass the independent (scalar) constraint checker.
    y1, y2 = blackwell.symbols_to_pairs(symbols)
    assert not check_assignment(
        code.factor_graph(bins), np.concatenate([y1, y2])
    ), "solver reported success on an unsatisfied instance"
    assert np.array_equal(blackwell.decode(code, 1, y1), bins.w1)
    assert np.array_equal(blackwell.decode(code, 2, y2), bins.w2)

    return TrialRecord(
        index=index,
        seed=seed,
        success=True,
        iterations_used=iterations_seen[0],
        info_bit_errors=0,
        info_bits_total=total,
    )


def trial_seed(master_seed: int, index: int) -> int:
    """Mix (master, index) through a splittable generator into a trial seed."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def simulate(
    code: BlackwellCode,
    schedule: ReinforcementSchedule,
    trials: int,
    master_seed: int,
    epsilon: float = 1e-6,
    cutoff: Optional[int] = None,
    cumulative: bool = True,
    restarts: int = 1,
) -> SimulationReport:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    effective_cutoff = cutoff if cutoff is not None else default_cutoff(schedule)
    records = []
    for t in range(trials):
        records.append(
            run_trial(
                code,
                trial_seed(master_seed, t),
                schedule,
                index=t,
                epsilon=epsilon,
                cutoff=effective_cutoff,
                cumulative=cumulative,
                restarts=restarts,
            )
        )
    failures = sum(1 for r in records if not r.success)
    total_bits = sum(r.info_bits_total for r in records)
    bit_errors = sum(r.info_bit_errors for r in records)
    success_iters = [r.iterations_used for r in records if r.success]
    return SimulationReport(
        n=code.n,
        rates=code.rates,
        c=code.c,
        gamma0=schedule.gamma0,
        gamma1=schedule.gamma1,
        cutoff=effective_cutoff,
        trials=trials,
        master_seed=master_seed,
        fer=failures / trials,
        ber=bit_errors / total_bits if total_bits else 0.0,
        mean_iterations_on_success=float(np.mean(success_iters))
        if success_iters
        else float("nan"),
        std_iterations=float(np.std(success_iters)) if success_iters else float("nan"),
        records=records,
    )


@dataclass
class ScalingRow:
    n: int
    mean_iterations: float  # nan when every trial failed
    successes: int
    trials: int


def iteration_scaling(
    ns,
    rate: float,
    gamma1: float,
    trials: int,
    seed: int,
    c: int = 6,
    pool_size: int = 6,
    gamma0: float = 1.0,
    min_successes: int = 0,
) -> list[ScalingRow]:
    """Success-only mean iteration count per block length at a fixed rate.

    When min_successes > 0, extra trials are run (up to 4x trials) until the
    point has that many successes.
    """
    if not ns:
        raise ValueError("ns must be non-empty")
    schedule = ReinforcementSchedule(gamma0, gamma1)
    cutoff = default_cutoff(schedule)
    rows = []
    for ni, n in enumerate(ns):
        rng = np.random.default_rng((seed, ni))
        code, _ = blackwell.build_code(
            n, RatePair(rate, rate), c, pool_size, False, rng
        )
        point_seed = int(rng.integers(2**63))
        iters = []
        t = 0
        max_trials = trials if min_successes == 0 else 4 * trials
        while t < max_trials and (t < trials or len(iters) < min_successes):
            record = run_trial(
                code,
                trial_seed(point_seed, t),
                schedule,
                index=t,
                cutoff=cutoff,
            )
            if record.success:
                iters.append(record.iterations_used)
            t += 1
        rows.append(
            ScalingRow(
                n=int(n),
                mean_iterations=float(np.mean(iters)) if iters else float("nan"),
                successes=len(iters),
                trials=t,
            )
        )
    return rows


# ---------------------------------------------------------------------------
# CSV output (fixed column order, 6 significant digits, one header row)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def summary_csv(report: SimulationReport) -> str:
    lines = ["fer,ber,mean_iters"]
    lines.append(
        ",".join(
            _fmt(v)
            for v in (report.fer, report.ber, report.mean_iterations_on_success)
        )
    )
    return "\n".join(lines) + "\n"


def records_csv(report: SimulationReport) -> str:
    lines = ["trial,seed,success,iterations,info_bit_errors,info_bits_total"]
    for r in report.records:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.index,
                    r.seed,
                    r.success,
                    r.iterations_used,
                    r.info_bit_errors,
                    r.info_bits_total,
                )
            )
        )
    return "\n".join(lines) + "\n"


def scaling_csv(rows) -> str:
    lines = ["n,mean_iters,successes,trials"]
    for row in rows:
        mean = "" if math.isnan(row.mean_iterations) else _fmt(row.mean_iterations)
        lines.append(f"{row.n},{mean},{row.successes},{row.trials}")
    return "\n".join(lines) + "\n"


def sweep_csv(rows) -> str:
    lines = ["rate,c,linear,trials,mean_hs,std_hs,nonconverged_count"]
    for row in rows:
        mean = "" if math.isnan(row.mean_hs) else _fmt(row.mean_hs)
        std = "" if math.isnan(row.std_hs) else _fmt(row.std_hs)
        lines.append(
            f"{_fmt(row.rate)},{row.c},{_fmt(row.linear)},{row.trials},"
            f"{mean},{std},{row.nonconverged}"
        )
    return "\n".join(lines) + "\n"
