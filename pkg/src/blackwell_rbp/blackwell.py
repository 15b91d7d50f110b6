"""Blackwell channel model, capacity-region arithmetic, and the binning code.

The channel has a ternary input and two deterministic binary outputs; the
output pair (1, 1) is unreachable. A code places random checks (XOR or
balanced non-canalized gates) on each receiver's n bits and couples the two
sides with n pairwise product constraints. Encoding fixes every check's
target bit to an information (bin) bit and asks reinforced BP for a
satisfying assignment; decoding is plain gate evaluation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import gates, propagation
from .factor_graph import FactorGraph, build_graph
from .gates import GatePool, NonlinearGate, ProductConstraint, TruthTable, Xor

LOG2_3 = math.log2(3.0)


class ForbiddenPairError(ValueError):
    """The output pair (1, 1) cannot be produced by any channel input."""


_SYMBOL_TO_PAIR = {0: (0, 0), 1: (0, 1), 2: (1, 0)}
_PAIR_TO_SYMBOL = {v: k for k, v in _SYMBOL_TO_PAIR.items()}


def transmit(x: int) -> tuple[int, int]:
    """Deterministic channel map: 0 -> (0,0), 1 -> (0,1), 2 -> (1,0)."""
    if x not in _SYMBOL_TO_PAIR:
        raise ValueError(f"channel input must be 0, 1 or 2, got {x}")
    return _SYMBOL_TO_PAIR[x]


def pair_to_symbol(pair: tuple[int, int]) -> int:
    p = (int(pair[0]), int(pair[1]))
    if p == (1, 1):
        raise ForbiddenPairError("output pair (1, 1) is not transmittable")
    if p not in _PAIR_TO_SYMBOL:
        raise ValueError(f"not a bit pair: {pair}")
    return _PAIR_TO_SYMBOL[p]


def binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


@dataclass(frozen=True)
class RatePair:
    r1: float
    r2: float

    def __post_init__(self):
        if self.r1 < 0.0 or self.r2 < 0.0:
            raise ValueError("rates must be >= 0")


def in_capacity_region(rates: RatePair) -> bool:
    """Uniform-input rate region: r1, r2 <= H(1/3) and r1 + r2 <= log2(3)."""
    h = binary_entropy(1.0 / 3.0)
    return rates.r1 <= h and rates.r2 <= h and rates.r1 + rates.r2 <= LOG2_3


@dataclass
class BinIndices:
    w1: np.ndarray
    w2: np.ndarray


@dataclass(frozen=True)
class Check:
    """One check node: pool gate index (None for XOR) and its c neighbors.

    Neighbors are local to the check's side, i.e. indices into [0, n).
    """

    gate: int | None
    neighbors: tuple[int, ...]


@dataclass
class BlackwellCode:
    n: int
    rates: RatePair
    k1: int
    k2: int
    c: int
    linear: bool
    gate_pool: GatePool | None
    checks1: tuple[Check, ...]
    checks2: tuple[Check, ...]

    # Variable layout: [0, n) are the y1 bits, [n, 2n) the y2 bits. Factor
    # layout: checks1, then checks2, then the n product constraints.

    def check_kind(self, check: Check, target: int) -> gates.FactorKind:
        if check.gate is None:
            return Xor(target)
        assert self.gate_pool is not None
        return NonlinearGate(self.gate_pool.tables[check.gate], target)

    def factor_graph(self, bins: BinIndices | None = None) -> FactorGraph:
        """Encoding CSP for the given bin bits (all-zero targets when absent)."""
        w1 = np.zeros(self.k1, dtype=np.uint8) if bins is None else np.asarray(bins.w1)
        w2 = np.zeros(self.k2, dtype=np.uint8) if bins is None else np.asarray(bins.w2)
        if len(w1) != self.k1 or len(w2) != self.k2:
            raise ValueError(
                f"bin lengths ({len(w1)}, {len(w2)}) != ({self.k1}, {self.k2})"
            )
        specs = []
        for j, check in enumerate(self.checks1):
            specs.append((self.check_kind(check, int(w1[j])), check.neighbors))
        for j, check in enumerate(self.checks2):
            neighbors = tuple(self.n + v for v in check.neighbors)
            specs.append((self.check_kind(check, int(w2[j])), neighbors))
        for i in range(self.n):
            specs.append((ProductConstraint(), (i, self.n + i)))
        return build_graph(2 * self.n, specs)

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "n": self.n,
            "r1": self.rates.r1,
            "r2": self.rates.r2,
            "c": self.c,
            "linear": self.linear,
            "pool": None
            if self.gate_pool is None
            else [t.to_hex() for t in self.gate_pool.tables],
            "checks1": [[ch.gate, list(ch.neighbors)] for ch in self.checks1],
            "checks2": [[ch.gate, list(ch.neighbors)] for ch in self.checks2],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "BlackwellCode":
        doc = json.loads(text)
        pool = None
        if doc["pool"] is not None:
            tables = tuple(TruthTable.from_hex(doc["c"], h) for h in doc["pool"])
            pool = GatePool(doc["c"], tables)
        checks1 = tuple(Check(g, tuple(nb)) for g, nb in doc["checks1"])
        checks2 = tuple(Check(g, tuple(nb)) for g, nb in doc["checks2"])
        return cls(
            n=doc["n"],
            rates=RatePair(doc["r1"], doc["r2"]),
            k1=len(checks1),
            k2=len(checks2),
            c=doc["c"],
            linear=doc["linear"],
            gate_pool=pool,
            checks1=checks1,
            checks2=checks2,
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "BlackwellCode":
        with open(path) as fh:
            return cls.from_json(fh.read())


def build_code(
    n: int,
    rates: RatePair,
    c: int,
    pool_size: int,
    linear: bool,
    rng: np.random.Generator,
) -> tuple[BlackwellCode, FactorGraph]:
    """Sample a random check-regular code; also returns its zero-target graph."""
    if n < c:
        raise ValueError(f"need n >= c, got n={n}, c={c}")
    k1 = int(n * rates.r1 + 0.5)
    k2 = int(n * rates.r2 + 0.5)
    pool = None if linear else gates.build_gate_pool(c, pool_size, rng)

    def draw_checks(k: int) -> tuple[Check, ...]:
        checks = []
        for _ in range(k):
            neighbors = tuple(int(v) for v in rng.choice(n, size=c, replace=False))
            gate = None if linear else int(rng.integers(pool_size))
            checks.append(Check(gate, neighbors))
        return tuple(checks)

    code = BlackwellCode(
        n=n,
        rates=rates,
        k1=k1,
        k2=k2,
        c=c,
        linear=linear,
        gate_pool=pool,
        checks1=draw_checks(k1),
        checks2=draw_checks(k2),
    )
    return code, code.factor_graph()


class EncodingFailure(RuntimeError):
    """RBP hit the cutoff; carries the best assignment for BER accounting."""

    def __init__(self, outcome: propagation.SolveOutcome):
        self.outcome = outcome
        self.assignment = outcome.assignment
        super().__init__(
            f"encoding failed after {outcome.iterations_used} iterations "
            f"({len(outcome.violated_factors)} violated factors)"
        )


def encode(
    code: BlackwellCode,
    bins: BinIndices,
    config: propagation.EngineConfig,
    trace: propagation.TraceHook | None = None,
) -> np.ndarray:
    """Solve the encoding CSP with RBP and map the bit pairs to symbols."""
    graph = code.factor_graph(bins)
    outcome = propagation.run_rbp(graph, config, trace=trace)
    if outcome.status is not propagation.Status.SOLUTION_FOUND:
        raise EncodingFailure(outcome)
    a = outcome.assignment
    return np.array(
        [pair_to_symbol((int(a[i]), int(a[code.n + i]))) for i in range(code.n)],
        dtype=np.uint8,
    )


def decode(code: BlackwellCode, side: int, y) -> np.ndarray:
    """Recover the bin index of one receiver: evaluate each check on y."""
    y = np.asarray(y).astype(np.uint8)
    if y.shape[0] != code.n:
        raise ValueError(f"received word length {y.shape[0]} != n {code.n}")
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    checks = code.checks1 if side == 1 else code.checks2
    out = np.empty(len(checks), dtype=np.uint8)
    for j, check in enumerate(checks):
        values = [int(y[v]) for v in check.neighbors]
        if check.gate is None:
            bit = 0
            for b in values:
                bit ^= b
        else:
            assert code.gate_pool is not None
            bit = gates.evaluate(code.gate_pool.tables[check.gate], values)
        out[j] = bit
    return out


def symbols_to_pairs(symbols) -> tuple[np.ndarray, np.ndarray]:
    """Split a symbol sequence back into the two receivers' bit vectors."""
    y1 = np.empty(len(symbols), dtype=np.uint8)
    y2 = np.empty(len(symbols), dtype=np.uint8)
    for i, s in enumerate(symbols):
        y1[i], y2[i] = transmit(int(s))
    return y1, y2
