"""Truth-table algebra for check-node factor kinds.

Provides XOR checks, the pairwise product constraint, and random balanced
non-canalized gates together with the gate-pool sampler used by the code
constructor.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Message update cost at a check is O(2^arity); cap it.
MAX_ARITY = 10

DEFAULT_REJECTION_BUDGET = 10**6


class GateError(ValueError):
    pass


@dataclass(frozen=True)
class TruthTable:
    """Boolean function of `arity` inputs stored as its full output column.

    Entry m holds the output for the input assignment spelling m in binary,
    with neighbor position 0 as the least significant bit.
    """

    arity: int
    outputs: tuple[int, ...]

    def __post_init__(self):
        if self.arity < 1:
            raise GateError("arity must be >= 1")
        if self.arity > MAX_ARITY:
            raise GateError(f"arity {self.arity} exceeds maximum {MAX_ARITY}")
        if len(self.outputs) != 1 << self.arity:
            raise GateError(
                f"need {1 << self.arity} outputs for arity {self.arity}, "
                f"got {len(self.outputs)}"
            )
        if any(b not in (0, 1) for b in self.outputs):
            raise GateError("outputs must be bits")

    def to_hex(self) -> str:
        """Hex encoding of the output column, bit m of the integer = outputs[m]."""
        value = sum(b << m for m, b in enumerate(self.outputs))
        width = max(1, (1 << self.arity) // 4)
        return f"{value:0{width}x}"

    @classmethod
    def from_hex(cls, arity: int, text: str) -> "TruthTable":
        value = int(text, 16)
        n = 1 << arity
        if value >> n:
            raise GateError(f"hex table {text!r} too wide for arity {arity}")
        return cls(arity, tuple((value >> m) & 1 for m in range(n)))

    def as_array(self) -> np.ndarray:
        return np.array(self.outputs, dtype=np.float64)


def xor_table(arity: int) -> TruthTable:
    m = np.arange(1 << arity)
    parity = np.zeros_like(m)
    for l in range(arity):
        parity ^= (m >> l) & 1
    return TruthTable(arity, tuple(int(b) for b in parity))


def evaluate(table: TruthTable, inputs) -> int:
    """Look up the table output for a full input assignment."""
    if len(inputs) != table.arity:
        raise GateError(f"expected {table.arity} inputs, got {len(inputs)}")
    index = 0
    for l, b in enumerate(inputs):
        index |= (int(b) & 1) << l
    return table.outputs[index]


def is_balanced(table: TruthTable) -> bool:
    return sum(table.outputs) == 1 << (table.arity - 1)


def is_fully_canalized(table: TruthTable) -> bool:
    """True if fixing some single input to some value makes the output constant."""
    out = np.array(table.outputs)
    m = np.arange(out.size)
    for v in range(table.arity):
        bit = (m >> v) & 1
        for b in (0, 1):
            sub = out[bit == b]
            if sub.min() == sub.max():
                return True
    return False


def sample_balanced_noncanalized(
    c: int, rng: np.random.Generator, max_draws: int = DEFAULT_REJECTION_BUDGET
) -> TruthTable:
    """Rejection-sample a uniform balanced table that is not canalized.

    Draws uniformly from the balanced tables (shuffled half-ones output
    column) and rejects any table where a single input value forces the
    output.
    """
    if c < 2:
        raise GateError("no balanced non-canalized tables below arity 2")
    n = 1 << c
    base = np.repeat(np.array([0, 1], dtype=np.int64), n // 2)
    for _ in range(max_draws):
        outputs = tuple(int(b) for b in rng.permutation(base))
        table = TruthTable(c, outputs)
        if not is_fully_canalized(table):
            return table
    raise GateError(f"rejection budget of {max_draws} draws exhausted for c={c}")


@dataclass(frozen=True)
class GatePool:
    """Distinct balanced non-canalized tables sharing one connectivity."""

    connectivity: int
    tables: tuple[TruthTable, ...]

    def __post_init__(self):
        if any(t.arity != self.connectivity for t in self.tables):
            raise GateError("pool tables must all have the pool connectivity")
        if len(set(t.outputs for t in self.tables)) != len(self.tables):
            raise GateError("pool tables must be pairwise distinct")


def build_gate_pool(
    c: int,
    pool_size: int,
    rng: np.random.Generator,
    max_draws: int = DEFAULT_REJECTION_BUDGET,
) -> GatePool:
    if pool_size < 1:
        raise GateError("pool_size must be >= 1")
    seen: dict[tuple[int, ...], TruthTable] = {}
    draws = 0
    while len(seen) < pool_size and draws < max_draws:
        budget = max_draws - draws
        table = sample_balanced_noncanalized(c, rng, max_draws=budget)
        draws += 1
        seen.setdefault(table.outputs, table)
    if len(seen) < pool_size:
        raise GateError(
            f"could not find {pool_size} distinct tables for c={c} "
            f"within {max_draws} draws"
        )
    return GatePool(c, tuple(seen.values()))


# ---------------------------------------------------------------------------
# Factor kinds


@dataclass(frozen=True)
class Xor:
    """Parity check: satisfied when the XOR of the neighbors equals target_bit."""

    target_bit: int

    def __post_init__(self):
        if self.target_bit not in (0, 1):
            raise GateError("target_bit must be 0 or 1")


@dataclass(frozen=True)
class NonlinearGate:
    """Satisfied when the gate output on the neighbors equals target_bit."""

    table: TruthTable
    target_bit: int

    def __post_init__(self):
        if self.target_bit not in (0, 1):
            raise GateError("target_bit must be 0 or 1")


@dataclass(frozen=True)
class ProductConstraint:
    """Arity-2 indicator forbidding the neighbor assignment (1, 1)."""


FactorKind = Xor | NonlinearGate | ProductConstraint

_PRODUCT_TABLE = np.array([1.0, 1.0, 1.0, 0.0])


def kind_arity(kind: FactorKind) -> int | None:
    """Required neighbor count of a kind, or None when any arity is allowed."""
    if isinstance(kind, NonlinearGate):
        return kind.table.arity
    if isinstance(kind, ProductConstraint):
        return 2
    return None


def value_table(kind: FactorKind, arity: int) -> np.ndarray:
    """Indicator column of the factor over all 2^arity neighbor assignments."""
    required = kind_arity(kind)
    if required is not None and required != arity:
        raise GateError(f"kind requires arity {required}, factor has {arity}")
    if isinstance(kind, ProductConstraint):
        return _PRODUCT_TABLE.copy()
    if isinstance(kind, Xor):
        parity = xor_table(arity).as_array()
        return np.where(parity == kind.target_bit, 1.0, 0.0)
    table = kind.table.as_array()
    return np.where(table == kind.target_bit, 1.0, 0.0)


def satisfied(kind: FactorKind, inputs) -> bool:
    """Exact evaluation of the indicator on a full neighbor assignment."""
    if isinstance(kind, ProductConstraint):
        if len(inputs) != 2:
            raise GateError("product constraint has arity 2")
        return not (int(inputs[0]) == 1 and int(inputs[1]) == 1)
    if isinstance(kind, Xor):
        parity = 0
        for b in inputs:
            parity ^= int(b) & 1
        return parity == kind.target_bit
    return evaluate(kind.table, inputs) == kind.target_bit
