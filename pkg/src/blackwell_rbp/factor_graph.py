"""Bipartite factor graph over binary variables with edge-indexed storage.

Edges are identified by (factor id, position) and mapped once at build time
to a flat edge index so the propagation engine gets O(1) message access.
Graphs are treated as immutable after construction; all mutable solver state
lives in the propagation module.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import gates
from .gates import FactorKind, NonlinearGate, ProductConstraint, TruthTable, Xor


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class FactorNode:
    id: int
    kind: FactorKind
    neighbors: tuple[int, ...]


class FactorGraph:
    """Factor nodes plus the transpose adjacency (variable -> incident edges)."""

    def __init__(self, num_variables: int, factors: list[FactorNode]):
        if num_variables < 0:
            raise GraphError("num_variables must be >= 0")
        self.num_variables = num_variables
        self.factors = list(factors)

        offsets = [0]
        for f in self.factors:
            offsets.append(offsets[-1] + len(f.neighbors))
        self.edge_offsets = np.array(offsets, dtype=np.int64)
        self.num_edges = int(self.edge_offsets[-1])

        adjacency: list[list[tuple[int, int]]] = [[] for _ in range(num_variables)]
        edge_var = np.empty(self.num_edges, dtype=np.int64)
        for f in self.factors:
            base = self.edge_offsets[f.id]
            for pos, v in enumerate(f.neighbors):
                adjacency[v].append((f.id, pos))
                edge_var[base + pos] = v
        self.variable_adjacency = adjacency
        self.edge_var = edge_var

    def edge_index(self, factor_id: int, position: int) -> int:
        return int(self.edge_offsets[factor_id]) + position

    def variable_degree(self, v: int) -> int:
        return len(self.variable_adjacency[v])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FactorGraph)
            and self.num_variables == other.num_variables
            and self.factors == other.factors
        )

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        records = []
        for f in self.factors:
            rec: dict = {"neighbors": list(f.neighbors)}
            if isinstance(f.kind, Xor):
                rec["kind"] = "xor"
                rec["target"] = f.kind.target_bit
            elif isinstance(f.kind, NonlinearGate):
                rec["kind"] = "gate"
                rec["arity"] = f.kind.table.arity
                rec["table"] = f.kind.table.to_hex()
                rec["target"] = f.kind.target_bit
            else:
                rec["kind"] = "product"
            records.append(rec)
        doc = {"num_variables": self.num_variables, "factors": records}
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FactorGraph":
        doc = json.loads(text)
        specs = []
        for rec in doc["factors"]:
            tag = rec["kind"]
            if tag == "xor":
                kind: FactorKind = Xor(rec["target"])
            elif tag == "gate":
                kind = NonlinearGate(
                    TruthTable.from_hex(rec["arity"], rec["table"]), rec["target"]
                )
            elif tag == "product":
                kind = ProductConstraint()
            else:
                raise GraphError(f"unknown factor kind {tag!r}")
            specs.append((kind, rec["neighbors"]))
        return build_graph(doc["num_variables"], specs)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "FactorGraph":
        with open(path) as fh:
            return cls.from_json(fh.read())


def build_graph(num_variables: int, factor_specs) -> FactorGraph:
    """Build a graph from (kind, neighbor list) specs, factor order preserved."""
    factors = []
    for fid, (kind, neighbors) in enumerate(factor_specs):
        neighbors = tuple(int(v) for v in neighbors)
        if len(neighbors) < 1:
            raise GraphError(f"factor {fid}: arity must be >= 1")
        if len(set(neighbors)) != len(neighbors):
            raise GraphError(f"factor {fid}: duplicate neighbor")
        for v in neighbors:
            if not 0 <= v < num_variables:
                raise GraphError(f"factor {fid}: variable {v} out of range")
        required = gates.kind_arity(kind)
        if required is not None and required != len(neighbors):
            raise GraphError(
                f"factor {fid}: kind requires arity {required}, got {len(neighbors)}"
            )
        factors.append(FactorNode(fid, kind, neighbors))
    return FactorGraph(num_variables, factors)


def validate(graph: FactorGraph) -> list[str]:
    """Invariant check; violations come back as descriptions, never exceptions."""
    problems: list[str] = []
    for f in graph.factors:
        if len(f.neighbors) < 1:
            problems.append(f"factor {f.id}: arity 0")
        if len(set(f.neighbors)) != len(f.neighbors):
            problems.append(f"factor {f.id}: duplicate neighbor")
        for v in f.neighbors:
            if not 0 <= v < graph.num_variables:
                problems.append(f"factor {f.id}: variable {v} out of range")
        required = gates.kind_arity(f.kind)
        if required is not None and required != len(f.neighbors):
            problems.append(
                f"factor {f.id}: kind arity {required} != neighbor count "
                f"{len(f.neighbors)}"
            )

    # Transpose property: adjacency must contain each (factor, position) edge
    # exactly once, and nothing else.
    expected: list[set[tuple[int, int]]] = [set() for _ in range(graph.num_variables)]
    for f in graph.factors:
        for pos, v in enumerate(f.neighbors):
            if 0 <= v < graph.num_variables:
                expected[v].add((f.id, pos))
    if len(graph.variable_adjacency) != graph.num_variables:
        problems.append("variable_adjacency length != num_variables")
    else:
        for v in range(graph.num_variables):
            got = graph.variable_adjacency[v]
            if len(got) != len(set(got)):
                problems.append(f"variable {v}: repeated adjacency entry")
            missing = expected[v] - set(got)
            extra = set(got) - expected[v]
            for fid, pos in sorted(missing):
                problems.append(
                    f"variable {v}: missing adjacency entry for edge "
                    f"(factor {fid}, position {pos})"
                )
            for fid, pos in sorted(extra):
                problems.append(
                    f"variable {v}: stray adjacency entry (factor {fid}, "
                    f"position {pos})"
                )

    total_arity = sum(len(f.neighbors) for f in graph.factors)
    total_degree = sum(len(a) for a in graph.variable_adjacency)
    if total_arity != total_degree:
        problems.append(
            f"edge count mismatch: sum of arities {total_arity} != "
            f"sum of degrees {total_degree}"
        )
    return problems
