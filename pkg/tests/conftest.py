"""Shared enumeration oracles and instance generators for the test suite."""
from __future__ import annotations

import numpy as np
import pytest

from blackwell_rbp import gates
from blackwell_rbp.factor_graph import FactorGraph, build_graph
from blackwell_rbp.gates import NonlinearGate, ProductConstraint, Xor


def enumerate_weights(graph: FactorGraph) -> np.ndarray:
    """Indicator weight of every assignment, indexed by its binary spelling.

    Bit v of the index holds the value of variable v. Only usable for small
    graphs (2^num_variables entries).
    """
    n = graph.num_variables
    if n > 22:
        raise ValueError("enumeration oracle limited to 22 variables")
    m = np.arange(1 << n, dtype=np.int64)
    w = np.ones(1 << n)
    for f in graph.factors:
        idx = np.zeros_like(m)
        for pos, v in enumerate(f.neighbors):
            idx |= ((m >> v) & 1) << pos
        w *= gates.value_table(f.kind, len(f.neighbors))[idx]
    return w


def count_solutions(graph: FactorGraph) -> int:
    return int(enumerate_weights(graph).sum())


def enumerate_marginals(graph: FactorGraph) -> np.ndarray:
    """Exact marginals (num_variables, 2) by summing over all assignments."""
    w = enumerate_weights(graph)
    total = w.sum()
    if total == 0.0:
        raise ValueError("no satisfying assignment; marginals undefined")
    m = np.arange(w.size, dtype=np.int64)
    out = np.empty((graph.num_variables, 2))
    for v in range(graph.num_variables):
        p1 = w[((m >> v) & 1) == 1].sum() / total
        out[v] = (1.0 - p1, p1)
    return out


def random_tree_graph(
    rng: np.random.Generator, max_variables: int = 14
) -> FactorGraph:
    """Random loop-free factor graph mixing XOR, product, and gate factors.

    Grows a forest: every new factor joins variables from distinct
    components, so no cycle can form. Instances are rejected until
    satisfiable (the marginal oracle needs at least one solution).
    """
    while True:
        n = int(rng.integers(4, max_variables + 1))
        parent = list(range(n))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        specs = []
        for _ in range(int(rng.integers(2, n))):
            arity = int(rng.integers(1, 4))
            roots: dict[int, int] = {}
            for v in rng.permutation(n):
                r = find(int(v))
                if r not in roots:
                    roots[r] = int(v)
                if len(roots) == arity:
                    break
            chosen = list(roots.values())
            if len(chosen) < arity:
                continue
            for v in chosen[1:]:
                parent[find(v)] = find(chosen[0])
            kind_pick = rng.integers(3)
            if kind_pick == 0 or len(chosen) == 1:
                kind = Xor(int(rng.integers(2)))
            elif kind_pick == 1 and len(chosen) == 2:
                kind = ProductConstraint()
            else:
                table = gates.sample_balanced_noncanalized(len(chosen), rng)
                kind = NonlinearGate(table, int(rng.integers(2)))
            specs.append((kind, tuple(chosen)))
        if not specs:
            continue
        graph = build_graph(n, specs)
        if count_solutions(graph) > 0:
            return graph


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
