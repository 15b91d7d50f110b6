"""Graph construction, adjacency transpose, validation, and JSON round trips."""
import numpy as np
import pytest

from blackwell_rbp.factor_graph import (
    FactorGraph,
    FactorNode,
    GraphError,
    build_graph,
    validate,
)
from blackwell_rbp.gates import NonlinearGate, ProductConstraint, Xor, xor_table
from conftest import random_tree_graph


def small_graph():
    return build_graph(
        4,
        [
            (Xor(1), (0, 1, 2)),
            (ProductConstraint(), (2, 3)),
            (NonlinearGate(xor_table(2), 0), (1, 3)),
        ],
    )


class TestBuild:
    def test_counts_and_offsets(self):
        g = small_graph()
        assert g.num_variables == 4
        assert g.num_edges == 7
        assert list(g.edge_offsets) == [0, 3, 5, 7]

    def test_edge_index_is_offset_plus_position(self):
        g = small_graph()
        assert g.edge_index(1, 1) == 4
        assert g.edge_index(2, 0) == 5

    def test_edge_var_matches_neighbors(self):
        g = small_graph()
        for f in g.factors:
            for pos, v in enumerate(f.neighbors):
                assert g.edge_var[g.edge_index(f.id, pos)] == v

    def test_variable_adjacency_transpose(self):
        g = small_graph()
        assert g.variable_adjacency[1] == [(0, 1), (2, 0)]
        assert g.variable_degree(3) == 2

    def test_rejects_duplicate_neighbor(self):
        with pytest.raises(GraphError):
            build_graph(3, [(Xor(0), (1, 1))])

    def test_rejects_out_of_range_variable(self):
        with pytest.raises(GraphError):
            build_graph(2, [(Xor(0), (0, 2))])

    def test_rejects_empty_factor(self):
        with pytest.raises(GraphError):
            build_graph(2, [(Xor(0), ())])

    def test_rejects_kind_arity_mismatch(self):
        with pytest.raises(GraphError):
            build_graph(3, [(ProductConstraint(), (0, 1, 2))])

    def test_rejects_negative_variable_count(self):
        with pytest.raises(GraphError):
            FactorGraph(-1, [])

    def test_empty_graph_is_fine(self):
        g = FactorGraph(3, [])
        assert g.num_edges == 0
        assert validate(g) == []


class TestValidate:
    def test_clean_graph_has_no_problems(self):
        assert validate(small_graph()) == []

    def test_detects_corrupted_adjacency(self):
        g = small_graph()
        g.variable_adjacency[0].append((1, 0))
        problems = validate(g)
        assert any("stray" in p for p in problems)

    def test_detects_missing_adjacency(self):
        g = small_graph()
        g.variable_adjacency[2].pop()
        problems = validate(g)
        assert any("missing" in p for p in problems)

    def test_detects_bad_factor_kind_arity(self):
        g = small_graph()
        g.factors[1] = FactorNode(1, ProductConstraint(), (1, 2, 3))
        assert any("arity" in p for p in validate(g))


class TestSerialization:
    def test_json_round_trip(self):
        g = small_graph()
        assert FactorGraph.from_json(g.to_json()) == g

    def test_json_round_trip_random_instances(self, rng):
        for _ in range(10):
            g = random_tree_graph(rng, max_variables=10)
            assert FactorGraph.from_json(g.to_json()) == g

    def test_file_round_trip(self, tmp_path):
        g = small_graph()
        path = tmp_path / "graph.json"
        g.save(path)
        assert FactorGraph.load(path) == g

    def test_unknown_kind_rejected(self):
        text = '{"num_variables": 1, "factors": [{"kind": "nand", "neighbors": [0]}]}'
        with pytest.raises(GraphError):
            FactorGraph.from_json(text)


def test_random_tree_generator_is_loop_free(rng):
    # Tree property: edges = variables + factors - components.
    for _ in range(20):
        g = random_tree_graph(rng, max_variables=12)
        seen = set()
        components = 0
        adjacency = {("v", i): [] for i in range(g.num_variables)}
        for f in g.factors:
            adjacency[("f", f.id)] = [("v", v) for v in f.neighbors]
            for v in f.neighbors:
                adjacency[("v", v)].append(("f", f.id))
        for node in adjacency:
            if node in seen:
                continue
            components += 1
            stack = [node]
            while stack:
                cur = stack.pop()
                if cur in seen:
                    continue
                seen.add(cur)
                stack.extend(adjacency[cur])
        nodes = g.num_variables + len(g.factors)
        assert g.num_edges == nodes - components
