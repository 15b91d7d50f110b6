"""Message-passing semantics: scalar ops, the sweep engine, and the solvers."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from blackwell_rbp.factor_graph import build_graph
from blackwell_rbp.gates import ProductConstraint, Xor
from blackwell_rbp.propagation import (
    FLOOR,
    BeliefState,
    BinaryMessage,
    CompiledGraph,
    ContradictionError,
    Engine,
    EngineConfig,
    ReinforcementSchedule,
    SolveOutcome,
    Status,
    check_assignment,
    default_cutoff,
    factor_to_variable,
    gamma_at,
    hard_decision,
    marginal,
    reinforcement_message,
    run_bp,
    run_rbp,
    variable_to_factor_bp,
)
from conftest import enumerate_marginals, random_tree_graph

probs = st.floats(0.01, 0.99)


def msg(p1):
    return BinaryMessage(1.0 - p1, p1)


class TestScalarOps:
    def test_xor_factor_to_variable(self):
        # XOR target 0 over two variables: output copies the other message.
        out = factor_to_variable(Xor(0), [msg(0.3)], target_position=0)
        assert out.p1 == pytest.approx(0.3)
        out = factor_to_variable(Xor(1), [msg(0.3)], target_position=1)
        assert out.p1 == pytest.approx(0.7)

    def test_product_factor_to_variable(self):
        # Product constraint: p1_out proportional to the other side's p0.
        out = factor_to_variable(ProductConstraint(), [msg(0.4)], 0)
        assert out.p1 == pytest.approx(0.6 / 1.6)

    @given(probs, probs)
    @settings(max_examples=50)
    def test_factor_message_is_normalized(self, a, b):
        out = factor_to_variable(Xor(1), [msg(a), msg(b)], 1)
        assert out.p0 + out.p1 == pytest.approx(1.0, abs=1e-12)

    def test_variable_to_factor_empty_is_uniform(self):
        assert variable_to_factor_bp([]) == BinaryMessage(0.5, 0.5)

    @given(st.lists(probs, min_size=1, max_size=5))
    @settings(max_examples=50)
    def test_variable_to_factor_is_normalized_product(self, ps):
        out = variable_to_factor_bp([msg(p) for p in ps])
        p1 = math.prod(ps)
        p0 = math.prod(1.0 - p for p in ps)
        assert out.p1 == pytest.approx(p1 / (p0 + p1))

    def test_marginal_with_reinforcement(self):
        out = marginal([msg(0.5)], reinforcement=msg(0.9))
        assert out.p1 == pytest.approx(0.9)

    def test_contradiction_raises_with_factor_id(self):
        from blackwell_rbp.gates import NonlinearGate, TruthTable

        # A gate whose target bit never appears in its table: the indicator
        # is identically zero, so both message components vanish.
        impossible = NonlinearGate(TruthTable(1, (0, 0)), 1)
        with pytest.raises(ContradictionError) as err:
            factor_to_variable(impossible, [], 0, 7)
        assert err.value.factor_id == 7


class TestReinforcementMessage:
    def test_gamma_zero_is_uniform(self):
        assert reinforcement_message(msg(0.9), 0.0) == BinaryMessage(0.5, 0.5)

    def test_gamma_one_is_identity(self):
        out = reinforcement_message(BinaryMessage(0.9, 0.1), 1.0)
        assert out.p0 == pytest.approx(0.9)

    def test_half_power(self):
        out = reinforcement_message(BinaryMessage(0.64, 0.36), 0.5)
        assert out.p0 == pytest.approx(0.8 / 1.4)
        assert out.p1 == pytest.approx(0.6 / 1.4)

    def test_zero_to_the_zero_is_one(self):
        out = reinforcement_message(BinaryMessage(1.0, 0.0), 0.0)
        assert out == BinaryMessage(0.5, 0.5)

    def test_gamma_out_of_range(self):
        with pytest.raises(ValueError):
            reinforcement_message(msg(0.5), 1.5)


class TestSchedule:
    def test_gamma_at_start_is_zero_for_gamma0_one(self):
        assert gamma_at(ReinforcementSchedule(1.0, 0.999), 0) == 0.0

    def test_gamma_at_thousand(self):
        g = gamma_at(ReinforcementSchedule(1.0, 0.999), 1000)
        assert g == pytest.approx(1.0 - 0.999**1000)
        assert g == pytest.approx(0.6323, abs=1e-4)

    def test_warm_start_value(self):
        assert gamma_at(ReinforcementSchedule(0.8, 0.999), 0) == pytest.approx(0.2)

    @given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 200))
    @settings(max_examples=80)
    def test_gamma_non_decreasing_and_clamped(self, g0, g1, l):
        s = ReinforcementSchedule(g0, g1)
        a, b = gamma_at(s, l), gamma_at(s, l + 1)
        assert 0.0 <= a <= b <= 1.0

    def test_default_cutoff(self):
        assert default_cutoff(ReinforcementSchedule(1.0, 0.999)) == 1000
        assert default_cutoff(ReinforcementSchedule(1.0, 0.99)) == 100

    def test_default_cutoff_rejects_gamma1_one(self):
        with pytest.raises(ValueError):
            default_cutoff(ReinforcementSchedule(1.0, 1.0))

    def test_schedule_validation(self):
        with pytest.raises(ValueError):
            ReinforcementSchedule(1.2, 0.5)

    def test_negative_iteration(self):
        with pytest.raises(ValueError):
            gamma_at(ReinforcementSchedule(1.0, 0.9), -1)


class TestConfig:
    def test_bad_mode(self):
        with pytest.raises(ValueError):
            EngineConfig(mode="sp")

    def test_rbp_needs_schedule(self):
        with pytest.raises(ValueError):
            EngineConfig(mode="rbp")

    def test_bad_epsilon_and_iterations(self):
        with pytest.raises(ValueError):
            EngineConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            EngineConfig(max_iterations=0)

    def test_bad_decay_and_patience(self):
        with pytest.raises(ValueError):
            EngineConfig(memory_decay=1.0)
        with pytest.raises(ValueError):
            EngineConfig(stall_patience=-1)


class TestHardDecision:
    def test_examples(self):
        marg = [(0.1, 0.9), (0.5, 0.5), (0.6, 0.4)]
        assert list(hard_decision(marg)) == [1, 0, 0]

    def test_tie_tolerance(self):
        assert hard_decision([(0.5 - 1e-13, 0.5 + 1e-13)])[0] == 0


class TestCheckAssignment:
    def test_violations_reported_by_id(self):
        g = build_graph(2, [(ProductConstraint(), (0, 1)), (Xor(1), (0, 1))])
        assert check_assignment(g, [1, 1]) == [0, 1]
        assert check_assignment(g, [0, 1]) == []

    def test_length_mismatch(self):
        g = build_graph(2, [(Xor(0), (0, 1))])
        with pytest.raises(ValueError):
            check_assignment(g, [0])

    def test_matches_compiled_check(self, rng):
        for _ in range(20):
            g = random_tree_graph(rng, max_variables=10)
            cg = CompiledGraph(g)
            bits = rng.integers(0, 2, g.num_variables).astype(np.uint8)
            assert check_assignment(g, bits) == cg.check(bits)


class TestEngine:
    def test_forcing_factor_pins_marginal(self):
        g = build_graph(1, [(Xor(1), (0,))])
        eng = Engine(g, seed=0)
        eng.step(0.0)
        m = eng.marginals()
        assert m[0, 1] == pytest.approx(1.0)

    def test_messages_stay_normalized(self, rng):
        g = random_tree_graph(rng, max_variables=12)
        eng = Engine(g, seed=4)
        for _ in range(5):
            eng.step(0.3)
            state = eng.belief_state()
            for arr in (state.var_to_factor, state.factor_to_var, state.marginals):
                assert np.allclose(arr.sum(axis=1), 1.0, atol=1e-12)
                assert (arr >= 0.0).all()

    def test_fixed_point_satisfies_scalar_update(self, rng):
        # At a converged BP fixed point the kernel's messages must agree with
        # the scalar reference update recomputed from the same state.
        g = random_tree_graph(rng, max_variables=12)
        out = run_bp(g, EngineConfig(mode="bp", epsilon=1e-14, seed=5))
        assert out.status is Status.CONVERGED
        state = out.final_state
        for f in g.factors:
            for pos in range(len(f.neighbors)):
                incoming = [
                    BinaryMessage(*state.var_to_factor[g.edge_index(f.id, p)])
                    for p in range(len(f.neighbors))
                    if p != pos
                ]
                want = factor_to_variable(f.kind, incoming, pos)
                got = state.factor_to_var[g.edge_index(f.id, pos)]
                assert got[0] == pytest.approx(want.p0, abs=1e-9)

    def test_step_delta_reaches_zero_on_tree(self, rng):
        g = random_tree_graph(rng, max_variables=10)
        eng = Engine(g, seed=1)
        deltas = [eng.step(0.0) for _ in range(30)]
        assert deltas[-1] < 1e-12


class TestRunBp:
    def test_mode_guard(self):
        g = build_graph(1, [(Xor(0), (0,))])
        with pytest.raises(ValueError):
            run_bp(g, EngineConfig(mode="rbp", schedule=ReinforcementSchedule(1, 0.9)))

    def test_tree_marginals_match_enumeration(self, rng):
        for _ in range(20):
            g = random_tree_graph(rng, max_variables=12)
            out = run_bp(g, EngineConfig(mode="bp", epsilon=1e-13, seed=2))
            assert out.status is Status.CONVERGED
            exact = enumerate_marginals(g)
            assert np.abs(out.final_state.marginals - exact).max() < 1e-9

    def test_symmetric_chain_is_uniform(self):
        g = build_graph(3, [(Xor(0), (0, 1)), (Xor(0), (1, 2))])
        out = run_bp(g, EngineConfig(mode="bp", epsilon=1e-12, seed=0))
        assert np.allclose(out.final_state.marginals, 0.5)

    def test_cutoff_status(self, rng):
        g = random_tree_graph(rng, max_variables=10)
        out = run_bp(g, EngineConfig(mode="bp", max_iterations=1, seed=0))
        assert out.status is Status.CUTOFF
        assert out.iterations_used == 1

    def test_determinism(self, rng):
        g = random_tree_graph(rng, max_variables=12)
        a = run_bp(g, EngineConfig(mode="bp", seed=11))
        b = run_bp(g, EngineConfig(mode="bp", seed=11))
        assert np.array_equal(a.final_state.factor_to_var, b.final_state.factor_to_var)
        assert a.iterations_used == b.iterations_used


def rbp_config(**kw):
    defaults = dict(
        mode="rbp", seed=3, schedule=ReinforcementSchedule(1.0, 0.9), max_iterations=60
    )
    defaults.update(kw)
    return EngineConfig(**defaults)


class TestRunRbp:
    def test_mode_guard(self):
        g = build_graph(1, [(Xor(0), (0,))])
        with pytest.raises(ValueError):
            run_rbp(g, EngineConfig(mode="bp"))

    def test_single_product_constraint(self):
        g = build_graph(2, [(ProductConstraint(), (0, 1))])
        out = run_rbp(g, rbp_config())
        assert out.status is Status.SOLUTION_FOUND
        assert tuple(out.assignment) != (1, 1)

    def test_solution_passes_checker(self, rng):
        for _ in range(10):
            g = random_tree_graph(rng, max_variables=12)
            out = run_rbp(g, rbp_config(seed=int(rng.integers(2**32))))
            if out.status is Status.SOLUTION_FOUND:
                assert check_assignment(g, out.assignment) == []
                assert out.violated_factors == []

    def test_unsatisfiable_runs_to_cutoff(self):
        g = build_graph(1, [(Xor(0), (0,)), (Xor(1), (0,))])
        out = run_rbp(g, rbp_config(max_iterations=25))
        assert out.status is Status.CUTOFF
        assert out.iterations_used == 25
        assert out.violated_factors

    def test_gamma_zero_reduces_to_bp_exactly(self):
        # Loopy instance: BP keeps a nonzero delta for the whole window, so
        # neither run stops before the iteration cap.
        import blackwell_rbp as bw

        code, _ = bw.build_code(
            40, bw.RatePair(0.5, 0.5), 3, 4, False, np.random.default_rng(21)
        )
        g = code.factor_graph()
        bp_states: list[BeliefState] = []
        rbp_states: list[BeliefState] = []
        run_bp(
            g,
            EngineConfig(mode="bp", max_iterations=30, epsilon=1e-300, seed=17),
            state_hook=lambda l, s: bp_states.append(s),
        )
        run_rbp(
            g,
            EngineConfig(
                mode="rbp",
                schedule=ReinforcementSchedule(1.0, 1.0),
                max_iterations=30,
                seed=17,
            ),
            state_hook=lambda l, s: rbp_states.append(s),
        )
        assert len(rbp_states) == len(bp_states)
        for a, b in zip(bp_states, rbp_states):
            assert np.array_equal(a.factor_to_var, b.factor_to_var)
            assert np.array_equal(a.var_to_factor, b.var_to_factor)

    def test_trace_hook_rows(self):
        g = build_graph(2, [(ProductConstraint(), (0, 1)), (Xor(1), (0, 1))])
        rows = []
        run_rbp(
            g,
            rbp_config(max_iterations=10),
            trace=lambda l, gamma, delta, viol: rows.append((l, gamma, delta, viol)),
        )
        assert rows
        assert rows[0][0] == 0
        assert rows[0][1] == gamma_at(ReinforcementSchedule(1.0, 0.9), 0)

    def test_default_cutoff_applies(self):
        g = build_graph(1, [(Xor(0), (0,)), (Xor(1), (0,))])
        out = run_rbp(
            g,
            EngineConfig(mode="rbp", seed=0, schedule=ReinforcementSchedule(1.0, 0.95)),
        )
        assert out.iterations_used == 20

    def test_determinism(self, rng):
        g = random_tree_graph(rng, max_variables=12)
        cfg = rbp_config(seed=29)
        a = run_rbp(g, cfg)
        b = run_rbp(g, cfg)
        assert a.status == b.status
        assert np.array_equal(a.assignment, b.assignment)
        assert a.iterations_used == b.iterations_used

    def test_blackwell_instance_solves(self):
        import blackwell_rbp as bw

        code, _ = bw.build_code(
            200, bw.RatePair(0.5, 0.5), 6, 6, False, np.random.default_rng(8)
        )
        rng = np.random.default_rng(9)
        bins = bw.BinIndices(
            w1=rng.integers(0, 2, code.k1).astype(np.uint8),
            w2=rng.integers(0, 2, code.k2).astype(np.uint8),
        )
        out = run_rbp(
            code.factor_graph(bins),
            EngineConfig(
                mode="rbp", seed=10, schedule=ReinforcementSchedule(1.0, 0.99)
            ),
        )
        assert out.status is Status.SOLUTION_FOUND

    def test_non_cumulative_mode_runs(self, rng):
        g = random_tree_graph(rng, max_variables=10)
        out = run_rbp(g, rbp_config(cumulative=False))
        assert isinstance(out, SolveOutcome)
        if out.status is Status.SOLUTION_FOUND:
            assert check_assignment(g, out.assignment) == []
