import numpy as np
import pytest

from conftest import odd_cycle_instance
from qcbb.blp import (
    BlpInstance,
    brute_force_optimum,
    compute_big_m,
    enumerate_assignments,
    generate_spp,
)
from qcbb.engine import (
    Incumbent,
    Node,
    SolverConfig,
    conflict_values,
    evaluate_node,
    propagate,
    run_plain_qaoa,
    select_branching_variable,
    solve,
)
from qcbb.vqa import SampleSet


def sample_set(rows, counts):
    rows = np.asarray(rows, dtype=np.int8)
    counts = np.asarray(counts)
    return SampleSet(bitstrings=rows, counts=counts, shots=int(counts.sum()))


class TestConflictValues:
    def test_hand_worked_example(self):
        A = np.array([[1.0, 1.0, 0.0], [0.0, 1.0, 1.0]])
        b = np.array([1.0, 1.0])
        samples = sample_set([[1, 1, 0], [0, 0, 0]], [3, 1])
        data = conflict_values(A, b, samples)
        assert np.allclose(data.nu, [1.0, 0.25])
        assert np.allclose(data.gamma, [1.0, 1.25, 0.25])

    def test_all_feasible(self):
        A = np.array([[1.0, 1.0]])
        b = np.array([1.0])
        data = conflict_values(A, b, sample_set([[1, 0], [0, 1]], [2, 2]))
        assert np.all(data.nu == 0) and np.all(data.gamma == 0)

    def test_single_fully_violating_sample(self):
        A = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        b = np.array([1.0, 1.0])
        data = conflict_values(A, b, sample_set([[0, 0, 0]], [4]))
        assert np.all(data.nu == 1.0)
        # gamma_i counts the constraints variable i appears in
        assert np.allclose(data.gamma, [1.0, 1.0, 2.0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            conflict_values(np.ones((1, 3)), np.ones(1), sample_set([[1, 0]], [1]))


class TestSelectBranchingVariable:
    def test_argmax(self):
        assert select_branching_variable(np.array([1.0, 1.25, 0.25]), np.zeros(3)) == 1

    def test_tie_breaks_low_index(self):
        assert select_branching_variable(np.array([0.5, 0.5]), np.zeros(2)) == 0

    def test_zero_gamma_falls_back_to_field(self):
        assert select_branching_variable(np.zeros(2), np.array([0.5, -3.0])) == 1

    def test_empty(self):
        with pytest.raises(ValueError):
            select_branching_variable(np.zeros(0), np.zeros(0))


class TestPropagate:
    def test_spp_row_fixes_rest_to_zero(self):
        A = np.array([[1.0, 1.0, 1.0]])
        b = np.array([1.0])
        fix, ok = propagate(A, b, {1: 1})
        assert ok and fix == {0: 0, 1: 1, 2: 0}

    def test_contradiction_detected(self):
        A = np.array([[1.0, 1.0]])
        b = np.array([1.0])
        _, ok = propagate(A, b, {0: 0, 1: 0})
        assert not ok

    def test_no_fixings_fixpoint(self):
        A = np.array([[1.0, 1.0]])
        b = np.array([1.0])
        fix, ok = propagate(A, b, {})
        assert ok and fix == {}

    def test_unreachable_rhs(self):
        _, ok = propagate(np.array([[1.0, 1.0]]), np.array([3.0]), {})
        assert not ok

    def test_chained_propagation(self):
        # fixing x1=1 zeroes row 0's residual, forcing x0=0; row 1 then forces x2=1
        A = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
        b = np.array([1.0, 1.0])
        fix, ok = propagate(A, b, {1: 1})
        assert ok and fix == {0: 0, 1: 1, 2: 1}

    def test_negative_coefficients(self):
        # x0 - x1 = 1 forces x0=1, x1=0 (max activity equals residual)
        fix, ok = propagate(np.array([[1.0, -1.0]]), np.array([1.0]), {})
        assert ok and fix == {0: 1, 1: 0}

    def test_preserves_feasible_completions(self):
        rng = np.random.default_rng(3)
        for _ in range(15):
            inst = generate_spp(int(rng.integers(5, 9)), int(rng.integers(2, 4)), seed=int(rng.integers(999)))
            k = int(rng.integers(0, 3))
            idx = rng.choice(inst.n, size=k, replace=False)
            fixings = {int(i): int(rng.integers(0, 2)) for i in idx}
            fix, ok = propagate(inst.A, inst.b, fixings)
            before = {
                tuple(x)
                for x in enumerate_assignments(inst.n)
                if inst.is_feasible(x) and all(x[i] == v for i, v in fixings.items())
            }
            if not ok:
                assert not before
                continue
            after = {
                tuple(x)
                for x in enumerate_assignments(inst.n)
                if inst.is_feasible(x) and all(x[i] == v for i, v in fix.items())
            }
            assert before == after


class TestEvaluateNode:
    def test_propagation_leaf_is_fathomed(self):
        inst = BlpInstance(c=[2.0, 3.0], A=[[1.0, 0.0], [0.0, 1.0]], b=[1.0, 0.0])
        node = Node(id=0, parent=None, fixings={}, local_lb=-np.inf)
        ev = evaluate_node(inst, compute_big_m(inst), node, SolverConfig(seed=0), None)
        assert ev.outcome == "fathomed_leaf"
        value, x, feasible = ev.best_candidate
        assert feasible and value == 2.0
        assert np.array_equal(x, [1, 0])

    def test_inherited_bound_at_penalty_prunes_infeasible(self, three_var_instance):
        M = compute_big_m(three_var_instance)
        node = Node(id=0, parent=None, fixings={}, local_lb=M + 5.0)
        ev = evaluate_node(three_var_instance, M, node, SolverConfig(seed=0), None)
        assert ev.outcome == "pruned_infeasible" and ev.reason == "bound"

    def test_incumbent_prunes(self, three_var_instance):
        M = compute_big_m(three_var_instance)
        node = Node(id=0, parent=None, fixings={}, local_lb=0.9)
        ev = evaluate_node(three_var_instance, M, node, SolverConfig(seed=0), 0.5)
        assert ev.outcome == "pruned_bound"

    def test_root_branches_on_one_variable(self, three_var_instance):
        M = compute_big_m(three_var_instance)
        node = Node(id=0, parent=None, fixings={}, local_lb=-np.inf)
        ev = evaluate_node(three_var_instance, M, node, SolverConfig(seed=1), None)
        assert ev.outcome == "branched"
        a, b = ev.children
        assert a.branch_var == b.branch_var
        assert (a.branch_value, b.branch_value) == (0, 1)
        assert a.fixings[a.branch_var] == 0
        assert b.fixings[b.branch_var] == 1

    def test_bound_proves_cycle_infeasible(self):
        # 3-cycle of equality pairs has no binary solution, yet every row
        # passes activity propagation; only the penalty bound can refute it
        inst = odd_cycle_instance()
        M = compute_big_m(inst)
        node = Node(id=0, parent=None, fixings={}, local_lb=-np.inf)
        ev = evaluate_node(inst, M, node, SolverConfig(seed=0), None)
        assert ev.outcome == "pruned_infeasible" and ev.reason == "bound"
        for x in enumerate_assignments(inst.n):
            assert not inst.is_feasible(x)


class TestSolve:
    def test_three_variable_instance(self, three_var_instance):
        res = solve(three_var_instance, SolverConfig(seed=3))
        assert res.status == "optimal"
        assert res.best_value == 1.0
        assert np.array_equal(res.best_assignment, [0, 1, 0])
        assert res.global_lb == pytest.approx(1.0, abs=1e-9)

    def test_infeasible_by_propagation(self):
        res = solve(BlpInstance(c=[1, 1], A=[[1, 1]], b=[3]), SolverConfig(seed=0))
        assert res.status == "infeasible"
        assert res.best_value is None

    def test_infeasible_cycle_instance(self):
        res = solve(odd_cycle_instance(extra_rows=1), SolverConfig(seed=0))
        assert res.status == "infeasible"

    def test_node_limit(self):
        inst = generate_spp(10, 4, seed=5)
        res = solve(inst, SolverConfig(seed=0, node_limit=1))
        assert res.status == "node_limit"
        assert res.nodes_evaluated == 1

    def test_gap_target_stops_early(self):
        inst = generate_spp(10, 4, seed=5)
        res = solve(inst, SolverConfig(seed=0, gap_target=0.99))
        assert res.status in ("gap_reached", "optimal")
        if res.status == "gap_reached":
            gap = (res.best_penalized_value - res.global_lb) / max(
                1.0, abs(res.best_penalized_value)
            )
            assert gap <= 0.99

    def test_matches_brute_force(self):
        rng = np.random.default_rng(0)
        for trial in range(6):
            inst = generate_spp(int(rng.integers(8, 11)), int(rng.integers(3, 5)), seed=100 + trial)
            res = solve(inst, SolverConfig(seed=trial))
            bf = brute_force_optimum(inst)
            assert res.status == "optimal"
            assert res.best_value == pytest.approx(bf.value)
            assert inst.is_feasible(res.best_assignment)

    def test_deterministic_traces(self, three_var_instance):
        a = solve(three_var_instance, SolverConfig(seed=9))
        b = solve(three_var_instance, SolverConfig(seed=9))
        assert a.trace == b.trace
        assert a.nodes_evaluated == b.nodes_evaluated

    def test_monotone_bounds_along_edges(self):
        inst = generate_spp(10, 4, seed=17)
        res = solve(inst, SolverConfig(seed=2))
        for record in res.node_records.values():
            if record.parent_id is None:
                continue
            parent = res.node_records[record.parent_id]
            assert record.local_lb >= parent.local_lb - 1e-9

    def test_many_body_count_monotone_along_edges(self):
        inst = generate_spp(10, 4, seed=23)
        res = solve(inst, SolverConfig(seed=2))
        checked = 0
        for record in res.node_records.values():
            if record.parent_id is None or record.many_body_count is None:
                continue
            parent = res.node_records[record.parent_id]
            if parent.many_body_count is None:
                continue
            assert record.many_body_count <= parent.many_body_count
            checked += 1
        assert checked > 0

    def test_incumbent_dominates_optimum_throughout(self):
        inst = generate_spp(9, 3, seed=31)
        bf = brute_force_optimum(inst)
        res = solve(inst, SolverConfig(seed=1))
        ubs = [e.ub for e in res.trace if e.kind == "incumbent_update"]
        assert ubs and all(ub >= bf.value - 1e-9 for ub in ubs)

    def test_pruning_neutrality(self):
        rng = np.random.default_rng(8)
        for trial in range(4):
            inst = generate_spp(int(rng.integers(8, 11)), 3, seed=300 + trial)
            with_pruning = solve(inst, SolverConfig(seed=trial))
            without = solve(inst, SolverConfig(seed=trial, prune=False))
            assert with_pruning.best_value == without.best_value

    def test_parallel_workers_agree_on_value(self):
        inst = generate_spp(9, 3, seed=41)
        serial = solve(inst, SolverConfig(seed=0))
        parallel = solve(inst, SolverConfig(seed=0, workers=3))
        assert parallel.status == "optimal"
        assert parallel.best_value == serial.best_value

    def test_warm_start_still_optimal(self):
        inst = generate_spp(9, 3, seed=43)
        bf = brute_force_optimum(inst)
        res = solve(inst, SolverConfig(seed=0, warm_start=True))
        assert res.status == "optimal" and res.best_value == pytest.approx(bf.value)

    def test_vqa_first_mode_still_optimal(self):
        inst = generate_spp(9, 3, seed=47)
        bf = brute_force_optimum(inst)
        res = solve(inst, SolverConfig(seed=0, vqa_first=True))
        assert res.status == "optimal" and res.best_value == pytest.approx(bf.value)

    def test_fifteen_variable_reference_class(self):
        # reference problem size (node counts are stochastic, only the
        # optimality contract is asserted)
        inst = generate_spp(15, 6, seed=172)
        res = solve(inst, SolverConfig(seed=0))
        bf = brute_force_optimum(inst)
        assert res.status == "optimal"
        assert res.best_value == pytest.approx(bf.value)

    def test_rejects_oversized_instance(self):
        inst = generate_spp(12, 4, seed=0)
        with pytest.raises(ValueError):
            solve(inst, SolverConfig(seed=0, simulator_limit=10))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(p=0)
        with pytest.raises(ValueError):
            SolverConfig(seed=-1)
        with pytest.raises(ValueError):
            SolverConfig(node_limit=0)


class TestIncumbent:
    def test_penalized_and_feasible_tracked_separately(self):
        inc = Incumbent()
        assert inc.offer(10.0, np.array([1.0]), feasible=False)
        assert inc.best_feasible_value is None
        assert inc.offer(7.0, np.array([0.0]), feasible=True)
        assert inc.best_feasible_value == 7.0
        # worse candidate changes nothing
        assert not inc.offer(9.0, np.array([1.0]), feasible=True)
        assert inc.best_penalized_value == 7.0


class TestPlainQaoa:
    def test_budget_of_one(self, three_var_instance):
        res = run_plain_qaoa(three_var_instance, SolverConfig(seed=0), queries=1)
        assert res.queries == 1
        assert sum(1 for e in res.trace if e.kind == "optimizer_query") == 1

    def test_deterministic(self, three_var_instance):
        a = run_plain_qaoa(three_var_instance, SolverConfig(seed=5), queries=40)
        b = run_plain_qaoa(three_var_instance, SolverConfig(seed=5), queries=40)
        assert a.trace == b.trace
        assert a.best_penalized_value == b.best_penalized_value

    def test_best_cost_floored_by_optimum(self, three_var_instance):
        bf = brute_force_optimum(three_var_instance)
        res = run_plain_qaoa(three_var_instance, SolverConfig(seed=1), queries=500)
        assert res.best_penalized_value >= bf.value - 1e-9
