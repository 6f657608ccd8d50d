"""Conflict-driven branch and bound around a variational quantum subroutine.

Each node is a partial assignment of the master problem. Evaluating a node
propagates forced fixings, reduces the problem, computes a MaxCut-based lower
bound (constant ledger added back so bounds live in the master frame), and
either prunes, fathoms, or runs the QAOA subroutine to sample candidate
solutions. Violated constraints in the samples yield per-variable conflict
values; the most conflicting variable is branched on. Best-first selection by
lowest lower bound; the incumbent used for pruning is the best penalized cost
seen, while the reported answer is the best feasible solution.
"""

from __future__ import annotations

import heapq
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import bound as bound_mod
from . import vqa
from .blp import FEASIBILITY_TOL, BlpInstance, compute_big_m
from .bound import BoundConfig, BoundResult
from .ising import ReducedProblem, encode, many_body_count, reduce
from .metrics import TraceEvent, TraceRecorder
from .vqa import OptimizerTrace, QaoaParams, SampleSet

OPTIMALITY_TOL = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    p: int = 3
    shots: int = 1024
    node_queries: int = 50
    node_limit: int | None = None
    time_limit: float | None = None
    gap_target: float | None = None
    seed: int = 0
    warm_start: bool = False
    prune: bool = True
    vqa_first: bool = False
    simulator_limit: int = vqa.SIMULATOR_LIMIT
    workers: int = 1
    wall_clock: bool = False
    bound: BoundConfig = field(default_factory=BoundConfig)

    def __post_init__(self):
        if self.p < 1 or self.shots < 1 or self.node_queries < 1:
            raise ValueError("p, shots and node_queries must be positive")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.workers < 1:
            raise ValueError("workers must be positive")
        for limit in (self.node_limit, self.time_limit, self.gap_target):
            if limit is not None and limit <= 0:
                raise ValueError("limits must be positive when set")


@dataclass
class Node:
    """An open subproblem: fixings over original indices plus inherited bound."""

    id: int
    parent: int | None
    fixings: dict[int, int]
    local_lb: float
    branch_var: int | None = None
    branch_value: int | None = None
    warm: QaoaParams | None = None

    @property
    def depth(self) -> int:
        return len(self.fixings)


@dataclass(frozen=True)
class ConflictData:
    """Sample-derived violation structure of a node's reduced constraints."""

    violation: np.ndarray  # m x s indicator
    nu: np.ndarray  # violation score per constraint, in [0, 1]
    incidence: np.ndarray  # m x n variable-in-constraint indicator
    gamma: np.ndarray  # conflict value per variable


@dataclass
class Incumbent:
    """Best penalized cost (pruning bound) and best feasible solution (answer)."""

    best_penalized_value: float | None = None
    best_penalized_x: np.ndarray | None = None
    best_feasible_value: float | None = None
    best_feasible_x: np.ndarray | None = None

    def offer(self, value: float, x: np.ndarray, feasible: bool) -> bool:
        """Record a candidate; returns True when the penalized bound improved."""
        improved = False
        if self.best_penalized_value is None or value < self.best_penalized_value:
            self.best_penalized_value = value
            self.best_penalized_x = x
            improved = True
        if feasible and (self.best_feasible_value is None or value < self.best_feasible_value):
            self.best_feasible_value = value
            self.best_feasible_x = x
        return improved


@dataclass(frozen=True)
class NodeRecord:
    """Per-node summary kept alongside the event trace."""

    node_id: int
    parent_id: int | None
    depth: int
    outcome: str
    reason: str | None
    local_lb: float
    fixings: dict[int, int]
    n_free: int
    many_body_count: int | None


@dataclass(frozen=True)
class ChildBranch:
    fixings: dict[int, int]
    branch_var: int
    branch_value: int
    feasible: bool


@dataclass(frozen=True)
class NodeEvaluation:
    outcome: str  # pruned_infeasible | pruned_bound | fathomed_leaf | branched
    reason: str | None
    node_lb: float
    fixings: dict[int, int]
    n_free: int
    many_body: int | None = None
    bound_result: BoundResult | None = None
    optimizer_trace: OptimizerTrace | None = None
    expectation_offset: float = 0.0
    best_candidate: tuple[float, np.ndarray, bool] | None = None
    best_feasible_candidate: tuple[float, np.ndarray] | None = None
    best_params: QaoaParams | None = None
    children: tuple[ChildBranch, ...] = ()


@dataclass(frozen=True)
class SolveResult:
    status: str  # optimal | gap_reached | node_limit | time_limit | infeasible
    best_value: float | None
    best_assignment: np.ndarray | None
    best_penalized_value: float | None
    best_penalized_assignment: np.ndarray | None
    global_lb: float
    nodes_evaluated: int
    trace: tuple[TraceEvent, ...]
    node_records: dict[int, NodeRecord]
    M: float
    elapsed_s: float


def conflict_values(A: np.ndarray, b: np.ndarray, samples: SampleSet) -> ConflictData:
    """Violation scores per constraint and conflict values per variable.

    A sample violates constraint j when its residual is nonzero; nu_j is the
    shot-weighted fraction of violating samples, and gamma = nu @ P spreads
    the scores onto the variables appearing in each constraint.
    """
    X = samples.bitstrings.astype(float)
    if X.shape[1] != A.shape[1]:
        raise ValueError(
            f"samples have {X.shape[1]} variables, constraints have {A.shape[1]}"
        )
    residual = X @ A.T - b
    violation = (np.abs(residual) > FEASIBILITY_TOL).T.astype(np.int8)
    nu = (violation @ samples.counts) / samples.shots
    incidence = (A != 0).astype(np.int8)
    gamma = nu @ incidence
    return ConflictData(violation=violation, nu=nu, incidence=incidence, gamma=gamma)


def select_branching_variable(gamma: np.ndarray, fields: np.ndarray) -> int:
    """Most conflicting variable; ties to the lowest index.

    When all samples were feasible (gamma identically zero) falls back to the
    variable with the largest absolute field.
    """
    if gamma.size == 0:
        raise ValueError("cannot branch on an empty problem")
    if float(np.max(gamma)) > 0.0:
        return int(np.argmax(gamma))
    return int(np.argmax(np.abs(fields)))


def propagate(
    A: np.ndarray, b: np.ndarray, fixings: dict[int, int], tol: float = FEASIBILITY_TOL
) -> tuple[dict[int, int], bool]:
    """Fixpoint of activity-based propagation on the residual equalities.

    For each constraint over the free binaries: infeasible when the residual
    lies outside [min activity, max activity]; when the residual equals one of
    the activity bounds, every free variable with a nonzero coefficient is
    forced to the achieving value. Returns the extended fixings and whether
    the system is still feasible.
    """
    m, n = A.shape
    fix = dict(fixings)
    changed = True
    while changed:
        changed = False
        for j in range(m):
            row = A[j]
            residual = b[j]
            min_act = 0.0
            max_act = 0.0
            free: list[int] = []
            for i in range(n):
                a = row[i]
                if a == 0.0:
                    continue
                if i in fix:
                    residual -= a * fix[i]
                else:
                    free.append(i)
                    min_act += min(a, 0.0)
                    max_act += max(a, 0.0)
            if min_act > residual + tol or max_act < residual - tol:
                return fix, False
            if free and abs(min_act - residual) <= tol:
                for i in free:
                    fix[i] = 0 if row[i] > 0 else 1
                changed = True
            elif free and abs(max_act - residual) <= tol:
                for i in free:
                    fix[i] = 1 if row[i] > 0 else 0
                changed = True
    return fix, True


def _node_rng(seed: int, node_id: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, node_id, stream])


def _evaluate_candidates(
    master: BlpInstance, red: ReducedProblem, samples: SampleSet, M: float
) -> tuple[tuple[float, np.ndarray, bool], tuple[float, np.ndarray] | None]:
    """Best penalized (and best feasible, if any) completion among samples."""
    s = samples.n_distinct
    full = np.zeros((s, master.n))
    for idx, val in red.fixings.items():
        full[:, idx] = val
    if red.n_free:
        full[:, red.index_map] = samples.bitstrings
    residual = full @ master.A.T - master.b
    penalized = full @ master.c + M * np.sum(residual * residual, axis=1)
    feasible = np.all(np.abs(residual) <= FEASIBILITY_TOL, axis=1)
    best = int(np.argmin(penalized))
    best_cand = (float(penalized[best]), full[best].copy(), bool(feasible[best]))
    best_feas = None
    if feasible.any():
        order = np.where(feasible)[0]
        j = order[int(np.argmin(penalized[order]))]
        best_feas = (float(penalized[j]), full[j].copy())
    return best_cand, best_feas


def _run_vqa(
    red: ReducedProblem,
    master: BlpInstance,
    M: float,
    config: SolverConfig,
    node: Node,
) -> tuple[OptimizerTrace, QaoaParams, SampleSet]:
    diag = vqa.build_diagonal(
        red.model, include_constant=False, limit=config.simulator_limit
    )
    init = node.warm if config.warm_start else None
    params, trace = vqa.optimize_angles(
        diag,
        config.p,
        config.node_queries,
        _node_rng(config.seed, node.id, 1),
        init=init,
    )
    state = vqa.qaoa_state(diag, params)
    samples = vqa.sample(state, config.shots, _node_rng(config.seed, node.id, 2))
    return trace, params, samples


def evaluate_node(
    master: BlpInstance,
    M: float,
    node: Node,
    config: SolverConfig,
    incumbent_ub: float | None,
) -> NodeEvaluation:
    """Full lifecycle of one node; pure given the node's seed streams.

    Ordering: propagation, reduction and bounding, infeasibility/bound
    pruning, leaf fathoming, the variational subroutine, then branching on
    the most conflicting variable with both children re-propagated. With
    ``vqa_first`` the subroutine runs before the prune checks, so every
    propagation-feasible node contributes samples.
    """
    fixings, feasible = propagate(master.A, master.b, node.fixings)
    if not feasible:
        return NodeEvaluation(
            outcome="pruned_infeasible",
            reason="propagation",
            node_lb=node.local_lb,
            fixings=fixings,
            n_free=master.n - len(fixings),
        )
    if config.prune and node.local_lb >= M:
        return NodeEvaluation(
            outcome="pruned_infeasible",
            reason="bound",
            node_lb=node.local_lb,
            fixings=fixings,
            n_free=master.n - len(fixings),
        )
    if (
        config.prune
        and not config.vqa_first
        and incumbent_ub is not None
        and node.local_lb >= incumbent_ub
    ):
        return NodeEvaluation(
            outcome="pruned_bound",
            reason=None,
            node_lb=node.local_lb,
            fixings=fixings,
            n_free=master.n - len(fixings),
        )

    red = reduce(master, M, fixings)
    mb = many_body_count(red.model)

    vqa_out: tuple[OptimizerTrace, QaoaParams, SampleSet] | None = None
    if config.vqa_first and red.n_free > 0:
        vqa_out = _run_vqa(red, master, M, config, node)

    bres = bound_mod.lower_bound(red.model, config.bound, _node_rng(config.seed, node.id, 0))
    node_lb = max(node.local_lb, bres.lb_value + red.model.constant)

    common = dict(
        node_lb=node_lb,
        fixings=fixings,
        n_free=red.n_free,
        many_body=mb,
        bound_result=bres,
        expectation_offset=red.model.constant,
    )
    if vqa_out is not None:
        trace, params, samples = vqa_out
        best_cand, best_feas = _evaluate_candidates(master, red, samples, M)
        common.update(
            optimizer_trace=trace,
            best_params=params,
            best_candidate=best_cand,
            best_feasible_candidate=best_feas,
        )

    if config.prune and bound_mod.infeasible_by_bound(node_lb, 0.0, M):
        return NodeEvaluation(outcome="pruned_infeasible", reason="bound", **common)
    if config.prune and incumbent_ub is not None and node_lb >= incumbent_ub:
        return NodeEvaluation(outcome="pruned_bound", reason=None, **common)

    if red.n_free == 0:
        full = red.merge(np.zeros(0))
        value = red.model.constant  # penalized cost of the completed assignment
        return NodeEvaluation(
            outcome="fathomed_leaf",
            reason=None,
            best_candidate=(value, full, True),
            best_feasible_candidate=(value, full),
            **common,
        )

    if vqa_out is None:
        trace, params, samples = _run_vqa(red, master, M, config, node)
        best_cand, best_feas = _evaluate_candidates(master, red, samples, M)
        common.update(
            optimizer_trace=trace,
            best_params=params,
            best_candidate=best_cand,
            best_feasible_candidate=best_feas,
        )
    else:
        samples = vqa_out[2]

    conflict = conflict_values(red.A, red.b, samples)
    k_red = select_branching_variable(conflict.gamma, red.model.fields)
    k = int(red.index_map[k_red])
    children = []
    for value in (0, 1):
        child_fix = dict(fixings)
        child_fix[k] = value
        child_fix, child_ok = propagate(master.A, master.b, child_fix)
        children.append(
            ChildBranch(
                fixings=child_fix, branch_var=k, branch_value=value, feasible=child_ok
            )
        )
    return NodeEvaluation(
        outcome="branched", reason=None, children=tuple(children), **common
    )


class _Clock:
    def __init__(self):
        self.t0 = time.perf_counter()

    def elapsed(self) -> float:
        return time.perf_counter() - self.t0


def solve(instance: BlpInstance, config: SolverConfig | None = None) -> SolveResult:
    """Best-first branch and bound to proven optimality or a configured stop.

    Deterministic for a fixed seed in single-worker mode. With multiple
    workers node evaluations run concurrently against snapshot incumbents;
    results stay correct but the trace may differ from a serial run.
    """
    if config is None:
        config = SolverConfig()
    if instance.n > config.simulator_limit:
        raise ValueError(
            f"instance has {instance.n} variables, simulator limit is "
            f"{config.simulator_limit}"
        )
    M = compute_big_m(instance)
    master_model = encode(instance, M)
    master_mb = many_body_count(master_model)
    clock = _Clock()
    rec = TraceRecorder(wall_clock=config.wall_clock)
    incumbent = Incumbent()
    records: dict[int, NodeRecord] = {}

    next_id = 0

    def new_id() -> int:
        nonlocal next_id
        value = next_id
        next_id += 1
        return value

    root = Node(id=new_id(), parent=None, fixings={}, local_lb=-np.inf)
    heap: list[tuple[float, int, int, Node]] = []
    heapq.heappush(heap, (root.local_lb, -root.depth, root.id, root))

    global_lb = -np.inf
    node_index = -1
    evaluated = 0
    query_count = 0
    status: str | None = None
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None

    def fraction_of(mb: int | None) -> float | None:
        if mb is None:
            return None
        if master_mb == 0:
            return 1.0
        return mb / master_mb

    def apply_evaluation(node: Node, ev: NodeEvaluation) -> None:
        nonlocal global_lb, query_count
        if ev.optimizer_trace is not None:
            for _, value in ev.optimizer_trace.entries:
                query_count += 1
                rec.record(
                    "optimizer_query",
                    node_index,
                    query_index=query_count,
                    expectation=value + ev.expectation_offset,
                )
        if ev.best_candidate is not None:
            value, x, feas = ev.best_candidate
            improved = incumbent.offer(value, x, feas)
            if ev.best_feasible_candidate is not None:
                fv, fx = ev.best_feasible_candidate
                incumbent.offer(fv, fx, True)
            if improved:
                rec.record("incumbent_update", node_index, ub=incumbent.best_penalized_value)
        if ev.outcome == "pruned_infeasible":
            rec.record(
                "prune",
                node_index,
                status="infeasible",
                many_body_fraction=fraction_of(ev.many_body),
            )
        elif ev.outcome == "pruned_bound":
            rec.record(
                "prune",
                node_index,
                status="bound",
                many_body_fraction=fraction_of(ev.many_body),
            )
        elif ev.outcome == "fathomed_leaf":
            rec.record(
                "fathom",
                node_index,
                status="leaf",
                many_body_fraction=fraction_of(ev.many_body),
            )
        else:
            rec.record(
                "branch", node_index, many_body_fraction=fraction_of(ev.many_body)
            )
        records[node.id] = NodeRecord(
            node_id=node.id,
            parent_id=node.parent,
            depth=len(ev.fixings),
            outcome=ev.outcome,
            reason=ev.reason,
            local_lb=ev.node_lb,
            fixings=dict(ev.fixings),
            n_free=ev.n_free,
            many_body_count=ev.many_body,
        )
        for child in ev.children:
            cid = new_id()
            if not child.feasible:
                rec.record("prune", node_index, status="infeasible")
                records[cid] = NodeRecord(
                    node_id=cid,
                    parent_id=node.id,
                    depth=len(child.fixings),
                    outcome="pruned_infeasible",
                    reason="propagation",
                    local_lb=ev.node_lb,
                    fixings=dict(child.fixings),
                    n_free=instance.n - len(child.fixings),
                    many_body_count=None,
                )
                continue
            child_node = Node(
                id=cid,
                parent=node.id,
                fixings=child.fixings,
                local_lb=ev.node_lb,
                branch_var=child.branch_var,
                branch_value=child.branch_value,
                warm=ev.best_params if config.warm_start else None,
            )
            heapq.heappush(
                heap, (child_node.local_lb, -child_node.depth, child_node.id, child_node)
            )

    def refresh_global_lb() -> None:
        nonlocal global_lb
        ub = incumbent.best_penalized_value
        if heap:
            frontier = heap[0][0]
            candidate = frontier if ub is None else min(frontier, ub)
        elif ub is not None:
            candidate = ub
        else:
            return
        if candidate > global_lb:
            global_lb = candidate
            rec.record("bound_update", max(node_index, 0), lb=global_lb)

    try:
        while heap:
            if (
                incumbent.best_feasible_value is not None
                and global_lb >= incumbent.best_feasible_value - OPTIMALITY_TOL
            ):
                status = "optimal"
                break
            ub = incumbent.best_penalized_value
            if (
                config.gap_target is not None
                and ub is not None
                and np.isfinite(global_lb)
                and (ub - global_lb) / max(1.0, abs(ub)) <= config.gap_target
            ):
                status = "gap_reached"
                break
            if config.node_limit is not None and evaluated >= config.node_limit:
                status = "node_limit"
                break
            if config.time_limit is not None and clock.elapsed() > config.time_limit:
                status = "time_limit"
                break

            batch_size = min(config.workers, len(heap)) if pool else 1
            batch = [heapq.heappop(heap)[3] for _ in range(batch_size)]
            snapshot_ub = incumbent.best_penalized_value
            if pool:
                futures = [
                    pool.submit(evaluate_node, instance, M, nd, config, snapshot_ub)
                    for nd in batch
                ]
                outcomes = [f.result() for f in futures]
            else:
                outcomes = [
                    evaluate_node(instance, M, nd, config, incumbent.best_penalized_value)
                    for nd in batch
                ]
            for nd, ev in zip(batch, outcomes):
                node_index += 1
                evaluated += 1
                rec.record("node_start", node_index)
                apply_evaluation(nd, ev)
            refresh_global_lb()
    finally:
        if pool:
            pool.shutdown(wait=True)

    if status is None:
        if incumbent.best_feasible_value is not None:
            # Exhausted tree proves optimality; bounds meet at the incumbent.
            status = "optimal"
            global_lb = max(
                global_lb,
                min(incumbent.best_feasible_value, incumbent.best_penalized_value),
            )
        else:
            status = "infeasible"
    rec.record(
        "done",
        max(node_index, 0),
        lb=None if not np.isfinite(global_lb) else global_lb,
        ub=incumbent.best_penalized_value,
        status=status,
    )
    return SolveResult(
        status=status,
        best_value=incumbent.best_feasible_value,
        best_assignment=incumbent.best_feasible_x,
        best_penalized_value=incumbent.best_penalized_value,
        best_penalized_assignment=incumbent.best_penalized_x,
        global_lb=global_lb,
        nodes_evaluated=evaluated,
        trace=tuple(rec.events),
        node_records=records,
        M=M,
        elapsed_s=clock.elapsed(),
    )


@dataclass(frozen=True)
class BaselineResult:
    best_penalized_value: float
    best_penalized_assignment: np.ndarray
    best_feasible_value: float | None
    best_feasible_assignment: np.ndarray | None
    queries: int
    trace: tuple[TraceEvent, ...]


def run_plain_qaoa(
    instance: BlpInstance, config: SolverConfig | None = None, queries: int = 500
) -> BaselineResult:
    """Single-node QAOA on the master problem under a flat query budget.

    Emits the same trace schema as the tree solver so runs can be compared
    query-for-query.
    """
    if config is None:
        config = SolverConfig()
    if queries < 1:
        raise ValueError("queries must be positive")
    if instance.n > config.simulator_limit:
        raise ValueError("instance exceeds the simulator limit")
    M = compute_big_m(instance)
    model = encode(instance, M)
    rec = TraceRecorder(wall_clock=config.wall_clock)
    diag = vqa.build_diagonal(model, include_constant=False, limit=config.simulator_limit)
    params, trace = vqa.optimize_angles(
        diag, config.p, queries, _node_rng(config.seed, 0, 1)
    )
    for q, value in trace.entries:
        rec.record(
            "optimizer_query", 0, query_index=q, expectation=value + model.constant
        )
    state = vqa.qaoa_state(diag, params)
    samples = vqa.sample(state, config.shots, _node_rng(config.seed, 0, 2))
    red = reduce(instance, M, {})
    best_cand, best_feas = _evaluate_candidates(instance, red, samples, M)
    rec.record("incumbent_update", 0, ub=best_cand[0])
    rec.record("done", 0, ub=best_cand[0], status="completed")
    return BaselineResult(
        best_penalized_value=best_cand[0],
        best_penalized_assignment=best_cand[1],
        best_feasible_value=None if best_feas is None else best_feas[0],
        best_feasible_assignment=None if best_feas is None else best_feas[1],
        queries=trace.n_queries,
        trace=tuple(rec.events),
    )
