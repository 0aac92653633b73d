"""Greedy best-first search over the allocation graph.

The root assigns every robot to every task; each edge clears one assignment.
Nodes are scored with a blend of normalized quality loss and budget overrun
computed under straight-line travel estimates. When a node's schedule fits
the budget it is re-checked under planned grid paths before being accepted,
and re-queued if the planned travel pushes it over.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Optional

from .heuristics import (
    HeuristicContext,
    blended_score,
    budget_overrun,
    make_context,
    normalized_quality_loss,
)
from .model import (
    Allocation,
    ContractViolation,
    InvalidInput,
    ProblemDomain,
    Solution,
    successors,
    total_allocation_quality,
)
from .motion import GridPlanner, estimated_leg_seconds
from .scheduler import (
    ConstraintSet,
    ScheduleOutcome,
    build_constraints_fast,
    make_travel_tables,
    refine_with_motion_plans,
    solve_milp,
)

LOSS_SLACK = 1e-12


@dataclass
class CacheEntry:
    """Scheduling results for one allocation, reusable across blend weights.

    Quality, the estimate-phase constraints/outcome, and the refined
    fixpoint depend only on the domain and the planner, never on alpha.
    """

    quality: float
    cs: ConstraintSet
    outcome: ScheduleOutcome
    refined_cs: Optional[ConstraintSet] = None
    refined_outcome: Optional[ScheduleOutcome] = None


ScheduleCache = dict[int, CacheEntry]


@dataclass
class SearchNode:
    allocation: Allocation
    quality: float
    quality_loss: float
    overrun: float
    blended: float
    makespan: float  # inf when no schedule exists
    depth: int
    cs: ConstraintSet
    outcome: ScheduleOutcome


@dataclass(frozen=True)
class FrontierEntry:
    """What the suboptimality analysis needs to know about an open node."""

    key: int
    quality: float
    overrun: float
    blended: float


@dataclass
class SearchStats:
    nodes_expanded: int = 0
    nodes_generated: int = 0
    duplicates_skipped: int = 0
    scheduler_calls: int = 0  # estimate-phase scheduling, once per allocation
    refinement_rounds: int = 0  # re-solves triggered by planned travel times
    reinserted: int = 0
    planner_calls: int = 0
    worst_makespan: float = 0.0
    quality_root: float = 0.0
    quality_null: float = 0.0
    frontier: tuple[FrontierEntry, ...] = ()  # open set at termination


class OpenSet:
    """Min-heap on (score, depth, allocation key).

    Scores are rounded to 9 decimals before comparison so nodes within 1e-9
    of each other tie and fall through to the shallower-then-smaller-key rule.
    """

    def __init__(self) -> None:
        self._heap: list[tuple[float, int, int]] = []
        self._nodes: dict[int, SearchNode] = {}

    def push(self, node: SearchNode) -> None:
        key = node.allocation.key
        self._nodes[key] = node
        heapq.heappush(self._heap, (round(node.blended, 9), node.depth, key))

    def pop(self) -> SearchNode:
        if not self._heap:
            raise ContractViolation("pop from an empty open set")
        _, _, key = heapq.heappop(self._heap)
        return self._nodes.pop(key)

    def __len__(self) -> int:
        return len(self._heap)

    def snapshot(self) -> tuple[FrontierEntry, ...]:
        return tuple(
            FrontierEntry(key, node.quality, node.overrun, node.blended)
            for key, node in sorted(self._nodes.items())
        )


def solve(
    domain: ProblemDomain,
    *,
    planner: Optional[GridPlanner] = None,
    check_invariants: bool = False,
    schedule_cache: Optional[ScheduleCache] = None,
) -> tuple[Optional[Solution], SearchStats]:
    """Find a budget-respecting allocation, greedily favoring high quality.

    Returns (solution, stats); the solution is None when no allocation in the
    graph admits a schedule within the budget under planned travel. With
    check_invariants the search asserts that removing an assignment never
    reduces normalized quality loss, which the suboptimality bound relies on.

    schedule_cache, when given, memoizes per-allocation scheduling across
    calls. It is only valid for repeated solves of the same tasks, robots,
    world, and planner (e.g. the same instance at different alpha values);
    scheduler_calls then counts actual solver invocations, not allocations.
    """
    if planner is None:
        planner = GridPlanner(domain.world)
    tables = make_travel_tables(domain, estimated_leg_seconds(domain))
    stats = SearchStats()

    def fetch(alloc: Allocation) -> tuple[float, ConstraintSet, ScheduleOutcome]:
        entry = schedule_cache.get(alloc.key) if schedule_cache is not None else None
        if entry is not None:
            return entry.quality, entry.cs, entry.outcome
        quality = total_allocation_quality(alloc, domain)
        cs = build_constraints_fast(tables, alloc)
        outcome = solve_milp(cs)
        stats.scheduler_calls += 1
        if schedule_cache is not None:
            schedule_cache[alloc.key] = CacheEntry(quality, cs, outcome)
        return quality, cs, outcome

    # The root's minimal makespan under estimates is the normalization
    # reference for overruns; reuse its solve for the root node.
    root_alloc = Allocation.root(domain.n_tasks, domain.n_robots)
    root_fetch = fetch(root_alloc)
    if root_fetch[2].status != "optimal":
        raise InvalidInput("root allocation admits no schedule")
    ctx = make_context(domain, root_fetch[2].schedule.makespan)
    stats.worst_makespan = ctx.makespan_worst
    stats.quality_root = ctx.quality_root
    stats.quality_null = ctx.quality_null

    def make_node(
        alloc: Allocation,
        depth: int,
        parent_loss: Optional[float],
        prefetched: Optional[tuple[float, ConstraintSet, ScheduleOutcome]] = None,
    ) -> SearchNode:
        quality, cs, outcome = prefetched if prefetched is not None else fetch(alloc)
        quality_loss = normalized_quality_loss(quality, ctx)
        if check_invariants and parent_loss is not None and quality_loss < parent_loss - LOSS_SLACK:
            raise ContractViolation(
                f"quality loss dropped from {parent_loss} to {quality_loss} on removing an assignment"
            )
        if outcome.status == "optimal":
            makespan = outcome.schedule.makespan
            overrun = budget_overrun(makespan, ctx)
            blended = blended_score(quality, makespan, ctx)
        else:
            makespan = math.inf
            overrun = math.inf
            blended = math.inf
        return SearchNode(alloc, quality, quality_loss, overrun, blended, makespan, depth, cs, outcome)

    open_set = OpenSet()
    root = make_node(root_alloc, 0, None, prefetched=root_fetch)
    stats.nodes_generated += 1
    open_set.push(root)
    visited = {root.allocation.key}

    while len(open_set):
        node = open_set.pop()
        if node.overrun == 0.0 and node.outcome.status == "optimal":
            _refine_node(domain, node, planner, ctx, stats, schedule_cache)
            if node.overrun == 0.0 and node.outcome.status == "optimal":
                stats.frontier = open_set.snapshot()
                stats.planner_calls = planner.calls
                return _build_solution(domain, node, planner), stats
            stats.reinserted += 1
            open_set.push(node)
            continue
        stats.nodes_expanded += 1
        for child in successors(node.allocation):
            if child.key in visited:
                stats.duplicates_skipped += 1
                continue
            visited.add(child.key)
            child_node = make_node(child, node.depth + 1, node.quality_loss)
            stats.nodes_generated += 1
            open_set.push(child_node)

    stats.frontier = ()
    stats.planner_calls = planner.calls
    return None, stats


def _refine_node(
    domain: ProblemDomain,
    node: SearchNode,
    planner: GridPlanner,
    ctx: HeuristicContext,
    stats: SearchStats,
    schedule_cache: Optional[ScheduleCache] = None,
) -> None:
    """Swap estimated travel for planned travel until the schedule stops moving.

    Each round replaces at least one estimate with its planned value and
    planned values are final, so the loop is bounded by the quantity count.
    The fixpoint does not depend on alpha, so a cached one is reused as is.
    """
    entry = schedule_cache.get(node.allocation.key) if schedule_cache is not None else None
    if entry is not None and entry.refined_outcome is not None:
        node.cs = entry.refined_cs
        node.outcome = entry.refined_outcome
        _rescore(node, ctx)
        return
    cap = node.cs.n_quantities + 1
    for _ in range(cap):
        if node.outcome.status != "optimal":
            break
        new_cs, changed = refine_with_motion_plans(
            domain, node.allocation, node.outcome.schedule, planner, node.cs
        )
        if not changed:
            break
        stats.refinement_rounds += 1
        node.cs = new_cs
        node.outcome = solve_milp(new_cs)
        _rescore(node, ctx)
    if entry is not None:
        entry.refined_cs = node.cs
        entry.refined_outcome = node.outcome


def _rescore(node: SearchNode, ctx: HeuristicContext) -> None:
    if node.outcome.status == "optimal":
        node.makespan = node.outcome.schedule.makespan
        node.overrun = budget_overrun(node.makespan, ctx)
        node.blended = blended_score(node.quality, node.makespan, ctx)
    else:
        node.makespan = math.inf
        node.overrun = math.inf
        node.blended = math.inf


def _build_solution(domain: ProblemDomain, node: SearchNode, planner: GridPlanner) -> Solution:
    schedule = node.outcome.schedule
    assert schedule is not None
    motion_plans = {}
    starts = schedule.start_times
    tasks = domain.network.tasks
    for robot in domain.robots:
        assigned = [i for i in range(domain.n_tasks) if node.allocation.entries[i, robot.id]]
        assigned.sort(key=lambda i: (starts[i], i))
        origin = robot.start_cell
        for i in assigned:
            plan = planner.plan(origin, tasks[i].start_site)
            assert plan is not None, "accepted node has an unreachable leg"
            motion_plans[(robot.id, i)] = plan
            origin = tasks[i].end_site
    return Solution(
        allocation=node.allocation,
        schedule=schedule,
        motion_plans=motion_plans,
        total_quality=node.quality,
        quality_loss=node.quality_loss,
        overrun=node.overrun,
        blended=node.blended,
    )
