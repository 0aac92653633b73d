"""Suboptimality bounds, a brute-force oracle, parameter sweeps, and random
instance generation for empirical validation.

The search's greedy choice costs a bounded amount of quality: with blend
weight a, the optimal feasible quality exceeds the returned one by at most
a/(1-a) times the root-to-null quality span. The post-hoc variant tightens
that by the budget overrun of the best-quality open node when the search
stopped. Both are validated here against an exhaustive oracle.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .learning import LinearQualityMap
from .model import (
    Allocation,
    InvalidInput,
    ProblemDomain,
    Robot,
    Solution,
    Task,
    TaskNetwork,
    WorldMap,
    total_allocation_quality,
)
from .motion import GridPlanner, estimated_leg_seconds, travel_time
from .scheduler import (
    build_constraints,
    build_constraints_fast,
    make_travel_tables,
    solve_milp,
    worst_makespan,
)
from .search import FrontierEntry, ScheduleCache, SearchStats, solve

TOL = 1e-9
ORACLE_MAX_BITS = 20


class OracleBudgetExceeded(RuntimeError):
    """The exhaustive oracle hit its caller-imposed scheduling cap."""


@dataclass(frozen=True)
class BoundReport:
    """Bounds on how far the returned quality can sit below the optimum.

    Oracle-dependent fields (q_optimal, gap, holds_*) are None until an
    exhaustive result is supplied. guarantee_applies records the precondition
    that the worst-case makespan reaches the budget, without which the
    overrun normalization can exceed 1 and the guarantee is void.
    """

    alpha: float
    q_root: float
    q_null: float
    q_solution: float
    apriori_bound: float
    posthoc_bound: float
    overrun_of_best_open: float
    apriori_trivial: bool  # bound at least as wide as the whole quality span
    guarantee_applies: bool
    q_optimal: Optional[float] = None
    gap: Optional[float] = None
    holds_apriori: Optional[bool] = None
    holds_posthoc: Optional[bool] = None


@dataclass(frozen=True)
class OracleResult:
    feasible: bool
    quality: Optional[float]
    allocation: Optional[Allocation]
    makespan: Optional[float]
    n_strictly_better: int
    n_scheduled: int


def apriori_bound(alpha: float, q_root: float, q_null: float) -> float:
    """Worst-case quality gap guaranteed before running the search.

    Returns +inf at alpha = 1; values at alpha >= 0.5 are computed but wider
    than the whole quality span, hence vacuous.
    """
    if not (0.0 <= alpha <= 1.0):
        raise InvalidInput(f"alpha must be in [0,1], got {alpha}")
    if q_root < q_null - TOL:
        raise InvalidInput(f"root quality {q_root} below null quality {q_null}")
    if alpha >= 1.0:
        return math.inf
    return alpha / (1.0 - alpha) * (q_root - q_null)


def posthoc_bound(
    alpha: float, q_root: float, q_null: float, overrun_best_open: float
) -> float:
    """The a-priori bound tightened by the realized overrun of the best open
    node; 0 when the frontier was empty (the search exhausted the graph)."""
    if overrun_best_open < 0:
        raise InvalidInput(f"overrun must be non-negative, got {overrun_best_open}")
    if overrun_best_open == 0.0:
        return 0.0
    return apriori_bound(alpha, q_root, q_null) * overrun_best_open


def best_frontier_entry(frontier: Sequence[FrontierEntry]) -> Optional[FrontierEntry]:
    """Highest-quality open node; ties go to the smallest allocation key."""
    best = None
    for entry in sorted(frontier, key=lambda e: e.key):
        if best is None or entry.quality > best.quality:
            best = entry
    return best


def bound_report(
    domain: ProblemDomain,
    solution: Solution,
    stats: SearchStats,
    *,
    oracle: Optional[OracleResult] = None,
) -> BoundReport:
    span = stats.quality_root - stats.quality_null
    apriori = apriori_bound(domain.alpha, stats.quality_root, stats.quality_null)
    best_open = best_frontier_entry(stats.frontier)
    overrun_best = 0.0 if best_open is None else best_open.overrun
    posthoc = posthoc_bound(domain.alpha, stats.quality_root, stats.quality_null, overrun_best)

    report = BoundReport(
        alpha=domain.alpha,
        q_root=stats.quality_root,
        q_null=stats.quality_null,
        q_solution=solution.total_quality,
        apriori_bound=apriori,
        posthoc_bound=posthoc,
        overrun_of_best_open=overrun_best,
        apriori_trivial=apriori >= span - 1e-12,
        guarantee_applies=stats.worst_makespan >= domain.time_budget - TOL,
    )
    if oracle is not None and oracle.feasible:
        gap = oracle.quality - solution.total_quality
        report = replace(
            report,
            q_optimal=oracle.quality,
            gap=gap,
            holds_apriori=gap <= apriori + TOL,
            holds_posthoc=gap <= posthoc + TOL,
        )
    return report


def _coalition_quality_table(domain: ProblemDomain, task: int) -> np.ndarray:
    """Quality of one task under every coalition, indexed by the coalition
    bitmask with robot 0 in the most significant bit."""
    n = domain.n_robots
    masks = (np.arange(2**n)[:, None] >> (n - 1 - np.arange(n))) & 1
    aggregated = masks.astype(float) @ domain.traits
    quality_map = domain.quality_maps[task]
    return np.array(
        [min(1.0, max(0.0, float(quality_map(row)))) for row in aggregated]
    )


def _arrival_floor(domain: ProblemDomain, tables) -> np.ndarray:
    """Lower bound on the makespan of every allocation, indexed like totals.

    Any schedule starts task i no earlier than its slowest assigned robot
    arrives, so max_i(arrival_i + duration_i) under-approximates the makespan
    regardless of orderings. Monotone in the assignment set.
    """
    m, n = domain.n_tasks, domain.n_robots
    floor = None
    for i in range(m):
        per_mask = np.zeros(2**n)
        for mask in range(1, 2**n):
            low = mask & -mask
            # robot 0 sits in the most significant bit of the coalition mask
            robot = n - low.bit_length()
            per_mask[mask] = max(per_mask[mask ^ low], tables.arrive[robot][i])
        per_mask += tables.durations[i]
        floor = per_mask if floor is None else np.maximum(floor[:, None], per_mask[None, :]).ravel()
    return floor


def brute_force_optimal(
    domain: ProblemDomain,
    planner: Optional[GridPlanner] = None,
    *,
    schedule_cap: Optional[int] = None,
) -> OracleResult:
    """Exhaustive optimum under planned travel: scan allocations in quality
    order (ties by smaller key) and return the first that schedules within
    the budget.

    Scheduling is skipped when the slowest arrival alone already overshoots
    the budget, and for any allocation containing a known-infeasible one as
    a subset of its assignments: adding assignments only tightens the
    constraints. Guarded to at most 2^20 allocations; schedule_cap, when
    given, aborts with OracleBudgetExceeded after that many solver calls.
    """
    m, n = domain.n_tasks, domain.n_robots
    if m * n > ORACLE_MAX_BITS:
        raise InvalidInput(
            f"oracle limited to {ORACLE_MAX_BITS} assignment bits, got {m * n}"
        )
    if planner is None:
        planner = GridPlanner(domain.world)

    def leg(robot_id: int, a, b) -> float:
        result = planner.plan(a, b)
        if result is None:
            return math.inf
        return travel_time(
            result.length, domain.robots[robot_id].speed * domain.world.cell_size
        )

    tables = make_travel_tables(domain, leg)

    totals = _coalition_quality_table(domain, 0)
    for task in range(1, m):
        totals = (totals[:, None] + _coalition_quality_table(domain, task)[None, :]).ravel()

    too_slow = _arrival_floor(domain, tables) > domain.time_budget + TOL

    order = np.argsort(-totals, kind="stable")
    known_infeasible = np.empty(totals.size, dtype=np.int64)
    n_known = 0
    n_scheduled = 0
    for raw_key in order:
        if too_slow[raw_key]:
            continue
        key = int(raw_key)
        bad = known_infeasible[:n_known]
        if n_known and bool(np.any((key & bad) == bad)):
            continue
        if schedule_cap is not None and n_scheduled >= schedule_cap:
            raise OracleBudgetExceeded(
                f"gave up after scheduling {n_scheduled} allocations"
            )
        alloc = Allocation.from_key(key, m, n)
        outcome = solve_milp(build_constraints_fast(tables, alloc))
        n_scheduled += 1
        if (
            outcome.status == "optimal"
            and outcome.schedule.makespan <= domain.time_budget + TOL
        ):
            quality = float(totals[key])
            return OracleResult(
                feasible=True,
                quality=quality,
                allocation=alloc,
                makespan=outcome.schedule.makespan,
                n_strictly_better=int(np.sum(totals > quality + 1e-12)),
                n_scheduled=n_scheduled,
            )
        known_infeasible[n_known] = key
        n_known += 1
    return OracleResult(False, None, None, None, int(totals.size), n_scheduled)


@dataclass(frozen=True)
class SweepRow:
    alpha: float
    quality: float
    makespan: float
    norm_gap: float
    norm_apriori_bound: float
    norm_posthoc_bound: float
    holds_apriori: bool
    holds_posthoc: bool


def alpha_sweep(
    domain: ProblemDomain,
    alphas: Optional[Sequence[float]] = None,
    *,
    planner: Optional[GridPlanner] = None,
    oracle: Optional[OracleResult] = None,
    schedule_cache: Optional[ScheduleCache] = None,
) -> Optional[list[SweepRow]]:
    """Solve the same instance across blend weights and report gaps against
    the exhaustive optimum, all normalized by the root-to-null quality span.
    Returns None when the instance has no feasible allocation at all.

    Scheduling work that does not depend on alpha is shared between the runs
    through a per-instance cache; pass one in to extend the sharing further.
    """
    if alphas is None:
        alphas = tuple(round(i / 10, 1) for i in range(11))
    if planner is None:
        planner = GridPlanner(domain.world)
    if schedule_cache is None:
        schedule_cache = {}
    if oracle is None:
        oracle = brute_force_optimal(domain, planner)
    if not oracle.feasible:
        return None

    rows = []
    for alpha in alphas:
        domain_a = replace(domain, alpha=float(alpha))
        solution, stats = solve(domain_a, planner=planner, schedule_cache=schedule_cache)
        if solution is None:
            raise InvalidInput(
                "search found no feasible allocation on an instance the oracle solved"
            )
        report = bound_report(domain_a, solution, stats, oracle=oracle)
        span = stats.quality_root - stats.quality_null
        norm = span if span > TOL else 1.0
        rows.append(
            SweepRow(
                alpha=float(alpha),
                quality=solution.total_quality,
                makespan=solution.schedule.makespan,
                norm_gap=report.gap / norm,
                norm_apriori_bound=report.apriori_bound / norm,
                norm_posthoc_bound=(
                    0.0 if report.posthoc_bound == 0.0 else report.posthoc_bound / norm
                ),
                holds_apriori=bool(report.holds_apriori),
                holds_posthoc=bool(report.holds_posthoc),
            )
        )
    return rows


def _largest_free_component(world: WorldMap) -> list[tuple[int, int]]:
    seen: set[tuple[int, int]] = set()
    best: list[tuple[int, int]] = []
    for row in range(world.height):
        for col in range(world.width):
            cell = (col, row)
            if not world.is_free(cell) or cell in seen:
                continue
            component = [cell]
            seen.add(cell)
            queue = deque([cell])
            while queue:
                c, r = queue.popleft()
                for nxt in ((c, r - 1), (c + 1, r), (c, r + 1), (c - 1, r)):
                    if world.is_free(nxt) and nxt not in seen:
                        seen.add(nxt)
                        component.append(nxt)
                        queue.append(nxt)
            if len(component) > len(best):
                best = component
    return sorted(best)


def random_instance(seed: int, *, alpha: float = 0.4) -> ProblemDomain:
    """A small random instance: connected placements, non-negative linear
    quality maps normalized so the full team scores 1 per task, and a budget
    drawn between the empty-team and full-team makespans (so the worst-case
    makespan always reaches the budget)."""
    rng = np.random.default_rng(seed)
    n_tasks = int(rng.integers(2, 5))
    n_robots = int(rng.integers(3, 6))
    n_traits = int(rng.integers(2, 4))

    while True:
        blocked = rng.random((12, 12)) < 0.10
        world = WorldMap(
            12, 12,
            frozenset(
                (c, r) for r in range(12) for c in range(12) if blocked[r, c]
            ),
        )
        free = _largest_free_component(world)
        if len(free) >= n_robots + 2 * n_tasks + 5:
            break

    picks = rng.choice(len(free), size=n_robots, replace=False)
    traits = rng.uniform(0.0, 1.0, size=(n_robots, n_traits))
    # capability costs speed: the most capable robots are the slowest, so
    # shrinking a coalition buys time at a real quality price (without this
    # tension the alpha sweep is flat and the trade-off invisible)
    rank = np.argsort(np.argsort(traits.sum(axis=1))) / max(n_robots - 1, 1)
    speeds = (2.0 - 1.2 * rank) * rng.uniform(0.9, 1.0, size=n_robots)
    robots = tuple(
        Robot(
            id=i,
            traits=traits[i],
            start_cell=free[int(picks[i])],
            speed=float(speeds[i]),
        )
        for i in range(n_robots)
    )

    tasks = tuple(
        Task(
            id=i,
            duration=float(rng.uniform(4.0, 12.0)),
            start_site=free[int(rng.integers(len(free)))],
            end_site=free[int(rng.integers(len(free)))],
        )
        for i in range(n_tasks)
    )

    precedence = set()
    for i in range(n_tasks):
        for j in range(i + 1, n_tasks):
            if rng.random() < 0.25:
                precedence.add((i, j))
    mutex = set()
    for i in range(n_tasks):
        for j in range(i + 1, n_tasks):
            if (i, j) not in precedence and rng.random() < 0.15:
                mutex.add((i, j))
    network = TaskNetwork(tasks, frozenset(precedence), frozenset(mutex))

    team_traits = traits.sum(axis=0)
    quality_maps = []
    for _ in range(n_tasks):
        weights = rng.uniform(0.2, 1.0, size=n_traits)
        quality_maps.append(LinearQualityMap(weights, float(weights @ team_traits)))

    base = ProblemDomain(
        network=network,
        robots=robots,
        quality_maps=tuple(quality_maps),
        world=world,
        time_budget=1.0,
        alpha=alpha,
    )
    null_cs = build_constraints(
        base, Allocation.null(n_tasks, n_robots), estimated_leg_seconds(base)
    )
    floor = solve_milp(null_cs).schedule.makespan
    ceiling = worst_makespan(base)
    u = float(rng.uniform(0.25, 0.9))
    budget = floor + u * max(ceiling - floor, 0.0)
    return replace(base, time_budget=max(budget, floor))
