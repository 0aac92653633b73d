"""Domain model: robots, tasks, allocations, schedules, and solution validation.

Everything here is immutable after construction and safe to share across
threads; the module-level operations are pure functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Cell = tuple[int, int]
"""Grid coordinate as (col, row)."""

QualityMap = Callable[[np.ndarray], float]
"""Maps a task's aggregated trait vector to a quality score in [0, 1]."""

TOL = 1e-9


class InvalidInput(ValueError):
    """An operation received arguments that violate its contract."""


class ContractViolation(RuntimeError):
    """A numeric precondition was broken beyond tolerance."""


@dataclass(frozen=True)
class WorldMap:
    """Occupancy grid. Cells are addressed as (col, row), row 0 at the top."""

    width: int
    height: int
    occupied: frozenset[Cell] = frozenset()
    cell_size: float = 1.0

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise InvalidInput("map dimensions must be positive")
        if self.cell_size <= 0:
            raise InvalidInput("cell_size must be positive")
        for cell in self.occupied:
            if not self.in_bounds(cell):
                raise InvalidInput(f"occupied cell {cell} outside map bounds")

    def in_bounds(self, cell: Cell) -> bool:
        col, row = cell
        return 0 <= col < self.width and 0 <= row < self.height

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.occupied

    @classmethod
    def from_ascii(cls, rows: Sequence[str], cell_size: float = 1.0) -> WorldMap:
        """Parse a map from strings: '.' free, '#' occupied."""
        if not rows:
            raise InvalidInput("empty map")
        width = len(rows[0])
        occupied = set()
        for r, line in enumerate(rows):
            if len(line) != width:
                raise InvalidInput(f"map row {r} has length {len(line)}, expected {width}")
            for c, ch in enumerate(line):
                if ch == "#":
                    occupied.add((c, r))
                elif ch != ".":
                    raise InvalidInput(f"map cell ({c},{r}): unknown character {ch!r}")
        return cls(width=width, height=len(rows), occupied=frozenset(occupied), cell_size=cell_size)

    def to_ascii(self) -> list[str]:
        return [
            "".join("#" if (c, r) in self.occupied else "." for c in range(self.width))
            for r in range(self.height)
        ]


@dataclass(frozen=True)
class Robot:
    """A robot: a trait vector plus its start cell and speed (cells/second)."""

    id: int
    traits: np.ndarray
    start_cell: Cell
    speed: float

    def __post_init__(self) -> None:
        traits = np.asarray(self.traits, dtype=float)
        traits.setflags(write=False)
        object.__setattr__(self, "traits", traits)
        if traits.ndim != 1 or traits.size < 1:
            raise InvalidInput(f"robot {self.id}: traits must be a non-empty vector")
        if np.any(traits < 0):
            raise InvalidInput(f"robot {self.id}: traits must be non-negative")
        if self.speed <= 0:
            raise InvalidInput(f"robot {self.id}: speed must be positive")


@dataclass(frozen=True)
class Task:
    """A task with a fixed duration and start/end sites on the grid."""

    id: int
    duration: float
    start_site: Cell
    end_site: Cell

    def __post_init__(self) -> None:
        if self.duration <= 0:
            raise InvalidInput(f"task {self.id}: duration must be positive")


def _canonical_pairs(pairs, m: int, *, ordered: bool, kind: str) -> frozenset[tuple[int, int]]:
    out = set()
    for pair in pairs:
        i, j = int(pair[0]), int(pair[1])
        if i == j:
            raise InvalidInput(f"{kind} pair ({i},{j}) is a self-pair")
        if not (0 <= i < m and 0 <= j < m):
            raise InvalidInput(f"{kind} pair ({i},{j}) outside task range [0,{m})")
        out.add((i, j) if ordered else (min(i, j), max(i, j)))
    return frozenset(out)


@dataclass(frozen=True)
class TaskNetwork:
    """Tasks plus precedence (ordered) and mutex (unordered) constraints."""

    tasks: tuple[Task, ...]
    precedence: frozenset[tuple[int, int]] = frozenset()
    mutex: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self) -> None:
        tasks = tuple(self.tasks)
        object.__setattr__(self, "tasks", tasks)
        m = len(tasks)
        if m < 1:
            raise InvalidInput("task network needs at least one task")
        object.__setattr__(
            self, "precedence", _canonical_pairs(self.precedence, m, ordered=True, kind="precedence")
        )
        object.__setattr__(
            self, "mutex", _canonical_pairs(self.mutex, m, ordered=False, kind="mutex")
        )
        if self._has_cycle():
            raise InvalidInput("precedence graph contains a cycle")

    def _has_cycle(self) -> bool:
        m = len(self.tasks)
        indeg = [0] * m
        succ: list[list[int]] = [[] for _ in range(m)]
        for i, j in self.precedence:
            succ[i].append(j)
            indeg[j] += 1
        queue = [i for i in range(m) if indeg[i] == 0]
        seen = 0
        while queue:
            i = queue.pop()
            seen += 1
            for j in succ[i]:
                indeg[j] -= 1
                if indeg[j] == 0:
                    queue.append(j)
        return seen != m

    def __len__(self) -> int:
        return len(self.tasks)


@dataclass(frozen=True)
class Allocation:
    """Binary M x N matrix; entry (m, n) = 1 iff robot n works on task m."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        raw = np.asarray(self.entries)
        if raw.ndim != 2:
            raise InvalidInput("allocation must be a 2-D matrix")
        if raw.size:
            if raw.dtype.kind in "iub":
                if int(raw.min()) < 0 or int(raw.max()) > 1:
                    raise InvalidInput("allocation entries must be 0 or 1")
            elif not np.all((raw == 0) | (raw == 1)):
                raise InvalidInput("allocation entries must be 0 or 1")
        entries = np.array(raw, dtype=np.int8)
        flat = entries.ravel()
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)
        # Row-major bit pattern, first cell most significant; used for
        # visited-set membership and deterministic tie-breaking.
        packed = np.packbits(flat)
        key = int.from_bytes(packed.tobytes(), "big") >> (packed.size * 8 - flat.size)
        object.__setattr__(self, "_key", key)

    @classmethod
    def root(cls, m: int, n: int) -> Allocation:
        return cls(np.ones((m, n), dtype=np.int8))

    @classmethod
    def null(cls, m: int, n: int) -> Allocation:
        return cls(np.zeros((m, n), dtype=np.int8))

    @classmethod
    def from_key(cls, key: int, m: int, n: int) -> Allocation:
        bits = [(key >> (m * n - 1 - i)) & 1 for i in range(m * n)]
        return cls(np.asarray(bits, dtype=np.int8).reshape(m, n))

    @property
    def key(self) -> int:
        return self._key  # type: ignore[attr-defined]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape  # type: ignore[return-value]

    def popcount(self) -> int:
        return int(self.entries.sum())

    def coalition(self, task: int) -> tuple[int, ...]:
        """Indices of the robots assigned to a task."""
        return tuple(int(n) for n in np.nonzero(self.entries[task])[0])

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Allocation)
            and self.shape == other.shape
            and self.key == other.key
        )

    def __hash__(self) -> int:
        return hash((self.shape, self.key))


@dataclass(frozen=True)
class ProblemDomain:
    """The full problem: tasks, team, quality maps, world, and budget."""

    network: TaskNetwork
    robots: tuple[Robot, ...]
    quality_maps: tuple[QualityMap, ...]
    world: WorldMap
    time_budget: float
    alpha: float = 0.4
    big_m: Optional[float] = None
    traits: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        robots = tuple(self.robots)
        object.__setattr__(self, "robots", robots)
        object.__setattr__(self, "quality_maps", tuple(self.quality_maps))
        if not robots:
            raise InvalidInput("need at least one robot")
        u = robots[0].traits.size
        for r in robots:
            if r.traits.size != u:
                raise InvalidInput(f"robot {r.id}: trait vector length {r.traits.size} != {u}")
            if not self.world.is_free(r.start_cell):
                raise InvalidInput(f"robot {r.id}: start cell {r.start_cell} blocked or out of bounds")
        for t in self.network.tasks:
            for site in (t.start_site, t.end_site):
                if not self.world.is_free(site):
                    raise InvalidInput(f"task {t.id}: site {site} blocked or out of bounds")
        if len(self.quality_maps) != len(self.network):
            raise InvalidInput("need exactly one quality map per task")
        if self.time_budget <= 0:
            raise InvalidInput("time budget must be positive")
        if not (0.0 <= self.alpha <= 1.0):
            raise InvalidInput(f"alpha must be in [0,1], got {self.alpha}")
        if self.big_m is not None and self.big_m <= 0:
            raise InvalidInput("big_m must be positive when given")
        traits = np.stack([r.traits for r in robots])
        traits.setflags(write=False)
        object.__setattr__(self, "traits", traits)

    @property
    def n_tasks(self) -> int:
        return len(self.network)

    @property
    def n_robots(self) -> int:
        return len(self.robots)

    @property
    def n_traits(self) -> int:
        return self.traits.shape[1]


@dataclass(frozen=True)
class Schedule:
    """Start times, makespan, and the mutex orderings that realized them."""

    start_times: tuple[float, ...]
    makespan: float
    orderings: dict[tuple[int, int], int]  # canonical (i,j), i<j; 1 means i before j


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]
    empty_coalitions: tuple[int, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class Solution:
    """A budget-respecting allocation with its schedule and motion plans."""

    allocation: Allocation
    schedule: Schedule
    motion_plans: dict  # (robot_id, task_id) -> PathResult for the arrival leg
    total_quality: float
    quality_loss: float
    overrun: float
    blended: float
    bound_report: object = None


def aggregate_traits(alloc: Allocation, traits: np.ndarray) -> np.ndarray:
    """Aggregated traits per task: row m sums the trait rows of task m's coalition."""
    traits = np.asarray(traits, dtype=float)
    if traits.ndim != 2 or alloc.entries.shape[1] != traits.shape[0]:
        raise InvalidInput(
            f"allocation is {alloc.entries.shape} but trait matrix is {traits.shape}"
        )
    return alloc.entries.astype(float) @ traits


def total_allocation_quality(alloc: Allocation, domain: ProblemDomain) -> float:
    """Sum of per-task qualities, each clamped to [0, 1] before summation."""
    y = aggregate_traits(alloc, domain.traits)
    total = 0.0
    for m, quality_map in enumerate(domain.quality_maps):
        total += min(1.0, max(0.0, float(quality_map(y[m]))))
    return total


def successors(alloc: Allocation) -> list[Allocation]:
    """Children in the allocation graph: one per set bit, that bit cleared.

    Emitted in row-major bit order, so the list is deterministic.
    """
    out = []
    m, n = alloc.shape
    for i in range(m):
        for j in range(n):
            if alloc.entries[i, j]:
                child = np.array(alloc.entries)
                child[i, j] = 0
                out.append(Allocation(child))
    return out


def validate_solution(domain: ProblemDomain, sol: Solution, planner=None) -> ValidationReport:
    """Check a solution against the budget, temporal constraints, and motion plans.

    Violations are data, not errors: the report lists every broken constraint
    under planned travel times. Empty coalitions are flagged separately and do
    not invalidate the solution.
    """
    from .motion import GridPlanner, planned_leg_seconds
    from .scheduler import build_constraints

    if planner is None:
        planner = GridPlanner(domain.world)
    violations: list[str] = []
    sched = sol.schedule
    m = domain.n_tasks
    durations = [t.duration for t in domain.network.tasks]

    starts = sched.start_times
    if len(starts) != m:
        return ValidationReport((f"schedule has {len(starts)} start times for {m} tasks",))
    for i, s in enumerate(starts):
        if s < -TOL:
            violations.append(f"task {i}: negative start time {s}")

    makespan = max(s + d for s, d in zip(starts, durations))
    if abs(makespan - sched.makespan) > TOL:
        violations.append(
            f"recorded makespan {sched.makespan} != max completion time {makespan}"
        )
    if makespan > domain.time_budget + TOL:
        violations.append(
            f"makespan {makespan} exceeds time budget {domain.time_budget}"
        )

    cs = build_constraints(domain, sol.allocation, planned_leg_seconds(planner, domain))
    for i, x in enumerate(cs.initial_offsets):
        if starts[i] < x - TOL:
            violations.append(f"task {i}: starts at {starts[i]} before initial travel {x}")
    for (i, j), x in cs.precedence_travel.items():
        if starts[j] < starts[i] + durations[i] + x - TOL:
            violations.append(
                f"precedence ({i},{j}): start {starts[j]} < {starts[i]} + {durations[i]} + {x}"
            )
    for (i, j), (x_ij, x_ji) in cs.mutex_pairs.items():
        fwd = starts[j] >= starts[i] + durations[i] + x_ij - TOL
        rev = starts[i] >= starts[j] + durations[j] + x_ji - TOL
        if not (fwd or rev):
            violations.append(f"mutex ({i},{j}): tasks overlap under both orderings")

    violations.extend(_check_motion_plans(domain, sol))

    empties = tuple(i for i in range(m) if not sol.allocation.coalition(i))
    return ValidationReport(tuple(violations), empties)


def _check_motion_plans(domain: ProblemDomain, sol: Solution) -> list[str]:
    violations: list[str] = []
    starts = sol.schedule.start_times
    tasks = domain.network.tasks
    for robot in domain.robots:
        assigned = [i for i in range(domain.n_tasks) if sol.allocation.entries[i, robot.id]]
        assigned.sort(key=lambda i: (starts[i], i))
        origin = robot.start_cell
        depart = 0.0
        for i in assigned:
            plan = sol.motion_plans.get((robot.id, i))
            if plan is None:
                violations.append(f"robot {robot.id}: no motion plan for task {i}")
            else:
                violations.extend(_check_path(domain.world, plan, origin, tasks[i].start_site,
                                              f"robot {robot.id} -> task {i}"))
                duration = plan.length / (robot.speed * domain.world.cell_size)
                gap = starts[i] - depart
                if duration > gap + TOL:
                    violations.append(
                        f"robot {robot.id} -> task {i}: travel takes {duration}s "
                        f"but only {gap}s scheduled"
                    )
            origin = tasks[i].end_site
            depart = starts[i] + tasks[i].duration
    return violations


def _check_path(world: WorldMap, plan, origin: Cell, goal: Cell, label: str) -> list[str]:
    violations = []
    cells = plan.cells
    if not cells:
        return [f"{label}: empty path"]
    if cells[0] != origin:
        violations.append(f"{label}: path starts at {cells[0]}, expected {origin}")
    if cells[-1] != goal:
        violations.append(f"{label}: path ends at {cells[-1]}, expected {goal}")
    for cell in cells:
        if not world.is_free(cell):
            violations.append(f"{label}: path crosses blocked cell {cell}")
            break
    for a, b in zip(cells, cells[1:]):
        if abs(a[0] - b[0]) + abs(a[1] - b[1]) != 1:
            violations.append(f"{label}: cells {a} and {b} are not 4-adjacent")
            break
    expected = (len(cells) - 1) * world.cell_size
    if abs(plan.length - expected) > TOL:
        violations.append(f"{label}: recorded length {plan.length} != {expected}")
    return violations
