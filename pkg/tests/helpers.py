"""Shared oracle utilities for the test suite.

Everything here is deliberately independent of the library internals:
breadth-first search instead of A*, dense linear algebra instead of the
cached Cholesky path, and exhaustive enumeration instead of branch and
bound.  Tests compare library output against these references.
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np

from staq.model import ProblemDomain, Robot, Task, TaskNetwork, WorldMap
from staq.scheduler import ConstraintSet, evaluate_fixed_order


def bfs_grid_distance(world, start, goal):
    """Unweighted shortest path length in cells, or None if unreachable."""
    if not (world.is_free(start) and world.is_free(goal)):
        return None
    if start == goal:
        return 0
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        (cx, cy), dist = queue.popleft()
        for nxt in ((cx, cy - 1), (cx + 1, cy), (cx, cy + 1), (cx - 1, cy)):
            if nxt in seen or not world.is_free(nxt):
                continue
            if nxt == goal:
                return dist + 1
            seen.add(nxt)
            queue.append((nxt, dist + 1))
    return None


def dense_gp_reference(x_train, y_train, x_query, *, length_scale,
                       signal_var=0.25, noise_var=1e-4, prior_mean=0.5):
    """Textbook GP posterior via one dense solve. No caching, no clamping."""
    x_train = np.atleast_2d(np.asarray(x_train, dtype=float))
    x_query = np.atleast_2d(np.asarray(x_query, dtype=float))
    y_train = np.asarray(y_train, dtype=float)

    def k(a, b):
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
        return signal_var * np.exp(-d2 / (2.0 * length_scale ** 2))

    gram = k(x_train, x_train) + noise_var * np.eye(len(x_train))
    cross = k(x_query, x_train)
    solve = np.linalg.solve(gram, y_train - prior_mean)
    mean = prior_mean + cross @ solve
    var = signal_var - np.einsum(
        "ij,ji->i", cross, np.linalg.solve(gram, cross.T))
    return mean, var


def enumerate_schedules(cs: ConstraintSet):
    """Minimum makespan over every orientation of every disjunction.

    Exhaustive 2^k reference for the branch-and-bound solver.  Returns
    None when no orientation admits a schedule.
    """
    pairs = sorted(cs.mutex_pairs)
    best = None
    for signs in itertools.product((1, -1), repeat=len(pairs)):
        orderings = dict(zip(pairs, signs))
        makespan = evaluate_fixed_order(cs, orderings)
        if makespan is not None and (best is None or makespan < best):
            best = makespan
    return best


def random_constraint_set(rng, *, max_tasks=6, max_mutex=8):
    """Random scheduling instance with at most eight disjunctions."""
    m = int(rng.integers(2, max_tasks + 1))
    durations = tuple(float(d) for d in rng.uniform(1.0, 9.0, size=m))
    offsets = tuple(float(x) for x in rng.uniform(0.0, 6.0, size=m))

    precedence = {}
    for i in range(m):
        for j in range(i + 1, m):
            if rng.random() < 0.2:
                precedence[(i, j)] = float(rng.uniform(0.0, 4.0))

    candidates = [(i, j) for i in range(m) for j in range(i + 1, m)
                  if (i, j) not in precedence]
    rng.shuffle(candidates)
    n_mutex = int(rng.integers(0, min(max_mutex, len(candidates)) + 1))
    mutex = {}
    for (i, j) in candidates[:n_mutex]:
        mutex[(i, j)] = (float(rng.uniform(0.0, 3.0)),
                         float(rng.uniform(0.0, 3.0)))

    return ConstraintSet(
        durations=durations,
        initial_offsets=offsets,
        precedence_travel=precedence,
        mutex_pairs=mutex,
        big_m=1e4,
    )


def open_world(width=8, height=8, cell_size=1.0):
    return WorldMap(width=width, height=height, occupied=frozenset(),
                    cell_size=cell_size)


class LinearMap:
    """Clamped weighted sum of an aggregated trait row."""

    def __init__(self, weights, normalizer=1.0):
        self.weights = np.asarray(weights, dtype=float)
        self.normalizer = float(normalizer)

    def __call__(self, traits):
        return float(self.weights @ np.asarray(traits, dtype=float)
                     / self.normalizer)


def two_task_domain(*, alpha=0.4, time_budget=60.0, precedence=frozenset(),
                    mutex=frozenset()):
    """Small deterministic instance used across the suite.

    Robot 0 sits near task 0, robot 1 near task 1, on an open 8x8 grid,
    so every hand-computed travel distance is a short Manhattan walk.
    """
    world = open_world()
    robots = (
        Robot(id=0, traits=np.array([1.0, 0.0]), start_cell=(0, 0), speed=1.0),
        Robot(id=1, traits=np.array([0.0, 2.0]), start_cell=(7, 7), speed=2.0),
    )
    tasks = (
        Task(id=0, duration=4.0, start_site=(2, 0), end_site=(3, 0)),
        Task(id=1, duration=3.0, start_site=(5, 7), end_site=(5, 6)),
    )
    network = TaskNetwork(tasks=tasks, precedence=frozenset(precedence),
                          mutex=frozenset(mutex))
    quality_maps = (LinearMap([1.0, 1.0], 3.0), LinearMap([1.0, 1.0], 3.0))
    return ProblemDomain(network=network, robots=robots,
                         quality_maps=quality_maps, world=world,
                         time_budget=time_budget, alpha=alpha)


def walled_world():
    """10x10 grid split by a wall with a single gap at the bottom row."""
    occupied = frozenset((5, row) for row in range(9))
    return WorldMap(width=10, height=10, occupied=occupied, cell_size=1.0)


def drop_one_domain(time_budget=9.0, alpha=0.4):
    """Two unit-distance tasks where the budget decides how much to share.

    The all-hands allocation serializes both tasks (makespan 10); dropping
    one assignment brings the best makespan down to 9 at quality 1.5 of 2.
    """
    world = open_world(4, 4)
    robots = (
        Robot(id=0, traits=np.array([1.0, 0.0]), start_cell=(0, 0), speed=1.0),
        Robot(id=1, traits=np.array([0.0, 1.0]), start_cell=(1, 0), speed=1.0),
    )
    tasks = (
        Task(id=0, duration=4.0, start_site=(0, 0), end_site=(0, 0)),
        Task(id=1, duration=4.0, start_site=(1, 0), end_site=(1, 0)),
    )
    network = TaskNetwork(tasks=tasks, precedence=frozenset(), mutex=frozenset())
    maps = (LinearMap([1.0, 1.0], 2.0), LinearMap([1.0, 1.0], 2.0))
    return ProblemDomain(network=network, robots=robots, quality_maps=maps,
                         world=world, time_budget=time_budget, alpha=alpha)
