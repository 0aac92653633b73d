import itertools
import math

import numpy as np
import pytest
from scipy.optimize import linprog

from staq.model import (
    Allocation,
    InvalidInput,
    ProblemDomain,
    Robot,
    Task,
    TaskNetwork,
    WorldMap,
)
from staq.motion import GridPlanner, estimated_leg_seconds, planned_leg_seconds
from staq.scheduler import (
    ConstraintSet,
    TravelTables,
    build_constraints,
    build_constraints_fast,
    evaluate_fixed_order,
    make_travel_tables,
    refine_with_motion_plans,
    solve_milp,
    worst_makespan,
)

from helpers import (
    LinearMap,
    enumerate_schedules,
    open_world,
    random_constraint_set,
    two_task_domain,
    walled_world,
)


def _cs(durations, offsets=None, precedence=None, mutex=None):
    m = len(durations)
    return ConstraintSet(
        durations=tuple(float(d) for d in durations),
        initial_offsets=tuple(float(x) for x in (offsets or [0.0] * m)),
        precedence_travel=dict(precedence or {}),
        mutex_pairs=dict(mutex or {}),
    )


def linprog_makespan(cs, orderings):
    """LP reference for a fixed orientation: min C over start times."""
    m = len(cs.durations)
    arcs = [(i, j, cs.durations[i] + x)
            for (i, j), x in cs.precedence_travel.items()]
    for (i, j), direction in orderings.items():
        x_ij, x_ji = cs.mutex_pairs[(i, j)]
        if direction == 1:
            arcs.append((i, j, cs.durations[i] + x_ij))
        else:
            arcs.append((j, i, cs.durations[j] + x_ji))

    c = [0.0] * m + [1.0]
    a_ub, b_ub = [], []
    for i, x in enumerate(cs.initial_offsets):
        row = [0.0] * (m + 1)
        row[i] = -1.0
        a_ub.append(row)
        b_ub.append(-x)
    for i, j, w in arcs:
        row = [0.0] * (m + 1)
        row[i], row[j] = 1.0, -1.0
        a_ub.append(row)
        b_ub.append(-w)
    for i, d in enumerate(cs.durations):
        row = [0.0] * (m + 1)
        row[i], row[m] = 1.0, -1.0
        a_ub.append(row)
        b_ub.append(-d)
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=(0, None), method="highs")
    return res.fun if res.status == 0 else None


# -------------------------------------------------- constraint derivation

def test_disjoint_coalitions_create_no_disjunctions():
    domain = two_task_domain()
    leg = estimated_leg_seconds(domain)
    cs = build_constraints(domain, Allocation(np.array([[1, 0], [0, 1]])), leg)
    assert cs.mutex_pairs == {}
    assert cs.precedence_travel == {}
    assert cs.durations == (4.0, 3.0)


def test_shared_robot_induces_a_mutex_pair():
    domain = two_task_domain()
    leg = estimated_leg_seconds(domain)
    cs = build_constraints(domain, Allocation(np.array([[1, 0], [1, 0]])), leg)
    assert set(cs.mutex_pairs) == {(0, 1)}
    # robot 0 (speed 1) moves end of task 0 (3,0) -> start of task 1 (5,7)
    want_fwd = math.hypot(5 - 3, 7 - 0)
    # and start of task 0 (2,0) from end of task 1 (5,6) the other way
    want_rev = math.hypot(5 - 2, 6 - 0)
    x_ij, x_ji = cs.mutex_pairs[(0, 1)]
    assert x_ij == pytest.approx(want_fwd)
    assert x_ji == pytest.approx(want_rev)


def test_precedence_pair_is_not_doubled_as_mutex():
    domain = two_task_domain(precedence={(0, 1)}, mutex={(0, 1)})
    leg = estimated_leg_seconds(domain)
    cs = build_constraints(domain, Allocation(np.array([[1, 0], [1, 0]])), leg)
    assert (0, 1) in cs.precedence_travel
    assert cs.mutex_pairs == {}


def test_release_offsets_take_the_slowest_assigned_robot():
    domain = two_task_domain()
    leg = estimated_leg_seconds(domain)
    cs = build_constraints(domain, Allocation.root(2, 2), leg)
    # task 0 at (2,0): robot 0 needs 2.0s, robot 1 needs hypot(5,7)/2
    assert cs.initial_offsets[0] == pytest.approx(max(2.0, math.hypot(5, 7) / 2))
    # empty coalition -> no travel requirement
    cs = build_constraints(domain, Allocation.null(2, 2), leg)
    assert cs.initial_offsets == (0.0, 0.0)


def test_infeasible_on_construction_flags():
    ok = _cs([1.0, 1.0], mutex={(0, 1): (math.inf, 0.0)})
    assert not ok.infeasible_on_construction   # one direction still open
    assert _cs([1.0], offsets=[math.inf]).infeasible_on_construction
    assert _cs([1.0, 1.0],
               precedence={(0, 1): math.inf}).infeasible_on_construction
    assert _cs([1.0, 1.0],
               mutex={(0, 1): (math.inf, math.inf)}).infeasible_on_construction
    assert solve_milp(_cs([1.0], offsets=[math.inf])).status == "infeasible"


def test_n_quantities_counts_all_travel_terms():
    cs = _cs([1.0, 1.0, 1.0], precedence={(0, 1): 0.5},
             mutex={(1, 2): (0.1, 0.2)})
    assert cs.n_quantities == 3 + 1 + 2


# ------------------------------------------------------ fixed-order solve

def test_single_task_starts_after_travel():
    cs = _cs([4.0], offsets=[1.0])
    assert evaluate_fixed_order(cs, {}) == pytest.approx(5.0)


def test_precedence_with_travel_hand_example():
    cs = _cs([5.0, 3.0], precedence={(0, 1): 2.0})
    assert evaluate_fixed_order(cs, {}) == pytest.approx(10.0)


def test_mutex_symmetric_example_either_direction():
    cs = _cs([5.0, 3.0], mutex={(0, 1): (0.0, 0.0)})
    assert evaluate_fixed_order(cs, {(0, 1): 1}) == pytest.approx(8.0)
    assert evaluate_fixed_order(cs, {(0, 1): -1}) == pytest.approx(8.0)


def test_fixed_order_rejects_missing_or_bad_orderings():
    cs = _cs([5.0, 3.0], mutex={(0, 1): (0.0, 0.0)})
    with pytest.raises(InvalidInput):
        evaluate_fixed_order(cs, {})
    with pytest.raises(InvalidInput):
        evaluate_fixed_order(cs, {(0, 1): 0})
    # keys outside the mutex set are ignored
    assert evaluate_fixed_order(cs, {(0, 1): 1, (5, 9): 1}) == pytest.approx(8.0)


def test_fixed_order_infeasible_on_unreachable_leg():
    cs = _cs([5.0, 3.0], mutex={(0, 1): (math.inf, 0.0)})
    assert evaluate_fixed_order(cs, {(0, 1): 1}) is None
    assert evaluate_fixed_order(cs, {(0, 1): -1}) == pytest.approx(8.0)


def test_fixed_order_matches_lp_reference():
    rng = np.random.default_rng(11)
    for _ in range(60):
        cs = random_constraint_set(rng)
        orderings = {p: (1 if rng.random() < 0.5 else -1)
                     for p in cs.mutex_pairs}
        got = evaluate_fixed_order(cs, orderings)
        want = linprog_makespan(cs, orderings)
        if want is None:
            assert got is None
        else:
            assert got == pytest.approx(want, abs=1e-6)


# --------------------------------------------------------- exact solver

def test_solver_equals_fixed_order_without_disjunctions():
    cs = _cs([5.0, 3.0], offsets=[1.0, 0.0], precedence={(0, 1): 2.0})
    outcome = solve_milp(cs)
    assert outcome.status == "optimal"
    assert outcome.schedule.makespan == pytest.approx(
        evaluate_fixed_order(cs, {}))
    assert outcome.schedule.orderings == {}


def test_three_mutually_exclusive_tasks_serialize():
    mutex = {(0, 1): (0.0, 0.0), (0, 2): (0.0, 0.0), (1, 2): (0.0, 0.0)}
    outcome = solve_milp(_cs([2.0, 2.0, 2.0], mutex=mutex))
    assert outcome.status == "optimal"
    assert outcome.schedule.makespan == pytest.approx(6.0)


def test_solver_reports_realized_orderings():
    cs = _cs([5.0, 3.0], mutex={(0, 1): (0.0, 0.0)})
    outcome = solve_milp(cs)
    assert set(outcome.schedule.orderings) == {(0, 1)}
    direction = outcome.schedule.orderings[(0, 1)]
    assert direction in (1, -1)
    # reported orderings replay to the same makespan
    assert evaluate_fixed_order(cs, outcome.schedule.orderings) == \
        pytest.approx(outcome.schedule.makespan)


def test_solver_matches_exhaustive_enumeration():
    rng = np.random.default_rng(7)
    for _ in range(60):
        cs = random_constraint_set(rng)
        outcome = solve_milp(cs)
        want = enumerate_schedules(cs)
        if want is None:
            assert outcome.status == "infeasible"
        else:
            assert outcome.status == "optimal"
            assert outcome.schedule.makespan == pytest.approx(want)
            assert outcome.nodes_explored >= 1


def test_solver_is_deterministic():
    rng = np.random.default_rng(5)
    cs = random_constraint_set(rng)
    first = solve_milp(cs)
    second = solve_milp(cs)
    assert first.schedule.makespan == second.schedule.makespan
    assert first.schedule.start_times == second.schedule.start_times
    assert first.schedule.orderings == second.schedule.orderings


def test_solver_start_times_respect_all_constraints():
    rng = np.random.default_rng(13)
    for _ in range(30):
        cs = random_constraint_set(rng)
        outcome = solve_milp(cs)
        if outcome.status != "optimal":
            continue
        s = outcome.schedule.start_times
        for i, x in enumerate(cs.initial_offsets):
            assert s[i] >= x - 1e-9
        for (i, j), x in cs.precedence_travel.items():
            assert s[j] >= s[i] + cs.durations[i] + x - 1e-9
        for (i, j), (x_ij, x_ji) in cs.mutex_pairs.items():
            assert (s[j] >= s[i] + cs.durations[i] + x_ij - 1e-9
                    or s[i] >= s[j] + cs.durations[j] + x_ji - 1e-9)


# ---------------------------------------------------- travel table variant

def test_fast_constraints_match_reference_everywhere():
    rng = np.random.default_rng(2)
    for precedence, mutex in (((), ()), ({(0, 1)}, ()), ((), {(0, 1)})):
        domain = two_task_domain(precedence=precedence, mutex=mutex)
        planner = GridPlanner(domain.world)
        for leg in (estimated_leg_seconds(domain),
                    planned_leg_seconds(planner, domain)):
            tables = make_travel_tables(domain, leg)
            for key in range(16):
                alloc = Allocation.from_key(key, 2, 2)
                want = build_constraints(domain, alloc, leg)
                got = build_constraints_fast(tables, alloc)
                assert got == want


def test_fast_constraints_reject_shape_mismatch():
    domain = two_task_domain()
    tables = make_travel_tables(domain, estimated_leg_seconds(domain))
    with pytest.raises(InvalidInput):
        build_constraints_fast(tables, Allocation.root(3, 2))


# ----------------------------------------------------------- worst case

def test_worst_makespan_single_task_is_travel_plus_duration():
    world = open_world(6, 6)
    robot = Robot(id=0, traits=np.array([1.0]), start_cell=(0, 0), speed=1.0)
    task = Task(id=0, duration=4.0, start_site=(3, 4), end_site=(3, 4))
    net = TaskNetwork(tasks=(task,), precedence=frozenset(), mutex=frozenset())
    domain = ProblemDomain(network=net, robots=(robot,),
                           quality_maps=(LinearMap([1.0]),),
                           world=world, time_budget=100.0)
    assert worst_makespan(domain) == pytest.approx(5.0 + 4.0)


def test_worst_makespan_serializes_tasks_sharing_the_whole_team():
    domain = two_task_domain()
    # root allocation puts both robots on both tasks -> induced mutex
    assert worst_makespan(domain) >= 4.0 + 3.0


def test_worst_makespan_chain_without_travel():
    world = open_world(4, 4)
    robot = Robot(id=0, traits=np.array([1.0]), start_cell=(1, 1), speed=1.0)
    tasks = tuple(Task(id=i, duration=1.0, start_site=(1, 1), end_site=(1, 1))
                  for i in range(3))
    net = TaskNetwork(tasks=tasks, precedence=frozenset({(0, 1), (1, 2)}),
                      mutex=frozenset())
    domain = ProblemDomain(network=net, robots=(robot,),
                           quality_maps=(LinearMap([1.0]),) * 3,
                           world=world, time_budget=100.0)
    assert worst_makespan(domain) == pytest.approx(3.0)


# ------------------------------------------------------------- refinement

def test_refinement_fixpoint_on_open_map():
    # axis-aligned legs: straight-line estimate equals the grid path
    world = open_world(6, 6)
    robots = (Robot(id=0, traits=np.array([1.0]), start_cell=(0, 0), speed=1.0),)
    tasks = (Task(id=0, duration=2.0, start_site=(3, 0), end_site=(3, 0)),)
    net = TaskNetwork(tasks=tasks, precedence=frozenset(), mutex=frozenset())
    domain = ProblemDomain(network=net, robots=robots,
                           quality_maps=(LinearMap([1.0]),),
                           world=world, time_budget=50.0)
    alloc = Allocation.root(1, 1)
    cs = build_constraints(domain, alloc, estimated_leg_seconds(domain))
    outcome = solve_milp(cs)
    planner = GridPlanner(world)
    refined, changed = refine_with_motion_plans(domain, alloc,
                                                outcome.schedule, planner, cs)
    assert not changed
    assert refined.initial_offsets == cs.initial_offsets


def test_refinement_grows_travel_around_walls():
    world = walled_world()
    robots = (Robot(id=0, traits=np.array([1.0]), start_cell=(4, 0), speed=1.0),)
    tasks = (Task(id=0, duration=2.0, start_site=(6, 0), end_site=(6, 0)),)
    net = TaskNetwork(tasks=tasks, precedence=frozenset(), mutex=frozenset())
    domain = ProblemDomain(network=net, robots=robots,
                           quality_maps=(LinearMap([1.0]),),
                           world=world, time_budget=50.0)
    alloc = Allocation.root(1, 1)
    cs = build_constraints(domain, alloc, estimated_leg_seconds(domain))
    before = solve_milp(cs).schedule.makespan
    planner = GridPlanner(world)
    refined, changed = refine_with_motion_plans(
        domain, alloc, solve_milp(cs).schedule, planner, cs)
    assert changed
    after_outcome = solve_milp(refined)
    assert after_outcome.schedule.makespan >= before
    assert after_outcome.schedule.makespan == pytest.approx(20.0 + 2.0)
    # second pass is a fixpoint
    again, changed2 = refine_with_motion_plans(
        domain, alloc, after_outcome.schedule, planner, refined)
    assert not changed2
    assert again == refined


def test_refinement_updates_only_the_realized_mutex_direction():
    world = walled_world()
    # two tasks on opposite sides of the wall share the only robot
    robots = (Robot(id=0, traits=np.array([1.0]), start_cell=(4, 0), speed=1.0),)
    tasks = (Task(id=0, duration=2.0, start_site=(4, 1), end_site=(4, 1)),
             Task(id=1, duration=2.0, start_site=(6, 0), end_site=(6, 0)))
    net = TaskNetwork(tasks=tasks, precedence=frozenset(), mutex=frozenset())
    domain = ProblemDomain(network=net, robots=robots,
                           quality_maps=(LinearMap([1.0]),) * 2,
                           world=world, time_budget=200.0)
    alloc = Allocation(np.array([[1], [1]]))
    cs = build_constraints(domain, alloc, estimated_leg_seconds(domain))
    outcome = solve_milp(cs)
    direction = outcome.schedule.orderings[(0, 1)]
    planner = GridPlanner(world)
    refined, changed = refine_with_motion_plans(domain, alloc,
                                                outcome.schedule, planner, cs)
    assert changed
    old = cs.mutex_pairs[(0, 1)]
    new = refined.mutex_pairs[(0, 1)]
    if direction == 1:
        assert new[1] == old[1]       # unrealized direction untouched
        assert new[0] >= old[0]
    else:
        assert new[0] == old[0]
        assert new[1] >= old[1]


def test_refinement_marks_unreachable_legs_infinite():
    # task site reachable only... nowhere: separate component
    world = WorldMap.from_ascii((".#.", ".#.", ".#."))
    robots = (Robot(id=0, traits=np.array([1.0]), start_cell=(0, 0), speed=1.0),)
    tasks = (Task(id=0, duration=1.0, start_site=(2, 0), end_site=(2, 0)),)
    net = TaskNetwork(tasks=tasks, precedence=frozenset(), mutex=frozenset())
    domain = ProblemDomain(network=net, robots=robots,
                           quality_maps=(LinearMap([1.0]),),
                           world=world, time_budget=50.0)
    alloc = Allocation.root(1, 1)
    cs = build_constraints(domain, alloc, estimated_leg_seconds(domain))
    outcome = solve_milp(cs)
    planner = GridPlanner(world)
    refined, changed = refine_with_motion_plans(domain, alloc,
                                                outcome.schedule, planner, cs)
    assert changed
    assert math.isinf(refined.initial_offsets[0])
    assert refined.infeasible_on_construction
    assert solve_milp(refined).status == "infeasible"
