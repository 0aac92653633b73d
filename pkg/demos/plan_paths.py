"""Route robots across an obstacle grid and print the result as ascii art.

Run:  python demos/plan_paths.py
"""

from staq.model import WorldMap
from staq.motion import GridPlanner, euclidean_estimate, plan_path

FLOOR = [
    "....................",
    ".######.....######..",
    ".#....#.....#....#..",
    ".#....#.....#....#..",
    ".#....######.....#..",
    ".#...............#..",
    ".#.####....####..#..",
    "...#..........#.....",
    ".###....##....###...",
    "....................",
]


def draw(world, plan, start, goal):
    grid = [list(row) for row in world.to_ascii()]
    for x, y in plan.cells:
        grid[y][x] = "o"
    grid[start[1]][start[0]] = "S"
    grid[goal[1]][goal[0]] = "G"
    return "\n".join("".join(row) for row in grid)


def main():
    world = WorldMap.from_ascii(FLOOR)
    queries = [((0, 0), (19, 9)), ((2, 2), (16, 3)), ((0, 9), (19, 0))]

    for start, goal in queries:
        plan = plan_path(world, start, goal)
        if plan is None:
            print(f"{start} -> {goal}: unreachable")
            continue
        straight = euclidean_estimate(start, goal)
        print(f"{start} -> {goal}: {plan.length:.0f} steps "
              f"(straight-line {straight:.1f}), {plan.expanded} cells expanded")
        print(draw(world, plan, start, goal))
        print()

    # the planner memoizes: replanning the same legs is free
    planner = GridPlanner(world)
    for _ in range(3):
        for start, goal in queries:
            planner.plan(start, goal)
    print(f"planner stats: {planner.calls} calls, {planner.cache_hits} cache hits")


if __name__ == "__main__":
    main()
