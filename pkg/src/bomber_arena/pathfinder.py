"""A* path planning with per-cell punishment costs and bombing waypoints.

Stepping into a cell costs ``1 + punishment(cell)``.  Boxes are passable in
the search (they just carry their punishment), so a winning path may cross a
box; the plan then records where a bomb has to go to open the way.  Solid
cells are never passable.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass

from .world import (
    Cell,
    CellKind,
    DIRECTIONS,
    ActionIntent,
    BombState,
    GridMap,
    blast_footprint,
    direction_between,
    step_from,
)


class BadCell(ValueError):
    """Raised when a path endpoint is solid or off the grid."""


class OffPlan(ValueError):
    """Raised when the current cell is not on the plan; caller must replan."""


class PunishmentMap:
    """Additive per-cell extra costs; unlisted cells cost nothing."""

    def __init__(self, values: dict[Cell, int] | None = None):
        self.values: dict[Cell, int] = dict(values or {})

    def of(self, cell: Cell) -> int:
        return self.values.get(cell, 0)

    def copy(self) -> "PunishmentMap":
        return PunishmentMap(self.values)

    def bump(self, cell: Cell, amount: int) -> None:
        if amount:
            self.values[cell] = self.values.get(cell, 0) + amount

    @classmethod
    def for_boxes(cls, grid: GridMap, box_cost: int = 5) -> "PunishmentMap":
        values = {c: box_cost for c, k in grid.cells.items() if k is CellKind.BOX}
        return cls(values)


@dataclass(frozen=True)
class Intermediate:
    bomb_cell: Cell
    box_cell: Cell


@dataclass(frozen=True)
class PathPlan:
    """Route from start to target; ``steps`` includes the start cell.

    ``augmented_cost`` sums ``1 + punishment`` over every transition.  When the
    route crosses a box, ``intermediate`` names the first box on the route and
    the cell just before it, where a bomb clears the passage.
    """

    steps: tuple[Cell, ...]
    intermediate: Intermediate | None
    augmented_cost: int

    @property
    def target(self) -> Cell:
        return self.steps[-1]


def _manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


def plan_path(
    grid: GridMap, start: Cell, target: Cell, punishment: PunishmentMap
) -> PathPlan | None:
    """Minimum-augmented-cost route, or None when no route exists.

    Ties break toward fewer box cells on the route, then toward the
    lexicographically smallest step sequence, so the result is unique for a
    given grid/punishment pair.
    """
    for endpoint in (start, target):
        if not grid.in_bounds(endpoint) or grid.kind(endpoint) is CellKind.SOLID:
            raise BadCell(f"endpoint {endpoint} is solid or off the grid")
    # Heap entries carry (cost + heuristic, boxes crossed, full path) so the
    # first pop of a cell is already the tie-broken optimum for that cell.
    start_path = (start,)
    heap = [(_manhattan(start, target), 0, start_path, 0)]
    closed: set[Cell] = set()
    while heap:
        f, boxes, path, g = heapq.heappop(heap)
        cur = path[-1]
        if cur in closed:
            continue
        closed.add(cur)
        if cur == target:
            inter = None
            for i in range(1, len(path)):  # the start cell never needs clearing
                if grid.kind(path[i]) is CellKind.BOX:
                    inter = Intermediate(bomb_cell=path[i - 1], box_cell=path[i])
                    break
            return PathPlan(steps=path, intermediate=inter, augmented_cost=g)
        for d in DIRECTIONS:
            nxt = step_from(cur, d)
            if not grid.in_bounds(nxt) or grid.kind(nxt) is CellKind.SOLID:
                continue
            if nxt in closed:
                continue
            ng = g + 1 + punishment.of(nxt)
            nboxes = boxes + (1 if grid.kind(nxt) is CellKind.BOX else 0)
            heapq.heappush(
                heap, (ng + _manhattan(nxt, target), nboxes, path + (nxt,), ng)
            )
    return None


def danger_punishments(state, base: PunishmentMap, *, danger_weight: int = 10,
                       explosion_punishment: int = 50) -> PunishmentMap:
    """Base punishments plus costs for cells a bomb or explosion threatens.

    Each live bomb adds ``danger_weight * (1 + slack)`` to every cell of its
    footprint, where slack grows as the fuse runs down (capped so a nearly-due
    bomb costs at most as much as a live explosion cell).  Live explosion
    cells add ``explosion_punishment``.  Pure: returns a new map.
    """
    result = base.copy()
    window = explosion_punishment // danger_weight if danger_weight else 0
    for bomb in sorted(state.bombs, key=lambda b: (b.position[1], b.position[0])):
        slack = max(0, window - bomb.fuse_remaining)
        increment = danger_weight * (1 + slack)
        for cell in blast_footprint(state, bomb):
            result.bump(cell, increment)
    for explosion in state.explosions:
        for cell in sorted(explosion.cells):
            result.bump(cell, explosion_punishment)
    return result


def next_step(plan: PathPlan, current: Cell, grid: GridMap) -> ActionIntent:
    """Intent for the next tick while following a plan.

    At the bombing waypoint with the blocking box still standing this is
    PlaceBomb; past the last step it is Wait; otherwise a move toward the
    successor cell.
    """
    if current not in plan.steps:
        raise OffPlan(f"{current} is not on the plan")
    if (
        plan.intermediate is not None
        and current == plan.intermediate.bomb_cell
        and grid.is_box(plan.intermediate.box_cell)
    ):
        return ActionIntent.place_bomb()
    idx = plan.steps.index(current)
    if idx == len(plan.steps) - 1:
        return ActionIntent.wait()
    return ActionIntent.move(direction_between(current, plan.steps[idx + 1]))


def is_safe_retreat(state, from_cell: Cell, bomb: BombState) -> tuple[Cell, ...] | None:
    """Shortest escape from a hypothetical bomb at ``from_cell``, or None.

    Searches breadth-first through empty cells (other bombs and live explosion
    cells block) for a cell outside the bomb's footprint reachable within
    ``bomb.fuse_remaining`` moves.  Returns the path including the start cell.
    """
    footprint = blast_footprint(state, bomb)
    blocked: set[Cell] = {b.position for b in state.bombs if b.position != from_cell}
    for e in state.explosions:
        blocked |= e.cells
    grid = state.grid
    queue = deque([(from_cell, (from_cell,))])
    seen = {from_cell}
    while queue:
        cell, path = queue.popleft()
        if cell not in footprint:
            return path
        if len(path) - 1 >= bomb.fuse_remaining:
            continue
        for d in DIRECTIONS:
            nxt = step_from(cell, d)
            if nxt in seen or nxt in blocked or not grid.is_empty(nxt):
                continue
            seen.add(nxt)
            queue.append((nxt, path + (nxt,)))
    return None
