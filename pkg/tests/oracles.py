"""Independent brute-force oracles the tests check the package against.

Everything here is deliberately written from scratch against the documented
rules (ray walks, plain Dijkstra, recursive goal-state evaluation) rather
than calling back into the package's own algorithms.
"""

from __future__ import annotations

import heapq
import random
from collections import deque

from bomber_arena.world import CellKind, GridMap

_DIRS = ((0, -1), (1, 0), (0, 1), (-1, 0))


def ray_footprint(grid: GridMap, cell, blast_range: int) -> set:
    """Footprint by literal ray walking: stop before solid, stop at a box."""
    cells = {cell}
    for dx, dy in _DIRS:
        x, y = cell
        for _ in range(blast_range):
            x, y = x + dx, y + dy
            if not grid.in_bounds((x, y)) or grid.kind((x, y)) is CellKind.SOLID:
                break
            cells.add((x, y))
            if grid.kind((x, y)) is CellKind.BOX:
                break
    return cells


def dijkstra_cost(grid: GridMap, start, target, punishment) -> int | None:
    """Plain Dijkstra over the augmented-cost graph; cost only."""
    dist = {start: 0}
    heap = [(0, start)]
    while heap:
        d, cur = heapq.heappop(heap)
        if cur == target:
            return d
        if d > dist.get(cur, float("inf")):
            continue
        for dx, dy in _DIRS:
            nxt = (cur[0] + dx, cur[1] + dy)
            if not grid.in_bounds(nxt) or grid.kind(nxt) is CellKind.SOLID:
                continue
            nd = d + 1 + punishment.of(nxt)
            if nd < dist.get(nxt, float("inf")):
                dist[nxt] = nd
                heapq.heappush(heap, (nd, nxt))
    return None


def bfs_dist(grid: GridMap, start, target, through_boxes: bool = False) -> int | None:
    """Unweighted shortest path length; boxes block unless through_boxes."""
    if start == target:
        return 0
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        cur, d = queue.popleft()
        for dx, dy in _DIRS:
            nxt = (cur[0] + dx, cur[1] + dy)
            if nxt in seen or not grid.in_bounds(nxt):
                continue
            kind = grid.kind(nxt)
            if kind is CellKind.SOLID:
                continue
            if kind is CellKind.BOX and not through_boxes:
                continue
            if nxt == target:
                return d + 1
            seen.add(nxt)
            queue.append((nxt, d + 1))
    return None


def retreat_exists(grid: GridMap, start, footprint, max_moves: int,
                   blocked=frozenset()) -> bool:
    """Breadth-first escape check used against is_safe_retreat."""
    queue = deque([(start, 0)])
    seen = {start}
    while queue:
        cell, moves = queue.popleft()
        if cell not in footprint:
            return True
        if moves >= max_moves:
            continue
        for dx, dy in _DIRS:
            nxt = (cell[0] + dx, cell[1] + dy)
            if nxt in seen or nxt in blocked:
                continue
            if not grid.in_bounds(nxt) or grid.kind(nxt) is not CellKind.EMPTY:
                continue
            seen.add(nxt)
            queue.append((nxt, moves + 1))
    return False


def random_grid(rng: random.Random, width: int = 9, height: int = 9,
                solid_p: float = 0.12, box_p: float = 0.25) -> GridMap:
    cells = {}
    for y in range(height):
        for x in range(width):
            if x in (0, width - 1) or y in (0, height - 1):
                cells[(x, y)] = CellKind.SOLID
            else:
                r = rng.random()
                if r < solid_p:
                    cells[(x, y)] = CellKind.SOLID
                elif r < solid_p + box_p:
                    cells[(x, y)] = CellKind.BOX
                else:
                    cells[(x, y)] = CellKind.EMPTY
    return GridMap(width, height, cells)


def decide_move_oracle(at: str, has_intermediate: bool, is_clear: bool, bombs: int) -> str:
    """Tabled movement policy over the abstract locations A (elsewhere),
    B (target) and C (intermediate waypoint)."""
    if at == "B":
        return "done"
    if has_intermediate and not is_clear:
        if at == "C":
            return "place_bomb_and_retreat" if bombs > 0 else "wait_for_bomb"
        return "toward_intermediate"
    return "toward_target"


# -- goal tree frontier oracle -------------------------------------------------

WAITING, ENABLED, SATISFIED, IMPOSSIBLE = "waiting", "enabled", "satisfied", "impossible"


def eval_goal_states(root: dict, leaf_satisfiers: dict, explicit: set) -> dict:
    """Recursive evaluation of goal states from a satisfaction history.

    ``root`` is a plain node dict {id, op, card, children}; ``leaf_satisfiers``
    maps leaf id -> set of agents that satisfied it; ``explicit`` holds the
    ids of internal goals explicitly marked satisfied.
    """
    states: dict[str, str] = {}

    def is_satisfied(node) -> bool:
        if node["op"] == "leaf":
            return len(leaf_satisfiers.get(node["id"], ())) >= node.get("card", 1)
        return node["id"] in explicit

    def walk(node, enabled: bool, impossible: bool):
        sat = is_satisfied(node)
        if sat:
            states[node["id"]] = SATISFIED
        elif impossible:
            states[node["id"]] = IMPOSSIBLE
        elif enabled:
            states[node["id"]] = ENABLED
        else:
            states[node["id"]] = WAITING
        children = node.get("children", [])
        child_sat = [is_satisfied(c) for c in children]
        any_sat = any(child_sat)
        for i, child in enumerate(children):
            child_impossible = impossible or (
                node["op"] == "choice" and any_sat and not child_sat[i]
            )
            if node["op"] == "seq":
                child_enabled = enabled and all(child_sat[:i])
            else:
                child_enabled = enabled
            walk(child, child_enabled and not child_impossible, child_impossible)

    walk(root, True, False)
    return states


def achievable_goals(root: dict, leaf_satisfiers: dict, explicit: set) -> list[str]:
    """Goals an agent could satisfy right now, per the oracle's state view."""
    states = eval_goal_states(root, leaf_satisfiers, explicit)
    out = []

    def walk(node):
        if states[node["id"]] == ENABLED:
            if node["op"] == "leaf":
                out.append(node["id"])
            else:
                child_states = [states[c["id"]] for c in node.get("children", [])]
                if node["op"] == "choice":
                    if any(s == SATISFIED for s in child_states):
                        out.append(node["id"])
                elif all(s == SATISFIED for s in child_states):
                    out.append(node["id"])
        for c in node.get("children", []):
            walk(c)

    walk(root)
    return out


def random_goal_tree(rng: random.Random, max_nodes: int = 15) -> dict:
    """Random scheme tree document with mixed operators and leaf cardinalities."""
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return f"g{counter[0]}"

    def build(budget: int) -> tuple[dict, int]:
        gid = fresh()
        if budget <= 2 or rng.random() < 0.4:
            return {"id": gid, "op": "leaf", "card": rng.randint(1, 3)}, 1
        op = rng.choice(["seq", "choice", "par"])
        n_children = rng.randint(2, min(3, budget - 1))
        used = 1
        children = []
        for _ in range(n_children):
            child, n = build(max(1, (budget - used) // max(1, n_children - len(children))))
            children.append(child)
            used += n
        return {"id": gid, "op": op, "children": children}, used

    tree, _ = build(rng.randint(3, max_nodes))
    return tree
