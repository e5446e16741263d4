"""Deterministic turn-based grid world: maps, bombs, explosions, ticks.

Coordinates are (x, y) with x growing east and y growing south, matching the
row/column layout of the ASCII map format.  One call to ``apply_actions``
advances the world by exactly one tick; everything inside a tick resolves in
a fixed phase order so that identical inputs always produce identical event
sequences.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

Cell = tuple[int, int]


class MapParseError(ValueError):
    """Raised for malformed map text (bad glyph, ragged rows, open border)."""


class SpawnError(ValueError):
    """Raised when a team has too few spawns or a spawn sits on a bad cell."""


class MissingIntent(ValueError):
    """Raised when apply_actions is called without an intent for a live agent."""


class UnknownAgent(KeyError):
    pass


class CellKind(enum.Enum):
    EMPTY = "."
    SOLID = "#"
    BOX = "+"


class Direction(enum.Enum):
    N = (0, -1)
    E = (1, 0)
    S = (0, 1)
    W = (-1, 0)

    @property
    def dx(self) -> int:
        return self.value[0]

    @property
    def dy(self) -> int:
        return self.value[1]


DIRECTIONS = (Direction.N, Direction.E, Direction.S, Direction.W)


def step_from(cell: Cell, direction: Direction) -> Cell:
    return (cell[0] + direction.dx, cell[1] + direction.dy)


def direction_between(a: Cell, b: Cell) -> Direction:
    """Direction of the single step from a to b; cells must be 4-adjacent."""
    for d in DIRECTIONS:
        if step_from(a, d) == b:
            return d
    raise ValueError(f"cells {a} and {b} are not adjacent")


def row_major(cell: Cell) -> tuple[int, int]:
    """Sort key ordering cells top-to-bottom, then left-to-right."""
    return (cell[1], cell[0])


@dataclass(frozen=True)
class ActionIntent:
    kind: str  # "move" | "place_bomb" | "wait"
    direction: Direction | None = None

    @classmethod
    def move(cls, direction: Direction) -> "ActionIntent":
        return cls("move", direction)

    @classmethod
    def place_bomb(cls) -> "ActionIntent":
        return cls("place_bomb")

    @classmethod
    def wait(cls) -> "ActionIntent":
        return cls("wait")


WAIT = ActionIntent.wait()


@dataclass
class GridMap:
    """Rectangular cell grid with a solid outer border."""

    width: int
    height: int
    cells: dict[Cell, CellKind]

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def kind(self, cell: Cell) -> CellKind:
        return self.cells[cell]

    def set_kind(self, cell: Cell, kind: CellKind) -> None:
        self.cells[cell] = kind

    def is_empty(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.cells[cell] is CellKind.EMPTY

    def is_solid(self, cell: Cell) -> bool:
        return not self.in_bounds(cell) or self.cells[cell] is CellKind.SOLID

    def is_box(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.cells[cell] is CellKind.BOX

    def box_count(self) -> int:
        return sum(1 for k in self.cells.values() if k is CellKind.BOX)

    def copy(self) -> "GridMap":
        return GridMap(self.width, self.height, dict(self.cells))

    def render(self) -> str:
        rows = []
        for y in range(self.height):
            rows.append("".join(self.cells[(x, y)].value for x in range(self.width)))
        return "\n".join(rows)


TEAM_ONE_GLYPHS = "1234"
TEAM_TWO_GLYPHS = "abcd"
_SPAWN_GLYPHS = TEAM_ONE_GLYPHS + TEAM_TWO_GLYPHS


def parse_map(text: str) -> tuple[GridMap, dict[str, Cell]]:
    """Parse ASCII map text into a grid plus spawn-glyph positions.

    Glyphs: ``#`` solid, ``+`` box, ``.`` empty, ``1``-``4`` team-one spawns,
    ``a``-``d`` team-two spawns.  Spawn cells are empty cells.  The outer
    border must be solid and all rows must have equal length.
    """
    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise MapParseError("map text is empty")
    width = len(rows[0])
    height = len(rows)
    if width < 3 or height < 3:
        raise MapParseError("map must be at least 3x3")
    cells: dict[Cell, CellKind] = {}
    spawns: dict[str, Cell] = {}
    for y, row in enumerate(rows):
        if len(row) != width:
            raise MapParseError(f"row {y} has length {len(row)}, expected {width}")
        for x, glyph in enumerate(row):
            if glyph == "#":
                cells[(x, y)] = CellKind.SOLID
            elif glyph == "+":
                cells[(x, y)] = CellKind.BOX
            elif glyph == ".":
                cells[(x, y)] = CellKind.EMPTY
            elif glyph in _SPAWN_GLYPHS:
                if glyph in spawns:
                    raise MapParseError(f"duplicate spawn glyph {glyph!r}")
                spawns[glyph] = (x, y)
                cells[(x, y)] = CellKind.EMPTY
            else:
                raise MapParseError(f"unknown glyph {glyph!r} at ({x}, {y})")
    for x in range(width):
        for y in (0, height - 1):
            if cells[(x, y)] is not CellKind.SOLID:
                raise MapParseError(f"border cell ({x}, {y}) must be solid")
    for y in range(height):
        for x in (0, width - 1):
            if cells[(x, y)] is not CellKind.SOLID:
                raise MapParseError(f"border cell ({x}, {y}) must be solid")
    return GridMap(width, height, cells), spawns


@dataclass(frozen=True)
class WorldRules:
    """Static per-match parameters of the environment."""

    fuse_ticks: int = 8
    blast_range: int = 2
    explosion_linger: int = 2
    bombs_capacity: int = 1


@dataclass
class AgentBody:
    agent_id: int
    team: int
    position: Cell
    alive: bool = True
    bombs_available: int = 1
    bombs_capacity: int = 1


@dataclass
class BombState:
    owner: int
    position: Cell
    fuse_remaining: int
    blast_range: int


@dataclass
class ExplosionState:
    cells: frozenset[Cell]
    ticks_remaining: int


@dataclass
class WorldState:
    tick: int
    grid: GridMap
    agents: list[AgentBody]
    bombs: list[BombState]
    explosions: list[ExplosionState]
    rng_seed: int
    rules: WorldRules

    def agent(self, agent_id: int) -> AgentBody:
        for a in self.agents:
            if a.agent_id == agent_id:
                return a
        raise UnknownAgent(agent_id)

    def bomb_at(self, cell: Cell) -> BombState | None:
        for b in self.bombs:
            if b.position == cell:
                return b
        return None

    def clone(self) -> "WorldState":
        return WorldState(
            tick=self.tick,
            grid=self.grid.copy(),
            agents=[replace(a) for a in self.agents],
            bombs=[replace(b) for b in self.bombs],
            explosions=[replace(e) for e in self.explosions],
            rng_seed=self.rng_seed,
            rules=self.rules,
        )


@dataclass(frozen=True)
class WorldEvent:
    kind: str  # bomb_placed | bomb_exploded | box_destroyed | agent_died | match_won
    payload: dict


@dataclass(frozen=True)
class AgentView:
    agent_id: int
    team: int
    position: Cell
    alive: bool


@dataclass(frozen=True)
class Percept:
    """Full-observability snapshot handed to one agent before it decides."""

    tick: int
    grid: GridMap
    bombs: tuple[BombState, ...]
    explosions: tuple[ExplosionState, ...]
    agents: tuple[AgentView, ...]
    rules: WorldRules
    self_id: int
    self_team: int
    position: Cell
    alive: bool
    bombs_available: int

    def agent_view(self, agent_id: int) -> AgentView:
        for v in self.agents:
            if v.agent_id == agent_id:
                return v
        raise UnknownAgent(agent_id)


DRAW = "draw"


def new_world(config) -> WorldState:
    """Build the tick-0 state for a scenario.

    ``config`` is a ScenarioConfig: its map text supplies the grid and spawn
    glyphs, its two team entries bind digit spawns to the first team and
    letter spawns to the second.  Every team needs at least two spawns.
    """
    grid, spawns = parse_map(config.map_text)
    team_glyphs = [TEAM_ONE_GLYPHS, TEAM_TWO_GLYPHS]
    rules = config.rules()
    agents: list[AgentBody] = []
    agent_id = 0
    for team_cfg, glyphs in zip(config.teams, team_glyphs):
        members = [g for g in glyphs if g in spawns]
        if len(members) < 2:
            raise SpawnError(
                f"team {team_cfg.team_id} has {len(members)} spawn(s); at least 2 required"
            )
        for glyph in members:
            cell = spawns[glyph]
            if grid.kind(cell) is not CellKind.EMPTY:
                raise SpawnError(f"spawn {glyph!r} at {cell} is not an empty cell")
            agents.append(
                AgentBody(
                    agent_id=agent_id,
                    team=team_cfg.team_id,
                    position=cell,
                    alive=True,
                    bombs_available=rules.bombs_capacity,
                    bombs_capacity=rules.bombs_capacity,
                )
            )
            agent_id += 1
    return WorldState(
        tick=0,
        grid=grid,
        agents=agents,
        bombs=[],
        explosions=[],
        rng_seed=config.seed,
        rules=rules,
    )


def blast_footprint(state, bomb: BombState) -> set[Cell]:
    """Cells covered when the bomb detonates.

    The footprint is the bomb cell plus four cardinal rays of up to
    ``blast_range`` cells.  A ray stops before a solid cell and stops at
    (including) the first box it meets.  Only ``state.grid`` is consulted, so
    any grid-bearing snapshot works.
    """
    grid = state.grid
    if not grid.in_bounds(bomb.position):
        raise ValueError(f"bomb position {bomb.position} is off the grid")
    cells = {bomb.position}
    for d in DIRECTIONS:
        cur = bomb.position
        for _ in range(bomb.blast_range):
            cur = step_from(cur, d)
            if grid.is_solid(cur):
                break
            cells.add(cur)
            if grid.is_box(cur):
                break
    return cells


def is_terminal(state: WorldState):
    """Winning team id once only one team survives, DRAW if none, else None."""
    alive_teams = {a.team for a in state.agents if a.alive}
    if len(alive_teams) == 1:
        return next(iter(alive_teams))
    if not alive_teams:
        return DRAW
    return None


def percept_for(state: WorldState, agent_id: int) -> Percept:
    body = state.agent(agent_id)
    return Percept(
        tick=state.tick,
        grid=state.grid.copy(),
        bombs=tuple(replace(b) for b in state.bombs),
        explosions=tuple(replace(e) for e in state.explosions),
        agents=tuple(
            AgentView(a.agent_id, a.team, a.position, a.alive) for a in state.agents
        ),
        rules=state.rules,
        self_id=body.agent_id,
        self_team=body.team,
        position=body.position,
        alive=body.alive,
        bombs_available=body.bombs_available,
    )


def _explosion_cells(state: WorldState) -> set[Cell]:
    cells: set[Cell] = set()
    for e in state.explosions:
        cells |= e.cells
    return cells


def apply_actions(
    state: WorldState, intents: dict[int, ActionIntent]
) -> tuple[WorldState, list[WorldEvent]]:
    """Advance the world one tick.

    Phase order: (1) bomb fuses tick down and zero-fuse bombs detonate, with
    same-tick chaining to a fixpoint over footprints computed against the
    tick-start grid; (2) pre-existing explosions age out; (3) bomb placements;
    (4) moves, resolved in ascending agent id so that same-cell conflicts fall
    to the lowest id, with explosion cells killing entrants; (5) tick bump.
    Events come out in that phase order, sorted row-major (then by agent id)
    within each group.
    """
    for a in state.agents:
        if a.alive and a.agent_id not in intents:
            raise MissingIntent(f"no intent for alive agent {a.agent_id}")

    st = state.clone()
    events: list[WorldEvent] = []
    was_terminal = is_terminal(state) is not None
    aged_explosions = list(st.explosions)  # spawned before this tick

    # Phase 1: fuses and detonations.
    for b in st.bombs:
        b.fuse_remaining -= 1
    due = [b for b in st.bombs if b.fuse_remaining <= 0]
    if due:
        exploded: list[BombState] = list(due)
        footprint: set[Cell] = set()
        for b in exploded:
            footprint |= blast_footprint(st, b)
        while True:
            chained = [
                b for b in st.bombs if b not in exploded and b.position in footprint
            ]
            if not chained:
                break
            for b in chained:
                exploded.append(b)
                footprint |= blast_footprint(st, b)
        for b in sorted(exploded, key=lambda b: row_major(b.position)):
            events.append(
                WorldEvent("bomb_exploded", {"owner": b.owner, "cell": list(b.position)})
            )
        boxes = sorted(
            (c for c in footprint if st.grid.is_box(c)), key=row_major
        )
        for c in boxes:
            st.grid.set_kind(c, CellKind.EMPTY)
            events.append(WorldEvent("box_destroyed", {"cell": list(c)}))
        victims = sorted(
            (a for a in st.agents if a.alive and a.position in footprint),
            key=lambda a: (row_major(a.position), a.agent_id),
        )
        for a in victims:
            a.alive = False
            events.append(
                WorldEvent(
                    "agent_died",
                    {"agent": a.agent_id, "team": a.team, "cell": list(a.position)},
                )
            )
        owners = {id(b) for b in exploded}
        for b in exploded:
            st.agent(b.owner).bombs_available += 1
        st.bombs = [b for b in st.bombs if id(b) not in owners]
        st.explosions.append(
            ExplosionState(cells=frozenset(footprint), ticks_remaining=st.rules.explosion_linger)
        )

    # Phase 2: age explosions that existed before this tick.
    for e in aged_explosions:
        e.ticks_remaining -= 1
    st.explosions = [e for e in st.explosions if e.ticks_remaining > 0]

    # Phase 3: bomb placements.
    placements = []
    for a in sorted(st.agents, key=lambda a: a.agent_id):
        if not a.alive:
            continue
        intent = intents.get(a.agent_id, WAIT)
        if intent.kind != "place_bomb":
            continue
        if a.bombs_available <= 0 or st.bomb_at(a.position) is not None:
            continue  # treated as Wait
        a.bombs_available -= 1
        st.bombs.append(
            BombState(
                owner=a.agent_id,
                position=a.position,
                fuse_remaining=st.rules.fuse_ticks,
                blast_range=st.rules.blast_range,
            )
        )
        placements.append(a)
    for a in sorted(placements, key=lambda a: (row_major(a.position), a.agent_id)):
        events.append(
            WorldEvent("bomb_placed", {"agent": a.agent_id, "cell": list(a.position)})
        )

    # Phase 4: moves, then explosion-cell deaths.
    live_cells = _explosion_cells(st)
    occupied = {a.position for a in st.agents if a.alive}
    for a in sorted(st.agents, key=lambda a: a.agent_id):
        if not a.alive:
            continue
        intent = intents.get(a.agent_id, WAIT)
        if intent.kind != "move" or intent.direction is None:
            continue
        dest = step_from(a.position, intent.direction)
        if (
            not st.grid.in_bounds(dest)
            or st.grid.kind(dest) is not CellKind.EMPTY
            or st.bomb_at(dest) is not None
            or dest in occupied
        ):
            continue  # degraded to Wait
        occupied.discard(a.position)
        occupied.add(dest)
        a.position = dest
    victims = sorted(
        (a for a in st.agents if a.alive and a.position in live_cells),
        key=lambda a: (row_major(a.position), a.agent_id),
    )
    for a in victims:
        a.alive = False
        events.append(
            WorldEvent(
                "agent_died",
                {"agent": a.agent_id, "team": a.team, "cell": list(a.position)},
            )
        )

    # Phase 5: advance the clock and report a fresh terminal state once.
    st.tick += 1
    outcome = is_terminal(st)
    if outcome is not None and not was_terminal:
        events.append(
            WorldEvent("match_won", {"team": None if outcome == DRAW else outcome})
        )
    return st, events
