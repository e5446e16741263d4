"""Team strategies: plan libraries plus the per-agent controller.

Both team kinds share the same abilities (pathfinding, bombing, the rescue
protocol); they differ in how goals chain.  An agent-centered (acmas) agent
loops through its goals inside its own plan library, generating follow-up
goal events itself in the same tick.  An organization-centered (ocmas) agent
reports each satisfied goal to its team's organizational kernel and idles
until the kernel notifies it of the next one.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import beliefs as bl
from .beliefs import (
    Action,
    ActionResult,
    BeliefBase,
    Event,
    MoveDecision,
    OrgDirective,
    PlanRule,
    Reasoner,
    Subgoal,
    Trigger,
    Var,
    Atom,
    belief,
    decide_move,
)
from .contract_net import (
    AWARD,
    CFP,
    INFORM_DONE,
    INFORM_FAILURE,
    PROPOSE,
    REFUSE,
    REJECT,
    AWARDED,
    DONE,
    CnpParticipantState,
    compute_bid,
    detect_stuck,
    initiator_step,
    participant_complete,
    participant_fail,
    participant_step,
    region_of,
    start_initiator,
)
from .pathfinder import PunishmentMap, danger_punishments, next_step, is_safe_retreat, plan_path
from .world import (
    WAIT,
    ActionIntent,
    BombState,
    Cell,
    DIRECTIONS,
    Percept,
    blast_footprint,
    direction_between,
    step_from,
)

ROLE_BY_INDEX = ("explorer", "attacker", "defender", "attacker")

SCH = Var("Sch")
_SCHEME_ANNOTATION = (("scheme", SCH),)


def _goal_rule(name: str, body, annotated=False, context=()):
    return PlanRule(
        Trigger(bl.GOAL, belief(name), _SCHEME_ANNOTATION if annotated else ()),
        tuple(context),
        tuple(body),
    )


def _satisfy(goal: str):
    return OrgDirective("set_goal_state", (SCH, Atom(goal)))


def build_library(kind: str, role: str) -> list[PlanRule]:
    if kind == "acmas":
        if role == "explorer":
            return [
                _goal_rule("explore", (
                    Subgoal(belief("findUnexploredArea")),
                    Subgoal(belief("moveToUnexploredArea")),
                    Subgoal(belief("explore")),
                )),
                _goal_rule("findUnexploredArea", (Action("find_area"),)),
                _goal_rule("moveToUnexploredArea", (Action("travel"),)),
            ]
        if role == "attacker":
            return [
                _goal_rule("hunt", (
                    Subgoal(belief("locateEnemy")),
                    Subgoal(belief("eliminateEnemy")),
                    Subgoal(belief("hunt")),
                )),
                _goal_rule("locateEnemy", (Action("pick_enemy"),)),
                _goal_rule("eliminateEnemy", (Action("hunt"),)),
            ]
        return [_goal_rule("guard", (Action("patrol"), Subgoal(belief("guard"))))]
    # ocmas: goal transitions belong to the kernel
    if role == "explorer":
        return [
            _goal_rule("exploreMap", (_satisfy("exploreMap"),), annotated=True),
            _goal_rule("findUnexploredArea",
                       (Action("find_area"), _satisfy("findUnexploredArea")),
                       annotated=True),
            _goal_rule("moveToUnexploredArea", (Action("travel"),), annotated=True),
            PlanRule(
                Trigger(bl.BELIEF, belief("near", "_", "_")),
                (belief("scheme", "exploration", "Sch"),),
                (_satisfy("moveToUnexploredArea"),),
            ),
        ]
    if role == "attacker":
        return [
            _goal_rule("attackEnemies", (_satisfy("attackEnemies"),), annotated=True),
            _goal_rule("locateEnemy",
                       (Action("pick_enemy"), _satisfy("locateEnemy")),
                       annotated=True),
            _goal_rule("eliminateEnemy",
                       (Action("hunt"), _satisfy("eliminateEnemy")),
                       annotated=True),
        ]
    return [_goal_rule("guard", (Action("patrol"), Subgoal(belief("guard"))))]


ROOT_GOALS = {"explorer": "explore", "attacker": "hunt", "defender": "guard"}


def _manhattan(a: Cell, b: Cell) -> int:
    return abs(a[0] - b[0]) + abs(a[1] - b[1])


class AgentController:
    """One agent's decision pipeline for one match.

    Tick order: sync beliefs, absorb mail, answer rescue calls, then pick an
    intent by priority: flee a blast zone, execute an awarded rescue, sit
    tight while stuck (the call for help is already out), else run the plan
    reasoner.
    """

    def __init__(self, agent_id: int, team_id: int, role: str, kind: str,
                 config, team_agents, kernel=None, send=None, log=None, rng=None):
        self.agent_id = agent_id
        self.team_id = team_id
        self.role = role
        self.kind = kind
        self.config = config
        self.team_agents = sorted(team_agents)
        self.kernel = kernel
        self.send = send or (lambda msg, now: None)
        self.log = log or (lambda record: None)
        self.rng = rng or random.Random(0)

        self.base = BeliefBase()
        self.reasoner = Reasoner(build_library(kind, role), self.base)
        self.participant = CnpParticipantState(agent_id)
        self.initiator = None
        self._cnp_seq = 0
        self.visited: set[Cell] = set()
        self.spawn: Cell | None = None
        self.patrol_target: Cell | None = None
        self.hunt_target: int | None = None
        self._post_near = kind == "ocmas" and role == "explorer"

        # ocmas bootstrap bookkeeping
        self._group_id: int | None = None
        self._group_requested = False
        self._adopt_requested = False
        self._adopted_agents: set[int] = set()
        self._adopted_roles: set[str] = set()
        self._schemes_created = False
        self._committed_schemes: set[int] = set()

        self._percept: Percept | None = None
        self._outbox = []

    # -- per-tick entry point -------------------------------------------------

    def decide(self, percept: Percept, inbox) -> ActionIntent:
        self._percept = percept
        self._outbox = []
        now = percept.tick
        if self.spawn is None:
            self.spawn = percept.position
        self._sync_beliefs(percept)

        org_events = [item for src, item in inbox if src == "org"]
        cnp_msgs = [item for src, item in inbox if src == "cnp"]
        if self.kernel is not None:
            self._bootstrap_org(now)
            self._handle_org_events(org_events)

        part_in = [m for m in cnp_msgs if m.kind in (CFP, AWARD, REJECT)]
        init_in = [m for m in cnp_msgs if m.kind in (PROPOSE, REFUSE, INFORM_DONE, INFORM_FAILURE)]
        replies, _ = participant_step(self.participant, part_in, percept, bid_fn=self._bid_fn)
        self._outbox += replies

        stuck = detect_stuck(percept)
        if self.initiator is not None:
            self.initiator.teammates = self._alive_teammates(percept)
            self._outbox += initiator_step(self.initiator, init_in, now)
            self._cnp_seq = self.initiator.seq
            if self.initiator.phase == DONE or (stuck is None and self.initiator.phase != AWARDED):
                self.initiator = None
        if stuck is not None and self.initiator is None and not self._transient_blockage(percept):
            self.initiator, cfps = start_initiator(
                self.agent_id, stuck, now, self._alive_teammates(percept),
                bid_window=self.config.bid_window, backoff=self.config.backoff,
                seq_start=self._cnp_seq,
            )
            self._cnp_seq = self.initiator.seq
            self._outbox += cfps

        intent = None
        danger = self._danger_cells(percept)
        if percept.position in danger:
            intent = self._flee_intent(percept, danger)
        if intent is None and self.participant.active is not None:
            intent = self._rescue_intent(percept)
        if intent is None and stuck is not None:
            intent = WAIT  # help is requested; moving is pointless in a pocket
        if intent is None:
            self._ensure_root_goal()
            intent = self._run_reasoner()

        for msg in self._outbox:
            self.send(msg, now)
        self._outbox = []
        return intent or WAIT

    # -- belief upkeep ---------------------------------------------------------

    def _sync_beliefs(self, percept: Percept) -> None:
        self.base.add(belief("pos", *percept.position))
        self.base.add(belief("bombs", percept.bombs_available))
        self.visited.add(percept.position)

    def _alive_teammates(self, percept: Percept):
        return tuple(
            a.agent_id
            for a in percept.agents
            if a.team == self.team_id and a.agent_id != self.agent_id and a.alive
        )

    def _bid_fn(self, percept, task):
        return compute_bid(
            percept, task,
            box_punishment=self.config.box_punishment,
            danger_weight=self.config.danger_weight,
            explosion_punishment=self.config.explosion_punishment,
        )

    def _punishments(self, percept: Percept) -> PunishmentMap:
        return danger_punishments(
            percept,
            PunishmentMap.for_boxes(percept.grid, self.config.box_punishment),
            danger_weight=self.config.danger_weight,
            explosion_punishment=self.config.explosion_punishment,
        )

    # -- organizational bootstrap (ocmas only) ----------------------------------

    def _leader(self) -> bool:
        return self.agent_id == min(self.team_agents)

    def _group_spec_name(self) -> str:
        return sorted(self.kernel.spec.structural.groups)[0]

    def _bootstrap_org(self, now: int) -> None:
        if self._leader() and not self._group_requested:
            self._group_requested = True
            self.kernel.create_group(self.agent_id, self._group_spec_name())

    def _handle_org_events(self, events) -> None:
        for ev in events:
            if ev.kind == "group_created":
                self._group_id = ev.payload["group"]
                if not self._adopt_requested:
                    self._adopt_requested = True
                    self.kernel.adopt_role(self.agent_id, self.role, self._group_id)
            elif ev.kind == "role_adopted":
                self._adopted_agents.add(ev.payload["agent"])
                self._adopted_roles.add(ev.payload["role"])
                if (
                    self._leader()
                    and not self._schemes_created
                    and self._adopted_agents >= set(self.team_agents)
                ):
                    self._schemes_created = True
                    for name in self._needed_schemes():
                        self.kernel.create_scheme(self.agent_id, name, self._group_id)
            elif ev.kind == "scheme_created":
                sid = ev.payload["scheme"]
                spec_name = ev.payload["spec"]
                self.base.remove_matching(belief("scheme", spec_name, "_"))
                self.base.add(belief("scheme", spec_name, sid))
                for ob in self.kernel.obligations_for(self.agent_id):
                    if ob.scheme_id == sid:
                        self.kernel.commit_mission(self.agent_id, ob.mission, sid)
                        self._committed_schemes.add(sid)
            elif ev.kind == "goal_event":
                self.reasoner.post(
                    Event(bl.GOAL, belief(ev.payload["goal"]), dict(ev.annotations))
                )
            elif ev.kind == "scheme_finished":
                committed = ev.payload.get("committed", [])
                if committed and self.agent_id == min(committed) and self.agent_id in committed:
                    self.kernel.create_scheme(
                        self.agent_id, ev.payload["spec"], ev.payload["group"]
                    )
            # org_error is deliberately opaque; nothing to react to

    def _needed_schemes(self):
        spec = self.kernel.spec
        needed = set()
        for d in spec.deontics:
            if d.modality.value != "obligation" or d.role not in self._adopted_roles:
                continue
            name = spec.scheme_of_mission(d.mission)
            if name is not None:
                needed.add(name)
        return sorted(needed)

    # -- danger handling ---------------------------------------------------------

    def _danger_cells(self, percept: Percept) -> set[Cell]:
        cells: set[Cell] = set()
        for b in percept.bombs:
            cells |= blast_footprint(percept, b)
        for e in percept.explosions:
            cells |= e.cells
        return cells

    def _transient_blockage(self, percept: Percept) -> bool:
        """A bomb or explosion touching the pocket will clear on its own;
        asking for help then would be premature."""
        danger = self._danger_cells(percept)
        if not danger:
            return False
        region = region_of(percept, percept.position)
        reach = region | {
            step_from(c, d) for c in region for d in DIRECTIONS
        }
        return bool(danger & reach)

    def _flee_intent(self, percept: Percept, danger: set[Cell]) -> ActionIntent:
        blocked = {b.position for b in percept.bombs}
        for e in percept.explosions:
            blocked |= e.cells
        start = percept.position
        queue = [(start, (start,))]
        seen = {start}
        while queue:
            cell, path = queue.pop(0)
            if cell not in danger:
                if len(path) > 1:
                    return ActionIntent.move(direction_between(path[0], path[1]))
                return WAIT
            for d in DIRECTIONS:
                nxt = step_from(cell, d)
                if nxt in seen or nxt in blocked or not percept.grid.is_empty(nxt):
                    continue
                seen.add(nxt)
                queue.append((nxt, path + (nxt,)))
        return WAIT

    def _retreat_exists(self, percept: Percept, cell: Cell) -> bool:
        bomb = BombState(
            owner=self.agent_id,
            position=cell,
            fuse_remaining=percept.rules.fuse_ticks,
            blast_range=percept.rules.blast_range,
        )
        return is_safe_retreat(percept, cell, bomb) is not None

    def _threatens_ally(self, percept: Percept, cell: Cell) -> bool:
        bomb = BombState(
            owner=self.agent_id,
            position=cell,
            fuse_remaining=percept.rules.fuse_ticks,
            blast_range=percept.rules.blast_range,
        )
        footprint = blast_footprint(percept, bomb)
        return any(
            a.alive and a.team == self.team_id and a.agent_id != self.agent_id
            and a.position in footprint
            for a in percept.agents
        )

    # -- rescue execution ----------------------------------------------------------

    def _rescue_intent(self, percept: Percept) -> ActionIntent | None:
        award = self.participant.active
        box = award.task.box_cell
        if not percept.grid.is_box(box):
            self._outbox.append(participant_complete(self.participant))
            return None
        plan = plan_path(percept.grid, percept.position, box, self._punishments(percept))
        if plan is None or plan.intermediate is None:
            self._outbox.append(participant_fail(self.participant, "no_path"))
            return None
        bomb_cell = plan.intermediate.bomb_cell
        if any(b.position == bomb_cell for b in percept.bombs):
            return WAIT  # a bomb is already working on this passage
        if percept.position == bomb_cell:
            if (
                percept.bombs_available > 0
                and self._retreat_exists(percept, percept.position)
                and not self._threatens_ally(percept, percept.position)
            ):
                return ActionIntent.place_bomb()
            return WAIT
        return next_step(plan, percept.position, percept.grid)

    # -- reasoner glue ------------------------------------------------------------

    def _ensure_root_goal(self) -> None:
        internal_loop = self.kind == "acmas" or self.role == "defender"
        if internal_loop and self.reasoner.idle():
            self.reasoner.post(Event(bl.GOAL, belief(ROOT_GOALS[self.role])))

    def _run_reasoner(self) -> ActionIntent | None:
        effects = self.reasoner.run_intention(self._perform)
        intent = None
        acmas_logs = self.kind == "acmas"
        for eff in effects:
            if isinstance(eff, bl.WorldAction):
                intent = eff.intent
            elif isinstance(eff, bl.SendMessage):
                self._outbox.append(eff.message)
            elif isinstance(eff, bl.OrgRequest):
                self._org_request(eff.name, eff.args)
            elif isinstance(eff, bl.GoalPosted) and acmas_logs:
                self._log_agent("goal_event", {"to": self.agent_id, "goal": eff.atom.predicate,
                                               "scheme": f"loop:{self.agent_id}"})
            elif isinstance(eff, bl.GoalDone) and acmas_logs:
                self._log_agent("goal_completed", {"agent": self.agent_id, "goal": eff.atom.predicate,
                                                   "scheme": f"loop:{self.agent_id}"})
            elif isinstance(eff, bl.GoalFailed):
                self._log_agent("goal_failed", {"agent": self.agent_id, "goal": eff.atom.predicate})
            elif isinstance(eff, bl.EventFailed):
                self._log_agent("event_failed", {"agent": self.agent_id,
                                                 "goal": eff.event.atom.predicate})
        return intent

    def _log_agent(self, kind: str, payload: dict) -> None:
        record = {"tick": self._percept.tick, "source": "agent", "kind": kind,
                  "payload": dict(payload, team=self.team_id)}
        self.log(record)

    def _org_request(self, name: str, args) -> None:
        if self.kernel is None:
            return
        if name == "set_goal_state":
            scheme_id = args[0].value
            goal = args[1].name
            self.kernel.set_goal_state(scheme_id, goal, self.agent_id)
        elif name == "commit_mission":
            self.kernel.commit_mission(self.agent_id, args[0].name, args[1].value)
        elif name == "create_scheme":
            self.kernel.create_scheme(self.agent_id, args[0].name, args[1].value)

    # -- action handlers -------------------------------------------------------------

    def _perform(self, name: str, args) -> ActionResult:
        handler = getattr(self, f"_act_{name}", None)
        if handler is None:
            return ActionResult(failed=True)
        return handler()

    def _reachable_component(self, percept: Percept) -> set[Cell]:
        # connected through empty and box cells: boxes can be bombed open
        start = percept.position
        seen = {start}
        queue = [start]
        while queue:
            cell = queue.pop(0)
            for d in DIRECTIONS:
                nxt = step_from(cell, d)
                if nxt in seen or percept.grid.is_solid(nxt):
                    continue
                seen.add(nxt)
                queue.append(nxt)
        return seen

    def _act_find_area(self) -> ActionResult:
        percept = self._percept
        component = self._reachable_component(percept)
        empties = sorted(
            (
                c
                for c in component
                if percept.grid.is_empty(c) and _manhattan(c, percept.position) > 1
            ),
            key=lambda c: (c[1], c[0]),
        )
        fresh = [c for c in empties if c not in self.visited]
        candidates = fresh or empties
        if not candidates:
            # nowhere new to go; hold position for a tick so the loop is paced
            self.base.add(belief("target", *percept.position))
            return ActionResult(intent=WAIT, done=True)
        target = self.rng.choice(candidates)
        self.base.add(belief("target", *target))
        return ActionResult(intent=None, done=True)

    def _act_travel(self) -> ActionResult:
        percept = self._percept
        target = self.base.values("target", 2)
        if target is None:
            return ActionResult(failed=True)
        if _manhattan(percept.position, target) <= 1:
            if self._post_near:
                self.reasoner.post(Event(bl.BELIEF, belief("near", *percept.position)))
            return ActionResult(intent=None, done=True)
        intent = self._movement_intent(percept, target)
        if intent is None:
            return ActionResult(failed=True)
        return ActionResult(intent=intent, done=False)

    def _act_pick_enemy(self) -> ActionResult:
        percept = self._percept
        enemies = sorted(
            (a for a in percept.agents if a.team != self.team_id and a.alive),
            key=lambda a: (_manhattan(percept.position, a.position), a.agent_id),
        )
        if not enemies:
            self.hunt_target = None
            return ActionResult(intent=WAIT, done=True)
        self.hunt_target = enemies[0].agent_id
        return ActionResult(intent=None, done=True)

    def _act_hunt(self) -> ActionResult:
        percept = self._percept
        if self.hunt_target is None:
            return ActionResult(intent=None, done=True)
        try:
            view = percept.agent_view(self.hunt_target)
        except KeyError:
            view = None
        if view is None or not view.alive:
            self.hunt_target = None
            return ActionResult(intent=None, done=True)
        self.base.add(belief("target", *view.position))
        if self._bomb_shot(percept, view.position):
            return ActionResult(intent=ActionIntent.place_bomb(), done=False)
        intent = self._movement_intent(percept, view.position)
        if intent is None:
            return ActionResult(intent=WAIT, done=False)  # sealed off; keep watch
        return ActionResult(intent=intent, done=False)

    def _act_patrol(self) -> ActionResult:
        percept = self._percept
        if self.patrol_target is None:
            area = sorted(
                (
                    c
                    for c in self._reachable_component(percept)
                    if percept.grid.is_empty(c)
                    and _manhattan(c, self.spawn) <= 2
                    and c != percept.position
                ),
                key=lambda c: (c[1], c[0]),
            )
            if not area:
                return ActionResult(intent=WAIT, done=True)
            self.patrol_target = self.rng.choice(area)
        if percept.position == self.patrol_target:
            self.patrol_target = None
            return ActionResult(intent=None, done=True)
        intent = self._movement_intent(percept, self.patrol_target)
        if intent is None:
            self.patrol_target = None
            return ActionResult(intent=WAIT, done=True)
        return ActionResult(intent=intent, done=False)

    def _bomb_shot(self, percept: Percept, enemy_cell: Cell) -> bool:
        if percept.bombs_available <= 0:
            return False
        pos = percept.position
        if pos[0] != enemy_cell[0] and pos[1] != enemy_cell[1]:
            return False
        if _manhattan(pos, enemy_cell) > percept.rules.blast_range:
            return False
        bomb = BombState(
            owner=self.agent_id,
            position=pos,
            fuse_remaining=percept.rules.fuse_ticks,
            blast_range=percept.rules.blast_range,
        )
        footprint = blast_footprint(percept, bomb)
        if enemy_cell not in footprint:
            return False
        return self._retreat_exists(percept, pos) and not self._threatens_ally(percept, pos)

    def _movement_intent(self, percept: Percept, target: Cell) -> ActionIntent | None:
        """One tick of target-directed movement, bombing through boxes as needed."""
        pos = percept.position
        plan = plan_path(percept.grid, pos, target, self._punishments(percept))
        if plan is None:
            return None
        if plan.intermediate is not None:
            inter = plan.intermediate
            self.base.add(belief("intermediate", *inter.bomb_cell))
            if percept.grid.is_box(inter.box_cell):
                self.base.remove_matching(belief("clear", "_", "_"))
            else:
                self.base.add(belief("clear", *inter.bomb_cell))
        else:
            self.base.remove_matching(belief("intermediate", "_", "_"))
            self.base.remove_matching(belief("clear", "_", "_"))
        decision = decide_move(self.base)
        if decision is MoveDecision.DONE:
            return WAIT
        if decision is MoveDecision.WAIT_FOR_BOMB:
            return WAIT
        if decision is MoveDecision.PLACE_BOMB_AND_RETREAT:
            if (
                not any(b.position == pos for b in percept.bombs)
                and self._retreat_exists(percept, pos)
                and not self._threatens_ally(percept, pos)
            ):
                return ActionIntent.place_bomb()
            return WAIT
        if plan.intermediate is not None and any(
            b.position == plan.intermediate.bomb_cell for b in percept.bombs
        ):
            return WAIT  # passage already being opened; keep clear
        return next_step(plan, pos, percept.grid)
