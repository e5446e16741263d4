"""Organizational kernel: structural/functional/deontic specs and runtime.

Specs declare roles, role links, groups with per-role cardinalities, goal
decomposition schemes (sequence / choice / parallel operators over leaf
goals, grouped into missions) and deontic relations binding roles to
missions.  At runtime the kernel instantiates groups and schemes, tracks
goal states, and notifies committed agents through a mediator: every
notification is delivered ``mediation_delay`` ticks after the request that
caused it.

Agent-facing failures (bad role adoption, forbidden commitment, premature
goal satisfaction) never raise; they come back as error events carrying one
opaque reason code.  The true cause goes only to the debug side of the event,
for logs and tests.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path


class SpecError(ValueError):
    def __init__(self, faults: list[str]):
        super().__init__("; ".join(faults))
        self.faults = list(faults)


class UnknownSpec(KeyError):
    pass


class UnknownGroup(KeyError):
    pass


OPAQUE_ERROR_CODE = "denied"

LINK_KINDS = ("acquaintance", "communication", "authority")


class Operator(enum.Enum):
    SEQUENCE = "seq"
    CHOICE = "choice"
    PARALLEL = "par"
    LEAF = "leaf"


class Modality(enum.Enum):
    OBLIGATION = "obligation"
    PERMISSION = "permission"


class GoalState(enum.Enum):
    WAITING = "waiting"
    ENABLED = "enabled"
    SATISFIED = "satisfied"
    IMPOSSIBLE = "impossible"


@dataclass(frozen=True)
class TimeConstraint:
    kind: str = "anytime"  # anytime | before | during
    start: int | None = None
    end: int | None = None

    def expired(self, now: int) -> bool:
        if self.kind == "before":
            return now > self.end
        if self.kind == "during":
            return now > self.end
        return False

    def describe(self) -> str:
        if self.kind == "before":
            return f"before({self.end})"
        if self.kind == "during":
            return f"during({self.start},{self.end})"
        return "anytime"


@dataclass(frozen=True)
class GoalNode:
    id: str
    operator: Operator
    children: tuple["GoalNode", ...] = ()
    cardinality: int = 1


@dataclass(frozen=True)
class Scheme:
    name: str
    root: GoalNode
    missions: dict[str, frozenset[str]]

    def nodes(self) -> dict[str, GoalNode]:
        out: dict[str, GoalNode] = {}

        def walk(node: GoalNode):
            out[node.id] = node
            for c in node.children:
                walk(c)

        walk(self.root)
        return out

    def parents(self) -> dict[str, str | None]:
        out: dict[str, str | None] = {self.root.id: None}

        def walk(node: GoalNode):
            for c in node.children:
                out[c.id] = node.id
                walk(c)

        walk(self.root)
        return out


@dataclass(frozen=True)
class GroupSpec:
    name: str
    role_cardinalities: dict[str, tuple[int, int]]


@dataclass(frozen=True)
class StructuralSpec:
    roles: frozenset[str]
    links: tuple[tuple[str, str, str], ...]
    groups: dict[str, GroupSpec]


@dataclass(frozen=True)
class DeonticRelation:
    modality: Modality
    role: str
    mission: str
    time_constraint: TimeConstraint


@dataclass(frozen=True)
class OrgSpec:
    structural: StructuralSpec
    schemes: dict[str, Scheme]
    deontics: tuple[DeonticRelation, ...]

    def scheme_of_mission(self, mission: str) -> str | None:
        for name, scheme in self.schemes.items():
            if mission in scheme.missions:
                return name
        return None


# ---------------------------------------------------------------------------
# Spec loading / validation
# ---------------------------------------------------------------------------

def _parse_tc(raw, faults: list[str], where: str) -> TimeConstraint:
    if raw in (None, "anytime"):
        return TimeConstraint()
    if isinstance(raw, dict):
        if "before" in raw and isinstance(raw["before"], int):
            return TimeConstraint("before", None, raw["before"])
        if "during" in raw and isinstance(raw["during"], list) and len(raw["during"]) == 2:
            a, b = raw["during"]
            if isinstance(a, int) and isinstance(b, int) and a <= b:
                return TimeConstraint("during", a, b)
    faults.append(f"{where}: bad time constraint {raw!r}")
    return TimeConstraint()


def _parse_node(raw, faults: list[str], seen_ids: set[str], where: str) -> GoalNode | None:
    if not isinstance(raw, dict) or "id" not in raw or "op" not in raw:
        faults.append(f"{where}: goal node needs id and op")
        return None
    gid = str(raw["id"])
    if gid in seen_ids:
        faults.append(f"{where}: duplicate goal id {gid!r} makes the tree cyclic")
        return None
    seen_ids.add(gid)
    try:
        op = Operator(raw["op"])
    except ValueError:
        faults.append(f"{where}: unknown operator {raw['op']!r}")
        return None
    card = raw.get("card", 1)
    if not isinstance(card, int) or card < 1:
        faults.append(f"{where}: goal {gid!r} cardinality must be a positive integer")
        card = 1
    children_raw = raw.get("children", [])
    if op is Operator.LEAF:
        if children_raw:
            faults.append(f"{where}: leaf goal {gid!r} must not have children")
        return GoalNode(gid, op, (), card)
    if card != 1:
        faults.append(f"{where}: cardinality is only meaningful on leaf goals ({gid!r})")
    if not children_raw:
        faults.append(f"{where}: {op.value} goal {gid!r} needs children")
        return GoalNode(gid, op, (), 1)
    children = []
    for c in children_raw:
        node = _parse_node(c, faults, seen_ids, where)
        if node is not None:
            children.append(node)
    return GoalNode(gid, op, tuple(children), 1)


def load_org_spec(document: dict) -> OrgSpec:
    """Validate a spec document; raises SpecError listing every fault found."""
    faults: list[str] = []
    if not isinstance(document, dict):
        raise SpecError(["spec document must be a JSON object"])

    roles_raw = document.get("roles", [])
    roles = frozenset(str(r) for r in roles_raw)
    if len(roles) != len(roles_raw):
        faults.append("duplicate role names")

    links = []
    for raw in document.get("links", []):
        src, dst, kind = raw.get("from"), raw.get("to"), raw.get("kind")
        if src not in roles:
            faults.append(f"link source {src!r} is not a declared role")
        if dst not in roles:
            faults.append(f"link target {dst!r} is not a declared role")
        if kind not in LINK_KINDS:
            faults.append(f"link kind {kind!r} unknown")
        links.append((str(src), str(dst), str(kind)))

    groups: dict[str, GroupSpec] = {}
    for raw in document.get("groups", []):
        name = str(raw.get("name", ""))
        if not name:
            faults.append("group without a name")
            continue
        cards: dict[str, tuple[int, int]] = {}
        for role, bounds in raw.get("roles", {}).items():
            if role not in roles:
                faults.append(f"group {name!r} uses undeclared role {role!r}")
            if (
                not isinstance(bounds, list)
                or len(bounds) != 2
                or not all(isinstance(b, int) for b in bounds)
                or bounds[0] < 0
                or bounds[0] > bounds[1]
            ):
                faults.append(f"group {name!r} role {role!r} needs bounds [min, max] with min <= max")
                continue
            cards[str(role)] = (bounds[0], bounds[1])
        groups[name] = GroupSpec(name, cards)

    schemes: dict[str, Scheme] = {}
    for raw in document.get("schemes", []):
        name = str(raw.get("name", ""))
        if not name:
            faults.append("scheme without a name")
            continue
        seen_ids: set[str] = set()
        root = _parse_node(raw.get("root"), faults, seen_ids, f"scheme {name!r}")
        if root is None:
            continue
        missions: dict[str, frozenset[str]] = {}
        for mname, goal_ids in raw.get("missions", {}).items():
            for gid in goal_ids:
                if gid not in seen_ids:
                    faults.append(f"scheme {name!r} mission {mname!r} names unknown goal {gid!r}")
            missions[str(mname)] = frozenset(str(g) for g in goal_ids)
        schemes[name] = Scheme(name, root, missions)

    deontics = []
    all_missions = {m for s in schemes.values() for m in s.missions}
    for raw in document.get("deontics", []):
        try:
            modality = Modality(raw.get("modality"))
        except ValueError:
            faults.append(f"unknown deontic modality {raw.get('modality')!r}")
            continue
        role = str(raw.get("role"))
        mission = str(raw.get("mission"))
        if role not in roles:
            faults.append(f"deontic names unknown role {role!r}")
        if mission not in all_missions:
            faults.append(f"deontic names unknown mission {mission!r}")
        tc = _parse_tc(raw.get("tc"), faults, f"deontic {role}/{mission}")
        deontics.append(DeonticRelation(modality, role, mission, tc))

    if faults:
        raise SpecError(faults)
    return OrgSpec(
        structural=StructuralSpec(roles=roles, links=tuple(links), groups=groups),
        schemes=schemes,
        deontics=tuple(deontics),
    )


def load_org_spec_file(path: str | Path) -> OrgSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise SpecError([f"org spec file not found: {path}"])
    except json.JSONDecodeError as exc:
        raise SpecError([f"org spec is not valid JSON: {exc}"])
    return load_org_spec(doc)


# ---------------------------------------------------------------------------
# Runtime instances
# ---------------------------------------------------------------------------

@dataclass
class GroupInstance:
    group_id: int
    spec_name: str
    creator: int
    role_assignments: dict[int, set[str]] = field(default_factory=dict)

    def role_count(self, role: str) -> int:
        return sum(1 for roles in self.role_assignments.values() if role in roles)

    def roles_of(self, agent: int) -> set[str]:
        return self.role_assignments.get(agent, set())


@dataclass
class SchemeInstance:
    scheme_id: int
    spec_name: str
    group_id: int
    creator: int
    goal_states: dict[str, GoalState]
    satisfiers: dict[str, set[int]]
    commitments: dict[int, set[str]] = field(default_factory=dict)
    finished: bool = False

    def committed_agents(self) -> list[int]:
        return sorted(self.commitments)


@dataclass(frozen=True)
class OrgEvent:
    kind: str  # group_created | role_adopted | scheme_created | goal_event |
    #            scheme_finished | org_error
    recipient: int
    payload: dict
    annotations: dict
    deliver_at: int
    seq: int
    debug_cause: str | None = None


@dataclass(frozen=True)
class ObligationView:
    mission: str
    scheme_id: int
    time_constraint: TimeConstraint
    expired: bool


class OrgKernel:
    """Single-owner organizational state machine for one team.

    Requests mutate state synchronously; the notification events they produce
    are scheduled ``mediation_delay`` ticks ahead and fetched by the match
    loop via :meth:`pop_due`.  ``now`` is advanced by the owner of the match
    clock.
    """

    def __init__(self, spec: OrgSpec, team_agents, *, mediation_delay: int = 1,
                 team_id: int | None = None, log=None):
        self.spec = spec
        self.team_agents = sorted(team_agents)
        self.delay = mediation_delay
        self.team_id = team_id
        self.log = log
        self.now = 0
        self.groups: dict[int, GroupInstance] = {}
        self.schemes: dict[int, SchemeInstance] = {}
        self._pending: list[OrgEvent] = []
        self._seq = 0
        self._next_group = 1
        self._next_scheme = 1
        # (scheme_id, goal, agent) triples already notified, so a goal event
        # reaches each committed agent at most once.
        self._emitted: set[tuple[int, str, int]] = set()

    # -- plumbing ----------------------------------------------------------

    def _schedule(self, kind: str, recipients, payload: dict, annotations: dict,
                  debug_cause: str | None = None) -> list[OrgEvent]:
        events = []
        for r in recipients:
            self._seq += 1
            events.append(
                OrgEvent(
                    kind=kind,
                    recipient=r,
                    payload=dict(payload),
                    annotations=dict(annotations),
                    deliver_at=self.now + self.delay,
                    seq=self._seq,
                    debug_cause=debug_cause,
                )
            )
        self._pending.extend(events)
        return events

    def _error(self, agent: int, debug_cause: str) -> list[OrgEvent]:
        return self._schedule(
            "org_error",
            [agent],
            {"code": OPAQUE_ERROR_CODE},
            {},
            debug_cause=debug_cause,
        )

    def _log(self, kind: str, payload: dict) -> None:
        if self.log is not None:
            self.log({"tick": self.now, "source": "org", "kind": kind,
                      "payload": dict(payload, team=self.team_id)})

    def pop_due(self, tick: int) -> list[OrgEvent]:
        due = sorted(
            (e for e in self._pending if e.deliver_at <= tick),
            key=lambda e: (e.deliver_at, e.seq),
        )
        keep = [e for e in self._pending if e.deliver_at > tick]
        self._pending = keep
        return due

    # -- structural runtime -------------------------------------------------

    def create_group(self, requester: int, spec_name: str) -> tuple[int, list[OrgEvent]]:
        if spec_name not in self.spec.structural.groups:
            raise UnknownSpec(spec_name)
        gid = self._next_group
        self._next_group += 1
        self.groups[gid] = GroupInstance(gid, spec_name, requester)
        events = self._schedule(
            "group_created",
            self.team_agents,
            {"group": gid, "spec": spec_name, "creator": requester},
            {"creator": requester},
        )
        return gid, events

    def adopt_role(self, agent: int, role: str, group_id: int) -> list[OrgEvent]:
        if group_id not in self.groups:
            raise UnknownGroup(group_id)
        group = self.groups[group_id]
        spec = self.spec.structural.groups[group.spec_name]
        if role not in spec.role_cardinalities:
            return self._error(agent, f"role {role!r} not declared in group {group.spec_name!r}")
        _, max_card = spec.role_cardinalities[role]
        if group.role_count(role) >= max_card:
            return self._error(agent, f"role {role!r} already at max cardinality {max_card}")
        group.role_assignments.setdefault(agent, set()).add(role)
        return self._schedule(
            "role_adopted",
            self.team_agents,
            {"agent": agent, "role": role, "group": group_id},
            {"creator": group.creator},
        )

    # -- functional runtime ---------------------------------------------------

    def create_scheme(self, requester: int, scheme_name: str, group_id: int) -> tuple[int, list[OrgEvent]]:
        if scheme_name not in self.spec.schemes:
            raise UnknownSpec(scheme_name)
        if group_id not in self.groups:
            raise UnknownGroup(group_id)
        scheme = self.spec.schemes[scheme_name]
        sid = self._next_scheme
        self._next_scheme += 1
        states = {gid: GoalState.WAITING for gid in scheme.nodes()}
        states[scheme.root.id] = GoalState.ENABLED
        inst = SchemeInstance(
            scheme_id=sid,
            spec_name=scheme_name,
            group_id=group_id,
            creator=requester,
            goal_states=states,
            satisfiers={gid: set() for gid in scheme.nodes()},
        )
        self.schemes[sid] = inst
        self._sweep(inst)
        events = self._schedule(
            "scheme_created",
            self.team_agents,
            {"scheme": sid, "spec": scheme_name, "group": group_id, "creator": requester},
            {"creator": requester, "scheme": sid},
        )
        return sid, events

    def _scheme_spec(self, inst: SchemeInstance) -> Scheme:
        return self.spec.schemes[inst.spec_name]

    def _sweep(self, inst: SchemeInstance) -> None:
        """Propagate enablement / impossibility to a fixpoint.

        Sequence children enable in order as their predecessors satisfy;
        choice and parallel children enable with their parent; once any choice
        child satisfies, its unsatisfied siblings (and their subtrees) become
        impossible.
        """
        scheme = self._scheme_spec(inst)
        states = inst.goal_states

        def mark_impossible(node: GoalNode):
            if states[node.id] is not GoalState.SATISFIED:
                states[node.id] = GoalState.IMPOSSIBLE
            for c in node.children:
                mark_impossible(c)

        changed = True
        while changed:
            changed = False
            for node in scheme.nodes().values():
                if node.operator is Operator.LEAF:
                    continue
                state = states[node.id]
                if state in (GoalState.WAITING, GoalState.IMPOSSIBLE):
                    continue
                if node.operator is Operator.CHOICE:
                    if any(states[c.id] is GoalState.SATISFIED for c in node.children):
                        for c in node.children:
                            if states[c.id] not in (GoalState.SATISFIED, GoalState.IMPOSSIBLE):
                                mark_impossible(c)
                                changed = True
                        continue
                for i, child in enumerate(node.children):
                    if states[child.id] is not GoalState.WAITING:
                        continue
                    if node.operator is Operator.SEQUENCE:
                        ready = all(
                            states[p.id] is GoalState.SATISFIED
                            for p in node.children[:i]
                        )
                    else:
                        ready = True
                    if ready:
                        states[child.id] = GoalState.ENABLED
                        changed = True

    def _achievable(self, inst: SchemeInstance, node: GoalNode) -> bool:
        """Whether an enabled goal may be explicitly satisfied right now."""
        states = inst.goal_states
        if states[node.id] is not GoalState.ENABLED:
            return False
        if node.operator is Operator.LEAF:
            return True
        child_states = [states[c.id] for c in node.children]
        if node.operator is Operator.CHOICE:
            return any(s is GoalState.SATISFIED for s in child_states)
        return all(s is GoalState.SATISFIED for s in child_states)

    def _goal_events(self, inst: SchemeInstance, only_agent: int | None = None) -> list[OrgEvent]:
        """Notify committed agents of goals that are now open for them."""
        scheme = self._scheme_spec(inst)
        events: list[OrgEvent] = []
        for agent in inst.committed_agents():
            if only_agent is not None and agent != only_agent:
                continue
            goals: set[str] = set()
            for mission in sorted(inst.commitments[agent]):
                goals |= scheme.missions.get(mission, frozenset())
            for node in scheme.nodes().values():
                if node.id not in goals:
                    continue
                if not self._achievable(inst, node):
                    continue
                key = (inst.scheme_id, node.id, agent)
                if key in self._emitted:
                    continue
                self._emitted.add(key)
                events += self._schedule(
                    "goal_event",
                    [agent],
                    {"scheme": inst.scheme_id, "spec": inst.spec_name, "goal": node.id},
                    {"scheme": inst.scheme_id, "creator": inst.creator},
                )
        return events

    def _deontic_ok(self, agent: int, mission: str, group: GroupInstance) -> bool:
        roles = group.roles_of(agent)
        return any(
            d.role in roles and d.mission == mission
            for d in self.spec.deontics
        )

    def commit_mission(self, agent: int, mission: str, scheme_id: int) -> list[OrgEvent]:
        if scheme_id not in self.schemes:
            return self._error(agent, f"unknown scheme instance {scheme_id}")
        inst = self.schemes[scheme_id]
        scheme = self._scheme_spec(inst)
        if mission not in scheme.missions:
            return self._error(agent, f"scheme {inst.spec_name!r} has no mission {mission!r}")
        group = self.groups[inst.group_id]
        if not self._deontic_ok(agent, mission, group):
            return self._error(
                agent, f"agent {agent} holds no role obliged or permitted for {mission!r}"
            )
        inst.commitments.setdefault(agent, set()).add(mission)
        return self._goal_events(inst, only_agent=agent)

    def set_goal_state(self, scheme_id: int, goal_id: str, agent: int,
                       state: GoalState = GoalState.SATISFIED) -> list[OrgEvent]:
        if state is not GoalState.SATISFIED:
            return self._error(agent, f"only satisfied transitions are accepted, got {state}")
        if scheme_id not in self.schemes:
            return self._error(agent, f"unknown scheme instance {scheme_id}")
        inst = self.schemes[scheme_id]
        scheme = self._scheme_spec(inst)
        nodes = scheme.nodes()
        if goal_id not in nodes:
            return self._error(agent, f"scheme {inst.spec_name!r} has no goal {goal_id!r}")
        committed_goals: set[str] = set()
        for mission in inst.commitments.get(agent, ()):
            committed_goals |= scheme.missions.get(mission, frozenset())
        if goal_id not in committed_goals:
            return self._error(agent, f"agent {agent} is not committed to a mission with {goal_id!r}")
        node = nodes[goal_id]
        if not self._achievable(inst, node):
            return self._error(agent, f"goal {goal_id!r} is not enabled for satisfaction")
        if agent in inst.satisfiers[goal_id]:
            return []  # distinct-agent counting; repeat satisfaction is a no-op
        inst.satisfiers[goal_id].add(agent)
        if node.operator is Operator.LEAF and len(inst.satisfiers[goal_id]) < node.cardinality:
            return []
        inst.goal_states[goal_id] = GoalState.SATISFIED
        self._log(
            "goal_satisfied",
            {"agent": agent, "scheme": scheme_id, "goal": goal_id, "spec": inst.spec_name},
        )
        self._sweep(inst)
        events = self._goal_events(inst)
        if inst.goal_states[scheme.root.id] is GoalState.SATISFIED and not inst.finished:
            inst.finished = True
            events += self._schedule(
                "scheme_finished",
                self.team_agents,
                {
                    "scheme": scheme_id,
                    "spec": inst.spec_name,
                    "group": inst.group_id,
                    "committed": inst.committed_agents(),
                },
                {"scheme": scheme_id, "creator": inst.creator},
            )
        return events

    # -- deontic queries ------------------------------------------------------

    def obligations_for(self, agent: int) -> list[ObligationView]:
        out: list[ObligationView] = []
        for gid in sorted(self.groups):
            group = self.groups[gid]
            roles = group.roles_of(agent)
            if not roles:
                continue
            for d in self.spec.deontics:
                if d.modality is not Modality.OBLIGATION or d.role not in roles:
                    continue
                scheme_name = self.spec.scheme_of_mission(d.mission)
                for sid in sorted(self.schemes):
                    inst = self.schemes[sid]
                    if inst.group_id != gid or inst.spec_name != scheme_name or inst.finished:
                        continue
                    out.append(
                        ObligationView(
                            mission=d.mission,
                            scheme_id=sid,
                            time_constraint=d.time_constraint,
                            expired=d.time_constraint.expired(self.now),
                        )
                    )
        return out

    def is_permitted(self, agent: int, mission: str, group_id: int) -> bool:
        if group_id not in self.groups:
            raise UnknownGroup(group_id)
        return self._deontic_ok(agent, mission, self.groups[group_id])
