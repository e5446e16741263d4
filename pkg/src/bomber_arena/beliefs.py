"""Minimal plan-rule reasoning substrate.

Ground beliefs live in a set-like base; behavior comes from rules of the form
``trigger : context <- body``.  An event that matches a rule's trigger and
whose context unifies against the base instantiates the rule's body; bodies
execute on a single depth-first intention stack, releasing at most one
world action per tick.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterator, Union


# ---------------------------------------------------------------------------
# Terms and atoms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntConst:
    value: int


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not self.name or not self.name[0].isupper():
            raise ValueError(f"variable names start uppercase: {self.name!r}")


@dataclass(frozen=True)
class Wildcard:
    """Matches anything and binds nothing (the ``pred(_)`` notation)."""


WILDCARD = Wildcard()

Term = Union[IntConst, Atom, Var, Wildcard]


def term(value) -> Term:
    """Coerce a plain value: ints, '_' wildcard, Uppercase vars, atoms."""
    if isinstance(value, (IntConst, Atom, Var, Wildcard)):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not terms")
    if isinstance(value, int):
        return IntConst(value)
    if isinstance(value, str):
        if value == "_":
            return WILDCARD
        if value[0].isupper():
            return Var(value)
        return Atom(value)
    raise TypeError(f"cannot make a term from {value!r}")


def _term_key(t: Term):
    if isinstance(t, IntConst):
        return (0, t.value, "")
    if isinstance(t, Atom):
        return (1, 0, t.name)
    if isinstance(t, Var):
        return (2, 0, t.name)
    return (3, 0, "")


@dataclass(frozen=True)
class BeliefAtom:
    predicate: str
    args: tuple[Term, ...] = ()

    def is_ground(self) -> bool:
        return all(isinstance(a, (IntConst, Atom)) for a in self.args)

    def sort_key(self):
        return (self.predicate, len(self.args), tuple(_term_key(a) for a in self.args))


def belief(predicate: str, *args) -> BeliefAtom:
    return BeliefAtom(predicate, tuple(term(a) for a in args))


@dataclass(frozen=True)
class Guard:
    """Arithmetic comparison filtering substitutions, e.g. N > 0."""

    left: Term
    op: str  # > < >= <= == !=
    right: Term

    _OPS = {
        ">": lambda a, b: a > b,
        "<": lambda a, b: a < b,
        ">=": lambda a, b: a >= b,
        "<=": lambda a, b: a <= b,
        "==": lambda a, b: a == b,
        "!=": lambda a, b: a != b,
    }

    def holds(self, bindings: dict[str, Term]) -> bool:
        left = _resolve(self.left, bindings)
        right = _resolve(self.right, bindings)
        if not isinstance(left, IntConst) or not isinstance(right, IntConst):
            return False
        return self._OPS[self.op](left.value, right.value)


def guard(left, op: str, right) -> Guard:
    return Guard(term(left), op, term(right))


Literal = Union[BeliefAtom, Guard]


# ---------------------------------------------------------------------------
# Belief base and unification
# ---------------------------------------------------------------------------

# Predicates holding at most one fact at a time; adding replaces prior facts.
FUNCTIONAL_PREDICATES = {("pos", 2), ("target", 2), ("intermediate", 2), ("bombs", 1)}


class BeliefBase:
    def __init__(self, atoms: tuple[BeliefAtom, ...] = ()):
        self._atoms: set[BeliefAtom] = set()
        for a in atoms:
            self.add(a)

    def add(self, atom: BeliefAtom) -> None:
        if not atom.is_ground():
            raise ValueError(f"belief base stores ground atoms only: {atom}")
        key = (atom.predicate, len(atom.args))
        if key in FUNCTIONAL_PREDICATES:
            self._atoms = {
                a for a in self._atoms if (a.predicate, len(a.args)) != key
            }
        self._atoms.add(atom)

    def discard(self, atom: BeliefAtom) -> None:
        self._atoms.discard(atom)

    def remove_matching(self, pattern: BeliefAtom) -> int:
        matched = [a for a in self._atoms if match_atom(pattern, a, {}) is not None]
        for a in matched:
            self._atoms.discard(a)
        return len(matched)

    def __contains__(self, atom: BeliefAtom) -> bool:
        return atom in self._atoms

    def __len__(self) -> int:
        return len(self._atoms)

    def sorted_atoms(self) -> list[BeliefAtom]:
        return sorted(self._atoms, key=BeliefAtom.sort_key)

    def first(self, pattern: BeliefAtom) -> dict[str, Term] | None:
        return next(unify(pattern, self), None)

    def values(self, predicate: str, arity: int) -> tuple[int, ...] | None:
        """Int arguments of the single fact for a functional predicate."""
        for a in self.sorted_atoms():
            if a.predicate == predicate and len(a.args) == arity:
                return tuple(t.value for t in a.args if isinstance(t, IntConst))
        return None


def _resolve(t: Term, bindings: dict[str, Term]) -> Term:
    if isinstance(t, Var) and t.name in bindings:
        return bindings[t.name]
    return t


def unify_terms(pattern: Term, value: Term, bindings: dict[str, Term]) -> dict[str, Term] | None:
    """Extend bindings so pattern equals the ground value, or None."""
    pattern = _resolve(pattern, bindings)
    if isinstance(pattern, Wildcard):
        return bindings
    if isinstance(pattern, Var):
        out = dict(bindings)
        out[pattern.name] = value
        return out
    return bindings if pattern == value else None


def match_atom(pattern: BeliefAtom, fact: BeliefAtom, bindings: dict[str, Term]) -> dict[str, Term] | None:
    if pattern.predicate != fact.predicate or len(pattern.args) != len(fact.args):
        return None
    out = bindings
    for p, v in zip(pattern.args, fact.args):
        out = unify_terms(p, v, out)
        if out is None:
            return None
    return out


def unify(literals, base: BeliefBase, bindings: dict[str, Term] | None = None) -> Iterator[dict[str, Term]]:
    """Yield every substitution satisfying the literal(s) against the base.

    Accepts a single pattern/guard or a conjunction of them; atoms are tried
    in sorted-base order so the stream is deterministic.  Guards filter.
    """
    if isinstance(literals, (BeliefAtom, Guard)):
        literals = (literals,)
    literals = tuple(literals)
    bindings = dict(bindings or {})

    def solve(idx: int, bound: dict[str, Term]) -> Iterator[dict[str, Term]]:
        if idx == len(literals):
            yield bound
            return
        lit = literals[idx]
        if isinstance(lit, Guard):
            if lit.holds(bound):
                yield from solve(idx + 1, bound)
            return
        for fact in base.sorted_atoms():
            nxt = match_atom(lit, fact, bound)
            if nxt is not None:
                yield from solve(idx + 1, nxt)

    def distinct() -> Iterator[dict[str, Term]]:
        seen = set()
        for sol in solve(0, bindings):
            key = tuple(sorted(sol.items()))
            if key not in seen:
                seen.add(key)
                yield sol

    return distinct()


# ---------------------------------------------------------------------------
# Plan rules
# ---------------------------------------------------------------------------

GOAL = "goal"
BELIEF = "belief"


@dataclass(frozen=True)
class Trigger:
    kind: str  # GOAL (+!g) or BELIEF (+b)
    atom: BeliefAtom
    annotations: tuple[tuple[str, Term], ...] = ()


@dataclass(frozen=True)
class Action:
    name: str
    args: tuple[Term, ...] = ()


@dataclass(frozen=True)
class Subgoal:
    atom: BeliefAtom


@dataclass(frozen=True)
class AddBelief:
    atom: BeliefAtom


@dataclass(frozen=True)
class DelBelief:
    pattern: BeliefAtom


@dataclass(frozen=True)
class Send:
    message: object


@dataclass(frozen=True)
class OrgDirective:
    name: str
    args: tuple[Term, ...] = ()


Step = Union[Action, Subgoal, AddBelief, DelBelief, Send, OrgDirective]


@dataclass(frozen=True)
class PlanRule:
    trigger: Trigger
    context: tuple[Literal, ...] = ()
    body: tuple[Step, ...] = ()


@dataclass
class Event:
    kind: str  # GOAL | BELIEF
    atom: BeliefAtom
    annotations: dict = field(default_factory=dict)


def _subst_atom(atom: BeliefAtom, bindings: dict[str, Term]) -> BeliefAtom:
    return BeliefAtom(atom.predicate, tuple(_resolve(a, bindings) for a in atom.args))


def _subst_step(step: Step, bindings: dict[str, Term]) -> Step:
    if isinstance(step, Action):
        return Action(step.name, tuple(_resolve(a, bindings) for a in step.args))
    if isinstance(step, Subgoal):
        return Subgoal(_subst_atom(step.atom, bindings))
    if isinstance(step, AddBelief):
        return AddBelief(_subst_atom(step.atom, bindings))
    if isinstance(step, DelBelief):
        return DelBelief(_subst_atom(step.pattern, bindings))
    if isinstance(step, OrgDirective):
        return OrgDirective(step.name, tuple(_resolve(a, bindings) for a in step.args))
    return step


@dataclass
class PlanInstance:
    goal: BeliefAtom
    steps: tuple[Step, ...]
    annotations: dict
    pc: int = 0


def select_plan(event: Event, library, base: BeliefBase) -> PlanInstance | None:
    """First applicable rule in declaration order, instantiated; None if the
    event fails (no rule with matching trigger and satisfiable context)."""
    for rule in library:
        if rule.trigger.kind != event.kind:
            continue
        bound = match_atom(rule.trigger.atom, event.atom, {})
        if bound is None:
            continue
        ok = True
        for key, pattern in rule.trigger.annotations:
            if key not in event.annotations:
                ok = False
                break
            bound = unify_terms(pattern, term(event.annotations[key]), bound)
            if bound is None:
                ok = False
                break
        if not ok:
            continue
        solution = next(unify(rule.context, base, bound), None)
        if solution is None:
            continue
        return PlanInstance(
            goal=_subst_atom(event.atom, solution),
            steps=tuple(_subst_step(s, solution) for s in rule.body),
            annotations=dict(event.annotations),
        )
    return None


# ---------------------------------------------------------------------------
# Intention execution
# ---------------------------------------------------------------------------

@dataclass
class ActionResult:
    """Outcome of asking the agent context to perform an action step.

    ``intent`` of None marks an internal computation that consumes no world
    action; ``done`` False keeps the step active next tick (durative action).
    """

    intent: object | None = None
    done: bool = True
    failed: bool = False


@dataclass(frozen=True)
class WorldAction:
    intent: object


@dataclass(frozen=True)
class SendMessage:
    message: object


@dataclass(frozen=True)
class OrgRequest:
    name: str
    args: tuple


@dataclass(frozen=True)
class GoalPosted:
    atom: BeliefAtom
    annotations: dict


@dataclass(frozen=True)
class GoalDone:
    atom: BeliefAtom
    annotations: dict


@dataclass(frozen=True)
class GoalFailed:
    atom: BeliefAtom
    annotations: dict


@dataclass(frozen=True)
class EventFailed:
    event: Event


Effect = Union[WorldAction, SendMessage, OrgRequest, GoalPosted, GoalDone, GoalFailed, EventFailed]

PerformFn = Callable[[str, tuple], ActionResult]

_STEP_BUDGET = 512


class Reasoner:
    """Single-stack intention scheduler over a plan library and belief base."""

    def __init__(self, library, base: BeliefBase):
        self.library = list(library)
        self.base = base
        self.queue: deque[Event] = deque()
        self.stack: list[PlanInstance] = []

    def post(self, event: Event) -> None:
        self.queue.append(event)

    def idle(self) -> bool:
        return not self.queue and not self.stack

    def _fail_stack(self, effects: list) -> None:
        # Each stack entry below the top is parked on the subgoal that spawned
        # the entry above it, so a failure cascades through the whole stack.
        while self.stack:
            inst = self.stack.pop()
            effects.append(GoalFailed(inst.goal, dict(inst.annotations)))

    def run_intention(self, perform: PerformFn) -> list[Effect]:
        """Execute intention steps for one tick.

        Internal work (belief edits, messages, plan selection) is free; the
        first step that releases a world action ends the tick, and remaining
        steps resume next tick.
        """
        effects: list[Effect] = []
        released = False
        for _ in range(_STEP_BUDGET):
            if not self.stack:
                if not self.queue:
                    break
                event = self.queue.popleft()
                inst = select_plan(event, self.library, self.base)
                if inst is None:
                    effects.append(EventFailed(event))
                    continue
                self.stack.append(inst)
                continue
            top = self.stack[-1]
            if top.pc >= len(top.steps):
                self.stack.pop()
                effects.append(GoalDone(top.goal, dict(top.annotations)))
                continue
            step = top.steps[top.pc]
            if isinstance(step, AddBelief):
                self.base.add(step.atom)
                top.pc += 1
            elif isinstance(step, DelBelief):
                self.base.remove_matching(step.pattern)
                top.pc += 1
            elif isinstance(step, Send):
                effects.append(SendMessage(step.message))
                top.pc += 1
            elif isinstance(step, OrgDirective):
                effects.append(OrgRequest(step.name, step.args))
                top.pc += 1
            elif isinstance(step, Subgoal):
                top.pc += 1
                if top.pc >= len(top.steps):
                    # Tail call: the enclosing instance has nothing left to do.
                    self.stack.pop()
                    effects.append(GoalDone(top.goal, dict(top.annotations)))
                event = Event(GOAL, step.atom, dict(top.annotations))
                effects.append(GoalPosted(step.atom, dict(top.annotations)))
                inst = select_plan(event, self.library, self.base)
                if inst is None:
                    effects.append(EventFailed(event))
                    self._fail_stack(effects)
                else:
                    self.stack.append(inst)
            elif isinstance(step, Action):
                if released:
                    break
                result = perform(step.name, step.args)
                if result.failed:
                    self._fail_stack(effects)
                    continue
                if result.intent is None:
                    if result.done:
                        top.pc += 1
                    continue
                effects.append(WorldAction(result.intent))
                released = True
                if result.done:
                    top.pc += 1
                break
            else:
                raise TypeError(f"unknown step {step!r}")
        return effects


# ---------------------------------------------------------------------------
# Movement policy over the five navigation predicates
# ---------------------------------------------------------------------------

class MissingBelief(LookupError):
    pass


class MoveDecision(enum.Enum):
    TOWARD_INTERMEDIATE = "toward_intermediate"
    TOWARD_TARGET = "toward_target"
    PLACE_BOMB_AND_RETREAT = "place_bomb_and_retreat"
    WAIT_FOR_BOMB = "wait_for_bomb"
    DONE = "done"


def decide_move(base: BeliefBase) -> MoveDecision:
    """Pick the next movement behavior from pos/target/intermediate/clear/bombs.

    At the target the journey is done.  While a blocking box guards an
    intermediate waypoint: standing on the waypoint places a bomb if one is
    available and otherwise waits for one; anywhere else the agent heads for
    the waypoint.  Once the passage is clear (or no waypoint exists) the agent
    heads straight for the target.  Re-evaluated every tick, so a bomb that
    becomes available mid-journey is picked up immediately.
    """
    pos = base.values("pos", 2)
    target = base.values("target", 2)
    if pos is None or target is None:
        raise MissingBelief("decide_move needs pos/2 and target/2")
    if pos == target:
        return MoveDecision.DONE
    inter = base.values("intermediate", 2)
    bombs = base.values("bombs", 1)
    bombs_n = bombs[0] if bombs else 0
    if inter is not None and belief("clear", inter[0], inter[1]) not in base:
        if pos == inter:
            if bombs_n > 0:
                return MoveDecision.PLACE_BOMB_AND_RETREAT
            return MoveDecision.WAIT_FOR_BOMB
        return MoveDecision.TOWARD_INTERMEDIATE
    return MoveDecision.TOWARD_TARGET
