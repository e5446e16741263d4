"""Contract-net protocol for freeing an agent walled in by boxes.

The trapped agent broadcasts a call for proposals naming the box that best
opens its pocket; teammates bid the augmented path cost of reaching the
bombing spot; the cheapest bidder is awarded the task and reports back when
the box is gone.  All messages ride the shared one-tick mailbox.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .pathfinder import PunishmentMap, danger_punishments, is_safe_retreat, plan_path
from .world import Cell, BombState, DIRECTIONS, Percept, step_from

CFP = "cfp"
PROPOSE = "propose"
REFUSE = "refuse"
AWARD = "award"
REJECT = "reject"
INFORM_DONE = "inform_done"
INFORM_FAILURE = "inform_failure"

COLLECTING = "collecting"
AWARDED = "awarded"
DONE = "done"
FAILED = "failed"


@dataclass(frozen=True)
class FreeBoxAt:
    box_cell: Cell
    requester: int


@dataclass(frozen=True)
class CnpMessage:
    kind: str
    task_id: str
    sender: int
    recipient: int
    box_cell: Cell | None = None
    deadline: int | None = None
    bid: int | None = None
    winner: int | None = None
    reason: str | None = None

    def payload(self) -> dict:
        out = {
            "task_id": self.task_id,
            "from": self.sender,
            "to": self.recipient,
        }
        if self.box_cell is not None:
            out["box_cell"] = list(self.box_cell)
        if self.deadline is not None:
            out["deadline"] = self.deadline
        if self.bid is not None:
            out["bid"] = self.bid
        if self.winner is not None:
            out["winner"] = self.winner
        if self.reason is not None:
            out["reason"] = self.reason
        return out


def region_of(percept: Percept, start: Cell) -> set[Cell]:
    """Connected empty-cell region around a cell (4-adjacency)."""
    grid = percept.grid
    region = {start}
    frontier = deque([start])
    while frontier:
        cell = frontier.popleft()
        for d in DIRECTIONS:
            nxt = step_from(cell, d)
            if nxt not in region and grid.is_empty(nxt):
                region.add(nxt)
                frontier.append(nxt)
    return region


def detect_stuck(percept: Percept) -> FreeBoxAt | None:
    """Task to escape a box pocket, or None when the agent can act alone.

    Fires only when the agent's connected empty region is fenced by at least
    one box and a bomb dropped where the agent stands would leave it no
    escape.  The chosen box is the region-boundary box nearest to a teammate
    outside the pocket (ties resolve row-major).
    """
    if not percept.alive:
        return None
    pos = percept.position
    region = region_of(percept, pos)
    boundary_boxes = sorted(
        {
            step_from(cell, d)
            for cell in region
            for d in DIRECTIONS
            if percept.grid.is_box(step_from(cell, d))
        },
        key=lambda c: (c[1], c[0]),
    )
    if not boundary_boxes:
        return None
    hypothetical = BombState(
        owner=percept.self_id,
        position=pos,
        fuse_remaining=percept.rules.fuse_ticks,
        blast_range=percept.rules.blast_range,
    )
    if is_safe_retreat(percept, pos, hypothetical) is not None:
        return None
    mates = [
        a
        for a in percept.agents
        if a.team == percept.self_team
        and a.agent_id != percept.self_id
        and a.alive
        and a.position not in region
    ]

    def mate_distance(box: Cell) -> int:
        if not mates:
            return 0
        return min(abs(box[0] - m.position[0]) + abs(box[1] - m.position[1]) for m in mates)

    box = min(boundary_boxes, key=lambda c: (mate_distance(c), c[1], c[0]))
    return FreeBoxAt(box_cell=box, requester=percept.self_id)


def compute_bid(percept: Percept, task: FreeBoxAt, *, box_punishment: int = 5,
                danger_weight: int = 10, explosion_punishment: int = 50) -> int | None:
    """Augmented path cost from the bidder to the target box, or None."""
    punish = danger_punishments(
        percept,
        PunishmentMap.for_boxes(percept.grid, box_punishment),
        danger_weight=danger_weight,
        explosion_punishment=explosion_punishment,
    )
    plan = plan_path(percept.grid, percept.position, task.box_cell, punish)
    if plan is None:
        return None
    return plan.augmented_cost


@dataclass
class CnpInitiatorState:
    me: int
    task: FreeBoxAt
    bid_window: int = 2
    backoff: int = 5
    teammates: tuple[int, ...] = ()
    phase: str = COLLECTING
    task_id: str = ""
    deadline: int = 0
    bids: dict[int, int] = field(default_factory=dict)
    reissue_at: int | None = None
    seq: int = 0
    winner: int | None = None


def start_initiator(me: int, task: FreeBoxAt, now: int, teammates, *,
                    bid_window: int = 2, backoff: int = 5,
                    seq_start: int = 0) -> tuple[CnpInitiatorState, list[CnpMessage]]:
    state = CnpInitiatorState(
        me=me, task=task, bid_window=bid_window, backoff=backoff,
        teammates=tuple(sorted(teammates)), seq=seq_start,
    )
    return state, _issue(state, now)


def _issue(state: CnpInitiatorState, now: int) -> list[CnpMessage]:
    state.task_id = f"{state.me}#{state.seq}"
    state.seq += 1
    state.deadline = now + state.bid_window
    state.bids = {}
    state.phase = COLLECTING
    state.reissue_at = None
    state.winner = None
    return [
        CnpMessage(
            kind=CFP,
            task_id=state.task_id,
            sender=state.me,
            recipient=mate,
            box_cell=state.task.box_cell,
            deadline=state.deadline,
        )
        for mate in state.teammates
    ]


def initiator_step(state: CnpInitiatorState, inbox, now: int) -> list[CnpMessage]:
    """Advance the initiator: collect bids, award at the deadline, re-issue
    after failures.  Late proposals are answered with a rejection."""
    out: list[CnpMessage] = []
    for msg in inbox:
        if msg.kind == PROPOSE:
            if (
                state.phase == COLLECTING
                and msg.task_id == state.task_id
                and now <= state.deadline
            ):
                state.bids[msg.sender] = msg.bid
            else:
                out.append(
                    CnpMessage(kind=REJECT, task_id=msg.task_id,
                               sender=state.me, recipient=msg.sender)
                )
        elif msg.kind == REFUSE:
            pass
        elif msg.kind == INFORM_DONE:
            if msg.task_id == state.task_id:
                state.phase = DONE
        elif msg.kind == INFORM_FAILURE:
            if msg.task_id == state.task_id and state.phase == AWARDED:
                out += _issue(state, now)
    if state.phase == COLLECTING and now >= state.deadline:
        if state.bids:
            state.winner = min(state.bids, key=lambda a: (state.bids[a], a))
            for mate in sorted(state.bids):
                if mate == state.winner:
                    out.append(
                        CnpMessage(kind=AWARD, task_id=state.task_id,
                                   sender=state.me, recipient=mate, winner=mate,
                                   box_cell=state.task.box_cell)
                    )
                else:
                    out.append(
                        CnpMessage(kind=REJECT, task_id=state.task_id,
                                   sender=state.me, recipient=mate)
                    )
            state.phase = AWARDED
        else:
            state.phase = FAILED
            state.reissue_at = now + state.backoff
    if state.phase == FAILED and state.reissue_at is not None and now >= state.reissue_at:
        out += _issue(state, now)
    return out


@dataclass
class ActiveAward:
    task_id: str
    task: FreeBoxAt
    initiator: int


@dataclass
class CnpParticipantState:
    me: int
    active: ActiveAward | None = None


def participant_step(state: CnpParticipantState, inbox, percept: Percept,
                     bid_fn=None) -> tuple[list[CnpMessage], ActiveAward | None]:
    """Answer calls for proposals and accept awards.

    Bids come from ``bid_fn(percept, task)`` (augmented path cost by default).
    A participant refuses while it is itself stuck or already carrying an
    award, and never bids on its own call.  Returns (outbox, newly adopted
    task or None); execution of the adopted task is the caller's job.
    """
    if bid_fn is None:
        bid_fn = compute_bid
    out: list[CnpMessage] = []
    adopted: ActiveAward | None = None
    for msg in inbox:
        if msg.kind == CFP:
            if msg.sender == state.me:
                continue  # never bid on an own call
            task = FreeBoxAt(box_cell=tuple(msg.box_cell), requester=msg.sender)
            busy = state.active is not None or detect_stuck(percept) is not None
            bid = None if busy else bid_fn(percept, task)
            if bid is None:
                out.append(
                    CnpMessage(kind=REFUSE, task_id=msg.task_id,
                               sender=state.me, recipient=msg.sender)
                )
            else:
                out.append(
                    CnpMessage(kind=PROPOSE, task_id=msg.task_id,
                               sender=state.me, recipient=msg.sender, bid=bid)
                )
        elif msg.kind == AWARD:
            adopted = ActiveAward(
                task_id=msg.task_id,
                task=FreeBoxAt(box_cell=tuple(msg.box_cell), requester=msg.sender),
                initiator=msg.sender,
            )
            state.active = adopted
        elif msg.kind == REJECT:
            pass
    return out, adopted


def participant_complete(state: CnpParticipantState) -> CnpMessage:
    award = state.active
    state.active = None
    return CnpMessage(kind=INFORM_DONE, task_id=award.task_id,
                      sender=state.me, recipient=award.initiator)


def participant_fail(state: CnpParticipantState, reason: str) -> CnpMessage:
    award = state.active
    state.active = None
    return CnpMessage(kind=INFORM_FAILURE, task_id=award.task_id,
                      sender=state.me, recipient=award.initiator, reason=reason)
