"""Match runner, batch bench, log replay and org-spec validation.

A match emits a JSONL event log whose first line embeds the full config and
its hash; every later line is ``{tick, source, kind, payload}`` with sources
``world``, ``org``, ``cnp`` and ``agent``.  Identical configs always produce
byte-identical logs, which is what ``replay`` checks.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .agents import ROLE_BY_INDEX, AgentController
from .config import ConfigError, ScenarioConfig, config_from_dict
from .orgmodel import OrgKernel, SpecError, load_org_spec_file
from .world import apply_actions, new_world, percept_for

import random


class LogParseError(ValueError):
    pass


class VersionMismatch(ValueError):
    pass


def _fmt(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))


class MailRoom:
    """Agent-to-agent mailbox with a fixed one-tick delivery delay."""

    def __init__(self, log, team_of: dict[int, int]):
        self._log = log
        self._team_of = team_of
        self._pending: list[tuple[int, int, object]] = []
        self._seq = 0

    def send(self, message, now: int) -> None:
        self._seq += 1
        self._log(
            {
                "tick": now,
                "source": "cnp",
                "kind": message.kind,
                "payload": dict(message.payload(), team=self._team_of[message.sender]),
            }
        )
        self._pending.append((now + 1, self._seq, message))

    def due(self, tick: int):
        ready = sorted(
            (item for item in self._pending if item[0] <= tick), key=lambda i: (i[0], i[1])
        )
        self._pending = [item for item in self._pending if item[0] > tick]
        return [msg for _, _, msg in ready]


@dataclass
class TeamMetrics:
    goals_satisfied: int = 0
    latency_histogram: dict[int, int] = field(default_factory=dict)
    cnp_issued: int = 0
    cnp_completed: int = 0
    agents_lost: int = 0

    def mean_latency(self) -> float | None:
        total = sum(self.latency_histogram.values())
        if not total:
            return None
        weighted = sum(lat * n for lat, n in self.latency_histogram.items())
        return weighted / total


@dataclass
class MatchRecord:
    seed: int
    winner: object  # team id, "draw" or "timeout"
    ticks: int
    teams: dict[int, TeamMetrics]


_COMPLETION_KINDS = {("org", "goal_satisfied"), ("agent", "goal_completed")}
_EVENT_KINDS = {("org", "goal_event"), ("org", "scheme_finished"), ("agent", "goal_event")}


def _scan_metrics(lines: list[str], team_ids) -> dict[int, TeamMetrics]:
    teams = {tid: TeamMetrics() for tid in team_ids}
    completions = []  # (line_no, tick, agent, scheme_tag, team)
    goal_events: dict[tuple, list[tuple[int, int]]] = {}
    cfp_tasks: dict[int, set[str]] = {tid: set() for tid in team_ids}
    done_tasks: dict[int, set[str]] = {tid: set() for tid in team_ids}
    for line_no, line in enumerate(lines[1:], start=1):
        rec = json.loads(line)
        src, kind, payload = rec["source"], rec["kind"], rec["payload"]
        tick = rec["tick"]
        if (src, kind) in _COMPLETION_KINDS:
            completions.append(
                (line_no, tick, payload["agent"], (src, payload["scheme"]), payload["team"])
            )
        elif (src, kind) in _EVENT_KINDS:
            key = (payload["to"], (src, payload["scheme"]))
            goal_events.setdefault(key, []).append((line_no, tick))
        elif src == "cnp" and kind == "cfp":
            cfp_tasks[payload["team"]].add(payload["task_id"])
        elif src == "cnp" and kind == "inform_done":
            done_tasks[payload["team"]].add(payload["task_id"])
        elif src == "world" and kind == "agent_died":
            teams[payload["team"]].agents_lost += 1
    for line_no, tick, agent, tag, team in completions:
        teams[team].goals_satisfied += 1
        for ev_line, ev_tick in goal_events.get((agent, tag), ()):
            if ev_line > line_no:
                latency = ev_tick - tick
                hist = teams[team].latency_histogram
                hist[latency] = hist.get(latency, 0) + 1
                break
    for tid in team_ids:
        teams[tid].cnp_issued = len(cfp_tasks[tid])
        teams[tid].cnp_completed = len(done_tasks[tid])
    return teams


def run_match(config: ScenarioConfig) -> tuple[MatchRecord, list[str]]:
    """Run one match to completion; returns the record and the full log."""
    lines: list[str] = []

    def log(record: dict) -> None:
        lines.append(_fmt(record))

    lines.append(
        _fmt(
            {
                "artifact_version": __version__,
                "config_hash": config.config_hash(),
                "config": config.canonical_dict(),
            }
        )
    )
    world = new_world(config)
    team_of = {a.agent_id: a.team for a in world.agents}
    kernels: dict[int, OrgKernel] = {}
    for team in config.teams:
        if team.strategy != "ocmas":
            continue
        spec = load_org_spec_file(team.org_spec_file)
        members = sorted(aid for aid, tid in team_of.items() if tid == team.team_id)
        kernels[team.team_id] = OrgKernel(
            spec,
            members,
            mediation_delay=config.delay_for(team),
            team_id=team.team_id,
            log=log,
        )
    mail = MailRoom(log, team_of)
    controllers: dict[int, AgentController] = {}
    for team in config.teams:
        members = sorted(aid for aid, tid in team_of.items() if tid == team.team_id)
        for idx, aid in enumerate(members):
            controllers[aid] = AgentController(
                agent_id=aid,
                team_id=team.team_id,
                role=ROLE_BY_INDEX[idx % len(ROLE_BY_INDEX)],
                kind=team.strategy,
                config=config,
                team_agents=members,
                kernel=kernels.get(team.team_id),
                send=mail.send,
                log=log,
                rng=random.Random(config.seed * 1_000_003 + aid * 7_919 + 17),
            )

    inboxes: dict[int, list] = {aid: [] for aid in team_of}
    winner = None
    status = None
    while True:
        tick = world.tick
        if tick >= config.max_ticks:
            status = "timeout"
            break
        for tid in sorted(kernels):
            kernel = kernels[tid]
            kernel.now = tick
            for ev in kernel.pop_due(tick):
                payload = dict(ev.payload, to=ev.recipient, team=tid)
                if ev.debug_cause is not None:
                    payload["debug_cause"] = ev.debug_cause
                log({"tick": ev.deliver_at, "source": "org", "kind": ev.kind, "payload": payload})
                inboxes[ev.recipient].append(("org", ev))
        for msg in mail.due(tick):
            inboxes[msg.recipient].append(("cnp", msg))
        intents = {}
        for aid in sorted(team_of):
            if not world.agent(aid).alive:
                inboxes[aid] = []
                continue
            inbox, inboxes[aid] = inboxes[aid], []
            intents[aid] = controllers[aid].decide(percept_for(world, aid), inbox)
        world, events = apply_actions(world, intents)
        for e in events:
            log({"tick": tick, "source": "world", "kind": e.kind, "payload": e.payload})
            if e.kind == "match_won":
                winner = e.payload["team"]
                status = "won" if winner is not None else "draw"
        if status is not None:
            break
    record = MatchRecord(
        seed=config.seed,
        winner=winner if status == "won" else status,
        ticks=world.tick,
        teams=_scan_metrics(lines, sorted({t.team_id for t in config.teams})),
    )
    return record, lines


# ---------------------------------------------------------------------------
# Batch bench
# ---------------------------------------------------------------------------

@dataclass
class BatchSummary:
    config: ScenarioConfig
    records: list[MatchRecord]

    def team_ids(self) -> list[int]:
        return sorted(t.team_id for t in self.config.teams)

    def win_counts(self) -> dict:
        counts: dict = {tid: 0 for tid in self.team_ids()}
        counts["draw"] = 0
        counts["timeout"] = 0
        for r in self.records:
            counts[r.winner] = counts.get(r.winner, 0) + 1
        return counts

    def mean_ticks(self) -> float:
        return statistics.fmean(r.ticks for r in self.records)

    def mean_latency(self, team_id: int) -> float | None:
        values = [
            m for r in self.records if (m := r.teams[team_id].mean_latency()) is not None
        ]
        if not values:
            return None
        return statistics.fmean(values)

    def rows(self) -> list[dict]:
        rows = []
        for r in self.records:
            row: dict = {"seed": r.seed, "winner": r.winner, "ticks": r.ticks}
            for tid in self.team_ids():
                m = r.teams[tid]
                lat = m.mean_latency()
                row[f"t{tid}_goals"] = m.goals_satisfied
                row[f"t{tid}_mean_latency"] = "" if lat is None else round(lat, 4)
                row[f"t{tid}_cnp_issued"] = m.cnp_issued
                row[f"t{tid}_cnp_completed"] = m.cnp_completed
                row[f"t{tid}_agents_lost"] = m.agents_lost
            rows.append(row)
        return rows

    def to_csv(self, path) -> None:
        rows = self.rows()
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
            writer.writeheader()
            writer.writerows(rows)

    def table(self) -> str:
        rows = self.rows()
        headers = list(rows[0])
        cells = [headers] + [[str(row[h]) for h in headers] for row in rows]
        widths = [max(len(line[i]) for line in cells) for i in range(len(headers))]
        out = ["  ".join(h.ljust(w) for h, w in zip(line, widths)) for line in cells]
        counts = self.win_counts()
        summary = ", ".join(f"team {tid}: {counts[tid]} wins" for tid in self.team_ids())
        summary += f", draws: {counts['draw']}, timeouts: {counts['timeout']}"
        out.append(summary)
        out.append(f"mean ticks: {self.mean_ticks():.2f}")
        for tid in self.team_ids():
            lat = self.mean_latency(tid)
            out.append(
                f"team {tid} mean goal-event latency: "
                + ("n/a" if lat is None else f"{lat:.4f}")
            )
        return "\n".join(out)


def run_batch(config: ScenarioConfig, seeds) -> BatchSummary:
    seeds = list(seeds)
    if not seeds:
        raise ConfigError("batch needs at least one seed")
    records = [run_match(config.with_seed(s))[0] for s in sorted(seeds)]
    return BatchSummary(config=config, records=records)


# ---------------------------------------------------------------------------
# Replay
# ---------------------------------------------------------------------------

@dataclass
class ReplayVerdict:
    ok: bool
    line_no: int | None = None
    expected: str | None = None
    actual: str | None = None

    def describe(self) -> str:
        if self.ok:
            return "OK: log replays byte-identically"
        return (
            f"DIVERGENCE at line {self.line_no}:\n"
            f"  logged:   {self.actual}\n"
            f"  replayed: {self.expected}"
        )


def replay(path) -> ReplayVerdict:
    """Re-simulate a log from its embedded config and compare byte-wise."""
    text = Path(path).read_text()
    lines = [line for line in text.splitlines() if line]
    if not lines:
        raise LogParseError("log file is empty")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise LogParseError(f"bad header line: {exc}")
    for key in ("artifact_version", "config_hash", "config"):
        if key not in header:
            raise LogParseError(f"header is missing {key!r}")
    if header["artifact_version"] != __version__:
        raise VersionMismatch(
            f"log version {header['artifact_version']} != {__version__}"
        )
    try:
        config = config_from_dict(header["config"])
    except ConfigError as exc:
        raise LogParseError(f"embedded config is invalid: {exc}")
    if config.config_hash() != header["config_hash"]:
        raise VersionMismatch("embedded config does not match its recorded hash")
    _, fresh = run_match(config)
    for i, (got, want) in enumerate(zip(lines, fresh)):
        if got != want:
            return ReplayVerdict(ok=False, line_no=i, expected=want, actual=got)
    if len(lines) != len(fresh):
        n = min(len(lines), len(fresh))
        return ReplayVerdict(
            ok=False,
            line_no=n,
            expected=fresh[n] if n < len(fresh) else "<end of log>",
            actual=lines[n] if n < len(lines) else "<end of log>",
        )
    return ReplayVerdict(ok=True)


# ---------------------------------------------------------------------------
# Spec validation report
# ---------------------------------------------------------------------------

def validate_spec(path) -> str:
    """Human-readable validation report; faults are content, not exceptions."""
    try:
        spec = load_org_spec_file(path)
    except SpecError as exc:
        return "FAULTS:\n" + "\n".join(f"- {f}" for f in exc.faults)
    parts = [
        f"roles: {len(spec.structural.roles)} ({', '.join(sorted(spec.structural.roles))})",
        f"links: {len(spec.structural.links)}",
        f"groups: {len(spec.structural.groups)}",
    ]
    for name in sorted(spec.schemes):
        scheme = spec.schemes[name]
        parts.append(
            f"scheme {name}: {len(scheme.nodes())} goals, {len(scheme.missions)} mission(s)"
        )
    parts.append(f"deontics: {len(spec.deontics)}")
    return "OK\n" + "\n".join(parts)
