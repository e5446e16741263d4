"""Acceptance suite: one test per release criterion, each printing a verdict.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
pass lines.  Every tolerance and time budget is pinned here.
"""

import json
import random
import time

from bomber_arena.config import (
    ScenarioConfig,
    TeamConfig,
    load_map_text,
    resolve_org_spec_ref,
)
from bomber_arena.contract_net import FreeBoxAt, detect_stuck
from bomber_arena.harness import replay, run_batch, run_match
from bomber_arena.orgmodel import OrgKernel, load_org_spec, load_org_spec_file
from bomber_arena.pathfinder import PunishmentMap, plan_path
from bomber_arena.world import new_world, parse_map, percept_for

from oracles import dijkstra_cost, random_goal_tree
from test_orgmodel import doc_with_scheme, drive_random_scheme
from test_world import run_random_match

SOLO = load_map_text("builtin:solo")
ARENA = load_map_text("builtin:arena11")
FIG_POCKET = load_map_text("builtin:fig_pocket")
EXPLORATION_SPEC = resolve_org_spec_ref("builtin:ocmas_team")

DETOUR_SHORT = """\
#########
#....+..#
#.#####.#
#.......#
#########
"""

DETOUR_LONG = """\
#########
#....+..#
#.#####.#
#.#####.#
#.......#
#########
"""


def _ok(name, detail=""):
    print(f"[PASS] {name}" + (f" — {detail}" if detail else ""))


# ---------------------------------------------------------------------------
# 1. punishment-5 rule on the fixture corridors
# ---------------------------------------------------------------------------

def test_criterion_1_punishment_five_rule():
    started = time.perf_counter()
    punish5 = 5
    short_grid = parse_map(DETOUR_SHORT)[0]
    long_grid = parse_map(DETOUR_LONG)[0]
    start, target = (1, 1), (7, 1)

    short_plan = plan_path(short_grid, start, target,
                           PunishmentMap.for_boxes(short_grid, punish5))
    assert short_plan.intermediate is None, "detour within punishment must be taken"
    assert (5, 1) not in short_plan.steps
    assert short_plan.augmented_cost == dijkstra_cost(
        short_grid, start, target, PunishmentMap.for_boxes(short_grid, punish5)
    )

    long_plan = plan_path(long_grid, start, target,
                          PunishmentMap.for_boxes(long_grid, punish5))
    assert long_plan.intermediate is not None, "long detours must go through the box"
    assert long_plan.intermediate.box_cell == (5, 1)
    assert long_plan.intermediate.bomb_cell == (4, 1)
    assert long_plan.augmented_cost == dijkstra_cost(
        long_grid, start, target, PunishmentMap.for_boxes(long_grid, punish5)
    )

    elapsed = time.perf_counter() - started
    assert elapsed < 1.0
    _ok("criterion 1: punishment-5 detour rule", f"{elapsed * 1000:.0f} ms")


# ---------------------------------------------------------------------------
# 2. pathfinder oracle suite (1000 random grids)
# ---------------------------------------------------------------------------

def test_criterion_2_pathfinder_oracle_1000_grids():
    from oracles import random_grid
    from bomber_arena.world import CellKind

    started = time.perf_counter()
    rng = random.Random(20_000)
    matches = 0
    for _ in range(1000):
        grid = random_grid(rng)
        punish = PunishmentMap.for_boxes(grid, rng.randint(0, 6))
        for cell, kind in grid.cells.items():
            if kind is CellKind.EMPTY and rng.random() < 0.2:
                punish.bump(cell, rng.randint(1, 8))
        walkable = sorted(c for c, k in grid.cells.items() if k is not CellKind.SOLID)
        start, target = rng.choice(walkable), rng.choice(walkable)
        plan = plan_path(grid, start, target, punish)
        expected = dijkstra_cost(grid, start, target, punish)
        if expected is None:
            assert plan is None
        else:
            assert plan is not None and plan.augmented_cost == expected
        matches += 1
    elapsed = time.perf_counter() - started
    assert matches == 1000
    assert elapsed < 10.0
    _ok("criterion 2: 1000-grid Dijkstra oracle equality", f"{elapsed:.2f} s")


# ---------------------------------------------------------------------------
# 3. scheme frontier oracle (1000 random trees)
# ---------------------------------------------------------------------------

def test_criterion_3_frontier_oracle_1000_trees():
    started = time.perf_counter()
    for seed in range(1000):
        drive_random_scheme(seed)
    elapsed = time.perf_counter() - started
    assert elapsed < 10.0
    _ok("criterion 3: 1000-tree frontier oracle equality", f"{elapsed:.2f} s")


# ---------------------------------------------------------------------------
# 4. explorer pipeline through the shipped spec
# ---------------------------------------------------------------------------

def _drive_explorer_pipeline(delay):
    spec = load_org_spec_file(resolve_org_spec_ref("builtin:exploration"))
    k = OrgKernel(spec, [0, 1], mediation_delay=delay)
    k.now = 0
    gid, _ = k.create_group(0, "exploration_team")
    k.adopt_role(0, "explorer", gid)
    sid, _ = k.create_scheme(0, "exploration", gid)
    latencies = []
    sequence = []

    k.now = 2
    (ev,) = k.commit_mission(0, "m_explore", sid)
    sequence.append(ev.payload["goal"])
    latencies.append(ev.deliver_at - k.now)

    k.now = ev.deliver_at  # the agent reacts the tick the event lands
    (ev,) = k.set_goal_state(sid, "findUnexploredArea", 0)
    sequence.append(ev.payload["goal"])
    latencies.append(ev.deliver_at - k.now)

    k.now = ev.deliver_at + 6  # travel takes a few ticks
    (ev,) = k.set_goal_state(sid, "moveToUnexploredArea", 0)
    sequence.append(ev.payload["goal"])
    latencies.append(ev.deliver_at - k.now)

    k.now = ev.deliver_at  # the empty plan satisfies the parent immediately
    finished = k.set_goal_state(sid, "exploreMap", 0)
    assert all(e.kind == "scheme_finished" for e in finished)
    sequence.append("SchemeFinished")
    latencies.append(finished[0].deliver_at - k.now)
    return sequence, latencies


def test_criterion_4_explorer_pipeline_latency():
    sequence, latencies = _drive_explorer_pipeline(delay=1)
    assert sequence == [
        "findUnexploredArea",
        "moveToUnexploredArea",
        "exploreMap",
        "SchemeFinished",
    ]
    assert latencies == [1, 1, 1, 1]
    sequence0, latencies0 = _drive_explorer_pipeline(delay=0)
    assert sequence0 == sequence
    assert latencies0 == [0, 0, 0, 0]
    _ok("criterion 4: explorer goal pipeline", "delays 1 and 0 reproduced exactly")


# ---------------------------------------------------------------------------
# 5. acmas/ocmas latency differential over 20 seeds
# ---------------------------------------------------------------------------

def test_criterion_5_latency_differential_20_seeds():
    started = time.perf_counter()
    delay = 1
    seeds = list(range(20))
    acmas = run_batch(
        ScenarioConfig(
            map_text=SOLO,
            teams=(TeamConfig(1, "acmas"), TeamConfig(2, "acmas")),
            max_ticks=60,
        ),
        seeds,
    )
    ocmas = run_batch(
        ScenarioConfig(
            map_text=SOLO,
            teams=(
                TeamConfig(1, "ocmas", org_spec_file=EXPLORATION_SPEC),
                TeamConfig(2, "acmas"),
            ),
            max_ticks=60,
            mediation_delay=delay,
        ),
        seeds,
    )
    for record in acmas.records:
        hist = record.teams[1].latency_histogram
        assert hist and set(hist) == {0}, f"acmas latency must be 0, got {hist}"
    for record in ocmas.records:
        hist = record.teams[1].latency_histogram
        assert hist and set(hist) == {delay}, f"ocmas latency must be {delay}, got {hist}"
    diff = ocmas.mean_latency(1) - acmas.mean_latency(1)
    assert diff == float(delay)
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0
    _ok(
        "criterion 5: latency differential",
        f"mean(ocmas) - mean(acmas) = {diff} over {len(seeds)} seeds, {elapsed:.2f} s",
    )


# ---------------------------------------------------------------------------
# 6. stuck-agent rescue with a byte-exact transcript
# ---------------------------------------------------------------------------

REFERENCE_TRANSCRIPT = [
    '{"kind":"cfp","payload":{"box_cell":[1,2],"deadline":2,"from":0,"task_id":"0#0","team":1,"to":1},"source":"cnp","tick":0}',
    '{"kind":"propose","payload":{"bid":7,"from":1,"task_id":"0#0","team":1,"to":0},"source":"cnp","tick":1}',
    '{"kind":"award","payload":{"box_cell":[1,2],"from":0,"task_id":"0#0","team":1,"to":1,"winner":1},"source":"cnp","tick":2}',
    '{"kind":"inform_done","payload":{"from":1,"task_id":"0#0","team":1,"to":0},"source":"cnp","tick":13}',
]


def test_criterion_6_stuck_agent_rescue_20_seeds():
    config0 = ScenarioConfig(
        map_text=FIG_POCKET,
        teams=(TeamConfig(1, "acmas"), TeamConfig(2, "acmas")),
        max_ticks=40,
    )
    state = new_world(config0)
    assert detect_stuck(percept_for(state, 0)) == FreeBoxAt(box_cell=(1, 2), requester=0)
    # tick bound: call window + two mailbox hops + one approach move +
    # placement + fuse + linger + margin
    bound = (
        config0.bid_window + 2 + 1 + 1 + config0.fuse_ticks + config0.explosion_linger + 4
    )
    for seed in range(20):
        record, lines = run_match(config0.with_seed(seed))
        events = [json.loads(l) for l in lines[1:]]
        transcript = [
            line for line, rec in zip(lines[1:], events) if rec["source"] == "cnp"
        ]
        assert transcript == REFERENCE_TRANSCRIPT, f"seed {seed} transcript diverged"
        opened = [
            rec["tick"]
            for rec in events
            if rec["kind"] == "box_destroyed" and rec["payload"]["cell"] == [1, 2]
        ]
        assert opened and opened[0] <= bound, f"seed {seed}: pocket not opened in time"
        assert record.teams[1].cnp_issued == 1 and record.teams[1].cnp_completed == 1
    _ok("criterion 6: stuck-agent rescue", f"20/20 seeds, pocket open by tick {bound}")


# ---------------------------------------------------------------------------
# 7. deontic gate (100 randomized cases)
# ---------------------------------------------------------------------------

def _kernel_snapshot(k):
    return (
        {g: dict(inst.goal_states) for g, inst in k.schemes.items()},
        {g: {a: set(r) for a, r in grp.role_assignments.items()} for g, grp in k.groups.items()},
        {s: {a: set(m) for a, m in inst.commitments.items()} for s, inst in k.schemes.items()},
    )


def test_criterion_7_deontic_gate_100_cases():
    rng = random.Random(999)
    checked = 0
    while checked < 100:
        doc = doc_with_scheme(random_goal_tree(rng), roles=("bound", "free"))
        doc["groups"][0]["roles"]["bound"] = [0, 1]  # tight cardinality
        k = OrgKernel(load_org_spec(doc), [0, 1, 2], mediation_delay=1)
        gid, _ = k.create_group(0, "g")
        k.adopt_role(0, "bound", gid)
        sid, _ = k.create_scheme(0, "s", gid)
        if rng.random() < 0.5:
            # unpermitted commitment: agent 1 plays no mission-bearing role
            k.adopt_role(1, "free", gid)
            before = _kernel_snapshot(k)
            events = k.commit_mission(1, "m", sid)
        else:
            # over-cardinality adoption: the single "bound" slot is taken
            before = _kernel_snapshot(k)
            events = k.adopt_role(2, "bound", gid)
        assert len(events) == 1
        assert events[0].kind == "org_error"
        assert events[0].payload == {"code": "denied"}  # opaque to the agent
        assert events[0].debug_cause  # true cause only on the debug channel
        assert _kernel_snapshot(k) == before, "failed request must not change state"
        checked += 1
    _ok("criterion 7: deontic gate", "100/100 opaque errors without state change")


# ---------------------------------------------------------------------------
# 8. determinism and replay of the reference match
# ---------------------------------------------------------------------------

def test_criterion_8_reference_match_replay(tmp_path):
    config = ScenarioConfig(
        map_text=ARENA,
        teams=(
            TeamConfig(1, "acmas"),
            TeamConfig(2, "ocmas", org_spec_file=EXPLORATION_SPEC),
        ),
        max_ticks=400,
        seed=42,
    )
    record_a, lines_a = run_match(config)
    record_b, lines_b = run_match(config)
    assert lines_a == lines_b and record_a == record_b
    log = tmp_path / "reference.jsonl"
    log.write_text("\n".join(lines_a) + "\n")
    assert replay(log).ok
    for victim in (1, len(lines_a) // 3, 2 * len(lines_a) // 3, len(lines_a) - 1):
        mutated = list(lines_a)
        mutated[victim] = mutated[victim].replace(":", ": ", 1)
        bad = tmp_path / f"mutated_{victim}.jsonl"
        bad.write_text("\n".join(mutated) + "\n")
        verdict = replay(bad)
        assert not verdict.ok and verdict.line_no == victim
    _ok(
        "criterion 8: determinism and replay",
        f"{len(lines_a)} log lines byte-stable; mutations detected",
    )


# ---------------------------------------------------------------------------
# 9. world conservation over 100 random matches
# ---------------------------------------------------------------------------

def test_criterion_9_world_conservation_100_matches():
    started = time.perf_counter()
    for seed in range(100):
        run_random_match(seed, ticks=200)
    elapsed = time.perf_counter() - started
    _ok(
        "criterion 9: conservation invariants",
        f"100 random 200-tick matches clean, {elapsed:.2f} s",
    )
