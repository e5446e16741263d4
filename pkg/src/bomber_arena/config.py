"""Scenario configuration: JSON loading, validation, canonical hashing."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .world import WorldRules

STRATEGY_KINDS = ("acmas", "ocmas")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TeamConfig:
    team_id: int
    strategy: str  # "acmas" | "ocmas"
    org_spec_file: str | None = None
    mediation_delay: int | None = None  # per-team override
    plan_library: str = "default"


@dataclass(frozen=True)
class ScenarioConfig:
    map_text: str
    teams: tuple[TeamConfig, TeamConfig]
    fuse_ticks: int = 8
    blast_range: int = 2
    explosion_linger: int = 2
    bombs_capacity: int = 1
    max_ticks: int = 500
    seed: int = 0
    box_punishment: int = 5
    danger_weight: int = 10
    explosion_punishment: int = 50
    mediation_delay: int = 1
    bid_window: int = 2
    backoff: int = 5

    def rules(self) -> WorldRules:
        return WorldRules(
            fuse_ticks=self.fuse_ticks,
            blast_range=self.blast_range,
            explosion_linger=self.explosion_linger,
            bombs_capacity=self.bombs_capacity,
        )

    def with_seed(self, seed: int) -> "ScenarioConfig":
        return replace(self, seed=seed)

    def delay_for(self, team: TeamConfig) -> int:
        return self.mediation_delay if team.mediation_delay is None else team.mediation_delay

    def canonical_dict(self) -> dict:
        return {
            "map_text": self.map_text,
            "teams": [
                {
                    "id": t.team_id,
                    "strategy": t.strategy,
                    "org_spec_file": t.org_spec_file,
                    "mediation_delay": t.mediation_delay,
                    "plan_library": t.plan_library,
                }
                for t in self.teams
            ],
            "fuse_ticks": self.fuse_ticks,
            "blast_range": self.blast_range,
            "explosion_linger": self.explosion_linger,
            "bombs_capacity": self.bombs_capacity,
            "max_ticks": self.max_ticks,
            "seed": self.seed,
            "box_punishment": self.box_punishment,
            "danger_weight": self.danger_weight,
            "explosion_punishment": self.explosion_punishment,
            "mediation_delay": self.mediation_delay,
            "bid_window": self.bid_window,
            "backoff": self.backoff,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def builtin_path(kind: str, name: str):
    """Resolve a packaged fixture (kind is 'maps' or 'orgspecs')."""
    return resources.files("bomber_arena").joinpath(kind, name)


def load_map_text(ref: str, base_dir: Path | None = None) -> str:
    """Load map text from a ``builtin:<name>`` reference or a file path."""
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if not name.endswith(".map"):
            name += ".map"
        return builtin_path("maps", name).read_text()
    path = Path(ref)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.exists():
        raise ConfigError(f"map file not found: {path}")
    return path.read_text()


def resolve_org_spec_ref(ref: str, base_dir: Path | None = None) -> str:
    """Resolve an org-spec reference to a readable path-like string."""
    if ref.startswith("builtin:"):
        name = ref.split(":", 1)[1]
        if not name.endswith(".json"):
            name += ".json"
        return str(builtin_path("orgspecs", name))
    path = Path(ref)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return str(path)


def _expect(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def config_from_dict(doc: dict, base_dir: Path | None = None) -> ScenarioConfig:
    _expect(isinstance(doc, dict), "config must be a JSON object")
    if "map_text" in doc:
        map_text = doc["map_text"]
    elif "map_file" in doc:
        map_text = load_map_text(doc["map_file"], base_dir)
    else:
        raise ConfigError("config needs map_file or map_text")
    raw_teams = doc.get("teams")
    _expect(isinstance(raw_teams, list) and len(raw_teams) == 2, "config needs exactly 2 teams")
    teams = []
    for entry in raw_teams:
        _expect(isinstance(entry, dict), "team entry must be an object")
        _expect("id" in entry, "team entry needs an id")
        strategy = entry.get("strategy", "acmas")
        _expect(strategy in STRATEGY_KINDS, f"unknown strategy {strategy!r}")
        org_ref = entry.get("org_spec_file")
        if strategy == "ocmas":
            _expect(org_ref is not None, "ocmas team needs org_spec_file")
            org_ref = resolve_org_spec_ref(org_ref, base_dir)
        else:
            _expect(org_ref is None, "acmas team must not reference an org spec")
        teams.append(
            TeamConfig(
                team_id=int(entry["id"]),
                strategy=strategy,
                org_spec_file=org_ref,
                mediation_delay=entry.get("mediation_delay"),
                plan_library=entry.get("plan_library", "default"),
            )
        )
    _expect(teams[0].team_id != teams[1].team_id, "team ids must differ")

    def num(key, default, minimum=0):
        value = doc.get(key, default)
        _expect(isinstance(value, int) and value >= minimum, f"{key} must be an integer >= {minimum}")
        return value

    return ScenarioConfig(
        map_text=map_text,
        teams=(teams[0], teams[1]),
        fuse_ticks=num("fuse_ticks", 8, 1),
        blast_range=num("blast_range", 2, 1),
        explosion_linger=num("explosion_linger", 2, 1),
        bombs_capacity=num("bombs_capacity", 1, 1),
        max_ticks=num("max_ticks", 500, 1),
        seed=num("seed", 0, 0),
        box_punishment=num("box_punishment", 5, 0),
        danger_weight=num("danger_weight", 10, 0),
        explosion_punishment=num("explosion_punishment", 50, 0),
        mediation_delay=num("mediation_delay", 1, 0),
        bid_window=num("bid_window", 2, 1),
        backoff=num("backoff", 5, 1),
    )


def config_from_file(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(doc, base_dir=path.parent)
