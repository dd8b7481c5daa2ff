"""Simulation configuration: world generation, tick costs, recipes, NaN policy.

Configuration is a nested JSON (or TOML) document layered over the packaged
defaults. The canonical JSON form is hashed so every run report can name the
exact configuration that produced it.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any


class InvalidConfig(ValueError):
    pass


def _load_defaults() -> dict:
    text = resources.files("sagents").joinpath("data/default_config.json").read_text()
    return json.loads(text)


def deep_merge(base: dict, override: dict | None) -> dict:
    out = copy.deepcopy(base)
    for key, value in (override or {}).items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = deep_merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


@dataclass(frozen=True)
class Recipe:
    output: str
    count: int
    inputs: tuple[tuple[str, int], ...]
    station: str | None = None
    smelt: bool = False

    def __post_init__(self):
        if not self.inputs:
            raise InvalidConfig(f"recipe for {self.output} has no inputs")
        if self.count <= 0 or any(n <= 0 for _, n in self.inputs):
            raise InvalidConfig(f"recipe for {self.output} has non-positive counts")


@dataclass(frozen=True)
class WorldConfig:
    width: int = 64
    depth: int = 64
    surface_y: int = 64
    min_y: int = 50
    max_y: int = 100
    dirt_layers: int = 2
    stone_layers: int = 4
    trees: int = 70
    tree_min_height: int = 4
    tree_max_height: int = 6
    clear_radius: int = 3
    iron_veins: int = 4
    vein_size: int = 2
    vein_min_radius: float = 0
    vein_max_radius: float | None = None
    biome: str = "plains"
    perception_radius: int = 16
    search_radius: int = 32
    max_travel: int = 256
    spawn_ring_radius: float = 10
    chest: list[int] | None = None

    def validate(self) -> None:
        if self.width <= 0 or self.depth <= 0:
            raise InvalidConfig("world extents must be positive")
        for name in ("trees", "iron_veins", "dirt_layers", "stone_layers", "clear_radius"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be non-negative")
        if self.vein_size <= 0 or self.tree_min_height <= 0:
            raise InvalidConfig("vein_size and tree heights must be positive")
        if self.tree_max_height < self.tree_min_height:
            raise InvalidConfig("tree_max_height < tree_min_height")
        floor = self.surface_y - 1 - self.dirt_layers - self.stone_layers
        if floor < self.min_y or self.surface_y + self.tree_max_height >= self.max_y:
            raise InvalidConfig("terrain does not fit inside the world height bounds")


@dataclass(frozen=True)
class TickCosts:
    ticks_per_minute: int = 60
    move_per_block: int = 1
    mine: dict = field(default_factory=dict)
    mine_default: int = 15
    craft: int = 10
    smelt: int = 10
    place: int = 5
    give: int = 1
    equip: int = 1
    deposit: int = 2
    search_fail: int = 300
    planning: int = 30

    def mine_cost(self, kind: str) -> int:
        return int(self.mine.get(kind, self.mine_default))


class SimConfig:
    """Resolved configuration. ``raw`` is the merged document; attributes are typed views."""

    def __init__(self, raw: dict):
        self.raw = raw
        try:
            self.world = WorldConfig(**raw["world"])
            self.ticks = TickCosts(**raw["ticks"])
        except TypeError as exc:
            raise InvalidConfig(str(exc)) from exc
        self.world.validate()
        self.recipes = [
            Recipe(
                output=r["output"][0],
                count=int(r["output"][1]),
                inputs=tuple((i, int(n)) for i, n in r["inputs"]),
                station=r.get("station"),
                smelt=bool(r.get("smelt", False)),
            )
            for r in raw["recipes"]
        ]
        self.tool_tiers: dict[str, int] = dict(raw["tool_tiers"])
        self.block_tiers: dict[str, int] = dict(raw["block_tiers"])
        self.nan_stall_ticks = int(raw["nan"]["stall_minutes"] * self.ticks.ticks_per_minute)
        self.nan_max_attempts = int(raw["nan"]["max_attempts"])
        self.max_ticks = int(raw["nan"]["max_minutes"] * self.ticks.ticks_per_minute)
        self.failure_rate = float(raw["failure"]["rate"])
        self.lost_ticks = int(raw["failure"]["lost_ticks"])
        self.escalate_after = int(raw.get("escalate_after", 5))

    @classmethod
    def load(cls, overrides: dict | None = None, preset: str | None = None) -> "SimConfig":
        raw = _load_defaults()
        if preset:
            if preset not in raw.get("presets", {}):
                raise InvalidConfig(f"unknown preset {preset!r}")
            raw = deep_merge(raw, raw["presets"][preset])
        raw = deep_merge(raw, overrides)
        return cls(raw)

    @classmethod
    def from_file(cls, path: str | Path, preset: str | None = None) -> "SimConfig":
        return cls.load(read_document(path), preset=preset)

    def with_overrides(self, overrides: dict | None) -> "SimConfig":
        return SimConfig(deep_merge(self.raw, overrides))

    def canonical_json(self) -> str:
        doc = {k: v for k, v in self.raw.items() if k != "presets"}
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]

    def recipe_for(self, item: str) -> Recipe | None:
        for r in self.recipes:
            if r.output == item:
                return r
        return None


def read_document(path: str | Path) -> dict[str, Any]:
    """Read a JSON or TOML file into a dict."""
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib

        return tomllib.loads(path.read_text())
    return json.loads(path.read_text())
