"""Deterministic tick-based crafting world.

A flat voxel world with scattered trees, a shallow stone layer and rare iron
veins. Agents never mutate it directly: they submit primitives and receive an
outcome carrying the ticks the primitive consumed. The world clock is driven
by whoever owns the world (normally the scheduler's event loop).
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Union

from .config import InvalidConfig, SimConfig, WorldConfig

Position = tuple[int, int, int]

MAINHAND = 4
EQUIPMENT_SLOTS = 6
CHUNK = 8

BLOCK_KINDS = {
    "air", "dirt", "grass", "log", "stone", "iron_ore", "plank_block",
    "chest", "crafting_table", "furnace",
}

_BLOCK_YIELD = {"grass": "dirt", "plank_block": "plank"}
_ITEM_BLOCK = {"plank": "plank_block"}

_ITEM_ALIASES = {
    "wood": "log", "woods": "log", "logs": "log", "oak_log": "log", "birch_log": "log",
    "stones": "stone", "cobblestone": "stone", "rock": "stone",
    "iron": "iron_ore", "irons": "iron_ore", "iron ore": "iron_ore",
    "planks": "plank", "wooden plank": "plank", "wood plank": "plank", "plank block": "plank",
    "sticks": "stick",
    "crafting table": "crafting_table", "table": "crafting_table",
    "wooden pickaxe": "wooden_pickaxe", "wood pickaxe": "wooden_pickaxe",
    "stone pickaxe": "stone_pickaxe", "iron pickaxe": "iron_pickaxe",
    "iron ingot": "iron_ingot",
}


def register_block(name: str) -> None:
    BLOCK_KINDS.add(name)


def canonical_item(name: str) -> str:
    """Map a free-text item name ("woods", "wooden pickaxe") to a world item id."""
    key = " ".join(name.lower().replace("_", " ").split())
    if key in _ITEM_ALIASES:
        return _ITEM_ALIASES[key]
    underscored = key.replace(" ", "_")
    if underscored in _ITEM_ALIASES:
        return _ITEM_ALIASES[underscored]
    if underscored.endswith("_log"):
        return "log"
    if underscored.endswith("_planks"):
        return "plank"
    return underscored


def block_yield(kind: str) -> str:
    return _BLOCK_YIELD.get(kind, kind)


def item_block(item: str) -> str:
    return _ITEM_BLOCK.get(item, item)


# ---------------------------------------------------------------- errors


class WorldError(Exception):
    """A failed primitive. ``ticks`` is the time spent before failing."""

    code = "world_error"

    def __init__(self, message: str, ticks: int = 0):
        super().__init__(message)
        self.ticks = ticks


class NoTool(WorldError):
    code = "no_tool"


class NoMaterials(WorldError):
    code = "no_materials"


class TargetNotFound(WorldError):
    code = "target_not_found"


class Unreachable(WorldError):
    code = "unreachable"


class BadTarget(WorldError):
    code = "bad_target"


class Occupied(WorldError):
    code = "occupied"


class UnknownAgent(WorldError, KeyError):
    code = "unknown_agent"


# ------------------------------------------------------------ primitives


@dataclass(frozen=True)
class MoveTo:
    pos: Position


@dataclass(frozen=True)
class MineBlock:
    kind: str
    count: int = 1


@dataclass(frozen=True)
class CraftItem:
    item: str
    count: int = 1


@dataclass(frozen=True)
class SmeltItem:
    item: str
    count: int = 1


@dataclass(frozen=True)
class PlaceBlock:
    kind: str
    pos: Position


@dataclass(frozen=True)
class GiveItem:
    target: str
    item: str
    count: int = 1


@dataclass(frozen=True)
class Equip:
    item: str


@dataclass(frozen=True)
class DepositChest:
    pos: Position
    item: str
    count: int = 1


Primitive = Union[MoveTo, MineBlock, CraftItem, SmeltItem, PlaceBlock, GiveItem, Equip, DepositChest]


@dataclass
class ActionOutcome:
    ticks: int
    transcript: str
    gained: dict[str, int] = field(default_factory=dict)
    placed: list[Position] = field(default_factory=list)


# ---------------------------------------------------------------- state


@dataclass
class AgentBody:
    owner: str
    position: Position
    inventory: dict[str, int] = field(default_factory=dict)
    equipment: list[str | None] = field(default_factory=lambda: [None] * EQUIPMENT_SLOTS)
    health: int = 20
    hunger: int = 20

    def count(self, item: str) -> int:
        return self.inventory.get(item, 0)

    def add(self, item: str, n: int) -> None:
        total = self.inventory.get(item, 0) + n
        if total < 0:
            raise NoMaterials(f"{self.owner} lacks {item}")
        if total:
            self.inventory[item] = total
        else:
            self.inventory.pop(item, None)
        if total == 0:
            self.equipment = [None if e == item else e for e in self.equipment]

    def to_dict(self) -> dict:
        return {
            "owner": self.owner,
            "position": list(self.position),
            "inventory": dict(sorted(self.inventory.items())),
            "equipment": list(self.equipment),
            "health": self.health,
            "hunger": self.hunger,
        }


@dataclass
class PerceptionSnapshot:
    inventory: dict[str, int]
    equipment: list[str | None]
    nearby_blocks: dict[str, Position]
    biome: str
    time: int
    health: int
    hunger: int
    position: Position
    nearby_chest_contents: dict[Position, dict[str, int]]

    def to_dict(self) -> dict:
        return {
            "inventory": self.inventory,
            "equipment": self.equipment,
            "nearby_blocks": {k: list(v) for k, v in self.nearby_blocks.items()},
            "biome": self.biome,
            "time": self.time,
            "health": self.health,
            "hunger": self.hunger,
            "position": list(self.position),
            "nearby_chest_contents": {
                ",".join(map(str, p)): c for p, c in self.nearby_chest_contents.items()
            },
        }


def _dist2(a: Position, b: Position) -> int:
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2


def travel_ticks(a: Position, b: Position, per_block: int = 1) -> int:
    return math.ceil(math.sqrt(_dist2(a, b))) * per_block


class WorldState:
    def __init__(self, config: SimConfig, seed: int):
        self.config = config
        self.rng_seed = seed
        self.biome = config.world.biome
        self.clock = 0
        self.blocks: dict[Position, str] = {}
        self.chests: dict[Position, dict[str, int]] = {}
        self.bodies: dict[str, AgentBody] = {}
        self._index: dict[str, dict[tuple[int, int], set[Position]]] = defaultdict(lambda: defaultdict(set))

    # -- block map

    def get(self, pos: Position) -> str:
        return self.blocks.get(pos, "air")

    def set_block(self, pos: Position, kind: str) -> None:
        if kind not in BLOCK_KINDS:
            raise InvalidConfig(f"unregistered block kind {kind!r}")
        old = self.blocks.get(pos)
        if old is not None:
            self._index[old][(pos[0] // CHUNK, pos[2] // CHUNK)].discard(pos)
        if kind == "air":
            self.blocks.pop(pos, None)
            self.chests.pop(pos, None)
            return
        self.blocks[pos] = kind
        self._index[kind][(pos[0] // CHUNK, pos[2] // CHUNK)].add(pos)
        if kind == "chest":
            self.chests.setdefault(pos, {})

    def count_blocks(self, kind: str) -> int:
        return sum(len(s) for s in self._index[kind].values())

    def find_nearest(self, kind: str, origin: Position, radius: float) -> Position | None:
        """Nearest block of ``kind`` within ``radius``; ties break on coordinates."""
        chunks = self._index.get(kind)
        if not chunks:
            return None
        r2 = radius * radius
        ox, oz = origin[0], origin[2]
        ordered = []
        for (cx, cz), cells in chunks.items():
            if not cells:
                continue
            dx = max(cx * CHUNK - ox, 0, ox - (cx * CHUNK + CHUNK - 1))
            dz = max(cz * CHUNK - oz, 0, oz - (cz * CHUNK + CHUNK - 1))
            d2 = dx * dx + dz * dz
            if d2 <= r2:
                ordered.append((d2, cx, cz))
        ordered.sort()
        best: tuple[int, Position] | None = None
        for d2, cx, cz in ordered:
            if best is not None and d2 > best[0]:
                break
            for pos in chunks[(cx, cz)]:
                cand = (_dist2(pos, origin), pos)
                if cand[0] <= r2 and (best is None or cand < best):
                    best = cand
        return best[1] if best else None

    # -- bodies

    def add_body(self, owner: str, position: Position | None = None, inventory: dict | None = None) -> AgentBody:
        if position is None:
            position = (0, self.config.world.surface_y, 0)
        body = AgentBody(owner, tuple(position), dict(inventory or {}))
        self.bodies[owner] = body
        return body

    def body(self, owner: str) -> AgentBody:
        try:
            return self.bodies[owner]
        except KeyError:
            raise UnknownAgent(f"no body for {owner}") from None

    # -- clock

    def advance_clock(self, ticks: int) -> "WorldState":
        if ticks < 0:
            raise ValueError("ticks must be non-negative")
        self.clock += ticks
        return self

    # -- accounting

    def item_totals(self) -> dict[str, int]:
        """Item counts across inventories, chests and minable blocks (by yield)."""
        totals = Counter(map(block_yield, self.blocks.values()))
        for body in self.bodies.values():
            totals.update(body.inventory)
        for contents in self.chests.values():
            totals.update(contents)
        return dict(totals)

    def snapshot(self) -> dict:
        return {
            "seed": self.rng_seed,
            "clock": self.clock,
            "biome": self.biome,
            "blocks": [[*p, k] for p, k in sorted(self.blocks.items())],
            "chests": [[*p, dict(sorted(c.items()))] for p, c in sorted(self.chests.items())],
            "bodies": [b.to_dict() for _, b in sorted(self.bodies.items())],
        }

    def state_hash(self) -> str:
        blob = json.dumps(self.snapshot(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    # -- perception

    def perceive(self, owner: str) -> PerceptionSnapshot:
        body = self.body(owner)
        radius = self.config.world.perception_radius
        nearby = {}
        for kind in sorted(self._index):
            pos = self.find_nearest(kind, body.position, radius)
            if pos is not None:
                nearby[kind] = pos
        chests = {
            p: dict(c) for p, c in sorted(self.chests.items())
            if _dist2(p, body.position) <= radius * radius
        }
        return PerceptionSnapshot(
            inventory=dict(body.inventory),
            equipment=list(body.equipment),
            nearby_blocks=nearby,
            biome=self.biome,
            time=self.clock,
            health=body.health,
            hunger=body.hunger,
            position=body.position,
            nearby_chest_contents=chests,
        )

    # -- primitives

    def tool_tier(self, body: AgentBody) -> int:
        held = body.equipment[MAINHAND]
        return self.config.tool_tiers.get(held, 0) if held else 0

    def execute(self, owner: str, primitive: Primitive) -> ActionOutcome:
        body = self.body(owner)
        handler = getattr(self, "_do_" + type(primitive).__name__)
        ticks, text, gained, placed = handler(body, primitive)
        line = f"[{self.clock}] {owner}: {text} ({ticks} ticks)"
        return ActionOutcome(ticks=ticks, transcript=line, gained=gained, placed=placed)

    def _move(self, body: AgentBody, pos: Position) -> int:
        cfg = self.config
        dist = math.sqrt(_dist2(body.position, pos))
        if dist > cfg.world.max_travel:
            raise Unreachable(f"{pos} is {dist:.0f} blocks away")
        body.position = tuple(pos)
        return math.ceil(dist) * cfg.ticks.move_per_block

    def _do_MoveTo(self, body, p: MoveTo):
        w = self.config.world
        if not (w.min_y <= p.pos[1] < w.max_y):
            raise Unreachable(f"y={p.pos[1]} outside world height")
        ticks = self._move(body, p.pos)
        return ticks, f"moved to {p.pos}", {}, []

    def _do_MineBlock(self, body, p: MineBlock):
        cfg = self.config
        kind = p.kind
        if p.count <= 0:
            raise ValueError("count must be positive")
        needed = cfg.block_tiers.get(kind, 0)
        if self.tool_tier(body) < needed:
            raise NoTool(f"mining {kind} needs tool tier {needed}")
        spent = 0
        gained: dict[str, int] = {}
        for i in range(p.count):
            target = self.find_nearest(kind, body.position, cfg.world.search_radius)
            if target is None:
                spent += cfg.ticks.search_fail
                err = TargetNotFound(f"no {kind} within {cfg.world.search_radius} blocks after {i} mined", spent)
                err.gained = gained
                raise err
            spent += self._move(body, target) + cfg.ticks.mine_cost(kind)
            self.set_block(target, "air")
            item = block_yield(kind)
            body.add(item, 1)
            gained[item] = gained.get(item, 0) + 1
        return spent, f"mined {p.count} {kind}", gained, []

    def _craft(self, body, item: str, count: int, smelt: bool):
        cfg = self.config
        recipe = cfg.recipe_for(item)
        if recipe is None or recipe.smelt != smelt:
            raise NoMaterials(f"no {'smelting' if smelt else 'crafting'} recipe for {item}")
        if count <= 0:
            raise ValueError("count must be positive")
        batches = math.ceil(count / recipe.count)
        if recipe.station and body.count(recipe.station) < 1:
            raise NoMaterials(f"{item} needs a {recipe.station}")
        for ing, n in recipe.inputs:
            if body.count(ing) < n * batches:
                raise NoMaterials(f"{item} x{count} needs {n * batches} {ing}, have {body.count(ing)}")
        for ing, n in recipe.inputs:
            body.add(ing, -n * batches)
        made = recipe.count * batches
        body.add(item, made)
        cost = cfg.ticks.smelt if smelt else cfg.ticks.craft
        return cost * batches, made

    def _do_CraftItem(self, body, p: CraftItem):
        ticks, made = self._craft(body, p.item, p.count, smelt=False)
        return ticks, f"crafted {made} {p.item}", {p.item: made}, []

    def _do_SmeltItem(self, body, p: SmeltItem):
        ticks, made = self._craft(body, p.item, p.count, smelt=True)
        return ticks, f"smelted {made} {p.item}", {p.item: made}, []

    def _do_PlaceBlock(self, body, p: PlaceBlock):
        w = self.config.world
        item = block_yield(p.kind)
        if body.count(item) < 1:
            raise NoMaterials(f"no {item} to place")
        if not (w.min_y <= p.pos[1] < w.max_y):
            raise Unreachable(f"y={p.pos[1]} outside world height")
        if self.get(p.pos) != "air":
            raise Occupied(f"{p.pos} holds {self.get(p.pos)}")
        ticks = self._move(body, p.pos) + self.config.ticks.place
        body.add(item, -1)
        self.set_block(p.pos, p.kind)
        return ticks, f"placed {p.kind} at {p.pos}", {item: -1}, [tuple(p.pos)]

    def _do_GiveItem(self, body, p: GiveItem):
        if p.target not in self.bodies or p.target == body.owner:
            raise BadTarget(f"cannot give to {p.target}")
        if body.count(p.item) < p.count:
            raise NoMaterials(f"has {body.count(p.item)} {p.item}, needs {p.count}")
        body.add(p.item, -p.count)
        self.bodies[p.target].add(p.item, p.count)
        return self.config.ticks.give, f"gave {p.count} {p.item} to {p.target}", {p.item: -p.count}, []

    def _do_Equip(self, body, p: Equip):
        if body.count(p.item) < 1:
            raise NoMaterials(f"no {p.item} to equip")
        body.equipment[MAINHAND] = p.item
        return self.config.ticks.equip, f"equipped {p.item}", {}, []

    def _do_DepositChest(self, body, p: DepositChest):
        if p.pos not in self.chests:
            raise TargetNotFound(f"no chest at {p.pos}")
        if body.count(p.item) < p.count:
            raise NoMaterials(f"has {body.count(p.item)} {p.item}, needs {p.count}")
        ticks = self._move(body, p.pos) + self.config.ticks.deposit
        body.add(p.item, -p.count)
        chest = self.chests[p.pos]
        chest[p.item] = chest.get(p.item, 0) + p.count
        return ticks, f"deposited {p.count} {p.item}", {p.item: -p.count}, []

    def apply_damage(self, owner: str, amount: int) -> None:
        """Scripted damage hook; health and hunger are otherwise static."""
        body = self.body(owner)
        body.health = max(0, min(20, body.health - amount))


# ------------------------------------------------------------- generation


def area_bounds(cfg: WorldConfig) -> tuple[int, int, int, int]:
    x0 = -(cfg.width // 2)
    z0 = -(cfg.depth // 2)
    return x0, x0 + cfg.width, z0, z0 + cfg.depth


def generate_world(seed: int, config: SimConfig | None = None) -> WorldState:
    config = config or SimConfig.load()
    cfg = config.world
    cfg.validate()
    if seed < 0:
        raise InvalidConfig("seed must be unsigned")
    rng = random.Random(seed)
    world = WorldState(config, seed)
    x0, x1, z0, z1 = area_bounds(cfg)
    grass_y = cfg.surface_y - 1
    stone_top = grass_y - cfg.dirt_layers - 1
    stone_bottom = stone_top - cfg.stone_layers + 1

    for x in range(x0, x1):
        for z in range(z0, z1):
            world.set_block((x, grass_y, z), "grass")
            for y in range(grass_y - cfg.dirt_layers, grass_y):
                world.set_block((x, y, z), "dirt")
            for y in range(stone_bottom, stone_top + 1):
                world.set_block((x, y, z), "stone")

    for _ in range(cfg.iron_veins):
        if cfg.vein_max_radius is None:
            cx = rng.randrange(x0, x1)
            cz = rng.randrange(z0, z1)
        else:
            angle = rng.uniform(0, 2 * math.pi)
            radius = rng.uniform(cfg.vein_min_radius, cfg.vein_max_radius)
            cx = int(round(radius * math.cos(angle)))
            cz = int(round(radius * math.sin(angle)))
        for dx in range(cfg.vein_size):
            for dz in range(cfg.vein_size):
                for dy in range(cfg.vein_size):
                    pos = (cx + dx, stone_top - dy, cz + dz)
                    if world.get(pos) == "stone":
                        world.set_block(pos, "iron_ore")

    placed: set[tuple[int, int]] = set()
    attempts = 0
    while len(placed) < cfg.trees and attempts < cfg.trees * 50:
        attempts += 1
        x = rng.randrange(x0, x1)
        z = rng.randrange(z0, z1)
        height = rng.randint(cfg.tree_min_height, cfg.tree_max_height)
        if x * x + z * z <= cfg.clear_radius ** 2 or (x, z) in placed:
            continue
        if any((x + dx, z + dz) in placed for dx in (-1, 0, 1) for dz in (-1, 0, 1)):
            continue
        placed.add((x, z))
        for y in range(cfg.surface_y, cfg.surface_y + height):
            world.set_block((x, y, z), "log")

    if cfg.chest is not None:
        world.set_block(tuple(cfg.chest), "chest")
    return world


def perceive(world: WorldState, body: AgentBody | str) -> PerceptionSnapshot:
    owner = body.owner if isinstance(body, AgentBody) else body
    return world.perceive(owner)


def execute_primitive(world: WorldState, body: AgentBody | str, primitive: Primitive) -> ActionOutcome:
    owner = body.owner if isinstance(body, AgentBody) else body
    return world.execute(owner, primitive)


def advance_clock(world: WorldState, ticks: int) -> WorldState:
    return world.advance_clock(ticks)
