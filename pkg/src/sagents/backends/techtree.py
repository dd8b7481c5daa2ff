"""Bill-of-materials planning over the recipe table.

Given an inventory and a goal, produce the mine/craft/equip todos in an order
that can be executed front to back. Surplus from one batch (extra planks,
sticks) is pooled and reused by later needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..grammar import plural


class Unobtainable(ValueError):
    pass


@dataclass
class TechTable:
    recipes: dict[str, dict]
    tool_tiers: dict[str, int]
    block_tiers: dict[str, int]
    raw: frozenset = frozenset({"log", "stone", "iron_ore", "dirt"})

    @classmethod
    def from_doc(cls, doc: dict) -> "TechTable":
        recipes = {}
        for r in doc["recipes"]:
            out, count = r["output"]
            recipes[out] = {
                "count": int(count),
                "inputs": [(i, int(n)) for i, n in r["inputs"]],
                "station": r.get("station"),
                "smelt": bool(r.get("smelt", False)),
            }
        return cls(recipes, dict(doc["tool_tiers"]), dict(doc["block_tiers"]))

    def tool_for(self, tier: int) -> str:
        for tool, t in sorted(self.tool_tiers.items(), key=lambda kv: kv[1]):
            if t >= tier:
                return tool
        raise Unobtainable(f"no tool of tier {tier}")

    def tier_of(self, inventory: dict[str, int]) -> int:
        return max([t for tool, t in self.tool_tiers.items() if inventory.get(tool, 0) > 0], default=0)


@dataclass
class Bill:
    raw: dict[str, int] = field(default_factory=dict)
    crafts: dict[str, int] = field(default_factory=dict)  # item -> batches
    order: list[str] = field(default_factory=list)


def _need(table: TechTable, item: str, qty: int, pool: dict[str, int], bill: Bill, depth: int = 0) -> None:
    if depth > 20:
        raise Unobtainable(f"recipe loop at {item}")
    take = min(pool.get(item, 0), qty)
    pool[item] = pool.get(item, 0) - take
    rest = qty - take
    if rest <= 0:
        return
    if item in table.raw:
        bill.raw[item] = bill.raw.get(item, 0) + rest
        return
    recipe = table.recipes.get(item)
    if recipe is None:
        raise Unobtainable(f"don't know how to obtain {item}")
    batches = math.ceil(rest / recipe["count"])
    for ing, n in recipe["inputs"]:
        _need(table, ing, n * batches, pool, bill, depth + 1)
    station = recipe["station"]
    if station and pool.get(station, 0) <= 0:
        _need(table, station, 1, pool, bill, depth + 1)
        pool[station] = pool.get(station, 0) + 1  # stations are kept
    bill.crafts[item] = bill.crafts.get(item, 0) + batches
    if item not in bill.order:
        bill.order.append(item)
    pool[item] = pool.get(item, 0) + batches * recipe["count"] - rest


def bill_todos(table: TechTable, bill: Bill) -> list[str]:
    todos = [f"mine {n} {plural(item, n)}" for item, n in sorted(bill.raw.items(), key=lambda kv: _raw_rank(table, kv[0]))]
    for item in bill.order:
        recipe = table.recipes[item]
        made = bill.crafts[item] * recipe["count"]
        verb = "smelt" if recipe["smelt"] else "craft"
        todos.append(f"{verb} {made} {plural(item, made)}")
    return todos


def _raw_rank(table: TechTable, item: str) -> tuple[int, str]:
    return (table.block_tiers.get(item, 0), item)


def obtain(table: TechTable, item: str, qty: int, inventory: dict[str, int]) -> tuple[list[str], dict[str, int]]:
    """Todos that bring ``item`` up to ``qty`` held, and the inventory afterwards."""
    pool = dict(inventory)
    bill = Bill()
    _need(table, item, qty, pool, bill)
    for raw, n in bill.raw.items():
        pool[raw] = pool.get(raw, 0)  # mined then consumed; net zero
    after = {k: v for k, v in pool.items() if v > 0}
    after[item] = after.get(item, 0) + qty  # _need consumed the goal itself from the pool
    return bill_todos(table, bill), after


def tool_stages(table: TechTable, tier: int, inventory: dict[str, int], equipped: str | None):
    """Stages (title, todos) that leave a tool of ``tier`` in hand."""
    stages = []
    inv = dict(inventory)
    held_tier = table.tier_of(inv)
    for t in range(1, tier + 1):
        tool = table.tool_for(t)
        if held_tier >= t:
            continue
        todos, inv = obtain(table, tool, 1, inv)
        todos.append(f"equip {tool}")
        equipped = tool
        held_tier = t
        stages.append((f"Craft a {tool.replace('_', ' ')}", todos))
    best = None
    for tool, t in sorted(table.tool_tiers.items(), key=lambda kv: kv[1]):
        if inv.get(tool, 0) > 0:
            best = tool
    if tier > 0 and best and equipped != best:
        if table.tool_tiers.get(equipped or "", 0) < tier:
            stages.append((f"Equip {best.replace('_', ' ')}", [f"equip {best}"]))
    return stages, inv
