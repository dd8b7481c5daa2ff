"""Benchmark tasks, goal checks, shelter blueprints and the experiment matrix."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from .grammar import plural, render_position
from .org_graph import AgentGraph, Structure, norm
from .world import BadTarget, Position, WorldState, canonical_item


class InvalidParams(ValueError):
    pass


# ------------------------------------------------------------------ shelter

_PART_NAMES = {
    "foundation": "foundation", "foundations": "foundation", "floor": "foundation",
    "wall": "walls", "walls": "walls",
    "roof": "roof", "roofs": "roof", "ceiling": "roof",
}


@dataclass(frozen=True)
class ShelterBlueprint:
    origin: Position
    footprint: tuple[int, int] = (5, 5)
    wall_height: int = 3
    foundation_block: str = "stone"
    wall_block: str = "plank_block"
    roof_block: str = "stone"

    def __post_init__(self):
        w, d = self.footprint
        if w < 3 or d < 3:
            raise InvalidParams("footprint must be at least 3x3")
        if self.wall_height < 1:
            raise InvalidParams("wall height must be positive")

    def _layer(self, y: int, perimeter: bool) -> list[Position]:
        x0, _, z0 = self.origin
        w, d = self.footprint
        cells = []
        for x in range(x0, x0 + w):
            for z in range(z0, z0 + d):
                edge = x in (x0, x0 + w - 1) or z in (z0, z0 + d - 1)
                if edge or not perimeter:
                    cells.append((x, y, z))
        return cells

    @property
    def foundation(self) -> list[Position]:
        return self._layer(self.origin[1], perimeter=False)

    @property
    def walls(self) -> list[Position]:
        y0 = self.origin[1]
        return [c for h in range(1, self.wall_height + 1) for c in self._layer(y0 + h, perimeter=True)]

    @property
    def roof(self) -> list[Position]:
        return self._layer(self.origin[1] + self.wall_height + 1, perimeter=False)

    def parts(self) -> list[tuple[str, list[Position], str]]:
        return [
            ("foundation", self.foundation, self.foundation_block),
            ("walls", self.walls, self.wall_block),
            ("roof", self.roof, self.roof_block),
        ]

    def material_of(self, part: str) -> str:
        for name, _, block in self.parts():
            if name == part:
                return block
        raise KeyError(part)

    def cells_for(self, part: str, position=None) -> list[tuple[Position, str]]:
        key = _PART_NAMES.get(part.lower().strip())
        if key is None:
            raise BadTarget(f"the blueprint has no part called {part!r}")
        if position is not None and tuple(position) != tuple(self.origin):
            raise BadTarget(f"the shelter is at {render_position(self.origin)}, not {render_position(position)}")
        for name, cells, block in self.parts():
            if name == key:
                return [(c, block) for c in cells]
        raise BadTarget(part)

    def totals(self) -> dict[str, int]:
        """Items needed, by item name."""
        out: dict[str, int] = {}
        for _, cells, block in self.parts():
            item = "plank" if block == "plank_block" else block
            out[item] = out.get(item, 0) + len(cells)
        return out

    def to_context(self) -> dict:
        return {
            "origin": list(self.origin),
            "parts": [
                {"name": name, "count": len(cells), "material": "plank" if block == "plank_block" else block}
                for name, cells, block in self.parts()
            ],
        }

    def to_dict(self) -> dict:
        return {"origin": list(self.origin), "footprint": list(self.footprint), "wall_height": self.wall_height}


@dataclass
class ShelterCheck:
    complete: bool
    missing: list[Position]
    wrong_material: list[Position]

    def to_dict(self) -> dict:
        return {"complete": self.complete, "missing": [list(c) for c in self.missing],
                "wrong_material": [list(c) for c in self.wrong_material]}


def verify_shelter(world: WorldState, blueprint: ShelterBlueprint, absent: Iterable[Position] = ()) -> ShelterCheck:
    """Check every blueprint cell. ``absent`` cells count as not yet placed."""
    absent = set(absent)
    missing, wrong = [], []
    for _, cells, block in blueprint.parts():
        for c in cells:
            have = "air" if c in absent else world.get(c)
            if have == "air":
                missing.append(c)
            elif have != block:
                wrong.append(c)
    return ShelterCheck(not missing and not wrong, missing, wrong)


def stage_order_audit(event_log: Iterable[dict], blueprint: ShelterBlueprint) -> list[dict]:
    """Flag wall placements before the foundation is done and roof placements before the walls are."""
    part_of = {}
    for name, cells, _ in blueprint.parts():
        for c in cells:
            part_of[tuple(c)] = name
    need = {name: len(cells) for name, cells, _ in blueprint.parts()}
    done = {name: 0 for name in need}
    before = {"walls": "foundation", "roof": "walls"}
    violations = []
    for ev in event_log:
        if ev.get("kind") != "primitive":
            continue
        d = ev.get("detail", {})
        prim = d.get("primitive", {})
        if prim.get("type") != "PlaceBlock" or not d.get("ok", False):
            continue
        cell = tuple(prim.get("pos", ()))
        part = part_of.get(cell)
        if part is None:
            continue
        prereq = before.get(part)
        if prereq and done[prereq] < need[prereq]:
            violations.append({"tick": ev.get("tick"), "agent": ev.get("agent"), "cell": list(cell),
                               "part": part, "missing": prereq})
        done[part] += 1
    return violations


# -------------------------------------------------------------------- tasks


@dataclass
class TaskSpec:
    kind: str  # collection | shelter
    item: str | None = None
    quantity: int = 0
    blueprint: ShelterBlueprint | None = None
    starting_inventories: dict[str, dict[str, int]] = field(default_factory=dict)
    preset: str | None = None
    config_overrides: dict = field(default_factory=dict)
    nan_policy: dict | None = None

    def __post_init__(self):
        if self.kind == "collection":
            if not self.item:
                raise InvalidParams("collection task needs an item")
            if self.quantity <= 0:
                raise InvalidParams("quantity must be positive")
        elif self.kind == "shelter":
            if self.blueprint is None:
                raise InvalidParams("shelter task needs a blueprint")
        else:
            raise InvalidParams(f"unknown task kind {self.kind!r}")

    def objective(self) -> str:
        if self.kind == "collection":
            return f"mine {self.quantity} {plural(self.item, self.quantity)}"
        return f"build a shelter at {render_position(self.blueprint.origin)}"

    def label(self) -> str:
        if self.kind == "collection":
            return f"collection:{self.item}:{self.quantity}"
        w, d = self.blueprint.footprint
        return f"shelter:{w}x{d}x{self.blueprint.wall_height}"

    def inventories_for(self, graph: AgentGraph) -> dict[str, dict[str, int]]:
        """Starting inventories keyed by the org's agent names."""
        if self.starting_inventories:
            return {graph.resolve(k): dict(v) for k, v in self.starting_inventories.items()}
        if self.kind == "collection":
            return {a: {} for a in graph.agents}
        return deal_shelter_materials(self.blueprint, hands_on_order(graph))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "item": self.item, "quantity": self.quantity,
            "blueprint": self.blueprint.to_dict() if self.blueprint else None,
            "starting_inventories": self.starting_inventories, "preset": self.preset,
        }


def hands_on_order(graph: AgentGraph) -> list[str]:
    """Agents ordered for dealing materials: workers first, a tree root last."""
    workers = sorted((a for a in graph.agents if a != graph.root or graph.structure is not Structure.TREE), key=norm)
    if graph.structure is Structure.TREE and graph.root:
        workers.append(graph.root)
    return workers


def deal_shelter_materials(blueprint: ShelterBlueprint, agents: list[str]) -> dict[str, dict[str, int]]:
    """Two agents get half the wall planks each and a third gets the stone.

    With fewer than three agents the shares double up on the last agent.
    """
    walls = len(blueprint.walls)
    stone = len(blueprint.foundation) + len(blueprint.roof)
    out = {a: {} for a in agents}
    slots = [agents[min(i, len(agents) - 1)] for i in range(3)]
    half = walls // 2
    for who, item, n in ((slots[0], "plank", walls - half), (slots[1], "plank", half), (slots[2], "stone", stone)):
        out[who][item] = out[who].get(item, 0) + n
    return out


_ITEM_PRESETS = {"iron_ore": "iron"}


def make_task(kind: str, params: dict | None = None) -> TaskSpec:
    params = dict(params or {})
    if kind == "collection":
        try:
            item = canonical_item(str(params.pop("item")))
            quantity = int(params.pop("quantity"))
        except (KeyError, ValueError) as exc:
            raise InvalidParams(f"collection needs item and integer quantity: {exc}") from None
        if quantity <= 0:
            raise InvalidParams("quantity must be positive")
        preset = params.pop("preset", _ITEM_PRESETS.get(item))
        return TaskSpec("collection", item, quantity, preset=preset, **params)
    if kind == "shelter":
        origin = tuple(params.pop("origin", (-2, 64, -2)))
        footprint = tuple(params.pop("footprint", (5, 5)))
        height = int(params.pop("wall_height", 3))
        try:
            bp = ShelterBlueprint(origin, footprint, height)
        except (TypeError, ValueError) as exc:
            raise InvalidParams(str(exc)) from None
        return TaskSpec("shelter", blueprint=bp, preset=params.pop("preset", "shelter"), **params)
    raise InvalidParams(f"unknown task kind {kind!r}")


def parse_task(text: str) -> TaskSpec:
    """``collection:stone:50``, ``shelter`` or ``shelter:5x5x3``."""
    parts = text.strip().split(":")
    if parts[0] == "collection" and len(parts) == 3:
        return make_task("collection", {"item": parts[1], "quantity": parts[2]})
    if parts[0] == "shelter":
        params = {}
        if len(parts) > 1 and parts[1]:
            m = re.fullmatch(r"(\d+)x(\d+)(?:x(\d+))?", parts[1])
            if not m:
                raise InvalidParams(f"bad shelter size {parts[1]!r}")
            params["footprint"] = (int(m.group(1)), int(m.group(2)))
            if m.group(3):
                params["wall_height"] = int(m.group(3))
        return make_task("shelter", params)
    raise InvalidParams(f"cannot parse task {text!r}")


# ---------------------------------------------------------------- goal check


def collected(task: TaskSpec, world: WorldState) -> int:
    total = sum(b.count(task.item) for b in world.bodies.values())
    total += sum(c.get(task.item, 0) for c in world.chests.values())
    return total


def goal_progress(task: TaskSpec, world: WorldState, pending_gain: dict | None = None,
                  pending_cells: Iterable[Position] = ()) -> int:
    """Goal-relevant count: items held, or blueprint cells correctly placed."""
    if task.kind == "collection":
        return collected(task, world) - int((pending_gain or {}).get(task.item, 0))
    check = verify_shelter(world, task.blueprint, pending_cells)
    total = sum(len(c) for _, c, _ in task.blueprint.parts())
    return total - len(check.missing) - len(check.wrong_material)


def goal_satisfied(task: TaskSpec, world: WorldState, pending_gain: dict | None = None,
                   pending_cells: Iterable[Position] = ()) -> bool:
    if task.kind == "collection":
        return goal_progress(task, world, pending_gain) >= task.quantity
    return verify_shelter(world, task.blueprint, pending_cells).complete


# ---------------------------------------------------------------- experiment


@dataclass
class MatrixCell:
    org: str
    mode: str
    task: str
    seeds: list[int]
    repetitions: int = 1
    overrides: dict = field(default_factory=dict)
    name: str | None = None

    def label(self) -> str:
        if self.name:
            return self.name
        safe = lambda s: re.sub(r"[^A-Za-z0-9_.-]+", "-", s)
        return f"{safe(self.org)}__{safe(self.mode)}__{safe(self.task)}"


@dataclass
class ExperimentMatrix:
    cells: list[MatrixCell]
    title: str = "experiment"

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentMatrix":
        cells = []
        defaults = {k: doc[k] for k in ("seeds", "repetitions", "mode") if k in doc}
        for raw in doc.get("cells", []):
            spec = {**defaults, **raw}
            if "seeds" not in spec:
                raise InvalidParams(f"cell {raw} has no explicit seeds")
            for key in ("org", "mode", "task"):
                if key not in spec:
                    raise InvalidParams(f"cell {raw} lacks {key!r}")
            cells.append(MatrixCell(spec["org"], spec["mode"], spec["task"], [int(s) for s in spec["seeds"]],
                                    int(spec.get("repetitions", 1)), spec.get("overrides", {}), spec.get("name")))
        return cls(cells, doc.get("title", "experiment"))

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentMatrix":
        from .config import read_document

        return cls.from_dict(read_document(path))


def _fmt(x: float) -> str:
    return "NaN" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.2f}"


def run_experiment(matrix: ExperimentMatrix, output_dir: str | Path, backend=None, stamp: str | None = None,
                   config_path: str | Path | None = None) -> dict:
    """Run every cell x seed x repetition and write reports plus summary tables."""
    from .config import SimConfig
    from .scheduler import CollaborationMode, run

    stamp = stamp or datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    root = Path(output_dir) / stamp
    root.mkdir(parents=True, exist_ok=True)
    rows = []
    for cell in matrix.cells:
        for seed in cell.seeds:
            for rep in range(cell.repetitions):
                out = root / cell.label() / (str(seed) if cell.repetitions == 1 else f"{seed}-{rep}")
                row = {"cell": cell.label(), "org": cell.org, "mode": cell.mode, "task": cell.task, "seed": seed}
                try:
                    from .org_graph import parse_org

                    task = parse_task(cell.task)
                    base = SimConfig.from_file(config_path, task.preset) if config_path else None
                    report = run(parse_org(cell.org), CollaborationMode.parse(cell.mode), task, seed,
                                 config=base, overrides=cell.overrides, backend=backend)
                    report.write(out)
                    row.update(time_cost_min=report.time_cost_min, mpt=report.mean_prompt_times,
                               success=report.success, error="")
                except Exception as exc:  # a failed cell is recorded, the matrix continues
                    out.mkdir(parents=True, exist_ok=True)
                    (out / "error.txt").write_text(f"{type(exc).__name__}: {exc}\n")
                    row.update(time_cost_min=float("nan"), mpt=float("nan"), success=False,
                               error=f"{type(exc).__name__}: {exc}")
                rows.append(row)
    summary = summarize(rows)
    (root / "summary.md").write_text(summary["markdown"])
    (root / "summary.csv").write_text(summary["csv"])
    (root / "runs.json").write_text(json.dumps(rows, indent=2, sort_keys=True, default=str))
    return {"dir": str(root), "rows": rows, **summary}


def summarize(rows: list[dict]) -> dict:
    """Mean TC and mPT per cell, laid out with one column per cell (TC row, mPT row)."""
    groups: dict[str, list[dict]] = {}
    for r in rows:
        groups.setdefault(r["cell"], []).append(r)
    table = []
    for cell, rs in groups.items():
        tcs = [r["time_cost_min"] for r in rs]
        mpts = [r["mpt"] for r in rs]
        nan = any(t is None or math.isnan(t) for t in tcs)
        table.append({
            "cell": cell,
            "runs": len(rs),
            "successes": sum(1 for r in rs if r["success"]),
            "tc": float("nan") if nan else sum(tcs) / len(tcs),
            "mpt": sum(mpts) / len(mpts) if mpts else float("nan"),
        })
    if not table:
        return {"table": [], "markdown": "No runs.\n", "csv": "cell,runs,successes,tc_min,mpt\n"}
    head = "| metric | " + " | ".join(t["cell"] for t in table) + " |"
    sep = "|---|" + "---|" * len(table)
    tc_row = "| TC (min) | " + " | ".join(_fmt(t["tc"]) for t in table) + " |"
    mpt_row = "| mPT | " + " | ".join(_fmt(t["mpt"]) for t in table) + " |"
    md = "\n".join([head, sep, tc_row, mpt_row]) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cell", "runs", "successes", "tc_min", "mpt"])
    for t in table:
        w.writerow([t["cell"], t["runs"], t["successes"], _fmt(t["tc"]), _fmt(t["mpt"])])
    return {"table": table, "markdown": md, "csv": buf.getvalue()}
