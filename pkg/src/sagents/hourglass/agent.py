"""The hourglass agent: perception and conversation in, one objective at the
bottleneck, stages and an action queue out.

An agent is a step-based logical process. Each ``step`` runs until the agent
either commits to something that takes simulated time (a world primitive or a
planning call) or has nothing to do until a message arrives.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterator

from ..backends.base import BackendRequest
from ..backends.templates import LEAF_ACTION_EXAMPLE, ROOT_ACTION_EXAMPLE, render_prompt
from ..comms import (
    FAIL, INSTRUCTION, START, SUCCESS, Conversation, ConversationCursor, MessagePool, MessageRecord,
    inventory_report, render_transcript,
)
from ..grammar import ActionKind, AgentAction, TodoError, Verb, parse_todo, render_todo
from ..org_graph import ENVIRONMENT, AgentGraph, Structure, command_targets, norm
from ..world import (
    BadTarget, CraftItem, Equip, GiveItem, MineBlock, MoveTo, PlaceBlock, SmeltItem,
    WorldError, WorldState, canonical_item, item_block,
)
from .monitor import EmptyTask, ProgressJudgment, TaskStatus, judge_progress, parse_judgment, parse_inventory_report
from .plan import (
    ActionQueue, MalformedPlan, PlanState, Stage, UnparseableTodoList, parse_plan, parse_todo_list, split_using,
)

COMMISSIONER = "commissioner"


class AuthorityViolation(PermissionError):
    pass


class Role(str, Enum):
    ROOT = "root"
    COORDINATOR = "coordinator"
    CHAIN = "chain"
    LEAF = "leaf"

    @property
    def manages(self) -> bool:
        return self in (Role.ROOT, Role.COORDINATOR)


@dataclass
class StepOutcome:
    kind: str  # busy | wait | blocked
    ticks: int = 0
    reason: str = ""


def role_for(graph: AgentGraph, agent: str, informer: str | None) -> Role:
    if graph.structure is Structure.TREE and graph.root and norm(graph.root) == norm(agent):
        return Role.ROOT
    if graph.structure is Structure.GRAPH and not graph.has_agent(informer or ""):
        return Role.COORDINATOR
    if graph.structure is Structure.CHAIN:
        return Role.CHAIN
    return Role.LEAF


class AgentEnv:
    """What an agent may touch. The scheduler supplies a richer subclass."""

    def __init__(self, world: WorldState, pool: MessagePool, graph: AgentGraph, backend,
                 config=None, mode: str = "nonobstructive", blueprint=None):
        self.world = world
        self.pool = pool
        self.graph = graph
        self.backend = backend
        self.config = config or world.config
        self.mode = mode
        self.blueprint = blueprint

    def now(self) -> int:
        return self.world.clock

    def log(self, agent: str, kind: str, detail: dict) -> None:
        pass

    def acquire(self, agent: str) -> bool:
        return True

    def inject_failure(self, agent: str) -> bool:
        return False

    def on_primitive(self, agent: str, primitive, outcome) -> None:
        pass

    def note_judgment(self, agent: str, task: str, status: TaskStatus) -> None:
        pass

    def blueprint_cells(self, part: str, position) -> list[tuple[tuple[int, int, int], str]]:
        if self.blueprint is None:
            raise BadTarget(f"nothing to build here: no blueprint for {part}")
        return self.blueprint.cells_for(part, position)


# ------------------------------------------------------------- planning calls


def _call(backend, request: BackendRequest, parse: Callable[[str], Any], error: type[Exception]):
    """One call plus at most one regeneration when the text does not parse."""
    last = None
    for _ in range(2):
        response = backend.complete(request)
        try:
            return parse(response.text), response
        except (ValueError, KeyError) as exc:
            last = exc
    raise error(f"{request.template_id} output did not parse after one regeneration: {last}")


def monitor_progress(task: str, conversation, chest_info: dict | None = None, backend=None,
                     agents=()) -> ProgressJudgment:
    if not task or not task.strip():
        raise EmptyTask("task to be inquired is blank")
    if backend is None:
        return judge_progress(task, conversation, chest_info, agents)
    records = list(conversation or [])
    ctx = {
        "task": task,
        "lines": [[r.time, r.speaker, r.message] for r in records],
        "chest": chest_info,
        "agents": list(agents),
    }
    text = render_transcript(records)
    prompt = render_prompt("monitor", {"task": task, "conversation": text or "None",
                                       "chest": json.dumps(chest_info) if chest_info else "none"})
    judgment, _ = _call(backend, BackendRequest("monitor", prompt, ctx), parse_judgment, ValueError)
    return judgment


def plan_tasks(role: Role, ctx: dict, backend) -> PlanState:
    template = "task_root" if role.manages else "task_leaf"
    prev = ctx.get("previous_plan")
    employees = ctx.get("employees") or []
    slots = {
        "name": ctx["name"],
        "employment": str(employees + ([ctx["name"]] if ctx.get("hands_on") else [])) if role.manages else "",
        "conversation": ctx.get("conversation") or "None",
        "previous_objective": prev["objective"] if prev else "None",
        "previous_plan": _render_prev(prev),
        "previous_progress": (ctx.get("progress") or {}).get("text", "None"),
        "inventory": json.dumps(ctx.get("beliefs") if role.manages else ctx.get("inventory"), sort_keys=True),
    }
    request = BackendRequest(template, render_prompt(template, slots), ctx)

    def parse(text):
        plan = parse_plan(text)
        plan.check(one_per_agent=role is Role.ROOT)
        return plan

    plan, _ = _call(backend, request, parse, MalformedPlan)
    if role is Role.ROOT and any(norm(a.agent) == norm(ctx["name"]) for s in plan.long_term_plan for a in s.assignments):
        raise MalformedPlan("root plan assigns work to the root itself")
    return plan


def _render_prev(prev: dict | None) -> str:
    if not prev:
        return "None"
    lines = []
    for i, s in enumerate(prev.get("long_term_plan", [])):
        lines.append(f"Stage {i + 1}: {s['title']}")
        lines.extend(f"    {a} {t}." for a, t in s["assignments"])
    return "\n".join(lines) or "None"


def plan_actions(task_at_hand: Stage, role: Role, backend, ctx: dict) -> list[str]:
    if task_at_hand is None:
        raise ValueError("no task at hand to translate")
    employees = ctx.get("employees") or []
    slots = {
        "name": ctx["name"],
        "profile": f"{role.value} of a {ctx.get('structure', 'tree')} organization",
        "employment": ", ".join(employees) or "nobody",
        "example": ROOT_ACTION_EXAMPLE if role.manages or role is Role.CHAIN else LEAF_ACTION_EXAMPLE,
        "task": task_at_hand.text(),
    }
    actx = dict(ctx, stage=task_at_hand.to_dict(), role=role.value)
    request = BackendRequest("action", render_prompt("action", slots), actx)
    todos, _ = _call(backend, request, parse_todo_list, UnparseableTodoList)
    return todos


# -------------------------------------------------------------------- agent


_PLEASE_RE = re.compile(r"^\s*(\S+?)\s*,\s*please\s+(.+?)\s*$", re.I | re.S)


@dataclass
class Objective:
    text: str
    informer: str
    baseline: int = 0
    posted: set = field(default_factory=set)


@dataclass
class AssignmentRecord:
    agent: str
    task: str
    issued_seq: int
    status: TaskStatus = TaskStatus.UNKNOWN


@dataclass
class _Execution:
    todo: str
    action: AgentAction
    primitives: Iterator
    error: str | None = None


class HourglassAgent:
    def __init__(self, name: str, graph: AgentGraph):
        self.name = name
        self.graph = graph
        self.cursor = ConversationCursor(name)
        self.seen: list[MessageRecord] = []
        self.inbox: deque[tuple[str, str]] = deque()
        self.queue = ActionQueue()
        self.plan: PlanState | None = None
        self.objective: Objective | None = None
        self.role: Role = role_for(graph, name, None)
        self.current: _Execution | None = None
        self.judgment: ProgressJudgment | None = None
        self.stage_seq = 0
        self.last_plan_seq = 0
        self.prompt_count = 0
        self.monitor_count = 0
        self.assignments: dict[str, AssignmentRecord] = {}
        self.failures: dict[str, int] = {}
        self.beliefs: dict[str, dict[str, int]] = {}

    # -- helpers

    def employees(self) -> list[str]:
        return sorted((t for t in command_targets(self.graph, self.name) if t != ENVIRONMENT), key=norm)

    def successors(self) -> list[str]:
        if self.graph.structure is not Structure.CHAIN:
            return []
        order = self.graph.chain_order()
        idx = [norm(a) for a in order].index(norm(self.name))
        return order[idx + 1:]

    def idle(self) -> bool:
        return self.objective is None and not self.inbox and self.current is None and not self.queue

    def _post(self, env: AgentEnv, to: str | None, message: str) -> None:
        if to is None or norm(to) == norm(self.name):
            return
        env.pool.post(self.name, to, message)

    def _read_inbox(self, env: AgentEnv) -> None:
        conv, self.cursor = env.pool.conversation_since(self.cursor)
        for rec in conv.records:
            self.seen.append(rec)
            if norm(rec.respondent) != norm(self.name):
                continue
            if not env.graph.has_agent(rec.speaker):
                self.inbox.append((rec.message.strip(), rec.speaker))
                continue
            m = _PLEASE_RE.match(rec.message)
            if m and norm(m.group(1)) == norm(self.name):
                self.inbox.append((m.group(2).rstrip("."), rec.speaker))
                continue
            inv = parse_inventory_report(rec.message)
            if inv is not None:
                self.beliefs[rec.speaker] = inv

    def _records_since(self, seq: int, speaker: str | None = None) -> list[MessageRecord]:
        return [r for r in self.seen if r.seq > seq and (speaker is None or norm(r.speaker) == norm(speaker))]

    def _chest(self, env: AgentEnv) -> dict | None:
        if self.role.manages and self.role is Role.ROOT:
            return None
        snap = env.world.perceive(self.name)
        merged: dict[str, int] = {}
        for contents in snap.nearby_chest_contents.values():
            for k, v in contents.items():
                merged[k] = merged.get(k, 0) + v
        return merged or None

    def _monitor(self, env: AgentEnv, task: str, records: list[MessageRecord]) -> ProgressJudgment:
        self.monitor_count += 1
        judgment = monitor_progress(task, records, self._chest(env), env.backend, env.graph.agents)
        env.log(self.name, "monitor", {"task": task, "status": judgment.status.value})
        return judgment

    # -- the step loop

    def step(self, env: AgentEnv) -> StepOutcome:
        self._read_inbox(env)
        for _ in range(10_000):
            if self.current is not None:
                out = self._advance_execution(env)
            elif self.queue:
                out = self._start_next_todo(env)
            else:
                out = self._think(env)
                if out is None and not (self.objective is None and self.inbox):
                    return StepOutcome("wait")
            if out is not None:
                return out
        raise RuntimeError(f"{self.name} made no progress in one step")

    def _start_next_todo(self, env: AgentEnv) -> StepOutcome | None:
        todo, action = self.queue.pending[0]
        if action.kind is ActionKind.DELEGATE:
            targets = {norm(t) for t in command_targets(env.graph, self.name)}
            if norm(action.target) not in targets:
                raise AuthorityViolation(f"{self.name} may not command {action.target}")
            self.queue.pop()
            target = env.graph.resolve(action.target)
            self._post(env, target, INSTRUCTION.format(target=target, todo=render_todo(action.inner)))
            env.log(self.name, "delegate", {"target": target, "todo": render_todo(action.inner)})
            return None
        if not env.acquire(self.name):
            return StepOutcome("blocked", reason="baton")
        self.queue.pop()
        informer = self.objective.informer if self.objective else None
        self._post(env, informer, START.format(task=todo))
        self.current = _Execution(todo, action, self._primitives(env, action))
        return None

    def _advance_execution(self, env: AgentEnv) -> StepOutcome | None:
        ex = self.current
        informer = self.objective.informer if self.objective else None
        if ex.error is not None:
            self._post(env, informer, FAIL.format(task=ex.todo))
            env.log(self.name, "todo", {"todo": ex.todo, "ok": False, "error": ex.error})
            self.current = None
            self.queue.clear()
            return None
        if not env.acquire(self.name):
            return StepOutcome("blocked", reason="baton")
        try:
            prim = next(ex.primitives)
        except StopIteration:
            self._post(env, informer, SUCCESS.format(task=ex.todo))
            env.log(self.name, "todo", {"todo": ex.todo, "ok": True})
            self.current = None
            return None
        except WorldError as exc:
            ex.error = str(exc)
            return StepOutcome("busy", exc.ticks) if exc.ticks else None
        if env.inject_failure(self.name):
            lost = env.config.lost_ticks
            ex.error = f"mishap while doing {type(prim).__name__}"
            env.log(self.name, "primitive", {"primitive": _prim_dict(prim), "ok": False, "ticks": lost,
                                             "error": ex.error, "injected": True})
            return StepOutcome("busy", lost)
        try:
            outcome = env.world.execute(self.name, prim)
        except WorldError as exc:
            ex.error = str(exc)
            env.log(self.name, "primitive", {"primitive": _prim_dict(prim), "ok": False, "ticks": exc.ticks,
                                             "error": str(exc), "gained": dict(getattr(exc, "gained", {}) or {})})
            if getattr(exc, "gained", None):
                env.on_primitive(self.name, prim, exc)
            return StepOutcome("busy", exc.ticks) if exc.ticks else None
        env.on_primitive(self.name, prim, outcome)
        return StepOutcome("busy", outcome.ticks)

    def _primitives(self, env: AgentEnv, action: AgentAction) -> Iterator:
        verb = action.verb
        item = canonical_item(action.item) if action.item else None
        qty = action.quantity
        if verb is Verb.MINE:
            for _ in range(qty or 1):
                yield MineBlock(item_block(item), 1)
        elif verb is Verb.CRAFT:
            yield CraftItem(item, qty or 1)
        elif verb is Verb.SMELT:
            yield SmeltItem(item, qty or 1)
        elif verb is Verb.EQUIP:
            yield Equip(item)
        elif verb is Verb.GIVE:
            yield GiveItem(self._body_name(env, action.target), item, qty or 1)
        elif verb is Verb.MOVETO:
            yield MoveTo(action.position)
        elif verb is Verb.BUILD:
            cells = env.blueprint_cells(action.item, action.position)
            limit = qty or len(cells)
            placed = 0
            for pos, kind in cells:
                if placed >= limit:
                    break
                if env.world.get(pos) != "air":
                    continue
                yield PlaceBlock(kind, pos)
                placed += 1
        else:
            raise BadTarget(f"{verb.value} is not available in this world")

    def _body_name(self, env: AgentEnv, name: str) -> str:
        for owner in env.world.bodies:
            if norm(owner) == norm(name):
                return owner
        raise BadTarget(f"no agent called {name}")

    # -- thinking: monitor, plan, act

    def _think(self, env: AgentEnv) -> StepOutcome | None:
        self._read_inbox(env)  # pick up what this agent just posted
        if self.objective is None:
            if not self.inbox:
                return None
            text, informer = self.inbox.popleft()
            self._adopt(env, text, informer)
            return self._plan(env)
        if self.role.manages:
            return self._think_manager(env)
        return self._think_worker(env)

    def _adopt(self, env: AgentEnv, text: str, informer: str) -> None:
        self.role = role_for(env.graph, self.name, informer)
        baseline = 0
        try:
            action = parse_todo(text)
            if action.item:
                baseline = env.world.body(self.name).count(canonical_item(action.item))
        except (TodoError, WorldError):
            pass
        self.objective = Objective(text, informer, baseline)
        self.plan = None
        self.judgment = None
        self.assignments = {}
        env.log(self.name, "objective", {"text": text, "informer": informer, "role": self.role.value})

    def _finish(self, env: AgentEnv, success: bool) -> None:
        obj = self.objective
        phrase = (SUCCESS if success else FAIL).format(task=obj.text)
        last = self._records_since(self.stage_seq, self.name)
        if not any(r.message == phrase for r in last):
            self._post(env, obj.informer, phrase)
        if self.role is not Role.ROOT:
            body = env.world.body(self.name)
            self._post(env, obj.informer, inventory_report(body.inventory, body.equipment))
        env.log(self.name, "objective_done", {"text": obj.text, "success": success})
        self.objective = None
        self.plan = None
        self.queue.clear()

    def _think_worker(self, env: AgentEnv) -> StepOutcome | None:
        if self.plan is None:  # planning was blocked on the baton
            return self._plan(env)
        stage = self.plan.task_at_hand
        if stage is None:
            self._finish(env, success=True)
            return None
        judgment = self._monitor(env, stage.text(), self._records_since(self.stage_seq))
        self.judgment = judgment
        env.note_judgment(self.name, stage.text(), judgment.status)
        if judgment.status is TaskStatus.SUCCESS:
            return self._plan(env, judgment)
        if judgment.status is TaskStatus.FAIL:
            if env.graph.has_agent(self.objective.informer):
                self._finish(env, success=False)
                return None
            return self._plan(env, judgment)
        return None

    def _think_manager(self, env: AgentEnv) -> StepOutcome | None:
        newly = []
        for key, rec in self.assignments.items():
            if rec.status is not TaskStatus.UNKNOWN:
                continue
            records = self._records_since(rec.issued_seq, rec.agent)
            j = self._monitor(env, f"{rec.agent} {split_using(rec.task)[0]}", records)
            if j.status is TaskStatus.UNKNOWN:
                continue
            rec.status = j.status
            newly.append(rec)
            env.note_judgment(self.name, f"{rec.agent} {rec.task}", j.status)
            self.failures[key] = self.failures.get(key, 0) + 1 if j.status is TaskStatus.FAIL else 0
        outstanding = [r for r in self.assignments.values() if r.status is TaskStatus.UNKNOWN]
        if self.plan is None or (self.plan.task_at_hand is None and not outstanding):
            self._finish(env, success=True)
            return None
        if not newly:
            return None
        if env.mode != "nonobstructive" and outstanding:
            env.log(self.name, "barrier_wait", {"outstanding": [r.agent for r in outstanding]})
            return None
        parts = [{"agent": r.agent, "task": r.task, "status": r.status.value} for r in self.assignments.values()]
        overall = "fail" if any(p["status"] == "fail" for p in parts) else (
            "success" if all(p["status"] == "success" for p in parts) else "unknown")
        text = "; ".join(f"{p['agent']} {p['task']}: {p['status']}" for p in parts)
        self.judgment = ProgressJudgment(text, TaskStatus(overall), overall)
        return self._plan(env, self.judgment, parts)

    def _context(self, env: AgentEnv, judgment: ProgressJudgment | None, parts=None) -> dict:
        body = env.world.body(self.name)
        employees = self.employees() if self.role.manages else []
        beliefs = {k: dict(v) for k, v in self.beliefs.items()}
        if self.role is Role.COORDINATOR:
            beliefs[self.name] = dict(body.inventory)
        records = self._records_since(self.last_plan_seq)
        progress = None
        if judgment is not None:
            progress = {"status": judgment.status.value, "text": judgment.rationale, "parts": parts or []}
        ctx = {
            "name": self.name,
            "role": self.role.value,
            "structure": env.graph.structure.value,
            "employees": employees,
            "hands_on": self.role is Role.COORDINATOR,
            "objective": self.objective.text,
            "informer": self.objective.informer,
            "previous_plan": self.plan.to_dict() if self.plan else None,
            "progress": progress,
            "inventory": dict(body.inventory),
            "equipment": list(body.equipment),
            "baseline": self.objective.baseline,
            "beliefs": beliefs,
            "successors": self.successors() if self.role is Role.CHAIN else [],
            "failures": dict(self.failures),
            "escalate_after": env.config.escalate_after,
            "tech": {k: env.config.raw[k] for k in ("recipes", "tool_tiers", "block_tiers")},
            "conversation": Conversation(self.name, records).render() if records else "None",
        }
        if env.blueprint is not None and self.role.manages:
            ctx["blueprint"] = env.blueprint.to_context()
        return ctx

    def _plan(self, env: AgentEnv, judgment: ProgressJudgment | None = None, parts=None) -> StepOutcome:
        if not self.role.manages and not env.acquire(self.name):
            return StepOutcome("blocked", reason="baton")
        ctx = self._context(env, judgment, parts)
        previous = self.plan
        plan = plan_tasks(self.role, ctx, env.backend)
        self.prompt_count += 1
        self.plan = plan
        self.last_plan_seq = len(env.pool)
        stage = plan.task_at_hand
        todos: list[str] = []
        if stage is not None:
            work = self._delta(env, stage) if self.role.manages else stage
            if work.assignments:
                todos = plan_actions(work, self.role, env.backend, ctx)
        items = []
        for t in todos:
            try:
                items.append((t, parse_todo(t)))
            except TodoError as exc:
                env.log(self.name, "bad_todo", {"todo": t, "error": str(exc)})
        self.queue.load(stage.text() if stage else "", items)
        self.stage_seq = len(env.pool)
        ticks = env.config.ticks.planning
        env.log(self.name, "plan", {
            "prompt": self.prompt_count, "ticks": ticks, "role": self.role.value,
            "stage": stage.to_dict() if stage else None, "todos": todos,
            "replanned": previous is not None,
        })
        return StepOutcome("busy", ticks, reason="planning")

    def _delta(self, env: AgentEnv, stage: Stage) -> Stage:
        seq = len(env.pool)
        fresh = []
        keep: dict[str, AssignmentRecord] = {}
        for a in stage.assignments:
            key = norm(a.agent)
            rec = self.assignments.get(key)
            if rec and rec.status is not TaskStatus.FAIL and " ".join(rec.task.split()) == " ".join(a.task.split()):
                keep[key] = rec
                continue
            keep[key] = AssignmentRecord(a.agent, a.task, seq)
            fresh.append(a)
        for key, rec in self.assignments.items():
            if key not in keep and rec.status is TaskStatus.UNKNOWN:
                keep[key] = rec
        self.assignments = keep
        return Stage(stage.title, tuple(fresh))


def agent_step(agent: HourglassAgent, world: WorldState, pool: MessagePool, backend, graph=None) -> StepOutcome:
    env = AgentEnv(world, pool, graph or agent.graph, backend)
    return agent.step(env)


def _prim_dict(prim) -> dict:
    d = {"type": type(prim).__name__}
    d.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in vars(prim).items()})
    return d
