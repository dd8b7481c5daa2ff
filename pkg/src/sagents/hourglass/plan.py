"""Plan state (the hourglass bottleneck) and the planner response formats."""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field

from ..grammar import AgentAction
from ..org_graph import norm


class MalformedPlan(ValueError):
    pass


class UnparseableTodoList(ValueError):
    pass


@dataclass(frozen=True)
class Assignment:
    agent: str
    task: str

    def render(self) -> str:
        return f"{self.agent} {self.task}."


@dataclass(frozen=True)
class Stage:
    title: str
    assignments: tuple[Assignment, ...]

    def render(self, number: int) -> str:
        head = f"Stage {number}: {self.title}"
        return "\n".join([head] + [f"    {a.render()}" for a in self.assignments])

    def text(self) -> str:
        return self.render(1)

    def agents(self) -> list[str]:
        return [a.agent for a in self.assignments]

    def same_content(self, other: "Stage") -> bool:
        key = lambda s: [(norm(a.agent), " ".join(a.task.lower().split())) for a in s.assignments]
        return key(self) == key(other)

    def to_dict(self) -> dict:
        return {"title": self.title, "assignments": [[a.agent, a.task] for a in self.assignments]}


@dataclass
class PlanState:
    objective: str
    analysis: str = ""
    long_term_plan: list[Stage] = field(default_factory=list)
    task_at_hand: Stage | None = None
    informer: str | None = None
    inventory_beliefs: dict[str, dict[str, int]] = field(default_factory=dict)

    def check(self, one_per_agent: bool = False) -> None:
        if self.task_at_hand is not None and self.long_term_plan:
            if not any(self.task_at_hand.same_content(s) for s in self.long_term_plan):
                raise MalformedPlan("task at hand is not a stage of the long-term plan")
        if one_per_agent:
            for stage in self.long_term_plan:
                names = [norm(a) for a in stage.agents()]
                if len(names) != len(set(names)):
                    raise MalformedPlan(f"stage {stage.title!r} gives one agent several tasks")

    def stage_index(self) -> int | None:
        if self.task_at_hand is None:
            return None
        for i, s in enumerate(self.long_term_plan):
            if s.same_content(self.task_at_hand):
                return i
        return None

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "analysis": self.analysis,
            "long_term_plan": [s.to_dict() for s in self.long_term_plan],
            "task_at_hand": self.task_at_hand.to_dict() if self.task_at_hand else None,
            "informer": self.informer,
            "inventory_beliefs": self.inventory_beliefs,
        }


def render_plan(plan: PlanState, leaf: bool = False) -> str:
    inv_label = "Current inventory" if leaf else "Current inventory of employers"
    stages = "\n".join(s.render(i + 1) for i, s in enumerate(plan.long_term_plan)) or "None"
    if plan.task_at_hand is None:
        at_hand = "None"
    else:
        idx = plan.stage_index()
        at_hand = plan.task_at_hand.render((idx or 0) + 1)
    return (
        f"{inv_label}: {json.dumps(plan.inventory_beliefs, sort_keys=True)}\n"
        f"Objective: {plan.objective}\n"
        f"Analysis: {plan.analysis}\n"
        f"Long term plan:\n{stages}\n"
        f"The task at hand:\n{at_hand}\n"
        f"Informer is {plan.informer or 'None'}\n"
    )


_SECTIONS = [
    ("inventory", re.compile(r"^\s*current inventory(?: of employ(?:er|ee)s)?\s*:\s*(.*)$", re.I)),
    ("objective", re.compile(r"^\s*objective\s*:\s*(.*)$", re.I)),
    ("analysis", re.compile(r"^\s*analysis\s*:\s*(.*)$", re.I)),
    ("plan", re.compile(r"^\s*long[\s-]*term plan\s*:\s*(.*)$", re.I)),
    ("at_hand", re.compile(r"^\s*the task at hand\s*:\s*(.*)$", re.I)),
    ("informer", re.compile(r"^\s*informer is\s*:?\s*(.*)$", re.I)),
]
_STAGE_RE = re.compile(r"^\s*(?:stage|step)\b\s*(?:\d+)?\s*(?:\([^)]*\))?\s*:?\s*(.*)$", re.I)


def _parse_stages(lines: list[str]) -> list[Stage]:
    stages: list[Stage] = []
    title = None
    assigns: list[Assignment] = []
    for raw in lines:
        line = raw.strip()
        if not line or line == "...":
            continue
        m = _STAGE_RE.match(line)
        if m:
            if title is not None:
                stages.append(Stage(title, tuple(assigns)))
            title, assigns = m.group(1).strip(), []
            continue
        if title is None:
            title = ""
        words = line.rstrip(".").split()
        if len(words) < 2:
            continue
        assigns.append(Assignment(words[0].strip(",:"), " ".join(words[1:])))
    if title is not None:
        stages.append(Stage(title, tuple(assigns)))
    return stages


def parse_plan(text: str) -> PlanState:
    buckets: dict[str, list[str]] = {}
    current = None
    for line in text.splitlines():
        for name, pattern in _SECTIONS:
            m = pattern.match(line)
            if m:
                current = name
                buckets[name] = [m.group(1)] if m.group(1).strip() else []
                break
        else:
            if current is not None:
                buckets[current].append(line)
    for required in ("objective", "plan", "at_hand"):
        if required not in buckets:
            raise MalformedPlan(f"response has no {required!r} section")

    beliefs: dict[str, dict[str, int]] = {}
    inv_text = " ".join(buckets.get("inventory", [])).strip()
    if inv_text.startswith("{"):
        try:
            beliefs = json.loads(inv_text)
        except json.JSONDecodeError:
            beliefs = {}

    long_term = _parse_stages(buckets["plan"])
    at_hand_lines = [l for l in buckets["at_hand"] if l.strip()]
    task_at_hand = None
    if at_hand_lines and at_hand_lines[0].strip().lower().rstrip(".") != "none":
        found = _parse_stages(at_hand_lines)
        if found:
            task_at_hand = found[0]
    informer = " ".join(buckets.get("informer", [])).strip() or None
    if informer and informer.lower() == "none":
        informer = None
    return PlanState(
        objective=" ".join(l.strip() for l in buckets["objective"] if l.strip()),
        analysis=" ".join(l.strip() for l in buckets.get("analysis", []) if l.strip()),
        long_term_plan=long_term,
        task_at_hand=task_at_hand,
        informer=informer.split()[0] if informer else None,
        inventory_beliefs=beliefs,
    )


def parse_todo_list(text: str) -> list[str]:
    """Strict JSON array of strings, falling back to the first bracketed array."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        m = re.search(r"\[[^\[\]]*\]", text, re.S)
        if not m:
            raise UnparseableTodoList(f"no JSON array in {text[:120]!r}") from None
        try:
            doc = json.loads(m.group(0))
        except json.JSONDecodeError as exc:
            raise UnparseableTodoList(str(exc)) from None
    if not isinstance(doc, list) or not all(isinstance(t, str) for t in doc):
        raise UnparseableTodoList("todo list must be a JSON array of strings")
    return doc


_USING_RE = re.compile(r"\s+using\s+(.+)$", re.I)
_SOURCE_RE = re.compile(r"^\s*(\d+)\s+(.+?)\s+from\s+(\S+)\s*$", re.I)


def split_using(task: str) -> tuple[str, list[tuple[int, str, str]]]:
    """Split "build 13 foundation at (..) using 13 stones from leader" into the
    task proper and its (quantity, item, source) material clauses."""
    m = _USING_RE.search(task)
    if not m:
        return task, []
    sources = []
    for clause in re.split(r"\s*(?:,|\band\b)\s*", m.group(1)):
        s = _SOURCE_RE.match(clause)
        if s:
            sources.append((int(s.group(1)), s.group(2), s.group(3)))
    return task[: m.start()], sources


class ActionQueue:
    """FIFO of parsed todos plus the attempt counter for the current task."""

    def __init__(self):
        self.pending: deque[tuple[str, AgentAction]] = deque()
        self.attempts_for_current_task = 0
        self._task_key: str | None = None

    def __len__(self) -> int:
        return len(self.pending)

    def load(self, task_key: str, items: list[tuple[str, AgentAction]]) -> None:
        if task_key != self._task_key:
            self._task_key = task_key
            self.attempts_for_current_task = 0
        self.attempts_for_current_task += 1
        self.pending = deque(items)

    def pop(self) -> tuple[str, AgentAction]:
        return self.pending.popleft()

    def clear(self) -> None:
        self.pending.clear()
