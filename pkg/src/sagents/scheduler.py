"""Discrete-event runtime for an organization under one collaboration mode.

Agents are cooperative logical processes. One heap of (tick, seq) events is
the serialization point; agents touch the world and the message pool only
while one of their events is being processed.
"""

from __future__ import annotations

import heapq
import json
import math
import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

from .backends import make_backend
from .comms import MessagePool, MessageRecord
from .config import SimConfig
from .harness import TaskSpec, goal_progress, goal_satisfied, verify_shelter
from .hourglass.agent import COMMISSIONER, AgentEnv, HourglassAgent, _prim_dict
from .hourglass.monitor import TaskStatus
from .org_graph import AgentGraph, Structure, norm, validate
from .world import BLOCK_KINDS, WorldState, block_yield, generate_world


class InvalidOrganization(ValueError):
    pass


class TaskUndefined(ValueError):
    pass


class CausalityError(RuntimeError):
    pass


class CollaborationMode(str, Enum):
    RELAY = "relay"
    ROUND_BASED = "roundbased"
    NON_OBSTRUCTIVE = "nonobstructive"

    @classmethod
    def parse(cls, text) -> "CollaborationMode":
        if isinstance(text, cls):
            return text
        key = str(text).lower().replace("-", "").replace("_", "").replace(" ", "")
        aliases = {"obstructive": "roundbased", "round": "roundbased", "async": "nonobstructive"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise ValueError(f"unknown collaboration mode {text!r}") from None


# ------------------------------------------------------------------ events


@dataclass(order=True, frozen=True)
class SimEvent:
    at: int
    seq: int
    agent: str = field(compare=False)
    payload: str = field(compare=False, default="step_due")


class EventLoop:
    def __init__(self):
        self._heap: list[SimEvent] = []
        self._seq = 0
        self.now = 0

    def __len__(self) -> int:
        return len(self._heap)

    def schedule(self, at: int, agent: str, payload: str = "step_due") -> SimEvent:
        if at < self.now:
            raise CausalityError(f"event for {agent} at {at} is before now={self.now}")
        self._seq += 1
        ev = SimEvent(at, self._seq, agent, payload)
        heapq.heappush(self._heap, ev)
        return ev

    def pop(self) -> SimEvent:
        ev = heapq.heappop(self._heap)
        self.now = ev.at
        return ev

    def peek(self) -> SimEvent | None:
        return self._heap[0] if self._heap else None


# -------------------------------------------------------------------- NaN


@dataclass
class ProgressTracker:
    best: int = 0
    last_progress: int = 0
    attempts: int = 0

    def observe(self, value: int, now: int) -> bool:
        if value > self.best:
            self.best = value
            self.last_progress = now
            self.attempts = 0
            return True
        return False

    def attempt(self) -> None:
        self.attempts += 1


def nan_check(tracker: ProgressTracker, now: int, stall_ticks: int = 2400, max_attempts: int = 5) -> bool:
    return (now - tracker.last_progress) > stall_ticks and tracker.attempts > max_attempts


# ----------------------------------------------------------------- report


@dataclass
class RunReport:
    org: dict
    mode: str
    task: dict
    seed: int
    config_hash: str
    success: bool
    nan: bool
    end_tick: int
    time_cost_min: float
    mean_prompt_times: float
    mpt_exact: Fraction
    per_agent_prompts: dict[str, int]
    per_agent_monitor_calls: dict[str, int]
    per_agent_busy_ticks: dict[str, int]
    event_log: list[dict]
    pool: list[dict] = field(default_factory=list)
    world_final: dict = field(default_factory=dict)
    shelter: dict | None = None

    def to_dict(self, include_log: bool = False) -> dict:
        doc = {
            "org": self.org,
            "mode": self.mode,
            "task": self.task,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "success": self.success,
            "nan": self.nan,
            "end_tick": self.end_tick,
            "time_cost_min": None if math.isnan(self.time_cost_min) else self.time_cost_min,
            "mean_prompt_times": self.mean_prompt_times,
            "mpt_exact": str(self.mpt_exact),
            "per_agent_prompts": self.per_agent_prompts,
            "per_agent_monitor_calls": self.per_agent_monitor_calls,
            "per_agent_busy_ticks": self.per_agent_busy_ticks,
            "shelter": self.shelter,
        }
        if include_log:
            doc["event_log"] = self.event_log
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def events_jsonl(self) -> str:
        return events_to_jsonl(self.event_log)

    def write(self, out: str | Path) -> Path:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json() + "\n")
        (out / "events.jsonl").write_text(self.events_jsonl())
        (out / "pool.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in self.pool))
        (out / "world_final.json").write_text(json.dumps(self.world_final, sort_keys=True) + "\n")
        return out


def events_to_jsonl(events: Iterable[dict]) -> str:
    return "".join(json.dumps(e, sort_keys=True, separators=(",", ":")) + "\n" for e in events)


def read_events(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


@dataclass
class Metrics:
    agents: list[str]
    end_tick: int
    nan: bool
    success: bool
    time_cost_min: float
    mpt: Fraction
    prompts: dict[str, int]
    monitors: dict[str, int]
    busy: dict[str, int]


def collect_metrics(events: Sequence[dict]) -> Metrics:
    """Aggregate an event log. Pure: the same log always yields the same metrics."""
    agents: list[str] = []
    end = 0
    nan = False
    success = False
    for ev in events:
        if ev["kind"] == "run_start":
            agents = list(ev["detail"]["agents"])
        elif ev["kind"] == "run_end":
            end = int(ev["tick"])
            success = bool(ev["detail"].get("success"))
            nan = bool(ev["detail"].get("nan"))
    if not end and events:
        end = max(int(e["tick"]) for e in events)
    prompts = {a: 0 for a in agents}
    monitors = {a: 0 for a in agents}
    busy = {a: 0 for a in agents}
    for ev in events:
        a = ev.get("agent")
        if a not in prompts:
            continue
        kind = ev["kind"]
        if kind == "plan":
            prompts[a] += 1
        elif kind == "monitor":
            monitors[a] += 1
        if kind in ("plan", "primitive"):
            ticks = int(ev["detail"].get("ticks", 0))
            busy[a] += max(0, min(ticks, end - int(ev["tick"])))
    mpt = Fraction(sum(prompts.values()), len(agents)) if agents else Fraction(0)
    tc = float("nan") if (nan or not success) else end / 60
    return Metrics(agents, end, nan, success, tc, mpt, prompts, monitors, busy)


# -------------------------------------------------------------------- run


class RunEnv(AgentEnv):
    """Agent environment wired to the event loop, the baton and the log."""

    def __init__(self, runner: "_Runner", **kw):
        super().__init__(**kw)
        self.runner = runner

    def now(self) -> int:
        return self.runner.loop.now

    def log(self, agent: str, kind: str, detail: dict) -> None:
        self.runner.log(agent, kind, detail)

    def acquire(self, agent: str) -> bool:
        return self.runner.acquire(agent)

    def inject_failure(self, agent: str) -> bool:
        rate = self.config.failure_rate
        return rate > 0 and self.runner.failure_rng.random() < rate

    def on_primitive(self, agent: str, primitive, outcome) -> None:
        r = self.runner
        gained = dict(getattr(outcome, "gained", {}) or {})
        placed = [tuple(p) for p in getattr(outcome, "placed", []) or []]
        ticks = int(getattr(outcome, "ticks", 0))
        r.pending.append((r.loop.now + ticks, gained, placed))
        if hasattr(outcome, "transcript"):
            r.log(agent, "primitive", {"primitive": _prim_dict(primitive), "ok": True, "ticks": ticks,
                                       "gained": gained, "placed": [list(p) for p in placed]})

    def note_judgment(self, agent: str, task: str, status: TaskStatus) -> None:
        if status is TaskStatus.FAIL:
            self.runner.tracker.attempt()


class _Runner:
    def __init__(self, graph: AgentGraph, mode: CollaborationMode, task: TaskSpec, seed: int,
                 config: SimConfig, backend):
        self.graph = graph
        self.mode = mode
        self.task = task
        self.seed = seed
        self.config = config
        self.loop = EventLoop()
        self.events: list[dict] = []
        self.world: WorldState = generate_world(seed, config)
        self.pool = MessagePool(clock=lambda: self.loop.now)
        self.pool.listeners.append(self._on_message)
        self.failure_rng = random.Random(f"{seed}:failure")
        self.tracker = ProgressTracker()
        self.pending: list[tuple[int, dict, list]] = []
        self.state: dict[str, str] = {}
        self.scheduled: set[str] = set()
        self.baton: str | None = None
        self.blocked: list[str] = []
        exempt = graph.root if graph.structure is Structure.TREE else None
        self.relay_order = [a for a in graph.chain_order() if a != exempt]
        self.exempt = exempt
        self.agents = {a: HourglassAgent(a, graph) for a in graph.agents}
        self.env = RunEnv(self, world=self.world, pool=self.pool, graph=graph, backend=backend,
                          config=config, mode=mode.value, blueprint=task.blueprint)

    # -- plumbing

    def log(self, agent: str | None, kind: str, detail: dict) -> None:
        self.events.append({"tick": self.loop.now, "seq": len(self.events) + 1, "agent": agent,
                            "kind": kind, "detail": detail})

    def _wake(self, agent: str) -> None:
        if agent in self.scheduled:
            return
        self.scheduled.add(agent)
        self.loop.schedule(self.loop.now, agent)

    def _on_message(self, rec: MessageRecord) -> None:
        self.log(rec.speaker, "message", {"to": rec.respondent, "text": rec.message, "seq": rec.seq})
        for a in self.agents:
            if norm(a) == norm(rec.respondent) and self.state.get(a) == "wait":
                self._wake(a)

    def acquire(self, agent: str) -> bool:
        if self.mode is not CollaborationMode.RELAY or agent == self.exempt:
            return True
        if self.baton in (None, agent):
            if self.baton is None:
                self.log(agent, "baton", {"action": "acquire"})
            self.baton = agent
            if agent in self.blocked:
                self.blocked.remove(agent)
            return True
        if agent not in self.blocked:
            self.blocked.append(agent)
        return False

    def _release(self, agent: str) -> None:
        if self.baton != agent:
            return
        self.baton = None
        self.log(agent, "baton", {"action": "release"})
        if self.blocked:
            nxt = min(self.blocked, key=self.relay_order.index)
            self._wake(nxt)

    # -- setup

    def _spawn(self) -> None:
        inventories = self.task.inventories_for(self.graph)
        entry = self.graph.root
        others = [a for a in self.graph.agents if a != entry]
        wc = self.config.world
        self.world.add_body(entry, (0, wc.surface_y, 0), inventories.get(entry))
        for k, a in enumerate(others):
            ang = 2 * math.pi * k / len(others)
            pos = (round(wc.spawn_ring_radius * math.cos(ang)), wc.surface_y, round(wc.spawn_ring_radius * math.sin(ang)))
            self.world.add_body(a, pos, inventories.get(a))
        for name, agent in self.agents.items():
            agent.beliefs = {e: dict(self.world.body(e).inventory) for e in agent.employees()}

    def _check_goal(self, now: int) -> bool:
        self.pending = [p for p in self.pending if p[0] > now]
        gain: dict[str, int] = {}
        cells = []
        for _, g, placed in self.pending:
            for k, v in g.items():
                gain[k] = gain.get(k, 0) + v
            cells.extend(placed)
        value = goal_progress(self.task, self.world, gain, cells)
        if self.tracker.observe(value, now):
            self.log(None, "progress", {"value": value})
        return goal_satisfied(self.task, self.world, gain, cells)

    # -- main loop

    def run(self) -> tuple[bool, bool]:
        self._spawn()
        self.log(None, "run_start", {
            "agents": list(self.graph.agents), "mode": self.mode.value, "seed": self.seed,
            "task": self.task.label(), "config_hash": self.config.hash(),
        })
        entry = self.graph.root
        self.pool.post(COMMISSIONER, entry, f"{entry}, please {self.task.objective()}")
        self.log(COMMISSIONER, "objective", {"to": entry, "text": self.task.objective()})
        self._wake(entry)
        for a in self.agents:
            self.state.setdefault(a, "wait")
        self.state[entry] = "due"
        max_ticks = self.config.max_ticks
        while True:
            if self._check_goal(self.loop.now):
                return True, False
            if nan_check(self.tracker, self.loop.now, self.config.nan_stall_ticks, self.config.nan_max_attempts):
                self.log(None, "nan", {"reason": "stall", "attempts": self.tracker.attempts,
                                       "since": self.tracker.last_progress})
                return False, True
            if not len(self.loop):
                if self.pending:  # let in-flight primitives land
                    self.loop.now = min(p[0] for p in self.pending)
                    continue
                self.log(None, "nan", {"reason": "quiescent"})
                return False, True
            nxt = self.loop.peek()
            if nxt.at > max_ticks:
                self.loop.now = max_ticks
                self.log(None, "nan", {"reason": "time_cap"})
                return False, True
            if self.pending and min(p[0] for p in self.pending) < nxt.at:
                self.loop.now = min(p[0] for p in self.pending)
                continue
            ev = self.loop.pop()
            self.world.clock = ev.at
            self.scheduled.discard(ev.agent)
            self._step(ev.agent)

    def _step(self, name: str) -> None:
        agent = self.agents[name]
        out = agent.step(self.env)
        self.state[name] = out.kind
        if out.kind == "busy":
            self.scheduled.add(name)
            self.loop.schedule(self.loop.now + out.ticks, name)
        elif out.kind == "wait":
            self._release(name)
            if agent.inbox or self._has_unread(agent):
                self._wake(name)


    def _has_unread(self, agent: HourglassAgent) -> bool:
        recs = self.pool.records
        return any(r.seq > agent.cursor.last_seen and norm(r.respondent) == norm(agent.name) for r in recs)


def check_task(task: TaskSpec, config: SimConfig) -> None:
    if not isinstance(task, TaskSpec):
        raise TaskUndefined(f"not a task: {task!r}")
    if task.kind == "collection":
        minable = {block_yield(k) for k in BLOCK_KINDS} - {"air"}
        if task.item not in minable and config.recipe_for(task.item) is None:
            raise TaskUndefined(f"{task.item} can be neither mined nor crafted")


def run(org: AgentGraph, mode, task: TaskSpec, seed: int, config: SimConfig | None = None,
        backend=None, overrides: dict | None = None) -> RunReport:
    """Run one organization on one task until the goal holds or the NaN rule fires."""
    mode = CollaborationMode.parse(mode)
    report = validate(org)
    if not report.is_valid:
        raise InvalidOrganization("; ".join(report.violations))
    if config is None:
        config = SimConfig.load(task.config_overrides or None, preset=task.preset)
    elif task.config_overrides:
        config = config.with_overrides(task.config_overrides)
    if overrides:
        config = config.with_overrides(overrides)
    check_task(task, config)
    backend = backend or make_backend("oracle")

    runner = _Runner(org, mode, task, seed, config, backend)
    success, nan = runner.run()
    runner.log(None, "run_end", {"success": success, "nan": nan})
    m = collect_metrics(runner.events)
    for name, agent in runner.agents.items():
        m.monitors[name] = agent.monitor_count
    shelter = None
    if task.blueprint is not None:
        shelter = verify_shelter(runner.world, task.blueprint).to_dict()
    return RunReport(
        org=org.to_dict(), mode=mode.value, task=task.to_dict(), seed=seed, config_hash=config.hash(),
        success=success, nan=nan, end_tick=m.end_tick, time_cost_min=m.time_cost_min,
        mean_prompt_times=float(m.mpt), mpt_exact=m.mpt, per_agent_prompts=m.prompts,
        per_agent_monitor_calls=m.monitors, per_agent_busy_ticks=m.busy, event_log=runner.events,
        pool=[r.__dict__ for r in runner.pool.records], world_final=runner.world.snapshot(), shelter=shelter,
    )


def replay(events: Sequence[dict]) -> Metrics:
    """Recompute metrics from a stored event log."""
    return collect_metrics(events)


# --------------------------------------------------------- duration matrix


def duration_matrix_tc(matrix: Sequence[Sequence], mode) -> Fraction:
    """Completion time of fixed work blocks ``matrix[round][agent]`` under a mode.

    RoundBased barriers every round, so it pays the slowest agent each round.
    Relay runs every block one after another. NonObstructive lets each agent
    run its blocks back to back; an agent that runs dry takes over half of the
    busiest agent's remaining work, at most once per round of the matrix.
    """
    mode = CollaborationMode.parse(mode)
    rows = [[Fraction(x) for x in row] for row in matrix]
    if not rows:
        return Fraction(0)
    if mode is CollaborationMode.ROUND_BASED:
        return sum((max(r) for r in rows), Fraction(0))
    if mode is CollaborationMode.RELAY:
        return sum((sum(r) for r in rows), Fraction(0))
    n = len(rows[0])
    finish = [sum((r[i] for r in rows), Fraction(0)) for i in range(n)]
    steals = [0] * n
    budget = len(rows)
    now = Fraction(0)
    while True:
        running = [i for i in range(n) if finish[i] > now]
        if not running:
            return max(finish)
        idle = [i for i in range(n) if finish[i] <= now and steals[i] < budget]
        if idle:
            thief = idle[0]
            victim = max(running, key=lambda i: (finish[i], -i))
            share = (finish[victim] - now) / 2
            finish[victim] -= share
            finish[thief] = now + share
            steals[thief] += 1
            continue
        now = min(finish[i] for i in running)
