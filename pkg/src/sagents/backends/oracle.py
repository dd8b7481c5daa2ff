"""Scripted planning oracle: a deterministic stand-in for the language model.

Every answer is a pure function of the request context and is emitted as
text in the same response formats a language model is asked for, so the
hourglass parsers see identical input whichever backend is in use.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from ..comms import MessageRecord
from ..grammar import TodoError, Verb, parse_todo, plural, render_position
from ..hourglass.monitor import item_count, judge_progress, render_judgment
from ..hourglass.plan import Assignment, PlanState, Stage, render_plan, split_using
from ..org_graph import norm
from ..world import MAINHAND, canonical_item
from .base import BackendRequest, BackendResponse
from .techtree import TechTable, Unobtainable, obtain, tool_stages


class UnsupportedTask(ValueError):
    pass


@dataclass(frozen=True)
class ScriptedOracleConfig:
    split_policy: str = "largest_remainder"
    stage_titles: dict = field(default_factory=lambda: {
        "foundation": "Build the foundation", "walls": "Build the walls", "roof": "Build the roof",
    })


def largest_remainder_split(quantity: int, agents) -> list[tuple[str, int]]:
    """Even split; the first ``quantity % n`` agents (lexicographic) get one extra."""
    if quantity < 0:
        raise ValueError("quantity must be non-negative")
    order = sorted(agents, key=norm)
    if not order:
        raise ValueError("no agents to split over")
    base, extra = divmod(quantity, len(order))
    return [(a, base + (1 if i < extra else 0)) for i, a in enumerate(order)]


_PLEASE_RE = re.compile(r"^\s*\w+\s*,\s*please\s+", re.I)


def objective_action(text: str):
    text = _PLEASE_RE.sub("", text.strip()).rstrip(".")
    text = split_using(text)[0]
    try:
        return parse_todo(text)
    except TodoError as exc:
        raise UnsupportedTask(f"cannot interpret objective {text!r}: {exc}") from None


def _tech(ctx: dict) -> TechTable:
    return TechTable.from_doc(ctx["tech"])


def _equipped(ctx: dict) -> str | None:
    eq = ctx.get("equipment") or []
    return eq[MAINHAND] if len(eq) > MAINHAND else None


# ------------------------------------------------------------------ leaf


def leaf_stages(ctx: dict, objective: str) -> list[tuple[str, list[str]]]:
    """Stages of todos a worker runs for ``objective`` from its current inventory."""
    table = _tech(ctx)
    action = objective_action(objective)
    inv = dict(ctx.get("inventory") or {})
    stages: list[tuple[str, list[str]]] = []
    if action.verb is Verb.MINE:
        item = canonical_item(action.item)
        qty = action.quantity or 1
        gained = max(0, item_count(inv, item) - int(ctx.get("baseline", 0)))
        share, rest, successor = qty, 0, None
        successors = ctx.get("successors") or []
        if successors:
            successor = successors[0]
            share = _chain_share(qty, len(successors) + 1)
            rest = qty - share
        remaining = share - gained
        if remaining > 0:
            tier = table.block_tiers.get(item, 0)
            try:
                tools, _ = tool_stages(table, tier, inv, _equipped(ctx))
            except Unobtainable as exc:
                raise UnsupportedTask(str(exc)) from None
            stages.extend(tools)
            stages.append((f"Mine {plural(item, 2)}", [f"mine {remaining} {plural(item, remaining)}"]))
        if rest > 0 and successor:
            stages.append(("Pass on the rest", [f"{successor}::mine {rest} {plural(item, rest)}"]))
        return stages
    if action.verb in (Verb.CRAFT, Verb.SMELT):
        item = canonical_item(action.item)
        target = int(ctx.get("baseline", 0)) + (action.quantity or 1)
        try:
            todos, _ = obtain(table, item, target, inv)
        except Unobtainable as exc:
            raise UnsupportedTask(str(exc)) from None
        tier = max([table.block_tiers.get(canonical_item(t.split()[2]), 0)
                    for t in todos if t.startswith("mine ")], default=0)
        tools, inv_after = tool_stages(table, tier, inv, _equipped(ctx))
        if tools:
            stages.extend(tools)
            todos, _ = obtain(table, item, target, inv_after)
        if todos:
            stages.append((f"Craft {plural(item, 2)}".replace("_", " "), todos))
        return stages
    if action.verb in (Verb.EQUIP, Verb.BUILD, Verb.GIVE, Verb.MOVETO):
        text = split_using(_PLEASE_RE.sub("", objective.strip()).rstrip("."))[0]
        return [(action.verb.value.capitalize(), [text])]
    raise UnsupportedTask(f"the oracle has no recipe for {action.verb.value} tasks")


def _chain_share(quantity: int, members: int) -> int:
    # the head of a chain takes the largest part of an even split
    return -(-quantity // members)


def _stages_to_plan(name: str, stages: list[tuple[str, list[str]]]) -> list[Stage]:
    out = []
    for title, todos in stages:
        assigns = []
        for t in todos:
            if "::" in t:
                who, task = t.split("::", 1)
                assigns.append(Assignment(who, task))
            else:
                assigns.append(Assignment(name, t))
        out.append(Stage(title, tuple(assigns)))
    return out


def plan_leaf(ctx: dict) -> PlanState:
    name = ctx["name"]
    objective = ctx["objective"]
    prev = ctx.get("previous_plan")
    progress = ctx.get("progress") or {}
    status = progress.get("status")
    inv = ctx.get("inventory") or {}
    if prev and prev.get("objective") == objective and status in ("success", "unknown"):
        plan = _plan_from_dict(prev)
        idx = plan.stage_index()
        if status == "success" and idx is not None:
            plan.task_at_hand = plan.long_term_plan[idx + 1] if idx + 1 < len(plan.long_term_plan) else None
            plan.analysis = "The previous stage succeeded, so move on to the next stage of the plan."
        else:
            plan.analysis = "No new result yet, keep the current plan."
        plan.inventory_beliefs = {name: dict(inv)}
        return plan
    stages = _stages_to_plan(name, leaf_stages(ctx, objective))
    if status == "fail":
        analysis = "The previous attempt failed; try again with the same plan for what is still missing."
    elif not stages:
        analysis = "The inventory already satisfies the task, nothing left to do."
    else:
        analysis = f"Starting from the current inventory, {len(stages)} stage(s) are needed."
    return PlanState(
        objective=objective,
        analysis=analysis,
        long_term_plan=stages,
        task_at_hand=stages[0] if stages else None,
        informer=ctx.get("informer"),
        inventory_beliefs={name: dict(inv)},
    )


def _plan_from_dict(doc: dict) -> PlanState:
    def stage(d):
        return Stage(d["title"], tuple(Assignment(a, t) for a, t in d["assignments"]))

    return PlanState(
        objective=doc["objective"],
        analysis=doc.get("analysis", ""),
        long_term_plan=[stage(s) for s in doc.get("long_term_plan", [])],
        task_at_hand=stage(doc["task_at_hand"]) if doc.get("task_at_hand") else None,
        informer=doc.get("informer"),
        inventory_beliefs=doc.get("inventory_beliefs") or {},
    )


# ------------------------------------------------------------------ root


def _workers(ctx: dict) -> list[str]:
    workers = list(ctx.get("employees") or [])
    if ctx.get("hands_on"):
        workers.append(ctx["name"])
    if not workers:
        raise UnsupportedTask("no one to assign work to")
    return sorted(workers, key=norm)


def _parts(ctx: dict) -> list[dict]:
    return list((ctx.get("progress") or {}).get("parts") or [])


def plan_root(ctx: dict) -> PlanState:
    action = objective_action(ctx["objective"])
    if action.verb is Verb.MINE:
        plan = _plan_collection(ctx, action)
    elif action.verb is Verb.BUILD and ctx.get("blueprint"):
        plan = _plan_shelter(ctx)
    else:
        raise UnsupportedTask(f"the oracle cannot organize {ctx['objective']!r}")
    plan.inventory_beliefs = {k: dict(v) for k, v in sorted((ctx.get("beliefs") or {}).items())}
    plan.informer = ctx.get("informer")
    return plan


def _plan_collection(ctx: dict, action) -> PlanState:
    item = canonical_item(action.item)
    total = action.quantity or 1
    workers = _workers(ctx)
    prev = ctx.get("previous_plan")
    title = f"Gather {plural(item, 2)}"
    if not prev or prev.get("objective") != ctx["objective"]:
        stage = Stage(title, tuple(
            Assignment(w, f"mine {q} {plural(item, q)}") for w, q in largest_remainder_split(total, workers) if q > 0
        ))
        analysis = (f"Split {total} {plural(item, total)} evenly over {', '.join(workers)} "
                    "so everyone works in parallel.")
        return PlanState(ctx["objective"], analysis, [stage], stage)

    beliefs = ctx.get("beliefs") or {}
    confirmed = sum(item_count(beliefs.get(w, {}), item) for w in workers)
    remaining = total - confirmed
    parts = _parts(ctx)
    failures = ctx.get("failures") or {}
    limit = int(ctx.get("escalate_after", 5))
    keep = [Assignment(p["agent"], p["task"]) for p in parts if p["status"] == "unknown"]
    succeeded = [p["agent"] for p in parts if p["status"] == "success"]
    failed = [p["agent"] for p in parts if p["status"] == "fail"]
    takers = succeeded or [a for a in failed if failures.get(norm(a), 0) < limit]
    new = []
    if remaining > 0 and takers:
        new = [Assignment(w, f"mine {q} {plural(item, q)}")
               for w, q in largest_remainder_split(remaining, takers) if q > 0]
    assigns = sorted(keep + new, key=lambda a: norm(a.agent))
    if not assigns:
        why = "the goal is met" if remaining <= 0 else "no one is left who can continue"
        return PlanState(ctx["objective"], f"{confirmed} of {total} confirmed; {why}.", [], None)
    bits = [f"{confirmed} of {total} {plural(item, total)} are confirmed"]
    if new:
        names = ", ".join(a.agent for a in new)
        bits.append(f"{names} finished, so give them the remaining {remaining} while the others continue")
    stage = Stage(f"{title} (adjust plan)", tuple(assigns))
    return PlanState(ctx["objective"], "; ".join(bits) + ".", [stage], stage)


def _shelter_stages(ctx: dict) -> list[Stage]:
    bp = ctx["blueprint"]
    pos = render_position(tuple(bp["origin"]))
    workers = _workers(ctx)
    me = ctx["name"]
    hold = {norm(k): dict(v) for k, v in (ctx.get("beliefs") or {}).items()}
    hold[norm(me)] = dict(ctx.get("inventory") or {})
    stages = []
    for part in bp["parts"]:
        mat = part["material"]
        shares = [(w, q) for w, q in largest_remainder_split(part["count"], workers) if q > 0]
        own = {norm(w): min(hold.get(norm(w), {}).get(mat, 0), q) for w, q in shares}
        donors = sorted(hold, key=lambda d: (d != norm(me), d))
        surplus = {d: hold[d].get(mat, 0) - own.get(d, 0) for d in donors}
        assigns = []
        for w, q in shares:
            deficit = q - own[norm(w)]
            clauses = []
            for d in donors:
                if deficit <= 0:
                    break
                if d == norm(w) or surplus[d] <= 0:
                    continue
                n = min(deficit, surplus[d])
                surplus[d] -= n
                deficit -= n
                hold[d][mat] -= n
                hold.setdefault(norm(w), {})[mat] = hold.get(norm(w), {}).get(mat, 0) + n
                clauses.append(f"{n} {plural(mat, n)} from {d}")
            hold.setdefault(norm(w), {})[mat] = hold[norm(w)].get(mat, 0) - q
            task = f"build {q} {part['name']} at {pos}"
            if clauses:
                task += " using " + " and ".join(clauses)
            assigns.append(Assignment(w, task))
        title = ScriptedOracleConfig().stage_titles.get(part["name"], f"Build the {part['name']}")
        stages.append(Stage(title, tuple(assigns)))
    return stages


def _plan_shelter(ctx: dict) -> PlanState:
    prev = ctx.get("previous_plan")
    if not prev or prev.get("objective") != ctx["objective"]:
        stages = _shelter_stages(ctx)
        analysis = "Foundation, walls and roof depend on each other, so each gets its own stage, split evenly."
        return PlanState(ctx["objective"], analysis, stages, stages[0])
    plan = _plan_from_dict(prev)
    idx = plan.stage_index()
    parts = _parts(ctx)
    statuses = [p["status"] for p in parts]
    if idx is None or "unknown" in statuses:
        plan.analysis = "The current stage is still in progress."
        return plan
    if all(s == "success" for s in statuses):
        nxt = idx + 1
        plan.task_at_hand = plan.long_term_plan[nxt] if nxt < len(plan.long_term_plan) else None
        plan.analysis = "The stage is complete." + (" Move to the next one." if plan.task_at_hand else " The shelter is done.")
        return plan
    failures = ctx.get("failures") or {}
    limit = int(ctx.get("escalate_after", 5))
    succeeded = [p["agent"] for p in parts if p["status"] == "success"]
    retry = []
    for p in parts:
        if p["status"] != "fail":
            continue
        base, _ = split_using(p["task"])
        who = p["agent"]
        if failures.get(norm(who), 0) >= limit:
            if not succeeded:
                continue
            who = succeeded[0]
        retry.append(Assignment(who, base))
    title = plan.long_term_plan[idx].title
    stage = Stage(title if title.endswith("(retry)") else title + " (retry)", tuple(retry))
    plan.long_term_plan[idx] = stage
    plan.task_at_hand = stage if retry else None
    plan.analysis = "Part of the stage failed; retry the failed parts with the materials already handed out."
    return plan


# --------------------------------------------------------------- actions


def plan_action_todos(ctx: dict) -> list[str]:
    name = ctx["name"]
    stage = ctx["stage"]
    todos: list[str] = []
    for agent, task in stage["assignments"]:
        if norm(agent) == norm(name):
            if ctx.get("role") in ("root", "coordinator"):
                sub = dict(ctx, objective=task, successors=[], baseline=_baseline(ctx, task))
                for _, group in leaf_stages(sub, task):
                    todos.extend(group)
            else:
                todos.append(task)
            continue
        base, sources = split_using(task)
        for n, item, src in sources:
            item = canonical_item(item)
            if norm(src) == norm(name):
                todos.append(f"give {n} {plural(item, n)} to {agent}")
            else:
                todos.append(f"inform {src} to give {n} {plural(item, n)} to {agent}")
        todos.append(f"inform {agent} to {base}")
    return todos


def _baseline(ctx: dict, task: str) -> int:
    try:
        action = objective_action(task)
    except UnsupportedTask:
        return 0
    if action.item is None:
        return 0
    return item_count(ctx.get("inventory") or {}, canonical_item(action.item))


# ---------------------------------------------------------------- entry


def oracle_complete(request: BackendRequest) -> BackendResponse:
    ctx = request.context
    tid = request.template_id
    if tid == "monitor":
        records = [MessageRecord(int(t), i + 1, s, "", m) for i, (t, s, m) in enumerate(ctx.get("lines", []))]
        judgment = judge_progress(ctx["task"], records, ctx.get("chest"), ctx.get("agents") or ())
        return BackendResponse(render_judgment(judgment), parsed=judgment)
    if tid in ("task_root", "task_leaf"):
        plan = plan_root(ctx) if tid == "task_root" else plan_leaf(ctx)
        return BackendResponse(render_plan(plan, leaf=tid == "task_leaf"), parsed=plan)
    if tid == "action":
        todos = plan_action_todos(ctx)
        return BackendResponse(json.dumps(todos), parsed=todos)
    raise UnsupportedTask(f"no oracle behaviour for template {tid!r}")


class OracleBackend:
    name = "oracle"

    def complete(self, request: BackendRequest) -> BackendResponse:
        return oracle_complete(request)
