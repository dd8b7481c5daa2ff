"""Prompt templates for the monitor, task planners and action planner.

Bodies are ``str.format`` templates. Literal braces are doubled. Rendering is
a pure function of the slot values and fails on any unbound slot.
"""

from __future__ import annotations

import string
from dataclasses import dataclass


class UnboundSlot(KeyError):
    pass


class UnknownTemplate(KeyError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    def slots(self) -> list[str]:
        names = []
        for _, field_name, _, _ in string.Formatter().parse(self.body):
            if field_name and field_name not in names:
                names.append(field_name)
        return names


MONITOR = PromptTemplate("monitor", """\
You're a judge of progress in Minecraft. Decide whether [Task to be inquired] is complete based on the [Conversation] and [Chest information] so far.

First give a [Task result judgment] about the current progress of [Task to be inquired], right on the spot.
Then determine the [Final task status] ('success' or 'fail' or 'unknown') from that judgment.

Criteria:
1. Only use the parts of [Conversation] or [Chest information] related to [Task to be inquired].
2. Valid information in either the [Conversation] or the [Chest information] is enough.
3. 'I'll start the task xxx now' means the task has started: status unknown.
4. No response, or only 'Got it!', means the task didn't start: status unknown.
5. 'I have succeeded the task xxx.' means the task finished: status success.
6. 'I have failed the task xxx.' means the task failed: status fail.
7. An inventory report after a success claim that lacks the claimed items means the task failed.

The response format should be:
Task result judgment: <"According to [the key sentence] from [Conversation or Chest information], [Task to be inquired] has succeeded/failed." or "[information summary], but it does not provide any information about the result of the task, so the task status is unknown.">
Final task status: <Only one of the words success or fail or unknown>

Task to be inquired: ```{task}```
Conversation:
{conversation}
Chest information: {chest}
""")

_PLAN_FORMAT = """\
Long term plan: the overall plan as numbered stages, "Stage N: title" followed by one indented line per assignment "<Agent> <task>."
The task at hand: the stage that needs doing now, in the same format, or None.
Informer is <the player who asked for this, found in the conversation>"""

TASK_ROOT = PromptTemplate("task_root", """\
You are a Minecraft planner, your name is {name}. Split the tasks in the [Conversation] into stages following the rules of Minecraft.
Given the [Conversation], the [Previous long-term plan] (if any) and the [Previous inventory of employers], output the [Current inventory of employers], [Objective], [Analysis], [Long term plan], [Task at hand] and [Informer].

Criteria:
1. Your employment is {employment}. Give everyone something to do in each stage; do not leave employees waiting on each other.
2. Assign work to your employees, never to yourself, unless you are listed in the employment.
3. Plan with each employee's inventory; they cannot use items held by others unless someone gives them.
4. Split large workloads evenly, e.g. mine 50 logs becomes workerA mine 25 logs, workerB mine 25 logs.
5. Each employee does one thing and one thing only in every stage.
6. Reassign remaining work to employees with a successful track record to finish sooner.
7. Things that affect each other go in different stages: foundation before walls, walls before roof.
8. Construction steps carry exact positions.

The response format should be:
Current inventory of employers: <JSON map from agent to inventory>
Objective: <the current overall objective>
Analysis: <step-by-step reasoning about the conversation and progress>
""" + _PLAN_FORMAT + """

[Conversation]:
{conversation}
[Previous objective]: {previous_objective}
[Previous long-term plan]:
{previous_plan}
[Previous progress]: {previous_progress}
[Previous inventory of employers]: {inventory}
""")

TASK_LEAF = PromptTemplate("task_leaf", """\
You are a Minecraft planner, your name is {name}. Split the task in the [Conversation] into stages you can perform yourself, following the rules of Minecraft.

Criteria:
1. You are a worker with no employment{employment}. Do the received task yourself.
2. Plan around your inventory so the plan is easy to succeed.
3. Mine logs by hand; do not craft an axe unless asked to.
4. To mine stone, first mine logs, then craft and equip a wooden pickaxe.
5. If the previous plan failed because of a timeout, try again with the same plan.
6. If you already hold more than the required supplies, skip the mine tasks.
7. Construction steps carry exact positions.

The response format should be:
Current inventory: <JSON inventory>
Objective: <the current overall objective>
Analysis: <step-by-step reasoning about the conversation and progress>
""" + _PLAN_FORMAT + """

[Conversation]:
{conversation}
[Previous objective]: {previous_objective}
[Previous long-term plan]:
{previous_plan}
[Previous progress]: {previous_progress}
[Inventory]: {inventory}
""")

ACTION = PromptTemplate("action", """\
You are a helpful assistant. Translate the [Current task] into a [TODO list]. Keep 'who does each task' consistent with the [Current task].
1. You are player {name}. Your profile is ```{profile}```.
2. A todo is either something you do yourself ("Craft [quantity] [item] (at position)") or something you arrange for someone else ("inform [player] to mine [quantity] [block] (at position)").
3. If a task belongs to someone else ({employment}), INFORM that person instead of doing it.

Criteria:
1. Todos are single concise phrases: "Mine [quantity] [block]", "Craft [quantity] [item]", "Smelt [quantity] [item]", "Equip [item]", "Build [quantity] [part] at [position]", "give [quantity] [item] to [player]", "inform [player] to ...".
2. Keep exact positions from the task.

Response format: a JSON array of strings, parsed by a strict JSON loader (no trailing commas, no single quotes).

EXAMPLE:
{example}

Current task:
{task}
RESPONSE:
""")

ROOT_ACTION_EXAMPLE = """\
Example 1: If your name is leader, generate tasks that use 'inform':
Current task:
Stage 1: gather resources
    WorkerA mine 25 woods.
    WorkerB mine 15 stone.
RESPONSE:
["inform WorkerA to mine 25 woods", "inform workerB to mine 15 stone"]

Example 2:
Current task:
Stage 1: WorkerA crafts 4 planks from the log of WorkerB.
RESPONSE:
["inform workerB to give 1 log to workerA", "inform workerA to craft 4 planks"]"""

LEAF_ACTION_EXAMPLE = """\
Example 1: If your name is worker, only do the task yourself:
Current task:
Stage 1: WorkerA mine 25 woods
RESPONSE:
["mine 25 woods"]"""

TEMPLATES = {t.id: t for t in (MONITOR, TASK_ROOT, TASK_LEAF, ACTION)}


def get_template(template_id: str) -> PromptTemplate:
    try:
        return TEMPLATES[template_id]
    except KeyError:
        raise UnknownTemplate(template_id) from None


def render_prompt(template: PromptTemplate | str, slots: dict) -> str:
    if isinstance(template, str):
        template = get_template(template)
    missing = [s for s in template.slots() if s not in slots]
    if missing:
        raise UnboundSlot(f"{template.id}: unbound slot(s) {', '.join(missing)}")
    return template.body.format(**{k: slots[k] for k in template.slots()})
