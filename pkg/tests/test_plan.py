import pytest

from sagents.grammar import parse_todo
from sagents.hourglass.plan import (
    ActionQueue, Assignment, MalformedPlan, PlanState, Stage, UnparseableTodoList, parse_plan, parse_todo_list,
    render_plan, split_using,
)

REFERENCE_PLAN = """Current inventory of employers: ...
Objective:
Complete the task of mining 50 stones.

Analysis:
A has successfully completed the task of mining 17 logs, however, b and c have not

Long term plan:
Stage 1 (adjust plan):
    WorkerA mined the remaining 33 logs.
    WorkerB mines 17 logs

The task at hand:
Stage 1 (adjust plan):
    WorkerA mined the remaining 33 logs.
    WorkerB mines 17 logs

Informer is Linnea3v3
"""


def test_parse_reference_plan():
    plan = parse_plan(REFERENCE_PLAN)
    assert plan.objective == "Complete the task of mining 50 stones."
    assert plan.informer == "Linnea3v3"
    assert [a.agent for a in plan.task_at_hand.assignments] == ["WorkerA", "WorkerB"]
    assert plan.stage_index() == 0
    plan.check()


def test_render_parse_round_trip():
    s1 = Stage("Gather stones", (Assignment("workera", "mine 17 stones"), Assignment("workerb", "mine 16 stones")))
    s2 = Stage("Build", (Assignment("workera", "build 25 foundations at (-2,64,-2)"),))
    plan = PlanState("mine 50 stones", "split", [s1, s2], s2, "commissioner", {"workera": {"log": 2}})
    back = parse_plan(render_plan(plan))
    assert back.to_dict() == plan.to_dict()


def test_missing_section():
    with pytest.raises(MalformedPlan):
        parse_plan("Objective: x\nAnalysis: y\n")


def test_at_hand_must_be_in_plan():
    s1 = Stage("a", (Assignment("x", "mine 1 log"),))
    s2 = Stage("b", (Assignment("x", "mine 2 logs"),))
    with pytest.raises(MalformedPlan):
        PlanState("o", "", [s1], s2).check()


def test_one_assignment_per_agent():
    s = Stage("a", (Assignment("x", "mine 1 log"), Assignment("X", "mine 2 logs")))
    with pytest.raises(MalformedPlan):
        PlanState("o", "", [s], s).check(one_per_agent=True)


def test_todo_list_parsing():
    assert parse_todo_list('["mine 3 logs", "craft 12 planks"]') == ["mine 3 logs", "craft 12 planks"]
    assert parse_todo_list('Sure:\n["mine 3 logs"]\nDone') == ["mine 3 logs"]
    with pytest.raises(UnparseableTodoList):
        parse_todo_list("mine three logs")
    with pytest.raises(UnparseableTodoList):
        parse_todo_list("[1, 2]")


def test_split_using():
    base, src = split_using("build 13 foundation at (-2,64,-2) using 13 stones from leader and 2 planks from workerb")
    assert base == "build 13 foundation at (-2,64,-2)"
    assert src == [(13, "stones", "leader"), (2, "planks", "workerb")]
    assert split_using("mine 3 logs") == ("mine 3 logs", [])


def test_action_queue_attempts():
    q = ActionQueue()
    item = [("mine 1 log", parse_todo("mine 1 log"))]
    q.load("stage a", item)
    q.load("stage a", item)
    assert q.attempts_for_current_task == 2
    q.load("stage b", item)
    assert q.attempts_for_current_task == 1 and len(q) == 1
    q.pop()
    assert len(q) == 0
