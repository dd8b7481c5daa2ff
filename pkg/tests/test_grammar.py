import pytest

from sagents.grammar import (
    ActionKind, AgentAction, MissingPosition, UnknownVerb, Verb, parse_todo, render_todo,
)


def test_reference_examples():
    a = parse_todo("inform workerA to build walls at (-10,72,-30) (use 48 planks)")
    assert a.kind is ActionKind.DELEGATE and a.target == "workerA"
    assert a.inner == AgentAction.direct(Verb.BUILD, item="walls", position=(-10, 72, -30))
    assert parse_todo("mine 25 woods") == AgentAction.direct(Verb.MINE, 25, "wood")
    b = parse_todo("inform WorkerA to mine 25 woods")
    assert b.inner == AgentAction.direct(Verb.MINE, 25, "wood")


def test_inform_without_to():
    a = parse_todo("inform workerB mine 15 stone")
    assert a.target == "workerB" and a.inner.quantity == 15 and a.inner.item == "stone"


def test_give_has_target():
    a = parse_todo("give 3 planks to workerb")
    assert (a.verb, a.quantity, a.item, a.target) == (Verb.GIVE, 3, "plank", "workerb")


def test_errors():
    with pytest.raises(UnknownVerb):
        parse_todo("dance 5 times")
    with pytest.raises(MissingPosition):
        parse_todo("build walls")


@pytest.mark.parametrize("text", [
    "mine 17 stones", "craft 1 crafting_table", "smelt 3 iron_ingots", "equip wooden_pickaxe",
    "give 13 stones to workera", "move to (1,64,-3)", "build 25 foundations at (-2,64,-2)",
    "inform workerc to mine 16 stones", "kill 2 zombies", "cook 4 beefs",
])
def test_canonical_strings_are_fixed_points(text):
    assert render_todo(parse_todo(text)) == text
