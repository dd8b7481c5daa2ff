import pytest

from sagents.comms import (
    FAIL, START, SUCCESS, ConversationCursor, MessagePool, SelfMessage, clock_label, inventory_report,
)


def test_pool_orders_and_filters():
    pool = MessagePool()
    pool.post("leader", "workera", "workera, please mine 3 logs")
    pool.post("workerb", "leader", START.format(task="mine 2 logs"))
    pool.post("workera", "leader", SUCCESS.format(task="mine 3 logs"))
    conv, cur = pool.conversation_since(ConversationCursor("workera"))
    assert [r.seq for r in conv.records] == [1, 3]
    again, cur2 = pool.conversation_since(cur)
    assert again.records == [] and cur2 == cur


def test_self_message_rejected():
    with pytest.raises(SelfMessage):
        MessagePool().post("a", "A", "hi")


def test_jsonl_round_trip():
    pool = MessagePool(clock=lambda: 42)
    pool.post("a", "b", FAIL.format(task="mine 1 log"))
    back = MessagePool.from_jsonl(pool.to_jsonl())
    assert back.records == pool.records


def test_phrases():
    assert SUCCESS.format(task="mine 10 logs") == "I have succeeded the task mine 10 logs."
    assert START.format(task="Craft a wooden pickaxe") == "I'll start the task Craft a wooden pickaxe now"
    assert inventory_report({"log": 2}, [None] * 6).startswith("my inventory is {'log': 2}")


def test_clock_label():
    assert clock_label(3661) == "01:01:01"
