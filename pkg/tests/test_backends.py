import json
import random

import httpx
import pytest

from sagents.backends import (
    BackendRequest, BackendUnavailable, OracleBackend, UnboundSlot, get_template, largest_remainder_split,
    make_backend, render_prompt,
)
from sagents.backends.remote import (
    Cassette, CassetteMiss, EndpointConfig, ParseFailure, RemoteBackend, ServiceError, Timeout,
)
from sagents.backends.techtree import TechTable, Unobtainable, obtain, tool_stages
from sagents.backends.templates import UnknownTemplate
from sagents.config import SimConfig
from sagents.harness import parse_task
from sagents.hourglass import Role, plan_actions, plan_tasks
from sagents.org_graph import parse_org
from sagents.scheduler import run


@pytest.fixture(scope="module")
def tech():
    cfg = SimConfig.load()
    return {k: cfg.raw[k] for k in ("recipes", "tool_tiers", "block_tiers")}


def root_ctx(tech, **kw):
    ctx = dict(name="leader", role="root", employees=["workera", "workerb", "workerc"], objective="mine 50 logs",
               informer="commissioner", previous_plan=None, progress=None, inventory={}, equipment=[], baseline=0,
               beliefs={"workera": {}, "workerb": {}, "workerc": {}}, tech=tech, failures={}, escalate_after=5)
    ctx.update(kw)
    return ctx


# ------------------------------------------------------------------ split


@pytest.mark.parametrize("qty,expected", [
    (50, [17, 17, 16]),
    (7, [3, 2, 2]),
    (3, [1, 1, 1]),
    (2, [1, 1, 0]),
    (0, [0, 0, 0]),
])
def test_split_three(qty, expected):
    got = largest_remainder_split(qty, ["workerc", "workera", "workerb"])
    assert [a for a, _ in got] == ["workera", "workerb", "workerc"]
    assert [n for _, n in got] == expected


def test_split_random_balanced():
    rng = random.Random(7)
    for _ in range(1000):
        n = rng.randint(1, 9)
        q = rng.randint(0, 500)
        shares = [s for _, s in largest_remainder_split(q, [f"w{i}" for i in range(n)])]
        assert sum(shares) == q
        assert max(shares) - min(shares) <= 1
        assert shares == sorted(shares, reverse=True)


def test_split_errors():
    with pytest.raises(ValueError):
        largest_remainder_split(-1, ["a"])
    with pytest.raises(ValueError):
        largest_remainder_split(5, [])


# ----------------------------------------------------------------- oracle


def test_root_plan_even_split(tech):
    ctx = root_ctx(tech)
    plan = plan_tasks(Role.ROOT, ctx, OracleBackend())
    assigned = [(a.agent, a.task) for a in plan.task_at_hand.assignments]
    assert assigned == [("workera", "mine 17 logs"), ("workerb", "mine 17 logs"), ("workerc", "mine 16 logs")]
    todos = plan_actions(plan.task_at_hand, Role.ROOT, OracleBackend(), ctx)
    assert todos == ["inform workera to mine 17 logs", "inform workerb to mine 17 logs",
                     "inform workerc to mine 16 logs"]


def test_root_reassigns_remainder_to_finished_worker(tech):
    first = plan_tasks(Role.ROOT, root_ctx(tech), OracleBackend())
    parts = [{"agent": "workera", "task": "mine 17 logs", "status": "success"},
             {"agent": "workerb", "task": "mine 17 logs", "status": "unknown"},
             {"agent": "workerc", "task": "mine 16 logs", "status": "unknown"}]
    ctx = root_ctx(tech, previous_plan=first.to_dict(), beliefs={"workera": {"log": 17}, "workerb": {}, "workerc": {}},
                   progress={"status": "unknown", "text": "workera done", "parts": parts})
    plan = plan_tasks(Role.ROOT, ctx, OracleBackend())
    assigned = dict((a.agent, a.task) for a in plan.task_at_hand.assignments)
    assert assigned == {"workera": "mine 33 logs", "workerb": "mine 17 logs", "workerc": "mine 16 logs"}


def test_leaf_plan_does_it_alone(tech):
    ctx = root_ctx(tech, name="workera", role="leaf", employees=[], objective="mine 10 logs", beliefs={})
    plan = plan_tasks(Role.LEAF, ctx, OracleBackend())
    todos = plan_actions(plan.task_at_hand, Role.LEAF, OracleBackend(), ctx)
    assert todos == ["mine 10 logs"]
    assert not any(t.startswith("inform") for t in todos)


def test_leaf_iron_needs_stone_pickaxe(tech):
    from sagents.backends.oracle import leaf_stages

    stages = leaf_stages(dict(name="a", inventory={}, equipment=[], tech=tech, baseline=0), "mine 3 iron_ore")
    assert [t for t, _ in stages] == ["Craft a wooden pickaxe", "Craft a stone pickaxe", "Mine iron_ores"]
    assert stages[1][1][-1] == "equip stone_pickaxe"


def test_oracle_rejects_unknown_template():
    from sagents.backends.oracle import UnsupportedTask

    with pytest.raises(UnsupportedTask):
        OracleBackend().complete(BackendRequest("nope", "", {}))


# --------------------------------------------------------------- techtree


def test_obtain_wooden_pickaxe(tech):
    table = TechTable.from_doc(tech)
    todos, after = obtain(table, "wooden_pickaxe", 1, {})
    assert todos == ["mine 3 logs", "craft 12 planks", "craft 4 sticks", "craft 1 crafting_table",
                     "craft 1 wooden_pickaxe"]
    # 12 planks: 2 to sticks, 4 to the table, 3 to the pickaxe
    assert after == {"plank": 3, "stick": 2, "crafting_table": 1, "wooden_pickaxe": 1}


def test_obtain_reuses_inventory(tech):
    table = TechTable.from_doc(tech)
    todos, _ = obtain(table, "stick", 4, {"plank": 4})
    assert todos == ["craft 4 sticks"]


def test_tool_stages_skip_held_tiers(tech):
    table = TechTable.from_doc(tech)
    stages, _ = tool_stages(table, 2, {"wooden_pickaxe": 1}, "wooden_pickaxe")
    assert [t for t, _ in stages] == ["Craft a stone pickaxe"]
    assert table.tool_for(2) == "stone_pickaxe"
    with pytest.raises(Unobtainable):
        obtain(table, "diamond", 1, {})


# -------------------------------------------------------------- templates


def test_templates_render_and_fail_on_missing_slot():
    tpl = get_template("monitor")
    slots = {s: f"<{s}>" for s in tpl.slots()}
    text = render_prompt("monitor", slots)
    for s in tpl.slots():
        assert f"<{s}>" in text
    slots.pop(tpl.slots()[0])
    with pytest.raises(UnboundSlot):
        render_prompt(tpl, slots)
    with pytest.raises(UnknownTemplate):
        get_template("nope")


def test_make_backend():
    assert make_backend("oracle").name == "oracle"
    with pytest.raises(BackendUnavailable):
        make_backend("psychic")


# ----------------------------------------------------------------- remote


def _completion(text):
    return {"choices": [{"message": {"content": text}}], "usage": {"prompt_tokens": 11, "completion_tokens": 3}}


def _remote(handler, **kw):
    sleeps = []
    ep = EndpointConfig(base_url="http://llm.test/v1", **kw)
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return RemoteBackend(ep, client=client, sleep=sleeps.append), sleeps


REQ = BackendRequest("action", "translate this", {"role": "root"})


def test_remote_success_and_role_model():
    seen = []

    def handler(request):
        seen.append(json.loads(request.content))
        return httpx.Response(200, json=_completion('["mine 3 logs"]'))

    backend, sleeps = _remote(handler, role_models={"root": "big-model"})
    resp = backend.complete(REQ)
    assert resp.text == '["mine 3 logs"]' and resp.source == "remote"
    assert (resp.prompt_tokens, resp.completion_tokens) == (11, 3)
    assert seen[0]["model"] == "big-model"
    assert seen[0]["messages"] == [{"role": "user", "content": "translate this"}]
    assert sleeps == []


@pytest.mark.parametrize("status", [429, 500, 503])
def test_remote_retries_transient(status):
    calls = []

    def handler(request):
        calls.append(1)
        if len(calls) < 3:
            return httpx.Response(status, text="busy")
        return httpx.Response(200, json=_completion("ok"))

    backend, sleeps = _remote(handler, backoff_s=0.5)
    assert backend.complete(REQ).text == "ok"
    assert sleeps == [0.5, 1.0]


def test_remote_gives_up_after_retries():
    backend, sleeps = _remote(lambda r: httpx.Response(500, text="down"), max_retries=2)
    with pytest.raises(ServiceError) as info:
        backend.complete(REQ)
    assert info.value.status == 500
    assert len(sleeps) == 2


def test_remote_client_error_not_retried():
    backend, sleeps = _remote(lambda r: httpx.Response(400, text="bad"))
    with pytest.raises(ServiceError):
        backend.complete(REQ)
    assert sleeps == []


def test_remote_transport_error_is_timeout():
    def handler(request):
        raise httpx.ConnectError("refused", request=request)

    backend, _ = _remote(handler, max_retries=1)
    with pytest.raises(Timeout):
        backend.complete(REQ)


def test_remote_bad_shape():
    backend, _ = _remote(lambda r: httpx.Response(200, json={"nothing": []}))
    with pytest.raises(ParseFailure):
        backend.complete(REQ)


def test_cassette_record_then_replay(tmp_path):
    path = tmp_path / "c.jsonl"
    backend, _ = _remote(lambda r: httpx.Response(200, json=_completion("first")))
    backend.cassette = Cassette(path, "record")
    backend.complete(REQ)
    replay = RemoteBackend(cassette=Cassette(path, "replay"))
    resp = replay.complete(REQ)
    assert (resp.text, resp.source) == ("first", "cassette")
    with pytest.raises(CassetteMiss):
        replay.complete(BackendRequest("action", "something else"))
    with pytest.raises(ValueError):
        RemoteBackend()


class _Recorder:
    """Oracle wrapped so every exchange lands in a cassette."""

    name = "recorder"

    def __init__(self, cassette):
        self.inner = OracleBackend()
        self.cassette = cassette

    def complete(self, request):
        resp = self.inner.complete(request)
        self.cassette.record(request, resp.text)
        return resp


def test_replayed_text_backend_reproduces_oracle_run(tmp_path):
    path = tmp_path / "run.jsonl"
    task = parse_task("collection:log:12")
    recorded = run(parse_org("toa:3"), "nonobstructive", task, 5, backend=_Recorder(Cassette(path, "record")))
    replayed = run(parse_org("toa:3"), "nonobstructive", task, 5,
                   backend=RemoteBackend(cassette=Cassette(path, "replay")))
    assert recorded.success
    assert replayed.event_log == recorded.event_log
    assert replayed.to_json() == recorded.to_json()
