import pytest

from sagents.backends import OracleBackend
from sagents.comms import MessagePool
from sagents.grammar import parse_todo
from sagents.hourglass import COMMISSIONER, AuthorityViolation, HourglassAgent, Role, agent_step
from sagents.org_graph import parse_org
from sagents.world import generate_world


@pytest.fixture
def setup():
    graph = parse_org("toa:3")
    world = generate_world(3)
    for a in graph.agents:
        world.add_body(a, (0, world.config.world.surface_y, 0))
    return graph, world, MessagePool(lambda: world.clock)


def drive(agent, world, pool, graph, limit=500):
    outcomes = []
    for _ in range(limit):
        out = agent_step(agent, world, pool, OracleBackend(), graph)
        outcomes.append(out)
        if out.kind == "wait":
            break
        world.clock += out.ticks
    return outcomes


def test_leaf_cannot_delegate(setup):
    graph, world, pool = setup
    agent = HourglassAgent("workera", graph)
    todo = "inform workerb to mine 3 logs"
    agent.queue.load("stage", [(todo, parse_todo(todo))])
    with pytest.raises(AuthorityViolation):
        agent_step(agent, world, pool, OracleBackend(), graph)


def test_root_delegates_to_employee(setup):
    graph, world, pool = setup
    agent = HourglassAgent("leader", graph)
    todo = "inform workerb to mine 3 logs"
    agent.queue.load("stage", [(todo, parse_todo(todo))])
    agent_step(agent, world, pool, OracleBackend(), graph)
    assert [(r.speaker, r.respondent, r.message) for r in pool.records] == [
        ("leader", "workerb", "workerb, please mine 3 logs")]


def test_worker_finishes_assignment(setup):
    graph, world, pool = setup
    pool.post("leader", "workera", "workera, please mine 4 logs")
    agent = HourglassAgent("workera", graph)
    outcomes = drive(agent, world, pool, graph)
    assert outcomes[-1].kind == "wait"
    assert agent.role is Role.LEAF
    messages = [r.message for r in pool.records if r.speaker == "workera"]
    assert "I'll start the task mine 4 logs now" in messages
    assert "I have succeeded the task mine 4 logs." in messages
    assert world.body("workera").count("log") == 4
    # one task plan, then one more once the monitor saw the stage through
    assert agent.prompt_count == 2
    assert agent.idle()


def test_root_role_from_commissioner(setup):
    graph, world, pool = setup
    pool.post(COMMISSIONER, "leader", "leader, please mine 6 logs")
    agent = HourglassAgent("leader", graph)
    agent_step(agent, world, pool, OracleBackend(), graph)
    assert agent.role is Role.ROOT
    assert agent.prompt_count == 1
    assert not [r for r in pool.records if r.speaker == "leader"]  # planning takes time first
    world.clock += 1
    agent_step(agent, world, pool, OracleBackend(), graph)
    sent = [(r.respondent, r.message) for r in pool.records if r.speaker == "leader"]
    assert sent == [("workera", "workera, please mine 3 logs"), ("workerb", "workerb, please mine 3 logs")]
