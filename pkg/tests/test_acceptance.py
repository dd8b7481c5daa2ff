"""Acceptance criteria. Each test prints one PASS/FAIL line with its time budget."""

import itertools
import math
import random
import time
from contextlib import contextmanager
from fractions import Fraction
from math import comb, factorial

from conftest import ACCEPTANCE_LINES
from sagents.backends import OracleBackend, largest_remainder_split
from sagents.config import SimConfig
from sagents.grammar import AgentAction, Verb, parse_todo, render_todo
from sagents.harness import parse_task, stage_order_audit, verify_shelter
from sagents.hourglass import Role, plan_actions, plan_tasks
from sagents.hourglass.monitor import TaskStatus, judge_progress
from sagents.org_graph import build_coa, build_goa, build_toa, parse_org, validate
from sagents.scheduler import ProgressTracker, collect_metrics, duration_matrix_tc, nan_check, run
from sagents.world import (
    CraftItem, DepositChest, Equip, GiveItem, MineBlock, MoveTo, PlaceBlock, SmeltItem, WorldError, generate_world,
)


@contextmanager
def criterion(n: int, title: str, budget_s: float):
    start = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        ok = ok and elapsed < budget_s
        line = f"C {n:2d} {'PASS' if ok else 'FAIL'} {title} ({elapsed:.2f}s, budget {budget_s:g}s)"
        ACCEPTANCE_LINES.append(line)
        print(line)
    assert elapsed < budget_s, f"over time budget: {elapsed:.2f}s"


# ------------------------------------------------------------------------ 1


def test_c01_organization_properties():
    names = ["ann", "bob", "cy", "dee", "eve"]
    with criterion(1, "organization properties, 2-5 agents", 1):
        for n in range(2, 6):
            group = names[:n]
            for root in group:
                r = validate(build_toa(root, [a for a in group if a != root]))
                assert r.is_valid and r.command_cycles == [] and r.max_agent_in_degree <= 1
            for order in itertools.permutations(group):
                r = validate(build_coa(list(order)))
                assert r.is_valid and r.command_cycles == [] and r.max_agent_in_degree <= 1
            r = validate(build_goa(group))
            # a complete digraph has C(n,k)(k-1)! simple cycles of length k
            expected = sum(comb(n, k) * factorial(k - 1) for k in range(2, n + 1))
            assert len(r.command_cycles) == expected >= 1


# ------------------------------------------------------------------------ 2


def test_c02_oracle_split():
    cfg = SimConfig.load()
    tech = {k: cfg.raw[k] for k in ("recipes", "tool_tiers", "block_tiers")}
    ctx = dict(name="leader", role="root", employees=["workera", "workerb", "workerc"],
               objective="mine 50 stones", informer="commissioner", previous_plan=None, progress=None,
               inventory={}, equipment=[], baseline=0, beliefs={"workera": {}, "workerb": {}, "workerc": {}},
               tech=tech, failures={}, escalate_after=5)
    rng = random.Random(2)
    with criterion(2, "oracle split 17/17/16 and 1000 random splits", 1):
        plan = plan_tasks(Role.ROOT, ctx, OracleBackend())
        assigned = [(a.agent, a.task) for a in plan.task_at_hand.assignments]
        assert assigned == [("workera", "mine 17 stones"), ("workerb", "mine 17 stones"),
                            ("workerc", "mine 16 stones")]
        assert plan_actions(plan.task_at_hand, Role.ROOT, OracleBackend(), ctx) == [
            "inform workera to mine 17 stones", "inform workerb to mine 17 stones",
            "inform workerc to mine 16 stones"]
        for _ in range(1000):
            q, n = rng.randint(0, 1000), rng.randint(1, 12)
            shares = [s for _, s in largest_remainder_split(q, [f"a{i:02d}" for i in range(n)])]
            assert sum(shares) == q and max(shares) - min(shares) <= 1


# ------------------------------------------------------------------------ 3


GOT_IT = "-[15:03:10]leader says: 'WorkerA, please mine 27 stones'\n-[15:03:20] WorkerA says: 'Got it!'"
START = "-[19:16:09]workerb says: 'I'll start the task mine 17 logs now'"
SUCCEEDED = START + "\n-[19:21:40]workerb says: 'I have succeeded the task mine 17 logs.'"
FAILED = """{'linnea3v3': ["[13:49:58]workera says: 'I have failed the task mine 15 irons.'", "[13:51:55]workera says: 'I have succeeded the task mine 10 logs.'", "[13:51:55]workera says: 'my inventory is {'crafting_table': 1, 'oak_planks': 8, 'stick': 8, 'oak_log': 5, 'birch_log': 5}, and my equipment is [None, None, None, None, 'crafting_table', None] '"]}"""
CONTRADICTED = """{'linnea3v3': ["[19:35:09]workera says: 'I'll start the task Craft a wooden pickaxe now'", "[19:36:11]workera says: 'I have succeeded the task Craft a wooden pickaxe.'", "[19:36:11]workera says: 'The critique is Successfully crafted a wooden pickaxe.'", "[19:36:11]workera says: 'my inventory is {'acacia_log': 11}, and my equipment is [None, None, None, None, None, None] '"]}"""


def test_c03_monitor_fixtures():
    cases = [
        ("mine 17 logs", START, TaskStatus.UNKNOWN),
        ("Stage 1: Gather resources\n    WorkerA mine 27 stones.", GOT_IT, TaskStatus.UNKNOWN),
        ("mine 17 logs", SUCCEEDED, TaskStatus.SUCCESS),
        ("WorkerA mine 15 more irons. WorkerA mine 10 logs", FAILED, TaskStatus.FAIL),
        ("Craft a wooden pickaxe", CONTRADICTED, TaskStatus.FAIL),
    ]
    with criterion(3, "monitor rule cases on reference transcripts", 1):
        for task, transcript, expected in cases:
            assert judge_progress(task, transcript).status is expected, task


# ------------------------------------------------------------------------ 4


ITEMS = ["stone", "log", "plank", "stick", "iron_ingot", "iron_ore", "crafting_table", "wooden_pickaxe",
         "wood", "beef", "zomby", "sheep"]
AGENTS = ["workera", "workerB", "leader"]


def enumerate_actions():
    pos = (-10, 72, -30)
    for verb in (Verb.MINE, Verb.CRAFT, Verb.SMELT, Verb.KILL, Verb.COOK):
        for q in (None, 1, 25):
            yield AgentAction.direct(verb, q, "stone")
    yield AgentAction.direct(Verb.EQUIP, item="wooden_pickaxe")
    for q in (None, 1, 13):
        yield AgentAction.direct(Verb.GIVE, q, "plank", target="workerb")
        yield AgentAction.direct(Verb.BUILD, q, "wall", position=pos)
    yield AgentAction.direct(Verb.MOVETO, position=pos)


def random_action(rng):
    verb = rng.choice(list(Verb))
    q = rng.choice([None, 1, rng.randint(2, 999)])
    pos = tuple(rng.randint(-200, 200) for _ in range(3))
    if verb is Verb.MOVETO:
        a = AgentAction.direct(verb, position=pos)
    elif verb is Verb.EQUIP:
        a = AgentAction.direct(verb, item=rng.choice(ITEMS))
    elif verb is Verb.GIVE:
        a = AgentAction.direct(verb, q, rng.choice(ITEMS), target=rng.choice(AGENTS))
    elif verb is Verb.BUILD:
        a = AgentAction.direct(verb, q, rng.choice(["wall", "roof", "foundation"]), position=pos)
    else:
        a = AgentAction.direct(verb, q, rng.choice(ITEMS))
    if rng.random() < 0.4:
        a = AgentAction.delegate(rng.choice(AGENTS), a)
    return a


def test_c04_grammar_round_trip():
    rng = random.Random(4)
    with criterion(4, "grammar round trip, enumerated plus 10000 fuzzed", 5):
        assert parse_todo("mine 25 woods") == AgentAction.direct(Verb.MINE, 25, "wood")
        assert parse_todo("inform WorkerA to mine 25 woods") == AgentAction.delegate(
            "WorkerA", AgentAction.direct(Verb.MINE, 25, "wood"))
        assert parse_todo("inform workerA to build walls at (-10,72,-30) (use 48 planks)") == AgentAction.delegate(
            "workerA", AgentAction.direct(Verb.BUILD, item="walls", position=(-10, 72, -30)))
        for a in enumerate_actions():
            for b in (a, AgentAction.delegate("workerc", a)):
                assert parse_todo(render_todo(b)) == b, render_todo(b)
        for _ in range(10_000):
            a = random_action(rng)
            text = render_todo(a)
            assert parse_todo(text) == a, text
            assert render_todo(parse_todo(text)) == text


# ------------------------------------------------------------------------ 5


def test_c05_structure_ordering():
    task = parse_task("collection:stone:50")
    with criterion(5, "ToA < GoA round-based < CoA relay on 50 stone", 10):
        toa = run(parse_org("toa:4"), "nonobstructive", task, 42).time_cost_min
        goa = run(parse_org("goa:3"), "roundbased", task, 42).time_cost_min
        coa = run(parse_org("coa:3"), "relay", task, 42).time_cost_min
        print(f"    TC min: toa {toa:.2f}, goa {goa:.2f}, coa {coa:.2f}")
        assert toa < goa < coa


# ------------------------------------------------------------------------ 6


def test_c06_agents_beat_solo_and_iron():
    with criterion(6, "3-worker ToA beats solo; iron NaN solo, success with 4", 60):
        for n in (50, 100):
            task = parse_task(f"collection:log:{n}")
            solo = run(parse_org("solo"), "nonobstructive", task, 42).time_cost_min
            team = run(parse_org("toa:4"), "nonobstructive", task, 42).time_cost_min
            print(f"    {n} logs: solo {solo:.2f}, toa:4 {team:.2f}, speedup {solo / team:.2f}")
            assert solo / team >= 1.5
        iron = parse_task("collection:iron_ore:3")
        for seed in range(5):
            alone = run(parse_org("solo"), "nonobstructive", iron, seed)
            team = run(parse_org("toa:4"), "nonobstructive", iron, seed)
            assert alone.nan and math.isnan(alone.time_cost_min), seed
            assert team.success and not team.nan, seed


# ------------------------------------------------------------------------ 7


def test_c07_non_obstruction_dominates():
    rng = random.Random(7)
    with criterion(7, "NonObstructive <= RoundBased on 100 random matrices", 5):
        strict = 0
        for _ in range(100):
            agents, rounds = rng.randint(2, 6), rng.randint(1, 6)
            m = [[rng.randint(1, 100) for _ in range(agents)] for _ in range(rounds)]
            no = duration_matrix_tc(m, "nonobstructive")
            rb = duration_matrix_tc(m, "roundbased")
            assert no <= rb
            if any(len(set(row)) > 1 for row in m):
                assert no < rb
                strict += 1
        assert strict > 90


# ------------------------------------------------------------------------ 8


def test_c08_shelter():
    task = parse_task("shelter")
    with criterion(8, "shelter built by 3-agent ToA in stage order", 30):
        report = run(parse_org("toa:3"), "nonobstructive", task, 42)
        assert report.success and report.shelter["complete"]
        world = generate_world(42)
        for p, kind in [(tuple(b[:3]), b[3]) for b in report.world_final["blocks"]]:
            world.blocks[p] = kind
        assert verify_shelter(world, task.blueprint).complete
        assert stage_order_audit(report.event_log, task.blueprint) == []


# ------------------------------------------------------------------------ 9


def test_c09_nan_rule():
    cfg = SimConfig.load()
    window = cfg.nan_stall_ticks
    assert window == 40 * cfg.ticks.ticks_per_minute
    limit = cfg.nan_max_attempts
    with criterion(9, "NaN fires iff stall > 40 min and attempts > 5", 1):
        for stalled, tried in itertools.product((False, True), repeat=2):
            for stall in ((window + 1, 5 * window) if stalled else (0, window)):
                for attempts in ((limit + 1, 40) if tried else (0, limit)):
                    t = ProgressTracker(best=1, last_progress=100, attempts=attempts)
                    assert nan_check(t, 100 + stall, window, limit) is (stalled and tried)


# ----------------------------------------------------------------------- 10


def test_c10_determinism():
    task = parse_task("collection:stone:20")
    with criterion(10, "same inputs give byte-identical logs", 10):
        a = run(parse_org("toa:4"), "roundbased", task, 42)
        b = run(parse_org("toa:4"), "roundbased", task, 42)
        c = run(parse_org("toa:4"), "roundbased", task, 43)
        assert a.events_jsonl() == b.events_jsonl() and a.to_json() == b.to_json()
        assert c.events_jsonl() != a.events_jsonl()


# ----------------------------------------------------------------------- 11


def test_c11_mpt():
    log = [{"tick": 0, "agent": None, "kind": "run_start", "detail": {"agents": ["a", "b", "c"]}}]
    for agent, n in (("a", 4), ("b", 3), ("c", 4)):
        log += [{"tick": i, "agent": agent, "kind": "plan", "detail": {"ticks": 20}} for i in range(n)]
        log += [{"tick": 5, "agent": agent, "kind": "monitor", "detail": {}}]  # judging is not planning
    log.append({"tick": 600, "agent": None, "kind": "run_end", "detail": {"success": True, "nan": False}})
    with criterion(11, "mPT = 11/3 exactly on a 4/3/4 fixture", 1):
        m = collect_metrics(log)
        assert isinstance(m.mpt, Fraction) and m.mpt == Fraction(11, 3)


# ----------------------------------------------------------------------- 12


def expected_delta(cfg, prim, outcome_ok):
    """Net change of world item totals: zero except what a recipe converts."""
    if not outcome_ok or not isinstance(prim, (CraftItem, SmeltItem)):
        return {}
    recipe = cfg.recipe_for(prim.item)
    batches = -(-prim.count // recipe.count)
    delta = {prim.item: recipe.count * batches}
    for ing, n in recipe.inputs:
        delta[ing] = delta.get(ing, 0) - n * batches
    return delta


def random_primitive(rng, world, agents):
    kinds = ["log", "stone", "iron_ore", "dirt"]
    items = ["log", "plank", "stick", "stone", "crafting_table", "wooden_pickaxe", "stone_pickaxe", "iron_ingot",
             "iron_ore", "furnace"]
    pos = (rng.randint(-6, 6), rng.choice([63, 64, 65]), rng.randint(-6, 6))
    return rng.choice([
        lambda: MineBlock(rng.choice(kinds), rng.randint(1, 3)),
        lambda: CraftItem(rng.choice(items), rng.randint(1, 8)),
        lambda: SmeltItem("iron_ingot", rng.randint(1, 2)),
        lambda: PlaceBlock(rng.choice(["stone", "plank_block", "log", "dirt"]), pos),
        lambda: GiveItem(rng.choice(agents), rng.choice(items), rng.randint(1, 4)),
        lambda: Equip(rng.choice(items)),
        lambda: MoveTo(pos),
        lambda: DepositChest((0, 64, 3), rng.choice(items), rng.randint(1, 3)),
    ])()


def test_c12_conservation():
    cfg = SimConfig.load({"world": {"width": 10, "depth": 10, "trees": 3, "stone_layers": 3, "iron_veins": 2}})
    rng = random.Random(12)
    agents = ["a", "b"]
    checked = 0
    with criterion(12, "item conservation over 1000 random primitive sequences", 5):
        for seq in range(1000):
            world = generate_world(seq, cfg)
            world.add_body("a", (0, 64, 0), {"log": 6, "stone": 3, "coal": 2})
            world.add_body("b", (2, 64, 0), {"plank": 4})
            world.set_block((0, 64, 3), "chest")
            before = world.item_totals()
            for _ in range(8):
                owner = rng.choice(agents)
                prim = random_primitive(rng, world, agents)
                try:
                    world.execute(owner, prim)
                    ok = True
                except (WorldError, ValueError):
                    ok = False
                after = world.item_totals()
                delta = expected_delta(cfg, prim, ok)
                for item in set(before) | set(after) | set(delta):
                    assert after.get(item, 0) - before.get(item, 0) == delta.get(item, 0), (prim, item)
                before = after
                checked += 1
    assert checked == 8000
