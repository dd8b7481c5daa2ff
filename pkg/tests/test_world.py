import pytest

from sagents.config import InvalidConfig, SimConfig
from sagents.world import (
    MAINHAND, CraftItem, Equip, GiveItem, MineBlock, MoveTo, NoMaterials, NoTool, Occupied, PlaceBlock,
    TargetNotFound, Unreachable, canonical_item, generate_world,
)


@pytest.fixture
def world():
    w = generate_world(7, SimConfig.load({"world": {"width": 24, "depth": 24, "trees": 10}}))
    w.add_body("a")
    w.add_body("b", (3, 64, 0))
    return w


def test_same_seed_same_world():
    cfg = SimConfig.load()
    assert generate_world(5, cfg).state_hash() == generate_world(5, cfg).state_hash()
    assert generate_world(5, cfg).state_hash() != generate_world(6, cfg).state_hash()


def test_negative_seed_rejected():
    with pytest.raises(InvalidConfig):
        generate_world(-1)


def test_logs_by_hand_stone_needs_pickaxe(world):
    out = world.execute("a", MineBlock("log"))
    assert out.gained == {"log": 1} and out.ticks > 0
    with pytest.raises(NoTool):
        world.execute("a", MineBlock("stone"))


def test_pickaxe_chain(world):
    body = world.body("a")
    body.inventory.update({"log": 3})
    world.execute("a", CraftItem("plank", 12))
    world.execute("a", CraftItem("stick", 4))
    world.execute("a", CraftItem("crafting_table", 1))
    world.execute("a", CraftItem("wooden_pickaxe", 1))
    world.execute("a", Equip("wooden_pickaxe"))
    assert body.equipment[MAINHAND] == "wooden_pickaxe"
    assert world.execute("a", MineBlock("stone")).gained == {"stone": 1}
    with pytest.raises(NoTool):
        world.execute("a", MineBlock("iron_ore"))


def test_craft_without_materials(world):
    with pytest.raises(NoMaterials):
        world.execute("a", CraftItem("stick", 4))


def test_give_and_place(world):
    world.body("a").inventory["stone"] = 2
    world.execute("a", GiveItem("b", "stone", 1))
    assert world.body("b").count("stone") == 1
    out = world.execute("b", PlaceBlock("stone", (0, 64, 5)))
    assert out.placed == [(0, 64, 5)] and world.get((0, 64, 5)) == "stone"
    with pytest.raises(Occupied):
        world.execute("a", PlaceBlock("stone", (0, 64, 5)))


def test_missing_target_costs_search_time():
    w = generate_world(1, SimConfig.load({"world": {"iron_veins": 0}}))
    w.add_body("a")
    w.body("a").equipment[MAINHAND] = "stone_pickaxe"
    with pytest.raises(TargetNotFound) as err:
        w.execute("a", MineBlock("iron_ore"))
    assert err.value.ticks == w.config.ticks.search_fail


def test_out_of_range_move(world):
    with pytest.raises(Unreachable):
        world.execute("a", MoveTo((0, 500, 0)))


def test_aliases():
    assert canonical_item("woods") == "log"
    assert canonical_item("oak_planks") == "plank"
    assert canonical_item("wooden pickaxe") == "wooden_pickaxe"
