import itertools

import pytest

from sagents.org_graph import (
    ENVIRONMENT, AgentGraph, DuplicateAgent, EmptyOrganization, OrgError, Structure, build_coa, build_goa,
    build_solo, build_toa, command_targets, parse_org, validate,
)

NAMES = ["ann", "bob", "cid", "dee", "eve"]


def test_toa_edges_point_from_root_to_leaves():
    g = build_toa("leader", ["workera", "workerb"])
    assert g.agent_edges() == {("leader", "workera"), ("leader", "workerb")}
    assert (("workera", ENVIRONMENT) in g.edges) and (("leader", ENVIRONMENT) in g.edges)
    assert command_targets(g, "workera") == set()
    assert command_targets(g, "leader") == {"workera", "workerb"}


def test_goa_three_agents_has_five_cycles():
    # 3 two-cycles plus 2 directed triangles
    r = validate(build_goa(["a", "b", "c"]))
    assert len(r.command_cycles) == 5
    assert r.max_agent_in_degree == 2


def test_coa_is_a_path():
    g = build_coa(["x", "y", "z"])
    assert g.chain_order() == ["x", "y", "z"]
    assert validate(g).command_cycles == []


def test_solo_has_only_environment_edge():
    g = build_solo("workera")
    assert g.agent_edges() == set()
    assert validate(g).is_valid


def test_duplicate_and_empty_rejected():
    with pytest.raises(DuplicateAgent):
        build_toa("a", ["b", "B"])
    with pytest.raises(EmptyOrganization):
        build_goa([])


def test_parse_org_shapes():
    assert parse_org("toa:4").agents == ("leader", "workera", "workerb", "workerc")
    assert parse_org("coa:3").structure is Structure.CHAIN
    assert parse_org("goa:2").structure is Structure.GRAPH
    assert parse_org("solo").agents == ("workera",)
    with pytest.raises(OrgError):
        parse_org("ring:3")


def test_dict_round_trip():
    for text in ("toa:3", "coa:4", "goa:3", "solo"):
        g = parse_org(text)
        assert AgentGraph.from_dict(g.to_dict()) == g


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_exhaustive_structures(n):
    names = NAMES[:n]
    for root in names:
        r = validate(build_toa(root, [a for a in names if a != root]))
        assert r.is_valid and r.command_cycles == [] and r.max_agent_in_degree <= 1
    for order in itertools.permutations(names):
        r = validate(build_coa(list(order)))
        assert r.is_valid and r.command_cycles == [] and r.max_agent_in_degree <= 1
    r = validate(build_goa(names))
    assert len(r.command_cycles) >= 1
