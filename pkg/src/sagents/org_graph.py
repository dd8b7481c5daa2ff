"""Agent organization graphs.

An organization is a directed graph over agents plus a single environment
vertex. Agent-to-agent edges encode command authority; every agent also has
an edge to the environment because every agent acts on and perceives it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

import networkx as nx

ENVIRONMENT = "<env>"

# An agent may be commanded by at most this many other agents. Configurable
# because the source wording ("less than 1") contradicts a tree leaf's in-degree.
MAX_COMMAND_IN_DEGREE = 1

# Elementary-cycle enumeration is exponential; above this size only existence is reported.
CYCLE_ENUMERATION_LIMIT = 10


class OrgError(ValueError):
    pass


class DuplicateAgent(OrgError):
    pass


class EmptyOrganization(OrgError):
    pass


class UnknownAgent(OrgError, KeyError):
    pass


class Structure(str, Enum):
    SOLO = "solo"
    CHAIN = "chain"
    GRAPH = "graph"
    TREE = "tree"


def norm(agent: str) -> str:
    """Canonical key for an agent id; ids compare case-insensitively."""
    return agent.strip().lower()


@dataclass(frozen=True)
class AgentGraph:
    agents: tuple[str, ...]
    edges: frozenset[tuple[str, str]]
    structure: Structure
    root: str | None = None

    def agent_edges(self) -> set[tuple[str, str]]:
        return {(a, b) for a, b in self.edges if a != ENVIRONMENT and b != ENVIRONMENT}

    def environment_edges(self) -> set[tuple[str, str]]:
        return {(a, b) for a, b in self.edges if b == ENVIRONMENT}

    def has_agent(self, agent: str) -> bool:
        return norm(agent) in {norm(a) for a in self.agents}

    def resolve(self, agent: str) -> str:
        """Return the stored spelling of ``agent``."""
        for a in self.agents:
            if norm(a) == norm(agent):
                return a
        raise UnknownAgent(agent)

    def in_degree(self, agent: str) -> int:
        key = norm(agent)
        return sum(1 for _, b in self.agent_edges() if norm(b) == key)

    def chain_order(self) -> list[str]:
        """Agents in command order (path order for chains, root first for trees)."""
        if self.structure is Structure.CHAIN:
            succ = {a: b for a, b in self.agent_edges()}
            heads = [a for a in self.agents if self.in_degree(a) == 0]
            order = [heads[0]]
            while order[-1] in succ:
                order.append(succ[order[-1]])
            return order
        if self.structure is Structure.TREE:
            return [self.root] + sorted((a for a in self.agents if a != self.root), key=norm)
        return list(self.agents)

    def to_dict(self) -> dict:
        return {
            "structure": self.structure.value,
            "root": self.root,
            "agents": list(self.agents),
            "edges": sorted([list(e) for e in self.agent_edges()]),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "AgentGraph":
        structure = Structure(doc["structure"])
        agents = list(doc["agents"])
        if structure is Structure.TREE:
            root = doc.get("root") or agents[0]
            return build_toa(root, [a for a in agents if norm(a) != norm(root)])
        if structure is Structure.CHAIN:
            edges = [tuple(e) for e in doc.get("edges", [])]
            if edges:
                agents = _path_from_edges(agents, edges)
            return build_coa(agents)
        if structure is Structure.GRAPH:
            return build_goa(agents)
        return build_solo(agents[0])

    @classmethod
    def from_json(cls, text: str) -> "AgentGraph":
        return cls.from_dict(json.loads(text))


def _path_from_edges(agents: list[str], edges: list[tuple[str, str]]) -> list[str]:
    succ = dict(edges)
    targets = {b for _, b in edges}
    heads = [a for a in agents if a not in targets]
    if len(heads) != 1:
        raise OrgError(f"chain edges do not form a single path: {edges}")
    order = [heads[0]]
    while order[-1] in succ and len(order) <= len(agents):
        order.append(succ[order[-1]])
    return order


def _check_distinct(agents: Iterable[str]) -> list[str]:
    agents = list(agents)
    seen: set[str] = set()
    for a in agents:
        if not a or not a.strip():
            raise OrgError("agent ids must be non-empty")
        if a == ENVIRONMENT:
            raise OrgError(f"{ENVIRONMENT!r} is reserved for the environment vertex")
        if norm(a) in seen:
            raise DuplicateAgent(a)
        seen.add(norm(a))
    return agents


def _with_env(agents: list[str], agent_edges: Iterable[tuple[str, str]]) -> frozenset:
    return frozenset(set(agent_edges) | {(a, ENVIRONMENT) for a in agents})


def build_solo(agent: str) -> AgentGraph:
    agents = _check_distinct([agent])
    return AgentGraph(tuple(agents), _with_env(agents, ()), Structure.SOLO, root=agent)


def build_toa(root: str, leaves: list[str]) -> AgentGraph:
    agents = _check_distinct([root, *leaves])
    if not leaves:
        raise EmptyOrganization("a tree needs at least one leaf")
    edges = [(root, leaf) for leaf in leaves]
    return AgentGraph(tuple(agents), _with_env(agents, edges), Structure.TREE, root=root)


def build_goa(agents: list[str]) -> AgentGraph:
    if len(agents) < 2:
        raise EmptyOrganization("a graph of agents needs at least two agents")
    agents = _check_distinct(agents)
    edges = [(a, b) for a in agents for b in agents if a != b]
    return AgentGraph(tuple(agents), _with_env(agents, edges), Structure.GRAPH, root=agents[0])


def build_coa(order: list[str]) -> AgentGraph:
    agents = _check_distinct(order)
    if len(agents) < 2:
        raise EmptyOrganization("a chain needs at least two agents")
    edges = list(zip(agents, agents[1:]))
    return AgentGraph(tuple(agents), _with_env(agents, edges), Structure.CHAIN, root=agents[0])


@dataclass
class ValidationReport:
    is_valid: bool
    command_cycles: list[list[str]]
    max_agent_in_degree: int
    violations: list[str] = field(default_factory=list)
    cycles_truncated: bool = False

    def to_dict(self) -> dict:
        return {
            "is_valid": self.is_valid,
            "command_cycles": self.command_cycles,
            "max_agent_in_degree": self.max_agent_in_degree,
            "violations": self.violations,
            "cycles_truncated": self.cycles_truncated,
        }


def _canonical_cycle(cycle: list[str]) -> list[str]:
    i = cycle.index(min(cycle))
    return cycle[i:] + cycle[:i]


def validate(graph: AgentGraph, max_in_degree: int = MAX_COMMAND_IN_DEGREE) -> ValidationReport:
    violations: list[str] = []
    env_vertices = [v for e in graph.edges for v in e if v == ENVIRONMENT]
    if not env_vertices:
        violations.append("graph has no environment vertex")
    for a, b in graph.edges:
        if a == b:
            violations.append(f"self edge on {a}")
    for a in graph.agents:
        if (a, ENVIRONMENT) not in graph.edges:
            violations.append(f"{a} has no edge to the environment")

    digraph = nx.DiGraph()
    digraph.add_nodes_from(graph.agents)
    digraph.add_edges_from(graph.agent_edges())

    truncated = len(graph.agents) > CYCLE_ENUMERATION_LIMIT
    if truncated:
        try:
            cycles = [_canonical_cycle([u for u, _ in nx.find_cycle(digraph)])]
        except nx.NetworkXNoCycle:
            cycles = []
    else:
        cycles = sorted(_canonical_cycle(list(c)) for c in nx.simple_cycles(digraph))

    degree = max((graph.in_degree(a) for a in graph.agents), default=0)

    if graph.structure in (Structure.TREE, Structure.CHAIN):
        if cycles:
            violations.append(f"{graph.structure.value} contains command cycles")
        if degree > max_in_degree:
            violations.append(f"agent in-degree {degree} exceeds {max_in_degree}")
    if graph.structure is Structure.TREE:
        if graph.root is None or graph.in_degree(graph.root) != 0:
            violations.append("tree root must have in-degree 0")
        for a in graph.agents:
            if a != graph.root and graph.in_degree(a) != 1:
                violations.append(f"leaf {a} must have in-degree exactly 1")
        for a, b in graph.agent_edges():
            if a != graph.root:
                violations.append(f"leaf {a} commands {b}")
    if graph.structure is Structure.CHAIN:
        path = list(zip(graph.chain_order(), graph.chain_order()[1:]))
        if set(path) != graph.agent_edges() or len(graph.chain_order()) != len(graph.agents):
            violations.append("chain edges do not form a single covering path")
    if graph.structure is Structure.GRAPH:
        expected = {(a, b) for a in graph.agents for b in graph.agents if a != b}
        if graph.agent_edges() != expected:
            violations.append("graph of agents must connect every ordered pair")

    return ValidationReport(
        is_valid=not violations,
        command_cycles=cycles,
        max_agent_in_degree=degree,
        violations=violations,
        cycles_truncated=truncated,
    )


def command_targets(graph: AgentGraph, agent: str) -> set[str]:
    if not graph.has_agent(agent):
        raise UnknownAgent(agent)
    key = norm(agent)
    return {b for a, b in graph.agent_edges() if norm(a) == key}


def parse_org(text: str, commander: str = "leader") -> AgentGraph:
    """Build an organization from a short CLI form such as ``toa:4`` or ``solo``.

    Tree sizes count the root, so ``toa:4`` is one leader and three workers.
    Chains and graphs use only workers.
    """
    kind, _, size = text.partition(":")
    kind = kind.strip().lower()
    n = int(size) if size else 1
    workers = [f"worker{chr(ord('a') + i)}" for i in range(max(n, 1))]
    if kind in ("solo", "single"):
        return build_solo(workers[0])
    if kind in ("toa", "tree"):
        if n < 2:
            return build_solo(workers[0])
        return build_toa(commander, workers[: n - 1])
    if kind in ("coa", "chain"):
        return build_coa(workers)
    if kind in ("goa", "graph"):
        return build_goa(workers)
    raise OrgError(f"unknown organization form {text!r}")
