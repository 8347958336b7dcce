"""Random near-regular community construction and round-to-round transitions.

The generator repeatedly picks a random degree-deficient node and joins it
to a random compatible partner whose degree is still below the target,
skipping honest-sybil pairs, and after every new edge strips "redundant"
edges whose two endpoints are both already at full degree.  The result has
every degree in [d-1, d].  It deliberately mirrors that simple heuristic,
bias and all, rather than sampling uniform d-regular graphs.

Connectivity is not implied by the wiring rule, so construction retries
from the same starting point with a fresh derived seed until the result is
connected (bounded by a restart budget).

Determinism: every draw goes through ``random.Random`` (CPython's Mersenne
Twister) streams derived from the caller's stream, and candidate lists are
materialized in sorted order before each draw, so a fixed seed yields a
bit-identical graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random
from typing import Iterable, Iterator, Optional

from .graph import CommunityGraph, GraphError, NodeRecord, NodeType


class GraphConstructionError(GraphError):
    """Wiring could not produce a valid community within the retry budget."""


@dataclass(frozen=True)
class GenParams:
    """Target shape of a generated community."""

    honest: int
    corrupt: int
    sybil: int
    degree: int = 6
    stall_budget: int = 2000
    restart_budget: int = 32

    def __post_init__(self) -> None:
        if self.degree < 2:
            raise ValueError(f"degree must be >= 2, got {self.degree}")
        if min(self.honest, self.corrupt, self.sybil) < 0:
            raise ValueError("node counts must be non-negative")
        if self.honest + self.corrupt + self.sybil < 2:
            raise ValueError("community needs at least two identities")

    @property
    def population(self) -> int:
        return self.honest + self.corrupt + self.sybil

    def count_for(self, node_type: NodeType) -> int:
        return {
            NodeType.HONEST: self.honest,
            NodeType.CORRUPT: self.corrupt,
            NodeType.SYBIL: self.sybil,
        }[node_type]


def _compatible(a: NodeType, b: NodeType) -> bool:
    return {a, b} != {NodeType.HONEST, NodeType.SYBIL}


def _cleanup_pass(graph: CommunityGraph, degree: int) -> None:
    """Remove every edge whose endpoints are both at full degree.

    Sequential with re-check: removing one such edge drops both endpoints
    to d-1, which can disqualify other candidates, so edges are visited in
    sorted order against live degrees.
    """
    for u, v in list(graph.edges()):
        if graph.degree(u) == degree and graph.degree(v) == degree:
            graph.remove_edge(u, v)


def _cleanup_incident(graph: CommunityGraph, degree: int, vid: int) -> None:
    # only a node that just reached full degree can create a new redundant pair
    if graph.degree(vid) != degree:
        return
    for nb in sorted(graph.neighbors(vid)):
        if graph.degree(nb) == degree:
            graph.remove_edge(vid, nb)
            return  # vid dropped to d-1; nothing else incident qualifies


def _wire(graph: CommunityGraph, degree: int, rng: Random, stall_budget: int) -> bool:
    """Add edges until every degree is at least d-1; False on a stall."""
    _cleanup_pass(graph, degree)
    adj = graph.adjacency_view()
    stall = 0
    while True:
        deficient = sorted(v for v in adj if len(adj[v]) < degree - 1)
        if not deficient:
            return True
        v = rng.choice(deficient)
        v_type = graph.nodes[v].node_type
        v_adj = adj[v]
        candidates = sorted(
            u
            for u in adj
            if u != v
            and len(adj[u]) < degree
            and u not in v_adj
            and _compatible(v_type, graph.nodes[u].node_type)
        )
        if not candidates:
            stall += 1
            if stall > stall_budget:
                return False
            continue
        stall = 0
        u = rng.choice(candidates)
        graph.add_edge(v, u)
        _cleanup_incident(graph, degree, v)
        _cleanup_incident(graph, degree, u)


def random_graph_gen(
    graph: CommunityGraph,
    params: GenParams,
    rng: Random,
    id_alloc: Optional[Iterator[int]] = None,
    birth_round: int = 1,
) -> CommunityGraph:
    """Bring ``graph`` up to the target counts and wire it to degrees in [d-1, d].

    ``graph`` may be empty (initial construction) or degree-deficient after
    removals (repair).  Missing nodes are created honest first, then
    corrupt, then sybil, with ids from ``id_alloc``.  Wiring restarts from
    the incoming edge state with a fresh derived seed whenever it stalls or
    ends disconnected; after ``params.restart_budget`` failed attempts a
    :class:`GraphConstructionError` is raised.
    """
    counts = graph.type_counts()
    for node_type in (NodeType.HONEST, NodeType.CORRUPT, NodeType.SYBIL):
        deficit = params.count_for(node_type) - counts[node_type]
        if deficit < 0:
            raise GraphError(f"graph already has more {node_type.name.lower()} nodes than the target")
        for _ in range(deficit):
            if id_alloc is None:
                raise GraphError("id allocator required to add missing nodes")
            graph.add_node(NodeRecord(id=next(id_alloc), node_type=node_type, birth_round=birth_round))

    baseline = graph.copy_adjacency()
    for _ in range(params.restart_budget):
        attempt_rng = Random(rng.getrandbits(64))
        if _wire(graph, params.degree, attempt_rng, params.stall_budget) and graph.is_connected():
            return graph
        graph.restore_adjacency(baseline)
    raise GraphConstructionError(
        f"no connected wiring found in {params.restart_budget} attempts "
        f"(population {params.population}, degree {params.degree})"
    )


def transition(
    graph: CommunityGraph,
    removals: Iterable[int],
    params: GenParams,
    rng: Random,
    id_alloc: Iterator[int],
    next_round: int,
    registry: Optional[dict] = None,
) -> list:
    """Advance the community one round: drop removals, spawn replacements, rewire.

    Every removed identity must be either an exposed sybil or a dead
    genuine node.  Each is replaced by a fresh identity of the same type
    (new id, clean ledgers, unexposed, born ``next_round``); survivors and
    their ledgers are untouched.  Returns ``(removed_id, replacement_id)``
    pairs so schedulers can transfer slots.
    """
    removal_list = sorted(set(removals))
    pairs = []
    for vid in removal_list:
        if vid not in graph.nodes:
            raise GraphError(f"removal of {vid}: not a live node")
        record = graph.nodes[vid]
        if not (record.exposed or record.death_round is not None):
            raise GraphError(f"removal of {vid}: neither an exposed sybil nor a dead genuine node")
        record = graph.remove_node(vid)
        if record.death_round is None:
            record.death_round = next_round - 1
        fresh = NodeRecord(id=next(id_alloc), node_type=record.node_type, birth_round=next_round)
        graph.add_node(fresh)
        if registry is not None:
            registry[fresh.id] = fresh
        pairs.append((vid, fresh.id))
    random_graph_gen(graph, params, rng, id_alloc=None, birth_round=next_round)
    return pairs
