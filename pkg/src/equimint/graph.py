"""Trust-graph data model for a minting community infiltrated by sybils.

A community is an undirected labeled graph whose vertices are identities:
honest, corrupt (genuine but vouching for sybils), or sybil. Honest
identities never share an edge with a sybil, so the corrupt identities are
the only bridge between the genuine core and any sybil region.

Besides the graph itself the module provides the two computations the
minting protocols need:

* :func:`conditional_boundary` -- the alive, unexposed identities first
  reached from a node along paths that run through already-exposed
  identities.  Fines levied on an exposed sybil are divided among this set.
* :func:`vertex_expansion` -- the inner-boundary vertex expansion of a
  graph, used as a connectivity diagnostic.  Exact by subset enumeration on
  small graphs; a sampled, clearly-approximate estimate otherwise.

:class:`HistoryStore` keeps an append-only record of per-round adjacency so
boundaries can be evaluated against the graph as it stood in the round a
given coin was minted.
"""

from __future__ import annotations

import enum
from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Container, Iterable, Iterator, Mapping, Optional, Sequence


class GraphError(ValueError):
    """Structural misuse of the community graph or its history."""


class ExpansionCapError(GraphError):
    """Exact vertex expansion requested on a graph above the enumeration cap."""


class NodeType(enum.Enum):
    HONEST = "H"
    CORRUPT = "C"
    SYBIL = "S"

    @property
    def is_genuine(self) -> bool:
        return self is not NodeType.SYBIL


@dataclass
class NodeRecord:
    """One identity over its whole lifetime.

    Minting is dense over the participation interval: one coin per round
    from ``birth_round`` until exposure (sybils), death (genuine nodes), or
    the present.  The interval form keeps per-round mint queries O(1)
    instead of storing one map entry per lived round; ``minted_at`` is the
    map view of that interval.

    ``fine_ledger`` maps a mint round to the outstanding fine attributed to
    it.  The static protocol keeps its single undated fine under key
    ``STATIC_BUCKET``.  Entries are strictly positive; paid or reassigned
    amounts are deleted, never left at zero.
    """

    id: int
    node_type: NodeType
    birth_round: int
    exposed: bool = False
    death_round: Optional[int] = None
    mint_end: Optional[int] = None
    fine_ledger: dict = field(default_factory=dict)

    def minted_at(self, t2: int, now: Optional[int] = None) -> int:
        last = self.mint_end
        if last is None:
            if now is None:
                raise GraphError(f"node {self.id} is still minting; pass the current round")
            last = now
        return 1 if self.birth_round <= t2 <= last else 0

    def mint_count(self, now: Optional[int] = None) -> int:
        last = self.mint_end
        if last is None:
            if now is None:
                raise GraphError(f"node {self.id} is still minting; pass the current round")
            last = now
        return max(0, last - self.birth_round + 1)

    def outstanding_fine(self):
        return sum(self.fine_ledger.values())


#: Ledger key used by the static protocol, whose fine is a single undated sum.
STATIC_BUCKET = 0


class CommunityGraph:
    """The live community at one point in time.

    Holds only currently-participating identities.  Mutation is confined to
    the single simulation thread; readers may share a sealed graph freely.
    Nodes touched by a mutation are tracked so :class:`HistoryStore` can
    record only what changed between rounds.
    """

    def __init__(self) -> None:
        self.nodes: dict[int, NodeRecord] = {}
        self._adj: dict[int, set[int]] = {}
        self._dirty: set[int] = set()

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, vid: int) -> bool:
        return vid in self.nodes

    def add_node(self, record: NodeRecord) -> None:
        if record.id in self.nodes:
            raise GraphError(f"node id {record.id} already present")
        self.nodes[record.id] = record
        self._adj[record.id] = set()
        self._dirty.add(record.id)

    def add_edge(self, u: int, v: int) -> None:
        if u == v:
            raise GraphError(f"self-loop on node {u}")
        if u not in self._adj or v not in self._adj:
            raise GraphError(f"edge ({u}, {v}) references a missing node")
        if v in self._adj[u]:
            raise GraphError(f"duplicate edge ({u}, {v})")
        self._adj[u].add(v)
        self._adj[v].add(u)
        self._dirty.add(u)
        self._dirty.add(v)

    def remove_edge(self, u: int, v: int) -> None:
        self._adj[u].discard(v)
        self._adj[v].discard(u)
        self._dirty.add(u)
        self._dirty.add(v)

    def remove_node(self, vid: int) -> NodeRecord:
        record = self.nodes.pop(vid)
        for nb in self._adj.pop(vid):
            self._adj[nb].discard(vid)
            self._dirty.add(nb)
        self._dirty.add(vid)
        return record

    def neighbors(self, vid: int) -> frozenset:
        return frozenset(self._adj[vid])

    def adjacency_view(self) -> Mapping[int, set]:
        return self._adj

    def degree(self, vid: int) -> int:
        return len(self._adj[vid])

    def edges(self) -> Iterator[tuple[int, int]]:
        for u in sorted(self._adj):
            for v in sorted(self._adj[u]):
                if u < v:
                    yield (u, v)

    def edge_count(self) -> int:
        return sum(len(s) for s in self._adj.values()) // 2

    def type_counts(self) -> dict[NodeType, int]:
        counts = {t: 0 for t in NodeType}
        for record in self.nodes.values():
            counts[record.node_type] += 1
        return counts

    def is_connected(self) -> bool:
        if not self.nodes:
            return False
        start = next(iter(self._adj))
        seen = {start}
        stack = [start]
        while stack:
            for nb in self._adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        return len(seen) == len(self.nodes)

    def copy_adjacency(self) -> dict[int, set]:
        return {v: set(nbs) for v, nbs in self._adj.items()}

    def restore_adjacency(self, saved: dict[int, set]) -> None:
        """Roll wiring back to a saved state (same node set required)."""
        if saved.keys() != self._adj.keys():
            raise GraphError("adjacency restore with a different node set")
        for v, nbs in saved.items():
            if self._adj[v] != nbs:
                self._adj[v] = set(nbs)
                self._dirty.add(v)

    def pop_dirty(self) -> set:
        dirty, self._dirty = self._dirty, set()
        return dirty


def conditional_boundary(
    neighbors_of: Callable[[int], Iterable[int]],
    start: int,
    exposed: Container[int],
    eligible: Container[int],
) -> set:
    """Identities in ``eligible`` first reached from ``start`` through exposed ones.

    Walks the graph given by ``neighbors_of`` starting at ``start``.  A node
    in ``exposed`` is traversed (fine flows through it); a node in
    ``eligible`` (alive and unexposed) terminates its path and joins the
    result.  Any other node -- in particular one that died without being
    exposed -- blocks propagation: its debt died with it, so paths may not
    tunnel through.  ``start`` itself is never part of the result.
    """
    seen = {start}
    stack = [start]
    found: set = set()
    while stack:
        for nb in neighbors_of(stack.pop()):
            if nb in seen:
                continue
            seen.add(nb)
            if nb in exposed:
                stack.append(nb)
            elif nb in eligible:
                found.add(nb)
    return found


def _neighbor_bitmasks(adj: Mapping[int, Iterable[int]]) -> tuple[list, dict]:
    order = sorted(adj)
    index = {v: i for i, v in enumerate(order)}
    masks = [0] * len(order)
    for v, nbs in adj.items():
        m = 0
        for nb in nbs:
            m |= 1 << index[nb]
        masks[index[v]] = m
    return masks, index


def vertex_expansion(adj: Mapping[int, Iterable[int]], cap: int = 16) -> Fraction:
    """Exact inner-boundary vertex expansion by subset enumeration.

    Minimizes, over every nonempty vertex set A with ``|A| <= |V|/2``, the
    fraction of A adjacent to at least one vertex outside A.  The
    enumeration is exponential, hence the hard ``cap`` on graph size;
    larger graphs should use :func:`vertex_expansion_sampled`.

    The result is positive exactly when the graph is connected (for two or
    more vertices): a disconnected graph has a small component with an
    empty boundary.
    """
    n = len(adj)
    if n < 2:
        raise GraphError("vertex expansion needs at least two vertices")
    if n > cap:
        raise ExpansionCapError(
            f"graph has {n} > {cap} vertices; exact enumeration refused "
            "(request the sampled estimate instead)"
        )
    masks, _ = _neighbor_bitmasks(adj)
    full = (1 << n) - 1
    best: Optional[Fraction] = None
    for subset in range(1, full + 1):
        size = subset.bit_count()
        if 2 * size > n:
            continue
        outside = full & ~subset
        boundary = 0
        rest = subset
        while rest:
            low = rest & -rest
            if masks[low.bit_length() - 1] & outside:
                boundary += 1
            rest ^= low
        ratio = Fraction(boundary, size)
        if best is None or ratio < best:
            best = ratio
            if best == 0:
                break
    assert best is not None
    return best


def vertex_expansion_sampled(adj: Mapping[int, Iterable[int]], rng, samples: int = 2000) -> Fraction:
    """Approximate expansion: the minimum over sampled vertex sets.

    Upper-bounds the true minimum (a sample can only miss the minimizing
    set, never undershoot it) and carries no approximation guarantee; it is
    a diagnostic for graphs too large to enumerate.  All singletons are
    always included alongside ``samples`` random subsets.
    """
    order = sorted(adj)
    n = len(order)
    if n < 2:
        raise GraphError("vertex expansion needs at least two vertices")
    node_set = set(order)

    def ratio(subset: set) -> Fraction:
        boundary = sum(1 for v in subset if any(nb not in subset for nb in adj[v]))
        return Fraction(boundary, len(subset))

    best = min(ratio({v}) for v in order)
    max_size = n // 2
    for _ in range(samples):
        size = rng.randint(1, max_size)
        subset = set(rng.sample(order, size))
        # grow half the samples as connected blobs, which better probe bottlenecks
        if rng.random() < 0.5:
            seed = rng.choice(order)
            subset = {seed}
            frontier = [seed]
            while frontier and len(subset) < size:
                nxt = sorted(set(adj[frontier.pop(0)]) & node_set - subset)
                for nb in nxt:
                    if len(subset) >= size:
                        break
                    subset.add(nb)
                    frontier.append(nb)
        best = min(best, ratio(subset))
    return best


@dataclass
class GraphCheckReport:
    """Outcome of the structural checks on a community graph."""

    node_count: int
    edge_count: int
    connected: bool
    honest_sybil_edges: tuple
    degree_min: int
    degree_max: int
    degree_ok: Optional[bool]
    type_counts: dict
    sybil_share: Optional[Fraction]
    corrupt_share: Optional[Fraction]
    sybil_bound: Optional[Fraction]
    ratio_ok: Optional[bool]

    @property
    def passed(self) -> bool:
        checks = [self.connected, not self.honest_sybil_edges]
        if self.degree_ok is not None:
            checks.append(self.degree_ok)
        if self.ratio_ok is not None:
            checks.append(self.ratio_ok)
        return all(checks)

    def summary(self) -> str:
        lines = [
            f"nodes: {self.node_count}  edges: {self.edge_count}",
            f"connected: {'yes' if self.connected else 'NO'}",
            f"honest-sybil edges: {len(self.honest_sybil_edges)}"
            + (f" {list(self.honest_sybil_edges)}" if self.honest_sybil_edges else ""),
            f"degrees: [{self.degree_min}, {self.degree_max}]"
            + ("" if self.degree_ok is None else f" within target: {'yes' if self.degree_ok else 'NO'}"),
            "type counts: " + ", ".join(f"{t.value}={self.type_counts.get(t, 0)}" for t in NodeType),
        ]
        if self.ratio_ok is not None:
            lines.append(
                f"sybil share {self.sybil_share} vs bound {self.sybil_bound}, "
                f"corrupt share {self.corrupt_share}: {'ok' if self.ratio_ok else 'VIOLATED'}"
            )
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def check_graph_invariants(
    graph: CommunityGraph,
    expected_degree: Optional[int] = None,
    gamma: Optional[Fraction] = None,
    phi: Optional[Fraction] = None,
) -> GraphCheckReport:
    """Validate a community graph; every check is reported, none raises.

    Checks connectivity, the honest-sybil edge exclusion, and (when a
    target degree is given) that every degree lies in [d-1, d].  When both
    ``gamma`` (corrupt-share bound) and ``phi`` (expansion assumption) are
    given, the realized type shares are checked against the admission
    bound sybils/n <= gamma/phi - gamma.
    """
    hs_edges = []
    for u, v in graph.edges():
        tu = graph.nodes[u].node_type
        tv = graph.nodes[v].node_type
        if {tu, tv} == {NodeType.HONEST, NodeType.SYBIL}:
            hs_edges.append((u, v))
    degrees = [graph.degree(v) for v in graph.nodes] or [0]
    counts = graph.type_counts()
    n = len(graph)
    degree_ok = None
    if expected_degree is not None:
        degree_ok = all(expected_degree - 1 <= d <= expected_degree for d in degrees)
    sybil_share = corrupt_share = bound = ratio_ok = None
    if n and gamma is not None and phi is not None:
        sybil_share = Fraction(counts[NodeType.SYBIL], n)
        corrupt_share = Fraction(counts[NodeType.CORRUPT], n)
        bound = Fraction(gamma) / Fraction(phi) - Fraction(gamma)
        ratio_ok = sybil_share <= bound and corrupt_share <= Fraction(gamma)
    return GraphCheckReport(
        node_count=n,
        edge_count=graph.edge_count(),
        connected=graph.is_connected(),
        honest_sybil_edges=tuple(hs_edges),
        degree_min=min(degrees),
        degree_max=max(degrees),
        degree_ok=degree_ok,
        type_counts=counts,
        sybil_share=sybil_share,
        corrupt_share=corrupt_share,
        sybil_bound=bound,
        ratio_ok=ratio_ok,
    )


class HistoryStore:
    """Append-only per-round adjacency, shared-structure edition.

    Each node carries a timeline of ``(from_round, neighbors)`` entries; the
    neighbor tuple in force at round t is the last entry with
    ``from_round <= t``.  Rounds are sealed in order and never rewritten.
    An epoch counter increments whenever a sealed round actually changed
    any adjacency, letting callers reuse boundary computations across runs
    of identical rounds.
    """

    def __init__(self) -> None:
        # per node: parallel lists of change rounds and the adjacency from then on
        self._change_rounds: dict[int, list] = {}
        self._change_adj: dict[int, list] = {}
        self._epoch_by_round: list[int] = [0]  # index 0 unused; rounds are 1-based
        self._epoch = 0

    @property
    def sealed_rounds(self) -> int:
        return len(self._epoch_by_round) - 1

    def seal_round(self, t: int, graph: CommunityGraph) -> None:
        if t != self.sealed_rounds + 1:
            raise GraphError(f"rounds must be sealed in order; expected {self.sealed_rounds + 1}, got {t}")
        changed = False
        for vid in sorted(graph.pop_dirty()):
            if vid in graph.nodes:
                entry = tuple(sorted(graph.adjacency_view()[vid]))
            else:
                entry = ()  # removed this round; tombstone
            adj_list = self._change_adj.setdefault(vid, [])
            if adj_list and adj_list[-1] == entry:
                continue
            self._change_rounds.setdefault(vid, []).append(t)
            adj_list.append(entry)
            changed = True
        if changed:
            self._epoch += 1
        self._epoch_by_round.append(self._epoch)

    def neighbors_at(self, vid: int, t: int) -> tuple:
        if not 1 <= t <= self.sealed_rounds:
            raise GraphError(f"round {t} not sealed (have 1..{self.sealed_rounds})")
        rounds = self._change_rounds.get(vid)
        if rounds is None:
            raise GraphError(f"unknown node {vid}")
        pos = bisect_right(rounds, t) - 1
        if pos < 0:
            raise GraphError(f"node {vid} not yet born at round {t}")
        return self._change_adj[vid][pos]

    def epoch_of(self, t: int) -> int:
        if not 1 <= t <= self.sealed_rounds:
            raise GraphError(f"round {t} not sealed (have 1..{self.sealed_rounds})")
        return self._epoch_by_round[t]


def write_graph(graph: CommunityGraph, path) -> None:
    """Dump as a node table (`id type birth`) followed by an edge list (`u v`)."""
    lines = ["# nodes: id type birth"]
    for vid in sorted(graph.nodes):
        record = graph.nodes[vid]
        lines.append(f"{vid} {record.node_type.value} {record.birth_round}")
    lines.append("# edges: u v")
    for u, v in graph.edges():
        lines.append(f"{u} {v}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_graph(path) -> CommunityGraph:
    """Parse a graph dump written by :func:`write_graph`.

    Node rows have three fields, edge rows two; comment lines start with
    ``#``.  The loaded graph is *not* validated -- feed it to
    :func:`check_graph_invariants` to diagnose it.
    """
    graph = CommunityGraph()
    pending_edges = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) == 3:
                vid, type_letter, birth = parts
                graph.add_node(
                    NodeRecord(id=int(vid), node_type=NodeType(type_letter), birth_round=int(birth))
                )
            elif len(parts) == 2:
                pending_edges.append((int(parts[0]), int(parts[1])))
            else:
                raise GraphError(f"{path}:{lineno}: expected 2 or 3 fields, got {len(parts)}")
    for u, v in pending_edges:
        graph.add_edge(u, v)
    return graph
