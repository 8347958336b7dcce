"""The per-round simulation loop over an evolving trust community.

Each round runs, in order: every alive unexposed identity mints one coin
and services its fines; the exposure oracle tests membership and newly
exposed sybils have their minting history converted into fines; genuine
deaths are drawn (probabilistic variant); finally the community
transitions -- exposed sybils and dead genuine identities are replaced by
fresh same-type identities and the graph is rewired.  The static variant
freezes the graph instead: exposed sybils simply stop minting.

A run is a pure function of (seed, config): one ``random.Random`` stream
drives graph construction, the exposure schedule, death draws, and every
rewiring, with all candidate sets iterated in sorted order.
"""

from __future__ import annotations

import itertools
import random
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .economy import EconomyState, Variant, impose_fine_per_round, impose_fine_static, mint_and_pay
from .generate import GenParams, random_graph_gen, transition
from .graph import CommunityGraph, HistoryStore, NodeType, conditional_boundary
from .metrics import FLOAT_TOLERANCE, collect_round

ROUND_ROBIN = "round-robin"
BERNOULLI = "bernoulli"
UNIFORM = "uniform"
EXPOSURE_MODES = (ROUND_ROBIN, BERNOULLI, UNIFORM)


class ConfigError(ValueError):
    """Invalid or inconsistent simulation configuration."""


@dataclass
class SimConfig:
    honest: int = 60
    corrupt: int = 40
    sybil: int = 20
    degree: int = 6
    rounds: int = 500
    variant: Variant = Variant.STATIC
    alpha: object = Fraction(2)
    exposure_mode: str = ""  # empty -> derived from the variant
    p: float = 0.034
    q: float = 0.0017
    seed: int = 0
    arithmetic: str = "exact"
    gamma: Fraction = Fraction(1, 3)
    phi: Fraction = Fraction(2, 3)
    ratio_check: bool = True

    @property
    def population(self) -> int:
        return self.honest + self.corrupt + self.sybil

    @property
    def genuine(self) -> int:
        return self.honest + self.corrupt

    @property
    def exact(self) -> bool:
        return self.arithmetic == "exact"

    def resolved_exposure_mode(self) -> str:
        if self.exposure_mode:
            return self.exposure_mode
        return BERNOULLI if self.variant is Variant.PROBABILISTIC else ROUND_ROBIN

    def validate(self) -> None:
        if self.rounds < 0:
            raise ConfigError(f"rounds must be >= 0, got {self.rounds}")
        if min(self.honest, self.corrupt, self.sybil) < 0:
            raise ConfigError("node counts must be non-negative")
        if self.population < 2:
            raise ConfigError("population must be at least 2")
        if self.degree < 2:
            raise ConfigError(f"degree must be >= 2, got {self.degree}")
        if self.degree >= self.population:
            raise ConfigError("degree must be below the population size")
        if self.arithmetic not in ("exact", "float"):
            raise ConfigError(f"arithmetic must be 'exact' or 'float', got {self.arithmetic!r}")
        if self.exposure_mode and self.exposure_mode not in EXPOSURE_MODES:
            raise ConfigError(f"exposure_mode must be one of {EXPOSURE_MODES}, got {self.exposure_mode!r}")
        if not isinstance(self.variant, Variant):
            raise ConfigError(f"variant must be a Variant, got {self.variant!r}")
        alpha = Fraction(self.alpha) if not isinstance(self.alpha, float) else self.alpha
        if alpha < 1:
            raise ConfigError(f"alpha must be >= 1, got {self.alpha}")
        if self.variant is Variant.PROBABILISTIC:
            if not 0.0 <= self.q <= self.p <= 1.0:
                raise ConfigError(
                    f"probabilistic runs need 0 <= q <= p <= 1, got p={self.p}, q={self.q}"
                )
        if self.ratio_check:
            bound = self.gamma / self.phi - self.gamma
            if Fraction(self.sybil, self.population) > bound:
                raise ConfigError(
                    f"sybil share {Fraction(self.sybil, self.population)} exceeds the "
                    f"admission bound gamma/phi - gamma = {bound} (disable ratio_check to override)"
                )
            if Fraction(self.corrupt, self.population) > self.gamma:
                raise ConfigError(
                    f"corrupt share {Fraction(self.corrupt, self.population)} exceeds gamma = {self.gamma}"
                )

    def resolved_alpha(self):
        value = self.alpha
        if isinstance(value, str):
            value = Fraction(value)
        return float(value) if self.arithmetic == "float" else Fraction(value)

    def to_dict(self) -> dict:
        return {
            "honest": self.honest,
            "corrupt": self.corrupt,
            "sybil": self.sybil,
            "degree": self.degree,
            "rounds": self.rounds,
            "variant": self.variant.value,
            "alpha": str(Fraction(self.alpha)) if not isinstance(self.alpha, float) else self.alpha,
            "exposure_mode": self.resolved_exposure_mode(),
            "p": self.p,
            "q": self.q,
            "seed": self.seed,
            "arithmetic": self.arithmetic,
            "gamma": str(self.gamma),
            "phi": str(self.phi),
            "ratio_check": self.ratio_check,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        kwargs = dict(data)
        unknown = set(kwargs) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        if "variant" in kwargs and not isinstance(kwargs["variant"], Variant):
            try:
                kwargs["variant"] = Variant(kwargs["variant"])
            except ValueError as exc:
                raise ConfigError(f"unknown variant {kwargs['variant']!r}") from exc
        for frac_field in ("alpha", "gamma", "phi"):
            if frac_field in kwargs and isinstance(kwargs[frac_field], str):
                kwargs[frac_field] = Fraction(kwargs[frac_field])
        return cls(**kwargs)


class RoundRobinExposure:
    """One membership test per round over a fixed, seeded slot order.

    Slots are the initial members in a shuffled order; a replacement
    inherits its predecessor's slot.  Every slot is tested exactly once
    per full cycle of n rounds, so no identity goes untested for more
    than n rounds after its birth -- the latency the bounded-excess
    argument needs.
    """

    def __init__(self, member_ids, rng: random.Random) -> None:
        self.slots = sorted(member_ids)
        rng.shuffle(self.slots)
        self._slot_of = {vid: i for i, vid in enumerate(self.slots)}

    def pick(self, t: int) -> int:
        return self.slots[(t - 1) % len(self.slots)]

    def replace(self, old: int, new: int) -> None:
        pos = self._slot_of.pop(old)
        self.slots[pos] = new
        self._slot_of[new] = pos


@dataclass
class RunResult:
    config: SimConfig
    series: list
    state: EconomyState
    history: HistoryStore
    registry: dict
    graph: CommunityGraph
    settled_round: Optional[int]
    wall_seconds: float

    def per_mint_rows(self) -> list:
        return build_per_mint_rows(self)


def exposure_step(mode: str, oracle, graph: CommunityGraph, t: int, p: float, rng: random.Random) -> list:
    """Ids of sybils the community exposes this round, in processing order."""
    if mode == ROUND_ROBIN:
        candidate = oracle.pick(t)
        record = graph.nodes.get(candidate)
        if record is not None and record.node_type is NodeType.SYBIL and not record.exposed:
            return [candidate]
        return []
    if mode == UNIFORM:
        candidate = rng.choice(sorted(graph.nodes))
        record = graph.nodes[candidate]
        if record.node_type is NodeType.SYBIL and not record.exposed:
            return [candidate]
        return []
    if mode == BERNOULLI:
        hits = []
        for vid in sorted(graph.nodes):
            record = graph.nodes[vid]
            if record.node_type is NodeType.SYBIL and not record.exposed and rng.random() < p:
                hits.append(vid)
        return hits
    raise ConfigError(f"unknown exposure mode {mode!r}")


def death_step(graph: CommunityGraph, q: float, rng: random.Random) -> list:
    """Ids of genuine identities that cease to exist this round."""
    if q <= 0.0:
        return []
    gone = []
    for vid in sorted(graph.nodes):
        record = graph.nodes[vid]
        if record.node_type is not NodeType.SYBIL and rng.random() < q:
            gone.append(vid)
    return gone


def run_simulation(cfg: SimConfig) -> RunResult:
    """Run ``cfg.rounds`` rounds; deterministic in (cfg, cfg.seed)."""
    cfg.validate()
    started = time.perf_counter()
    rng = random.Random(cfg.seed)
    params = GenParams(honest=cfg.honest, corrupt=cfg.corrupt, sybil=cfg.sybil, degree=cfg.degree)
    id_alloc = itertools.count(0)
    graph = CommunityGraph()
    random_graph_gen(graph, params, rng, id_alloc=id_alloc, birth_round=1)
    registry = dict(graph.nodes)

    mode = cfg.resolved_exposure_mode()
    oracle = RoundRobinExposure(graph.nodes, rng) if mode == ROUND_ROBIN else None

    state = EconomyState(exact=cfg.exact)
    alpha = cfg.resolved_alpha()
    history = HistoryStore()
    exposed_ids: set = set()
    static = cfg.variant is Variant.STATIC
    pooled = cfg.variant is Variant.REGENERATING_POOLED
    probabilistic = cfg.variant is Variant.PROBABILISTIC

    series: list = []
    cumulative_exposed = 0

    for t in range(1, cfg.rounds + 1):
        history.seal_round(t, graph)
        nodes = graph.nodes

        # minting: every alive, unexposed identity
        minted_genuine = minted_sybil = 0
        live_unexposed = set()
        for vid in sorted(nodes):
            record = nodes[vid]
            if record.exposed:
                continue
            live_unexposed.add(vid)
            mint_and_pay(record, state)
            if record.node_type is NodeType.SYBIL:
                minted_sybil += 1
            else:
                minted_genuine += 1

        # exposure and fines
        exposures = exposure_step(mode, oracle, graph, t, cfg.p, rng)
        for uid in exposures:
            u = nodes[uid]
            exposed_ids.add(uid)
            live_unexposed.discard(uid)
            if static:
                boundary_ids = conditional_boundary(
                    lambda v: graph.adjacency_view()[v], uid, exposed_ids, live_unexposed
                )
                boundary = [nodes[w] for w in sorted(boundary_ids)]
                impose_fine_static(u, boundary, state, alpha, t)
            else:
                resolver = _BoundaryResolver(history, nodes, exposed_ids, live_unexposed, uid)
                impose_fine_per_round(u, t, resolver, nodes, state, alpha, pooled=pooled)

        # genuine deaths (probabilistic variant only)
        deaths = death_step(graph, cfg.q, rng) if probabilistic else []
        for did in deaths:
            record = nodes[did]
            record.death_round = t
            if record.mint_end is None:
                record.mint_end = t
            state.lose_node_fines(record)
            live_unexposed.discard(did)

        # transition to the next community
        if not static:
            removals = list(exposures) + deaths
            pairs = transition(graph, removals, params, rng, id_alloc, next_round=t + 1, registry=registry)
            if oracle is not None:
                for old, new in pairs:
                    oracle.replace(old, new)

        cumulative_exposed += len(exposures)
        alive_sybils = cfg.sybil - cumulative_exposed if static else cfg.sybil
        series.append(
            collect_round(
                state,
                t,
                minted_genuine,
                minted_sybil,
                alive_sybils,
                len(exposures),
                cumulative_exposed,
            )
        )

    settled = find_settled_round(series, cfg.genuine, exact=cfg.exact) if static else None
    return RunResult(
        config=cfg,
        series=series,
        state=state,
        history=history,
        registry=registry,
        graph=graph,
        settled_round=settled,
        wall_seconds=time.perf_counter() - started,
    )


class _BoundaryResolver:
    """Per-exposure boundary lookup with caching by adjacency epoch.

    During one fine imposition the exposure flags are fixed, so two mint
    rounds whose graphs are identical (same epoch) share one traversal.
    """

    __slots__ = ("history", "nodes", "exposed", "eligible", "start", "_cache")

    def __init__(self, history, nodes, exposed, eligible, start) -> None:
        self.history = history
        self.nodes = nodes
        self.exposed = exposed
        self.eligible = eligible
        self.start = start
        self._cache: dict = {}

    def __call__(self, t2: int) -> list:
        epoch = self.history.epoch_of(t2)
        hit = self._cache.get(epoch)
        if hit is None:
            found = conditional_boundary(
                lambda v: self.history.neighbors_at(v, t2),
                self.start,
                self.exposed,
                self.eligible,
            )
            hit = [self.nodes[w] for w in sorted(found)]
            self._cache[epoch] = hit
        return hit


def find_settled_round(series, genuine_count: int, exact: bool = True) -> Optional[int]:
    """First round from which circulation + tax equals genuine minting forever.

    Only meaningful for static runs, where all sybil coins are eventually
    recovered; returns None if the tail has not settled by the last round.
    """
    settled: Optional[int] = None
    tol = 0 if exact else FLOAT_TOLERANCE
    for row in series:
        if abs(row.in_circulation + row.tax_collected - genuine_count * row.round) <= tol:
            if settled is None:
                settled = row.round
        else:
            settled = None
    return settled


def build_per_mint_rows(result: RunResult) -> list:
    """Unpaid fine and surviving unexposed minters, per mint round.

    Static runs carry one extra leading row for the undated fine bucket
    (mint_round 0), since the static protocol does not date its fines.
    """
    cfg = result.config
    state = result.state
    rounds = cfg.rounds
    minters = [0] * (rounds + 2)
    for record in result.registry.values():
        if record.node_type is not NodeType.SYBIL or record.exposed:
            continue
        if record.death_round is not None:
            continue
        last = record.mint_end if record.mint_end is not None else rounds
        if last >= record.birth_round:
            minters[record.birth_round] += 1
            minters[last + 1] -= 1
    rows = []
    if cfg.variant is Variant.STATIC:
        rows.append((0, state.outstanding_by_round.get(0, state.zero), 0))
    running = 0
    for t2 in range(1, rounds + 1):
        running += minters[t2]
        unpaid = state.outstanding_by_round.get(t2, state.zero)
        rows.append((t2, unpaid, running))
    return rows


def mix_seed(base: int, *parts: int) -> int:
    """Derive a stable 64-bit child seed from a base seed and indices."""
    mask = (1 << 64) - 1

    def splitmix(x: int) -> int:
        x = (x + 0x9E3779B97F4A7C15) & mask
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        return z ^ (z >> 31)

    h = splitmix(base & mask)
    for part in parts:
        h = splitmix(h ^ ((part + 1) & mask))
    return h
