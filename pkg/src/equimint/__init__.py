"""equimint: deterministic simulation of egalitarian minting under sybil attack.

A community of identities on a trust graph mints one coin each per round.
Identities judged to be sybils are exposed and removed, and the coins they
minted are clawed back as fines on the identities that vouched for them,
half burned and half collected as community tax.  The package provides the
graph model, the fine/conservation accounting, the round loop in its
static, regenerating, and probabilistic variants, per-round metrics with
lossless CSV serialization, and a small CLI for reproducible experiments.
"""

__version__ = "0.1.0"

from .economy import (
    EconomyState,
    Variant,
    impose_fine_per_round,
    impose_fine_static,
    mint_and_pay,
)
from .generate import GenParams, GraphConstructionError, random_graph_gen, transition
from .graph import (
    STATIC_BUCKET,
    CommunityGraph,
    ExpansionCapError,
    GraphCheckReport,
    GraphError,
    HistoryStore,
    NodeRecord,
    NodeType,
    check_graph_invariants,
    conditional_boundary,
    read_graph,
    vertex_expansion,
    vertex_expansion_sampled,
    write_graph,
)
from .metrics import (
    InvariantViolation,
    RoundMetrics,
    collect_round,
    excess_to_tax_ratio,
    read_per_mint_rows,
    read_series,
    write_per_mint_rows,
    write_series,
    write_summary,
)
from .presets import PRESETS, preset_config
from .simulate import (
    ConfigError,
    RunResult,
    SimConfig,
    build_per_mint_rows,
    death_step,
    exposure_step,
    find_settled_round,
    mix_seed,
    run_simulation,
)

__all__ = [
    "CommunityGraph",
    "ConfigError",
    "EconomyState",
    "ExpansionCapError",
    "GenParams",
    "GraphCheckReport",
    "GraphConstructionError",
    "GraphError",
    "HistoryStore",
    "InvariantViolation",
    "NodeRecord",
    "NodeType",
    "PRESETS",
    "RoundMetrics",
    "RunResult",
    "STATIC_BUCKET",
    "SimConfig",
    "Variant",
    "build_per_mint_rows",
    "check_graph_invariants",
    "collect_round",
    "conditional_boundary",
    "death_step",
    "excess_to_tax_ratio",
    "exposure_step",
    "find_settled_round",
    "impose_fine_per_round",
    "impose_fine_static",
    "mint_and_pay",
    "mix_seed",
    "preset_config",
    "random_graph_gen",
    "read_graph",
    "read_per_mint_rows",
    "read_series",
    "run_simulation",
    "transition",
    "vertex_expansion",
    "vertex_expansion_sampled",
    "write_graph",
    "write_per_mint_rows",
    "write_series",
    "write_summary",
    "__version__",
]
