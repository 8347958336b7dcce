"""Command-line entry points: simulate, sweep, check-graph, presets.

Configuration comes from a JSON file, a named preset, or inline flags;
flags override the file/preset.  Every run directory receives the round
series CSV, the per-mint-round CSV, and a summary JSON echoing the exact
resolved configuration and seed, so any artifact can be regenerated
bit-for-bit.

Exit codes: 0 on success, 1 for I/O or internal-identity failures, 2 for
invalid configuration or arguments.
"""

from __future__ import annotations

import argparse
import itertools
import json
import os
import random
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

from . import __version__
from .generate import GenParams, GraphConstructionError, random_graph_gen
from .graph import (
    CommunityGraph,
    ExpansionCapError,
    GraphError,
    check_graph_invariants,
    read_graph,
    vertex_expansion,
    vertex_expansion_sampled,
    write_graph,
)
from .metrics import (
    InvariantViolation,
    MetricsIOError,
    amount_to_field,
    excess_to_tax_ratio,
    write_per_mint_rows,
    write_series,
    write_summary,
)
from .presets import PRESETS, preset_config
from .simulate import ConfigError, SimConfig, mix_seed, run_simulation

OUT_ROOT_ENV = "EQUIMINT_OUT_ROOT"
EXPANSION_CAP = 16

SERIES_CSV = "metrics.csv"
PER_MINT_CSV = "per_mint_round.csv"
SUMMARY_JSON = "summary.json"
SWEEP_CSV = "sweep.csv"
SWEEP_HEADER = "q,final_excess,final_tax,ratio,ratio_max,replicates"


def _output_dir(arg: str | None, default_name: str) -> Path:
    if arg:
        return Path(arg)
    root = os.environ.get(OUT_ROOT_ENV, "runs")
    return Path(root) / default_name


def _load_config(args) -> dict:
    data: dict = {}
    if getattr(args, "preset", None):
        data = preset_config(args.preset)
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            file_data = json.load(fh)
        data.update(file_data)
    overrides = {
        "honest": args.honest,
        "corrupt": args.corrupt,
        "sybil": args.sybil,
        "degree": args.degree,
        "rounds": args.rounds,
        "variant": args.variant,
        "alpha": args.alpha,
        "exposure_mode": args.exposure_mode,
        "p": args.p,
        "q": args.q,
        "seed": args.seed,
        "arithmetic": args.arithmetic,
    }
    for key, value in overrides.items():
        if value is not None:
            data[key] = value
    return data


def simulation_config(data: dict) -> SimConfig:
    data = {k: v for k, v in data.items() if k != "sweep"}
    cfg = SimConfig.from_dict(data)
    cfg.validate()
    return cfg


def write_run_artifacts(result, out_dir: Path, float_mode: bool = False, extra: dict | None = None) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_series(result.series, out_dir / SERIES_CSV, float_mode=float_mode)
    write_per_mint_rows(result.per_mint_rows(), out_dir / PER_MINT_CSV, float_mode=float_mode)
    state = result.state
    final = result.series[-1] if result.series else None
    ratios = excess_to_tax_ratio(result.series)
    summary = {
        "tool": {"name": "equimint", "version": __version__},
        "config": result.config.to_dict(),
        "rounds_run": len(result.series),
        "wall_clock_seconds": round(result.wall_seconds, 3),
        "totals": {
            "in_circulation": amount_to_field(state.in_circulation),
            "tax_collected": amount_to_field(state.tax_collected),
            "burned": amount_to_field(state.burned),
            "genuine_minted": state.genuine_minted_total,
            "sybil_minted": state.sybil_minted_total,
            "excess": amount_to_field(state.excess),
            "lost_fine": amount_to_field(state.lost_fine_total),
            "unpaid_fine": amount_to_field(state.unpaid_fine_total),
            "circulation_plus_tax": amount_to_field(state.in_circulation + state.tax_collected),
        },
        "final_round": None if final is None else final.round,
        "final_excess_to_tax_ratio": None if not ratios or ratios[-1] is None else amount_to_field(ratios[-1]),
        "settled_round": result.settled_round,
        "artifacts": {"series": SERIES_CSV, "per_mint_round": PER_MINT_CSV},
    }
    if extra:
        summary.update(extra)
    write_summary(summary, out_dir / SUMMARY_JSON)
    return summary


def cmd_simulate(args) -> int:
    data = _load_config(args)
    cfg = simulation_config(data)
    out_dir = _output_dir(args.out, args.preset or "run")
    result = run_simulation(cfg)
    summary = write_run_artifacts(result, out_dir, float_mode=args.float, extra={"preset": args.preset})
    print(f"wrote {out_dir}/{SERIES_CSV}, {PER_MINT_CSV}, {SUMMARY_JSON}")
    print(
        f"rounds={summary['rounds_run']} C+X={summary['totals']['circulation_plus_tax']} "
        f"excess={summary['totals']['excess']}"
    )
    return 0


def _sweep_point(job) -> dict:
    """One sweep point replicate; module-level so process pools can run it."""
    data, parameter, value, replicate, base_seed, point_index, out_dir, float_mode = job
    point_data = dict(data)
    point_data[parameter] = value
    point_data["seed"] = mix_seed(base_seed, point_index, replicate)
    cfg = simulation_config(point_data)
    result = run_simulation(cfg)
    write_run_artifacts(
        result,
        Path(out_dir),
        float_mode=float_mode,
        extra={"sweep_point": {parameter: value, "replicate": replicate}},
    )
    state = result.state
    ratio = None
    if state.tax_collected:
        ratio = state.excess / state.tax_collected
    return {
        "value": value,
        "replicate": replicate,
        "excess": state.excess,
        "tax": state.tax_collected,
        "ratio": ratio,
    }


def cmd_sweep(args) -> int:
    data = _load_config(args)
    sweep = data.pop("sweep", None) or {}
    parameter = args.param or sweep.get("parameter") or "q"
    if args.values is not None:
        values = [float(v) for v in args.values.split(",")]
    else:
        values = sweep.get("values")
    if not values:
        print("sweep: no parameter values given (use --values or a preset with a sweep section)", file=sys.stderr)
        return 2
    replicates = args.replicates or sweep.get("replicates", 1)
    base_seed = data.get("seed", 0)
    out_dir = _output_dir(args.out, args.preset or "sweep")
    out_dir.mkdir(parents=True, exist_ok=True)

    jobs = []
    for index, value in enumerate(values):
        for replicate in range(replicates):
            point_dir = out_dir / f"{parameter}_{value:g}" / f"rep_{replicate}"
            jobs.append((data, parameter, value, replicate, base_seed, index, str(point_dir), args.float))

    results: dict = {}
    failures: list = []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(_sweep_point, jobs))
        for outcome in outcomes:
            results.setdefault(outcome["value"], []).append(outcome)
    else:
        for job in jobs:
            try:
                outcome = _sweep_point(job)
            except (ConfigError, InvariantViolation, GraphConstructionError, MetricsIOError) as exc:
                failures.append((job[2], job[3], exc))
                print(f"sweep point {parameter}={job[2]} rep {job[3]} failed: {exc}", file=sys.stderr)
                continue
            results.setdefault(outcome["value"], []).append(outcome)

    lines = [SWEEP_HEADER]
    for value in values:
        outcomes = results.get(value)
        if not outcomes:
            continue
        n = len(outcomes)
        mean_excess = sum(o["excess"] for o in outcomes) / n
        mean_tax = sum(o["tax"] for o in outcomes) / n
        ratios = [o["ratio"] for o in outcomes if o["ratio"] is not None]
        mean_ratio = sum(ratios) / len(ratios) if ratios else None
        max_ratio = max(ratios) if ratios else None
        lines.append(
            ",".join(
                [
                    f"{value:g}",
                    amount_to_field(mean_excess),
                    amount_to_field(mean_tax),
                    "" if mean_ratio is None else amount_to_field(mean_ratio),
                    "" if max_ratio is None else amount_to_field(max_ratio),
                    str(n),
                ]
            )
        )
    (out_dir / SWEEP_CSV).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {out_dir / SWEEP_CSV} ({len(lines) - 1} points)")
    return 1 if failures else 0


def cmd_check_graph(args) -> int:
    if args.path:
        graph = read_graph(args.path)
        degree = args.degree
    elif args.gen:
        honest, corrupt, sybil = args.honest or 60, args.corrupt or 40, args.sybil or 20
        degree = args.degree or 6
        params = GenParams(honest=honest, corrupt=corrupt, sybil=sybil, degree=degree)
        graph = CommunityGraph()
        rng = random.Random(args.seed or 0)
        random_graph_gen(graph, params, rng, id_alloc=itertools.count(0), birth_round=1)
        if args.dump:
            write_graph(graph, args.dump)
            print(f"wrote {args.dump}")
    else:
        print("check-graph: give a dump file path or --gen", file=sys.stderr)
        return 2
    report = check_graph_invariants(
        graph,
        expected_degree=degree,
        gamma=Fraction(1, 3),
        phi=Fraction(2, 3),
    )
    print(report.summary())
    adj = {v: set(graph.adjacency_view()[v]) for v in graph.nodes}
    if len(adj) <= EXPANSION_CAP:
        print(f"vertex expansion (exact): {vertex_expansion(adj, cap=EXPANSION_CAP)}")
    elif args.approx:
        estimate = vertex_expansion_sampled(adj, random.Random(args.seed or 0), samples=args.samples)
        print(f"vertex expansion (APPROXIMATE upper-bound estimate, {args.samples} samples): {estimate}")
    else:
        print(
            f"vertex expansion: graph has {len(adj)} > {EXPANSION_CAP} nodes; "
            "exact refused, pass --approx for a sampled estimate",
            file=sys.stderr,
        )
        return 2
    return 0 if report.passed else 1


def cmd_presets(args) -> int:
    print(json.dumps(PRESETS, indent=2, sort_keys=True))
    return 0


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--preset", choices=sorted(PRESETS), help="start from a named preset")
    parser.add_argument("--config", help="JSON config file (overrides preset, overridden by flags)")
    parser.add_argument("--honest", type=int)
    parser.add_argument("--corrupt", type=int)
    parser.add_argument("--sybil", type=int)
    parser.add_argument("--degree", type=int)
    parser.add_argument("--rounds", type=int)
    parser.add_argument(
        "--variant", choices=["static", "regenerating", "regenerating-pooled", "probabilistic"]
    )
    parser.add_argument("--alpha", help="fine multiplier, rational like 2 or 5/2")
    parser.add_argument("--exposure-mode", dest="exposure_mode", choices=["round-robin", "bernoulli", "uniform"])
    parser.add_argument("--p", type=float, help="per-round sybil exposure probability")
    parser.add_argument("--q", type=float, help="per-round genuine death probability")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--arithmetic", choices=["exact", "float"])
    parser.add_argument("--out", help=f"output directory (default: ${OUT_ROOT_ENV}/<name>)")
    parser.add_argument("--float", action="store_true", help="emit CSV amounts as decimals instead of rationals")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="equimint",
        description="Deterministic simulator of egalitarian coin minting with sybil fines",
    )
    parser.add_argument("--version", action="version", version=f"equimint {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one simulation and write its artifacts")
    _add_config_flags(p_sim)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="run a parameter sweep with replicates")
    _add_config_flags(p_sweep)
    p_sweep.add_argument("--param", help="swept parameter name (default q)")
    p_sweep.add_argument("--values", help="comma-separated parameter values")
    p_sweep.add_argument("--replicates", type=int, help="replicates per point")
    p_sweep.add_argument("--jobs", type=int, default=1, help="concurrent sweep points")
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check-graph", help="validate a community graph and report its expansion")
    p_check.add_argument("path", nargs="?", help="graph dump file (node table + edge list)")
    p_check.add_argument("--gen", action="store_true", help="generate a graph instead of reading one")
    p_check.add_argument("--honest", type=int)
    p_check.add_argument("--corrupt", type=int)
    p_check.add_argument("--sybil", type=int)
    p_check.add_argument("--degree", type=int)
    p_check.add_argument("--seed", type=int)
    p_check.add_argument("--dump", help="also write the generated graph to this path")
    p_check.add_argument("--approx", action="store_true", help="allow a sampled expansion estimate above the cap")
    p_check.add_argument("--samples", type=int, default=2000)
    p_check.set_defaults(func=cmd_check_graph)

    p_presets = sub.add_parser("presets", help="print the built-in experiment presets")
    p_presets.set_defaults(func=cmd_presets)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (MetricsIOError, InvariantViolation, GraphConstructionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, GraphError, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
