"""Per-round measurement and serialization.

The round series carries the quantities the experiments report: coins in
circulation, tax, burned coins, and the excess (sybil-minted coins not yet
recovered).  Collection re-asserts the conservation identities every round
and fails hard on any violation, since a broken identity means a simulator
bug rather than bad data.

Serialization is lossless: exact rational amounts are written as
``numerator/denominator`` strings so a parsed series compares equal to the
one written.  A float emission mode exists for plotting convenience.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Optional, Sequence

from .economy import EconomyState

FLOAT_TOLERANCE = 1e-6

SERIES_HEADER = (
    "round,minted_genuine,minted_sybil,in_circulation,tax_collected,burned,"
    "excess,lost_fine,unpaid_fine,alive_sybils,exposed_this_round,cumulative_exposed"
)
PER_MINT_HEADER = "mint_round,unpaid_fine,unexposed_sybil_minters"


class InvariantViolation(RuntimeError):
    """A conservation or excess identity failed; the simulation is unsound."""


class MetricsIOError(OSError):
    """Reading or writing a metrics artifact failed."""


@dataclass(slots=True)
class RoundMetrics:
    round: int
    minted_genuine: int
    minted_sybil: int
    in_circulation: object
    tax_collected: object
    burned: object
    excess: object
    lost_fine: object
    unpaid_fine: object
    alive_sybils: int
    exposed_this_round: int
    cumulative_exposed: int


def collect_round(
    state: EconomyState,
    t: int,
    minted_genuine: int,
    minted_sybil: int,
    alive_sybils: int,
    exposed_this_round: int,
    cumulative_exposed: int,
) -> RoundMetrics:
    """Snapshot the economy after round ``t`` and assert the identities."""
    circulation = state.in_circulation
    tax = state.tax_collected
    burned = state.burned
    excess = state.excess

    def close(a, b) -> bool:
        return a == b if state.exact else abs(a - b) <= FLOAT_TOLERANCE

    if not close(circulation + tax + burned, state.total_minted):
        raise InvariantViolation(
            f"round {t}: conservation broken: C+X+burned = {circulation + tax + burned} "
            f"!= minted {state.total_minted}"
        )
    if not close(tax, burned):
        raise InvariantViolation(f"round {t}: burned {burned} != tax {tax}")
    if not close(excess, circulation + tax - state.genuine_minted_total):
        raise InvariantViolation(
            f"round {t}: excess {excess} != C + X - genuine_minted "
            f"{circulation + tax - state.genuine_minted_total}"
        )
    negatives = [
        name
        for name, value in (
            ("in_circulation", circulation),
            ("tax_collected", tax),
            ("excess", excess),
            ("lost_fine", state.lost_fine_total),
            ("unpaid_fine", state.unpaid_fine_total),
        )
        if value < (0 if state.exact else -FLOAT_TOLERANCE)
    ]
    if negatives:
        raise InvariantViolation(f"round {t}: negative amounts: {', '.join(negatives)}")

    return RoundMetrics(
        round=t,
        minted_genuine=minted_genuine,
        minted_sybil=minted_sybil,
        in_circulation=circulation,
        tax_collected=tax,
        burned=burned,
        excess=excess,
        lost_fine=state.lost_fine_total,
        unpaid_fine=state.unpaid_fine_total,
        alive_sybils=alive_sybils,
        exposed_this_round=exposed_this_round,
        cumulative_exposed=cumulative_exposed,
    )


def excess_to_tax_ratio(series: Sequence[RoundMetrics]) -> list:
    """Per-round excess/tax; None while no tax has been collected yet."""
    out = []
    for row in series:
        out.append(None if not row.tax_collected else row.excess / row.tax_collected)
    return out


# -- lossless field encoding --------------------------------------------------


def amount_to_field(value, float_mode: bool = False) -> str:
    if float_mode:
        return repr(float(value))
    if isinstance(value, Fraction):
        return str(value)  # "5" or "5/2"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_amount(text: str):
    if "/" in text:
        return Fraction(text)
    if "." in text or "e" in text or "E" in text or text in ("inf", "nan"):
        return float(text)
    return int(text)


def write_series(series: Sequence[RoundMetrics], path, float_mode: bool = False) -> None:
    names = [f.name for f in fields(RoundMetrics)]
    int_fields = {"round", "minted_genuine", "minted_sybil", "alive_sybils",
                  "exposed_this_round", "cumulative_exposed"}
    lines = [SERIES_HEADER]
    for row in series:
        parts = []
        for name in names:
            value = getattr(row, name)
            parts.append(str(value) if name in int_fields else amount_to_field(value, float_mode))
        lines.append(",".join(parts))
    _write_text(path, "\n".join(lines) + "\n")


def read_series(path) -> list:
    rows = []
    for lineno, parts in _read_csv(path, SERIES_HEADER):
        if len(parts) != 12:
            raise MetricsIOError(f"{path}:{lineno}: expected 12 columns, got {len(parts)}")
        rows.append(
            RoundMetrics(
                round=int(parts[0]),
                minted_genuine=int(parts[1]),
                minted_sybil=int(parts[2]),
                in_circulation=parse_amount(parts[3]),
                tax_collected=parse_amount(parts[4]),
                burned=parse_amount(parts[5]),
                excess=parse_amount(parts[6]),
                lost_fine=parse_amount(parts[7]),
                unpaid_fine=parse_amount(parts[8]),
                alive_sybils=int(parts[9]),
                exposed_this_round=int(parts[10]),
                cumulative_exposed=int(parts[11]),
            )
        )
    return rows


def write_per_mint_rows(rows: Sequence[tuple], path, float_mode: bool = False) -> None:
    """Rows are (mint_round, unpaid_fine, unexposed_sybil_minters)."""
    lines = [PER_MINT_HEADER]
    for t2, unpaid, minters in rows:
        lines.append(f"{t2},{amount_to_field(unpaid, float_mode)},{minters}")
    _write_text(path, "\n".join(lines) + "\n")


def read_per_mint_rows(path) -> list:
    rows = []
    for lineno, parts in _read_csv(path, PER_MINT_HEADER):
        if len(parts) != 3:
            raise MetricsIOError(f"{path}:{lineno}: expected 3 columns, got {len(parts)}")
        rows.append((int(parts[0]), parse_amount(parts[1]), int(parts[2])))
    return rows


def write_summary(summary: dict, path) -> None:
    _write_text(path, json.dumps(summary, indent=2, sort_keys=True) + "\n")


def read_summary(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise MetricsIOError(f"{path}: {exc}") from exc


def _write_text(path, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise MetricsIOError(f"{path}: {exc}") from exc


def _read_csv(path, expected_header: str):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise MetricsIOError(f"{path}: {exc}") from exc
    if not lines or lines[0] != expected_header:
        raise MetricsIOError(f"{path}: missing or wrong header (expected {expected_header!r})")
    for lineno, line in enumerate(lines[1:], start=2):
        if line:
            yield lineno, line.split(",")


def utc_stamp() -> float:
    return time.time()
