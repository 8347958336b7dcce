"""Coin accounting: minting, fine payment, fine imposition and propagation.

Every participating identity mints one coin per round.  The fresh coin
first services the holder's outstanding fines, oldest mint round first;
of every unit paid, half is burned and half is collected as community tax,
and only the unpaid remainder of the coin enters circulation.

Exposing a sybil converts its entire minting history into fines: for each
coin it minted, alpha times the coin plus whatever fine the sybil itself
still owed for that round is charged to the identities that stood closest
to it when the coin was minted (its conditional boundary at that round).
Fine landing on a not-yet-exposed sybil simply waits on its ledger and
re-propagates when that sybil is exposed in turn.

All amounts are exact rationals by default so the conservation identities
hold with equality; a float build is available for speed, with a 1e-6
tolerance on every identity check.
"""

from __future__ import annotations

import enum
from fractions import Fraction
from typing import Callable, Mapping, Optional, Sequence

from .graph import STATIC_BUCKET, NodeRecord, NodeType


class Variant(enum.Enum):
    """Protocol family selector.

    ``STATIC`` keeps one undated fine per node and a frozen community.
    The regenerating variants account per mint round on an evolving
    community; ``REGENERATING_POOLED`` differs only in how a fine is
    divided: all payers of a mint round pool their outstanding fine with
    the new one and split the total equally.  ``PROBABILISTIC`` is the
    per-round protocol driven by chance exposures and genuine deaths.
    """

    STATIC = "static"
    REGENERATING = "regenerating"
    REGENERATING_POOLED = "regenerating-pooled"
    PROBABILISTIC = "probabilistic"

    @property
    def per_round_fines(self) -> bool:
        return self is not Variant.STATIC


class EconomyState:
    """Global coin counters plus aggregate fine indexes.

    The conservation identity `in_circulation + tax_collected + burned ==
    total minted` holds after every operation, as does `burned ==
    tax_collected` (every payment splits evenly) and the excess identity
    `sybil_minted_total - burned == in_circulation + tax_collected -
    genuine_minted_total`.

    All fine mutations go through this class so the per-round aggregates
    (outstanding, paid, lost, and who currently owes for which round) can
    never drift from the per-node ledgers.
    """

    __slots__ = (
        "exact",
        "zero",
        "one",
        "genuine_minted_total",
        "sybil_minted_total",
        "_circulation_whole",
        "_circulation_frac",
        "_paid_total",
        "lost_fine_total",
        "outstanding_total",
        "outstanding_by_round",
        "paid_by_round",
        "lost_by_round",
        "payers_by_round",
    )

    def __init__(self, exact: bool = True) -> None:
        self.exact = exact
        self.zero = Fraction(0) if exact else 0.0
        self.one = Fraction(1) if exact else 1.0
        self.genuine_minted_total = 0
        self.sybil_minted_total = 0
        self._circulation_whole = 0
        self._circulation_frac = self.zero
        self._paid_total = self.zero
        self.lost_fine_total = self.zero
        self.outstanding_total = self.zero
        self.outstanding_by_round: dict = {}
        self.paid_by_round: dict = {}
        self.lost_by_round: dict = {}
        self.payers_by_round: dict = {}

    # -- derived counters -------------------------------------------------

    @property
    def in_circulation(self):
        return self._circulation_whole + self._circulation_frac

    @property
    def tax_collected(self):
        return self._paid_total / 2

    @property
    def burned(self):
        return self._paid_total / 2

    @property
    def total_minted(self) -> int:
        return self.genuine_minted_total + self.sybil_minted_total

    @property
    def excess(self):
        return self.sybil_minted_total - self.burned

    @property
    def unpaid_fine_total(self):
        return self.outstanding_total

    # -- minting ----------------------------------------------------------

    def record_mint(self, node_type: NodeType) -> None:
        if node_type is NodeType.SYBIL:
            self.sybil_minted_total += 1
        else:
            self.genuine_minted_total += 1

    def coin_to_circulation(self) -> None:
        self._circulation_whole += 1

    def leftover_to_circulation(self, amount) -> None:
        self._circulation_frac += amount

    # -- fine ledger mutations ---------------------------------------------

    def add_fine(self, node: NodeRecord, t2: int, amount) -> None:
        ledger = node.fine_ledger
        ledger[t2] = ledger.get(t2, self.zero) + amount
        self.outstanding_by_round[t2] = self.outstanding_by_round.get(t2, self.zero) + amount
        self.outstanding_total += amount
        self.payers_by_round.setdefault(t2, set()).add(node.id)

    def set_fine(self, node: NodeRecord, t2: int, amount) -> None:
        """Replace a node's fine for one round (pooled redistribution)."""
        old = node.fine_ledger.get(t2, self.zero)
        delta = amount - old
        node.fine_ledger[t2] = amount
        self.outstanding_by_round[t2] = self.outstanding_by_round.get(t2, self.zero) + delta
        self.outstanding_total += delta
        self.payers_by_round.setdefault(t2, set()).add(node.id)

    def take_fine(self, node: NodeRecord, t2: int):
        """Zero a node's fine for one round and hand the amount back.

        Used when an exposed sybil's own outstanding fine is folded into
        the fine it causes; the amount is re-added (or recorded lost) by
        the caller.
        """
        amount = node.fine_ledger.pop(t2, None)
        if amount is None:
            return self.zero
        self.outstanding_by_round[t2] -= amount
        self.outstanding_total -= amount
        payers = self.payers_by_round.get(t2)
        if payers is not None:
            payers.discard(node.id)
        return amount

    def pay_fine(self, node: NodeRecord, t2: int, amount) -> None:
        remaining = node.fine_ledger[t2] - amount
        if remaining:
            node.fine_ledger[t2] = remaining
        else:
            del node.fine_ledger[t2]
            self.payers_by_round[t2].discard(node.id)
        self.outstanding_by_round[t2] -= amount
        self.outstanding_total -= amount
        self.paid_by_round[t2] = self.paid_by_round.get(t2, self.zero) + amount
        self._paid_total += amount

    def lose_amount(self, amount, t2: int) -> None:
        """Record fine that became uncollectible (no one left to charge)."""
        self.lost_by_round[t2] = self.lost_by_round.get(t2, self.zero) + amount
        self.lost_fine_total += amount

    def lose_node_fines(self, node: NodeRecord) -> None:
        """Write off every debt of a dying genuine node."""
        for t2 in sorted(node.fine_ledger):
            self.lose_amount(self.take_fine(node, t2), t2)

    # -- invariants ---------------------------------------------------------

    def conservation_gap(self):
        return self.in_circulation + self.tax_collected + self.burned - self.total_minted


def mint_and_pay(node: NodeRecord, state: EconomyState) -> tuple:
    """Mint this round's coin and service fines from it, oldest round first.

    The payment budget is exactly the one fresh coin.  Returns the payments
    made as ``((t2, amount), ...)`` plus the leftover that entered
    circulation.  Callers only invoke this for alive, unexposed nodes.
    """
    state.record_mint(node.node_type)
    ledger = node.fine_ledger
    if not ledger:
        state.coin_to_circulation()
        return ((), state.one)
    budget = state.one
    payments = []
    for t2 in sorted(ledger):
        owed = ledger[t2]
        pay = owed if owed <= budget else budget
        state.pay_fine(node, t2, pay)
        payments.append((t2, pay))
        budget = budget - pay
        if not budget:
            break
    if budget:
        state.leftover_to_circulation(budget)
    return (tuple(payments), budget)


def impose_fine_static(
    u: NodeRecord,
    boundary: Sequence[NodeRecord],
    state: EconomyState,
    alpha,
    exposure_round: int,
) -> dict:
    """Expose sybil ``u`` under the static protocol and distribute its fine.

    The fine is alpha times every coin ``u`` ever minted plus whatever
    fine ``u`` still owed, split evenly over the boundary.  With no one to
    charge (defensive; cannot happen in a connected static community) the
    amount is recorded as lost.  Returns ``{node_id: share}``.
    """
    u.exposed = True
    u.mint_end = exposure_round
    fine = alpha * u.mint_count() + state.take_fine(u, STATIC_BUCKET)
    if not fine:
        return {}
    if not boundary:
        state.lose_amount(fine, STATIC_BUCKET)
        return {}
    share = fine / len(boundary)
    for w in boundary:
        state.add_fine(w, STATIC_BUCKET, share)
    return {w.id: share for w in boundary}


def impose_fine_per_round(
    u: NodeRecord,
    t: int,
    boundary_at: Callable[[int], Sequence[NodeRecord]],
    live_nodes: Mapping[int, NodeRecord],
    state: EconomyState,
    alpha,
    pooled: bool = False,
) -> list:
    """Expose sybil ``u`` at round ``t``, settling each mint round separately.

    For every round ``t2`` of ``u``'s life the fine is alpha times the coin
    it minted then, plus any fine already parked on ``u`` for ``t2``.  The
    base rule adds an equal share to every member of the conditional
    boundary at ``t2``; the pooled rule instead takes everyone currently
    owing for ``t2`` together with that boundary and resets each of their
    debts to the equal split of (pool + fine).  A round with no boundary
    and no payers sends its fine to the lost ledger.

    Returns ``(t2, fine, recipient_ids)`` triples.
    """
    u.exposed = True
    u.mint_end = t
    events = []
    for t2 in range(u.birth_round, t + 1):
        fine = alpha + state.take_fine(u, t2)  # alpha * m with m = 1 for every lived round
        if pooled:
            members = {w.id: w for w in boundary_at(t2)}
            payer_ids = state.payers_by_round.get(t2)
            if payer_ids:
                for pid in sorted(payer_ids):
                    if pid not in members:
                        members[pid] = live_nodes[pid]
            if not members:
                state.lose_amount(fine, t2)
                events.append((t2, fine, ()))
                continue
            pool = fine
            for w in members.values():
                pool = pool + w.fine_ledger.get(t2, state.zero)
            share = pool / len(members)
            recipients = tuple(sorted(members))
            for wid in recipients:
                state.set_fine(members[wid], t2, share)
        else:
            boundary = boundary_at(t2)
            if not boundary:
                state.lose_amount(fine, t2)
                events.append((t2, fine, ()))
                continue
            share = fine / len(boundary)
            recipients = tuple(sorted(w.id for w in boundary))
            for w in boundary:
                state.add_fine(w, t2, share)
        events.append((t2, fine, recipients))
    if u.fine_ledger:
        raise AssertionError(f"sybil {u.id} kept fines outside its lifetime: {u.fine_ledger}")
    return events
