"""
Decision predicates for one donor.

agg* counts every recordable donation towards the national (Section 62(12))
threshold; agg counts only donations not already reported under Section
62(12) towards a unit threshold. Every threshold test is strict.
"""
from typing import AbstractSet, Iterable

from ..errors import ProtocolInvariantError, QuarterError
from ..ledger import Ledger
from ..schemas import Act, Donation, NullMarker, PredicateState, QUARTERS, Thresholds

NO_PRIOR_S62: AbstractSet[int] = frozenset()


def check_quarter(q: int) -> int:
    if q not in QUARTERS:
        raise QuarterError(f"quarter must be 1..4, got {q}")
    return q


def recordable(d: Donation, t: Thresholds) -> bool:
    return d.amount > t.recordable


def recordable_donations(ledger: Ledger, donor: str) -> list:
    t = ledger.thresholds
    return [d for d in ledger.donations if d.donor == donor and recordable(d, t)]


def sum_accepted(donations: Iterable[Donation], q: int,
                 exclude: AbstractSet[int] = NO_PRIOR_S62) -> int:
    return sum(d.amount for d in donations
               if d.accepted <= q and d.recorded_seq not in exclude)


def agg_star(ledger: Ledger, donor: str, q: int) -> int:
    check_quarter(q)
    return sum_accepted(recordable_donations(ledger, donor), q)


def delta_prime(ledger: Ledger, donor: str, q: int) -> bool:
    return agg_star(ledger, donor, q) > ledger.thresholds.national


def agg(ledger: Ledger, donor: str, unit: str, q: int,
        prior_s62: AbstractSet[int] = NO_PRIOR_S62) -> int:
    """
    prior_s62 holds the recorded_seq of the donor's donations already listed
    in Section 62(12) audit reports for quarters before q in the same pass.
    """
    check_quarter(q)
    return sum_accepted((d for d in recordable_donations(ledger, donor) if d.unit == unit),
                        q, prior_s62)


def delta(ledger: Ledger, donor: str, unit: str, q: int,
          prior_s62: AbstractSet[int] = NO_PRIOR_S62) -> bool:
    return agg(ledger, donor, unit, q, prior_s62) > ledger.thresholds.for_unit(unit)


def delta_star(ledger: Ledger, donor: str, unit: str, q: int,
               prior_s62: AbstractSet[int] = NO_PRIOR_S62) -> bool:
    return delta_prime(ledger, donor, q) and not delta(ledger, donor, unit, q, prior_s62)


def s62_function(ledger: Ledger, donor: str, unit: str, q: int,
                 prior_s62: AbstractSet[int] = NO_PRIOR_S62) -> int:
    return 0 if delta_star(ledger, donor, unit, q, prior_s62) else 1


def predicate_state(unit_breached: bool, national_breached: bool) -> PredicateState:
    """Builds the full predicate state from the two threshold tests, δ first."""
    star = national_breached and not unit_breached
    return PredicateState(
        delta=unit_breached,
        delta_star=star,
        delta_prime=national_breached,
        s62_flag=0 if star else 1,
    )


def evaluate(ledger: Ledger, donor: str, unit: str, q: int,
             prior_s62: AbstractSet[int] = NO_PRIOR_S62) -> PredicateState:
    return predicate_state(delta(ledger, donor, unit, q, prior_s62),
                           delta_prime(ledger, donor, q))


def act_of(p: PredicateState) -> Act:
    if p.delta and p.delta_star:
        raise ProtocolInvariantError("predicate pair (δ, δ*) is both true")
    if p.delta_star and not p.delta_prime:
        raise ProtocolInvariantError("δ* holds without Δ′")
    if p.s62_flag != (0 if p.delta_star else 1):
        raise ProtocolInvariantError("Section 62 flag disagrees with δ*")
    if p.delta:
        return Act.REPORT
    if p.delta_star:
        return Act.SECTION_62
    return Act.CARRY_FORWARD


def null_act(p: PredicateState) -> NullMarker:
    """
    Marker for a quarter with no recordable donation from the donor to the
    unit. The predicate state carries the history that decides it: δ still
    true means the unit breached its threshold in an earlier quarter.
    """
    if p.delta:
        return NullMarker.QUARTERLY
    if p.delta_prime:
        return NullMarker.SECTION_62
    return NullMarker.CARRIED_FORWARD
