"""
Year classification.

Every call recomputes the whole year from scratch: for q = 1..4, for each
donor, Δ′ first, then δ per unit, then δ*. Donations reported under Section
62(12) are excluded from every later unit aggregate of the same pass.
"""
import logging
from collections import defaultdict
from typing import Dict, List, Optional, Set, Tuple

from pydantic import BaseModel, ConfigDict

from ..errors import ProtocolInvariantError
from ..ledger import Ledger
from ..protocol.paths import PathName, path_of
from ..schemas import (
    MARKER_ACT,
    QUARTERS,
    Act,
    CarriedForwardEntry,
    Donation,
    NullEntry,
    PairQuarter,
    QuarterlyEntry,
    ReportSet,
    S62AggregateEntry,
    S62AuditEntry,
)
from .predicates import act_of, evaluate, null_act, recordable

logger = logging.getLogger(__name__)


class YearClassification(BaseModel):
    model_config = ConfigDict(frozen=True)

    year: int
    pairs: Tuple[PairQuarter, ...]
    reports: Tuple[ReportSet, ...]

    def report(self, q: int) -> ReportSet:
        return self.reports[q - 1]

    def pair_keys(self) -> List[Tuple[str, str]]:
        seen: Dict[Tuple[str, str], None] = {}
        for p in self.pairs:
            seen.setdefault((p.donor, p.unit), None)
        return list(seen)

    def trace(self, donor: str, unit: str) -> List[PairQuarter]:
        return [p for p in self.pairs if p.donor == donor and p.unit == unit]

    def acts(self, donor: str, unit: str) -> List[Act]:
        """Per-quarter acts; null quarters take the act their marker denotes."""
        return [MARKER_ACT[p.marker] if p.marker else p.act for p in self.trace(donor, unit)]

    def path(self, donor: str, unit: str) -> PathName:
        return path_of(self.acts(donor, unit))

    def paths(self) -> Dict[Tuple[str, str], PathName]:
        return {key: self.path(*key) for key in self.pair_keys()}


class _QuarterReports:
    def __init__(self, q: int):
        self.q = q
        self.quarterly: List[QuarterlyEntry] = []
        self.ec: List[S62AggregateEntry] = []
        self.audit: List[S62AuditEntry] = []
        self.cf: List[CarriedForwardEntry] = []
        self.annex: List[CarriedForwardEntry] = []
        self.nulls: List[NullEntry] = []

    def freeze(self) -> ReportSet:
        return ReportSet(
            quarter=self.q,
            quarterly_report=tuple(self.quarterly),
            s62_ec_report=tuple(self.ec),
            s62_audit_report=tuple(self.audit),
            carried_forward_report=tuple(self.cf),
            carried_forward_annex=tuple(self.annex),
            null_entries=tuple(self.nulls),
        )


def _units_in_order(donations: List[Donation]) -> List[str]:
    seen: Dict[str, None] = {}
    for d in donations:
        seen.setdefault(d.unit, None)
    return list(seen)


def _classify_donor(ledger: Ledger, donor: str, donations: List[Donation],
                    out: Dict[int, _QuarterReports]) -> List[PairQuarter]:
    t = ledger.thresholds
    own = ledger.model_copy(update={"donations": tuple(donations)})
    rec = [d for d in donations if recordable(d, t)]
    sub = [d for d in donations if not recordable(d, t)]
    units = _units_in_order(rec)
    reported: Set[int] = set()
    prior_s62: Set[int] = set()
    pairs: List[PairQuarter] = []

    for q in QUARTERS:
        assigned_s62: List[Donation] = []
        acts_this_quarter: Dict[str, Act] = {}

        for u in units:
            pool = [d for d in rec if d.unit == u and d.accepted <= q]
            state = evaluate(own, donor, u, q, prior_s62)
            act = act_of(state)
            marker = None
            if not any(d.accepted == q for d in pool):
                marker = null_act(state)
                if MARKER_ACT[marker] != act:
                    raise ProtocolInvariantError(
                        f"null marker {marker.value} disagrees with act {act.value}",
                        donor, u, q)
                out[q].nulls.append(NullEntry(unit=u, donor=donor, marker=marker))
            acts_this_quarter[u] = act
            pairs.append(PairQuarter(donor=donor, unit=u, quarter=q,
                                     act=act, state=state, marker=marker))

            pending = tuple(d for d in pool if d.recorded_seq not in reported)
            if act == Act.REPORT:
                if pending:
                    out[q].quarterly.append(QuarterlyEntry(
                        unit=u, donor=donor, donations=pending,
                        total=sum(d.amount for d in pending)))
                reported.update(d.recorded_seq for d in pending)
            elif act == Act.SECTION_62:
                assigned_s62.extend(pending)
                reported.update(d.recorded_seq for d in pending)
            elif pending:
                out[q].cf.append(CarriedForwardEntry(unit=u, donor=donor, donations=pending))

        for u in _units_in_order(sub):
            annex = tuple(d for d in sub if d.unit == u and d.accepted == q)
            if annex:
                out[q].annex.append(CarriedForwardEntry(unit=u, donor=donor, donations=annex))

        if Act.SECTION_62 in acts_this_quarter.values() and \
                Act.CARRY_FORWARD in acts_this_quarter.values():
            raise ProtocolInvariantError(
                "Section 62(12) reporting coexists with carry-forward", donor, None, q)

        if assigned_s62:
            assigned_s62.sort(key=lambda d: d.recorded_seq)
            out[q].audit.append(S62AuditEntry(donor=donor, donations=tuple(assigned_s62)))
            out[q].ec.append(S62AggregateEntry(
                donor=donor, aggregate=sum(d.amount for d in assigned_s62)))
            prior_s62.update(d.recorded_seq for d in assigned_s62)

    for u in units:
        acts = [MARKER_ACT[p.marker] if p.marker else p.act
                for p in pairs if p.unit == u]
        try:
            path_of(acts)
        except ProtocolInvariantError as e:
            raise type(e)(str(e), donor, u, None) from e
    return pairs


def classify_year(ledger: Ledger) -> YearClassification:
    by_donor: Dict[str, List[Donation]] = defaultdict(list)
    for d in ledger.donations:
        by_donor[d.donor].append(d)

    out = {q: _QuarterReports(q) for q in QUARTERS}
    pairs: List[PairQuarter] = []
    for donor in ledger.donors():
        pairs.extend(_classify_donor(ledger, donor, by_donor[donor], out))

    logger.debug("[ENGINE] Classified %d donors, %d (donor, unit) pairs",
                 len(by_donor), len(pairs) // len(QUARTERS))
    return YearClassification(
        year=ledger.year,
        pairs=tuple(pairs),
        reports=tuple(out[q].freeze() for q in QUARTERS),
    )


def report_violations(classification: YearClassification,
                      ledger: Optional[Ledger] = None) -> List[str]:
    """
    Partition and sum checks. Each recordable donation must sit in exactly one
    terminal category (a quarterly report, a Section 62 audit report, or the
    Q4 carried-forward report) and each EC aggregate must equal its audit
    constituents.
    """
    problems: List[str] = []
    seen: Dict[int, List[str]] = defaultdict(list)
    for rs in classification.reports:
        for e in rs.quarterly_report:
            for d in e.donations:
                seen[d.recorded_seq].append(f"R@Q{rs.quarter}")
        audit_totals = {a.donor: sum(d.amount for d in a.donations) for a in rs.s62_audit_report}
        for a in rs.s62_audit_report:
            for d in a.donations:
                seen[d.recorded_seq].append(f"S62@Q{rs.quarter}")
        for ec in rs.s62_ec_report:
            if audit_totals.get(ec.donor) != ec.aggregate:
                problems.append(
                    f"Q{rs.quarter} donor {ec.donor}: EC aggregate {ec.aggregate} != "
                    f"audit constituents {audit_totals.get(ec.donor)}")
        if len(audit_totals) != len(rs.s62_ec_report):
            problems.append(f"Q{rs.quarter}: audit and EC reports list different donors")
    for e in classification.report(QUARTERS[-1]).carried_forward_report:
        for d in e.donations:
            seen[d.recorded_seq].append("CF@Q4")

    for seq, where in sorted(seen.items()):
        if len(where) != 1:
            problems.append(f"donation #{seq} appears in {where}")
    if ledger is not None:
        t = ledger.thresholds
        for d in ledger.donations:
            if recordable(d, t) and d.recorded_seq not in seen:
                problems.append(f"donation #{d.recorded_seq} is in no terminal report")
    return problems


def assert_report_invariants(classification: YearClassification,
                             ledger: Optional[Ledger] = None) -> None:
    problems = report_violations(classification, ledger)
    if problems:
        raise ProtocolInvariantError("report partition violated: " + "; ".join(problems))
