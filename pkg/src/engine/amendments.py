"""
Quarter close with amendments.

Closing quarter q reruns the whole year and diffs the recomputed reports of
quarters < q against the persisted ones. Backdated donations therefore land
in the quarter their accepted date fell in, as an amendment.
"""
import json
import logging
from typing import Dict, List, Mapping, Tuple

from ..config import Config
from ..errors import QuarterError
from ..ledger import Ledger, LedgerWriter
from ..schemas import REPORT_SECTIONS, AmendmentChange, AmendmentDiff, Donation, ReportSet
from .classifier import YearClassification, classify_year
from .predicates import check_quarter

logger = logging.getLogger(__name__)


def entry_key(entry: dict) -> str:
    return json.dumps(entry, sort_keys=True, ensure_ascii=False)


def diff_report_sets(old: ReportSet, new: ReportSet) -> List[AmendmentChange]:
    changes = []
    for section in REPORT_SECTIONS:
        before = {entry_key(e.model_dump(mode="json")): e for e in getattr(old, section)}
        after = {entry_key(e.model_dump(mode="json")): e for e in getattr(new, section)}
        added = [after[k].model_dump(mode="json") for k in after if k not in before]
        removed = [before[k].model_dump(mode="json") for k in before if k not in after]
        if added or removed:
            changes.append(AmendmentChange(quarter=new.quarter, section=section,
                                           added=added, removed=removed))
    return changes


def diff_reports(persisted: Mapping[int, ReportSet], classification: YearClassification,
                 closing_quarter: int) -> AmendmentDiff:
    changes: List[AmendmentChange] = []
    for q in range(1, closing_quarter):
        changes.extend(diff_report_sets(persisted[q], classification.report(q)))
    return AmendmentDiff(closing_quarter=closing_quarter, changes=changes)


def require_closed(q: int, persisted: Mapping[int, ReportSet]) -> None:
    check_quarter(q)
    missing = [p for p in range(1, q) if p not in persisted]
    if missing:
        raise QuarterError(f"cannot close Q{q}: quarters {missing} have not been closed")


def close_with_classification(ledger: Ledger, q: int, persisted: Mapping[int, ReportSet]
                              ) -> Tuple[YearClassification, AmendmentDiff]:
    require_closed(q, persisted)
    classification = classify_year(ledger)
    diff = diff_reports(persisted, classification, q)
    if not diff.is_empty:
        logger.info("[CLOSE] Q%d close amends %s", q, diff.sections_touched())
    return classification, diff


def close_quarter(ledger: Ledger, q: int,
                  persisted: Mapping[int, ReportSet]) -> Tuple[ReportSet, AmendmentDiff]:
    """
    Pure: needs the persisted ReportSets of quarters 1..q-1 and returns the
    ReportSet for q together with the amendments to the earlier quarters.
    """
    classification, diff = close_with_classification(ledger, q, persisted)
    return classification.report(q), diff


class ReportingSession:
    """
    Single-writer session: appends donations, closes quarters in order and
    replaces every amended quarter with its recomputed ReportSet.
    """

    def __init__(self, config: Config, ledger: Ledger = None):
        self.writer = LedgerWriter(config, ledger)
        self.closed: Dict[int, ReportSet] = {}
        self.amendments: List[AmendmentDiff] = []

    @property
    def ledger(self) -> Ledger:
        return self.writer.ledger

    def add(self, donor: str, unit: str, amount_pence: int, accepted_quarter: int) -> Donation:
        return self.writer.add(donor, unit, amount_pence, accepted_quarter)

    def append(self, donation: Donation) -> None:
        self.writer.ledger = self.writer.ledger.append(donation)

    def close_quarter(self, q: int) -> Tuple[ReportSet, AmendmentDiff]:
        classification, diff = close_with_classification(self.ledger, q, self.closed)
        if not diff.is_empty:
            for p in diff.amended_quarters():
                self.closed[p] = classification.report(p)
            self.amendments.append(diff)
        self.closed[q] = classification.report(q)
        return self.closed[q], diff
