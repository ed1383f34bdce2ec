from enum import Enum
from typing import Annotated, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

# Money is integer pence. Python ints are unbounded, so any finite sum is exact.
Money = Annotated[int, Field(ge=0, strict=True)]
Quarter = Annotated[int, Field(ge=1, le=4)]

QUARTERS: Tuple[int, ...] = (1, 2, 3, 4)


def pounds(pence: int) -> str:
    """Formats pence as a pound string, e.g. 310000 -> '£3,100.00'."""
    return f"£{pence // 100:,}.{pence % 100:02d}"


DonorId = Annotated[str, Field(min_length=1)]


class UnitKind(str, Enum):
    HEAD_OFFICE = "HeadOffice"
    LOCAL = "Local"
    VIRTUAL = "Virtual"


class Act(str, Enum):
    """
    The per-quarter speech act for a (donor, unit) pair.
    """
    CARRY_FORWARD = "c"
    SECTION_62 = "s"
    REPORT = "r"


class NullMarker(str, Enum):
    """
    Notional entries for quarters in which a unit received no recordable
    donation from the donor.
    """
    CARRIED_FORWARD = "⊥"
    QUARTERLY = "⊤"
    SECTION_62 = "σ"


MARKER_ACT: Dict[NullMarker, Act] = {
    NullMarker.CARRIED_FORWARD: Act.CARRY_FORWARD,
    NullMarker.QUARTERLY: Act.REPORT,
    NullMarker.SECTION_62: Act.SECTION_62,
}


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True)


class AccountingUnit(_Frozen):
    """
    A canonical accounting unit. Head Office sub-units never appear here;
    they are collapsed onto the single canonical Head Office unit.
    """
    id: str = Field(..., min_length=1, description="Canonical unit id")
    kind: UnitKind
    threshold: Money = Field(..., description="Reporting threshold in pence")


class Donation(_Frozen):
    """
    The ledger atom. `unit` is the canonical unit, `receiving_unit` the unit
    named on the ledger line (differs only for Head Office sub-units).
    """
    donor: DonorId
    unit: str = Field(..., min_length=1)
    receiving_unit: str = Field(..., min_length=1)
    amount: int = Field(..., gt=0, strict=True, description="Amount in pence")
    accepted: Quarter = Field(..., description="Quarter in which the donation was accepted")
    recorded_seq: int = Field(..., ge=1, description="Ledger arrival order")


class Thresholds(_Frozen):
    recordable: Money = 20000
    unit_threshold: Dict[str, Money] = Field(default_factory=dict)
    national: Money = 500000

    def for_unit(self, unit_id: str) -> int:
        return self.unit_threshold[unit_id]


class PredicateState(_Frozen):
    """
    Values of the decision predicates for one (donor, unit, quarter).
    """
    delta: bool = Field(..., description="unit aggregate exceeds the unit threshold")
    delta_star: bool = Field(..., description="national aggregate exceeded and unit not reporting")
    delta_prime: bool = Field(..., description="national aggregate exceeded")
    s62_flag: int = Field(..., ge=0, le=1, description="0 when reported under Section 62(12)")


class PairQuarter(_Frozen):
    """
    Classification of one (donor, unit) pair in one quarter.
    """
    donor: str
    unit: str
    quarter: Quarter
    act: Act
    state: PredicateState
    marker: Optional[NullMarker] = None


# --- Report entries -------------------------------------------------------

class QuarterlyEntry(_Frozen):
    unit: str
    donor: str
    donations: Tuple[Donation, ...]
    total: Money


class S62AggregateEntry(_Frozen):
    donor: str
    aggregate: Money


class S62AuditEntry(_Frozen):
    donor: str
    donations: Tuple[Donation, ...]


class CarriedForwardEntry(_Frozen):
    unit: str
    donor: str
    donations: Tuple[Donation, ...]


class NullEntry(_Frozen):
    unit: str
    donor: str
    marker: NullMarker


class ReportSet(_Frozen):
    """
    The four statutory report kinds for one quarter, plus the annex of
    sub-recordable donations and the notional null entries.
    """
    quarter: Quarter
    quarterly_report: Tuple[QuarterlyEntry, ...] = ()
    s62_ec_report: Tuple[S62AggregateEntry, ...] = ()
    s62_audit_report: Tuple[S62AuditEntry, ...] = ()
    carried_forward_report: Tuple[CarriedForwardEntry, ...] = ()
    carried_forward_annex: Tuple[CarriedForwardEntry, ...] = ()
    null_entries: Tuple[NullEntry, ...] = ()


REPORT_SECTIONS: Tuple[str, ...] = (
    "quarterly_report",
    "s62_ec_report",
    "s62_audit_report",
    "carried_forward_report",
    "carried_forward_annex",
    "null_entries",
)


class AmendmentChange(_Frozen):
    quarter: Quarter
    section: str
    added: List[dict] = Field(default_factory=list)
    removed: List[dict] = Field(default_factory=list)


class AmendmentDiff(_Frozen):
    """
    Entry-level differences between persisted and recomputed reports for
    already closed quarters.
    """
    closing_quarter: Quarter
    changes: List[AmendmentChange] = Field(default_factory=list)

    @property
    def is_empty(self) -> bool:
        return not self.changes

    def sections_touched(self) -> List[Tuple[int, str]]:
        return [(c.quarter, c.section) for c in self.changes]

    def amended_quarters(self) -> List[int]:
        return sorted({c.quarter for c in self.changes})
