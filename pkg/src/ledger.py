"""
Donation ledger and ingestion.

- one ledger = one calendar year of donations for one party
- JSON-lines input, one donation per line; recorded_seq is the line number
- Head Office sub-units are collapsed onto the canonical Head Office unit
"""
import json
import logging
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .config import Config
from .errors import LedgerFormatError, UnknownUnitError
from .schemas import AccountingUnit, Donation, Quarter, Thresholds, UnitKind

logger = logging.getLogger(__name__)


class LedgerLine(BaseModel):
    """
    Wire format of one ledger line.
    """
    model_config = ConfigDict(extra="forbid")

    donor: str = Field(..., min_length=1)
    unit: str = Field(..., min_length=1)
    amount_pence: int = Field(..., gt=0, strict=True)
    accepted_quarter: Quarter


class UnitRegistry:
    """
    Maps receiving-unit ids onto canonical accounting units.
    """

    def __init__(self, config: Config):
        self.head_office_id = config.head_office_id
        self._kinds: Dict[str, UnitKind] = {u.id: u.kind for u in config.units}
        self.units: Tuple[AccountingUnit, ...] = tuple(config.canonical_units())

    def canonicalize_unit(self, unit_id: str, line: Optional[int] = None) -> str:
        kind = self._kinds.get(unit_id)
        if kind is None:
            raise UnknownUnitError(unit_id, line)
        if kind == UnitKind.VIRTUAL:
            raise LedgerFormatError(
                f"unit '{unit_id}' is the Virtual (national) unit and cannot receive donations", line
            )
        if kind == UnitKind.HEAD_OFFICE:
            return self.head_office_id
        return unit_id


def canonicalize_unit(unit_id: str, registry: UnitRegistry) -> str:
    return registry.canonicalize_unit(unit_id)


class Ledger(BaseModel):
    """
    Append-only, immutable ledger. `append` returns a new ledger; every
    downstream computation is a pure function of (thresholds, units, donations).
    """
    model_config = ConfigDict(frozen=True)

    year: int
    thresholds: Thresholds
    units: Tuple[AccountingUnit, ...]
    donations: Tuple[Donation, ...] = ()

    @property
    def next_seq(self) -> int:
        return self.donations[-1].recorded_seq + 1 if self.donations else 1

    def donors(self) -> List[str]:
        """Donor ids in order of first appearance."""
        seen: Dict[str, None] = {}
        for d in self.donations:
            seen.setdefault(d.donor, None)
        return list(seen)

    def append(self, donation: Donation) -> "Ledger":
        if donation.recorded_seq < self.next_seq:
            raise LedgerFormatError(
                f"recorded_seq {donation.recorded_seq} is not after {self.next_seq - 1}"
            )
        if donation.unit not in self.thresholds.unit_threshold:
            raise UnknownUnitError(donation.unit)
        return self.model_copy(update={"donations": self.donations + (donation,)})


def empty_ledger(config: Config) -> Ledger:
    registry = UnitRegistry(config)
    return Ledger(year=config.year, thresholds=config.thresholds(), units=registry.units)


def make_donation(ledger: Ledger, registry: UnitRegistry, donor: str, unit: str,
                  amount_pence: int, accepted_quarter: int,
                  recorded_seq: Optional[int] = None, line: Optional[int] = None) -> Donation:
    try:
        return Donation(
            donor=donor,
            unit=registry.canonicalize_unit(unit, line),
            receiving_unit=unit,
            amount=amount_pence,
            accepted=accepted_quarter,
            recorded_seq=recorded_seq if recorded_seq is not None else ledger.next_seq,
        )
    except ValidationError as e:
        raise LedgerFormatError(f"invalid donation: {e.errors()[0]['msg']}", line) from e


class LedgerWriter:
    """
    Convenience writer used by the session, the harness and the tests.
    """

    def __init__(self, config: Config, ledger: Optional[Ledger] = None):
        self.config = config
        self.registry = UnitRegistry(config)
        self.ledger = ledger or empty_ledger(config)

    def add(self, donor: str, unit: str, amount_pence: int, accepted_quarter: int) -> Donation:
        donation = make_donation(self.ledger, self.registry, donor, unit,
                                 amount_pence, accepted_quarter)
        self.ledger = self.ledger.append(donation)
        return donation


def iter_ledger_lines(lines: Iterable[str]) -> Iterator[Tuple[int, LedgerLine]]:
    for lineno, raw in enumerate(lines, start=1):
        if not raw.strip():
            continue
        try:
            payload = json.loads(raw)
        except json.JSONDecodeError as e:
            raise LedgerFormatError(f"malformed JSON ({e.msg})", lineno) from e
        try:
            yield lineno, LedgerLine.model_validate(payload)
        except ValidationError as e:
            err = e.errors()[0]
            field = ".".join(str(p) for p in err["loc"]) or "line"
            raise LedgerFormatError(f"{field}: {err['msg']}", lineno) from e


def parse_ledger(lines: Iterable[str], config: Config) -> Ledger:
    registry = UnitRegistry(config)
    ledger = empty_ledger(config)
    donations = []
    for lineno, entry in iter_ledger_lines(lines):
        donations.append(make_donation(ledger, registry, entry.donor, entry.unit,
                                       entry.amount_pence, entry.accepted_quarter,
                                       recorded_seq=lineno, line=lineno))
    ledger = ledger.model_copy(update={"donations": tuple(donations)})
    logger.info("[LEDGER] Ingested %d donations from %d donors", len(donations), len(ledger.donors()))
    return ledger


def load_ledger(path: Union[str, Path], config: Config) -> Ledger:
    path = Path(path)
    if not path.exists():
        raise LedgerFormatError(f"ledger file not found: {path}")
    with path.open(encoding="utf-8") as f:
        return parse_ledger(f, config)


def dump_ledger(ledger: Ledger) -> str:
    """Normalised JSON-lines form. Line numbers equal recorded_seq."""
    lines: List[str] = []
    for d in ledger.donations:
        while len(lines) < d.recorded_seq - 1:
            lines.append("")
        lines.append(json.dumps({
            "donor": d.donor,
            "unit": d.receiving_unit,
            "amount_pence": d.amount,
            "accepted_quarter": d.accepted,
        }))
    return "\n".join(lines) + ("\n" if lines else "")


def check_append_only(stored: Ledger, incoming: Ledger) -> None:
    """Raises unless `incoming` keeps every stored donation as it was."""
    for i, old in enumerate(stored.donations):
        new = incoming.donations[i] if i < len(incoming.donations) else None
        if new != old:
            raise LedgerFormatError(
                "ledger is append-only; stored donation "
                f"{old.donor}/{old.receiving_unit} {old.amount}p Q{old.accepted} "
                + ("is missing" if new is None else "was changed"),
                old.recorded_seq,
            )
    logger.debug("[LEDGER] %d new donations after %d stored",
                 len(incoming.donations) - len(stored.donations), len(stored.donations))
