import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pydantic import ValidationError

from conftest import harness_ledgers
from src.config import CONFIG_ENV_VAR, HARNESS_CONFIG, Mode, load_config, parse_config
from src.engine.classifier import classify_year
from src.engine.predicates import recordable
from src.errors import ConfigError, LedgerFormatError, UnknownUnitError
from src.ledger import (
    Ledger,
    LedgerWriter,
    UnitRegistry,
    canonicalize_unit,
    dump_ledger,
    parse_ledger,
)
from src.schemas import Donation, Thresholds, UnitKind, pounds


def line(donor, unit, amount, q):
    return json.dumps({"donor": donor, "unit": unit, "amount_pence": amount, "accepted_quarter": q})


def donation(amount, unit="CLP", q=1, seq=1):
    return Donation(donor="D", unit=unit, receiving_unit=unit, amount=amount, accepted=q, recorded_seq=seq)


def test_recordable_is_strict():
    t = Thresholds()
    assert recordable(donation(20100), t)
    assert not recordable(donation(20000), t)


def test_donation_amount_must_be_positive():
    with pytest.raises(ValidationError):
        donation(0)
    with pytest.raises(ValidationError):
        Donation(donor="D", unit="CLP", receiving_unit="CLP", amount=210.5, accepted=1, recorded_seq=1)


def test_quarter_range():
    with pytest.raises(ValidationError):
        donation(21000, q=5)


def test_pounds():
    assert pounds(310000) == "£3,100.00"
    assert pounds(21050) == "£210.50"


def test_canonicalize_unit(production):
    registry = UnitRegistry(production)
    assert canonicalize_unit("HO-fundraising", registry) == "HO"
    assert canonicalize_unit("HO", registry) == "HO"
    assert canonicalize_unit("CLP-123", registry) == "CLP-123"
    with pytest.raises(UnknownUnitError, match="XYZ"):
        canonicalize_unit("XYZ", registry)
    with pytest.raises(LedgerFormatError, match="Virtual"):
        canonicalize_unit("NATIONAL", registry)


def test_production_units(production):
    units = {u.id: u for u in production.canonical_units()}
    assert "HO-fundraising" not in units
    assert units["HO"].kind == UnitKind.HEAD_OFFICE
    assert units["NATIONAL"].threshold == production.national_pence
    t = production.thresholds()
    assert t.recordable == 20000 and t.national == 500000
    assert t.for_unit("CLP-123") == 100000


def test_virtual_unit_is_synthesised():
    config = parse_config({"units": [{"id": "CLP", "kind": "Local", "threshold_pence": 100000}]})
    assert config.virtual_unit_id == "VIRTUAL"
    assert [u.kind for u in config.units].count(UnitKind.VIRTUAL) == 1


@pytest.mark.parametrize("data, message", [
    ({"mode": "harness", "units": [
        {"id": "HO", "kind": "HeadOffice", "threshold_pence": 300000},
        {"id": "CLP", "kind": "Local", "threshold_pence": 100000}]}, "equal"),
    ({"recordable_pence": 100000, "units": [
        {"id": "CLP", "kind": "Local", "threshold_pence": 100000}]}, "recordable < unit < national"),
    ({"units": [{"id": "CLP", "kind": "Local", "threshold_pence": 600000}]}, "recordable < unit < national"),
    ({"units": [{"id": "CLP", "kind": "Local"}]}, "needs a threshold"),
    ({"units": [{"id": "CLP", "kind": "Local", "threshold_pence": 100000},
                {"id": "N", "kind": "Virtual", "threshold_pence": 100}]}, "national threshold"),
    ({"units": [{"id": "CLP", "kind": "Local", "threshold_pence": 100000},
                {"id": "CLP", "kind": "Local", "threshold_pence": 100000}]}, "duplicate"),
    ({"units": [{"id": "HO-x", "kind": "HeadOffice", "threshold_pence": 100000}]}, "canonical"),
])
def test_config_rejects(data, message):
    with pytest.raises(ConfigError, match=message):
        parse_config(data)


def test_config_from_environment(monkeypatch):
    monkeypatch.setenv(CONFIG_ENV_VAR, str(HARNESS_CONFIG))
    config = load_config()
    assert config.mode == Mode.HARNESS


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.json")


def test_parse_ledger_assigns_line_numbers(production):
    ledger = parse_ledger([line("A", "CLP-123", 21000, 1), "", line("A", "HO-events", 90000, 2)], production)
    assert [d.recorded_seq for d in ledger.donations] == [1, 3]
    assert ledger.donations[1].unit == "HO"
    assert ledger.donations[1].receiving_unit == "HO-events"


def test_parse_ledger_errors_carry_line_numbers(production):
    with pytest.raises(LedgerFormatError) as e:
        parse_ledger([line("A", "CLP-123", 21000, 1), "{not json"], production)
    assert e.value.line == 2

    with pytest.raises(LedgerFormatError, match="line 1"):
        parse_ledger([line("A", "CLP-123", -5, 1)], production)

    with pytest.raises(LedgerFormatError, match="accepted_quarter"):
        parse_ledger([line("A", "CLP-123", 21000, 7)], production)

    with pytest.raises(UnknownUnitError) as e:
        parse_ledger([line("A", "CLP-123", 21000, 1), line("A", "XYZ", 21000, 1)], production)
    assert e.value.unit_id == "XYZ" and e.value.line == 2


def test_dump_ledger_preserves_sequence(production):
    ledger = parse_ledger(["", line("A", "HO-fundraising", 30000, 1), line("B", "CLP-124", 21000, 3)],
                          production)
    reparsed = parse_ledger(dump_ledger(ledger).splitlines(), production)
    assert reparsed.donations == ledger.donations


def test_ledger_is_append_only(harness):
    w = LedgerWriter(harness)
    first = w.add("A", "CLP", 21000, 1)
    before = w.ledger
    w.add("A", "HO", 21000, 2)
    assert len(before.donations) == 1
    with pytest.raises(LedgerFormatError):
        w.ledger.append(first)


@settings(max_examples=50, deadline=None)
@given(harness_ledgers())
def test_classification_is_deterministic(ledger: Ledger):
    copy = Ledger.model_validate(ledger.model_dump())
    assert classify_year(copy).model_dump_json() == classify_year(ledger).model_dump_json()


@given(st.lists(st.integers(1, 2**53), max_size=200))
def test_money_sums_are_exact(amounts):
    donations = [donation(a, seq=i) for i, a in enumerate(amounts, start=1)]
    assert sum(d.amount for d in donations) == sum(amounts)
