import pytest

from src.engine.amendments import (
    ReportingSession,
    close_quarter,
    diff_report_sets,
)
from src.engine.classifier import classify_year
from src.errors import QuarterError
from src.graph import run_close
from src.schemas import NullMarker
from src.tools.reporter import ReportGenerator


def test_closing_without_backdating_amends_nothing(harness):
    session = ReportingSession(harness)
    session.add("D", "CLP", 21000, 1)
    _, diff = session.close_quarter(1)
    assert diff.is_empty
    session.add("D", "CLP", 21000, 2)
    _, diff = session.close_quarter(2)
    assert diff.is_empty
    assert session.amendments == []


def test_backdated_large_donation_amends_earlier_quarters(harness):
    session = ReportingSession(harness)
    session.add("D", "CLP", 21000, 1)
    session.close_quarter(1)
    session.close_quarter(2)
    assert [n.marker for n in session.closed[2].null_entries] == [NullMarker.CARRIED_FORWARD]

    session.add("D", "CLP", 310000, 1)
    q3, diff = session.close_quarter(3)

    assert diff.closing_quarter == 3
    assert diff.sections_touched() == [
        (1, "quarterly_report"),
        (1, "carried_forward_report"),
        (2, "carried_forward_report"),
        (2, "null_entries"),
    ]
    q1 = session.closed[1]
    assert [(e.unit, e.total) for e in q1.quarterly_report] == [("CLP", 331000)]
    assert q1.carried_forward_report == ()
    assert [n.marker for n in session.closed[2].null_entries] == [NullMarker.QUARTERLY]
    assert [n.marker for n in q3.null_entries] == [NullMarker.QUARTERLY]

    scratch = classify_year(session.ledger)
    for q in (1, 2, 3):
        assert session.closed[q] == scratch.report(q)


def test_backdated_sub_recordable_donation_only_touches_annex(harness):
    session = ReportingSession(harness)
    session.add("D", "CLP", 21000, 1)
    session.close_quarter(1)
    session.close_quarter(2)
    session.add("D", "CLP", 15000, 1)
    _, diff = session.close_quarter(3)
    assert diff.sections_touched() == [(1, "carried_forward_annex")]
    assert diff.changes[0].removed == []
    assert diff.changes[0].added[0]["donations"][0]["amount"] == 15000


def test_backdated_sub_recordable_donation_to_a_new_unit(harness):
    session = ReportingSession(harness)
    session.add("D", "HO", 21000, 1)
    session.close_quarter(1)
    session.close_quarter(2)
    session.add("D", "CLP", 15000, 1)
    _, diff = session.close_quarter(3)
    assert diff.sections_touched() == [(1, "carried_forward_annex")]


def test_quarters_close_in_order(harness):
    session = ReportingSession(harness)
    session.add("D", "CLP", 21000, 1)
    with pytest.raises(QuarterError, match=r"\[1\]"):
        session.close_quarter(2)
    with pytest.raises(QuarterError):
        close_quarter(session.ledger, 5, {})


def test_amended_quarters_match_a_fresh_classification(harness):
    session = ReportingSession(harness)
    session.add("A", "CLP", 21000, 1)
    session.add("B", "CLP", 21000, 1)
    session.close_quarter(1)
    session.close_quarter(2)
    session.add("A", "CLP", 22000, 1)
    _, diff = session.close_quarter(3)
    assert diff.amended_quarters() == [1, 2]
    assert [e.donor for e in session.closed[1].carried_forward_report] == ["A", "B"]
    scratch = classify_year(session.ledger)
    for q in (1, 2, 3):
        assert session.closed[q] == scratch.report(q)


def test_close_graph_without_amendments(writer):
    writer.add("D", "HO", 260000, 1)
    writer.add("D", "CLP", 260000, 1)
    state = run_close(writer.ledger, 1, {})
    assert state["diff"].is_empty
    assert state["amended"] == []
    assert [e.aggregate for e in state["report"].s62_ec_report] == [520000]
    assert set(state["persisted"]) == {1}


def test_close_graph_amends_and_persists(writer, tmp_path):
    reporter = ReportGenerator(str(tmp_path), virtual_unit="NATIONAL")
    writer.add("D", "CLP", 21000, 1)
    for q in (1, 2):
        run_close(writer.ledger, q, reporter.closed_quarters(), reporter)

    writer.add("D", "CLP", 310000, 1)
    state = run_close(writer.ledger, 3, reporter.closed_quarters(), reporter)

    assert state["amended"] == [1, 2]
    assert str(tmp_path / "Q3" / "amendments.json") in state["written"]
    scratch = classify_year(writer.ledger)
    for q in (1, 2, 3):
        assert state["persisted"][q] == scratch.report(q)
        assert diff_report_sets(reporter.read_report_set(q), scratch.report(q)) == []


def test_close_graph_rejects_unclosed_quarters(writer):
    writer.add("D", "CLP", 21000, 1)
    with pytest.raises(QuarterError):
        run_close(writer.ledger, 3, {})
