import pytest
from hypothesis import given, settings

from conftest import harness_ledgers
from src.engine.classifier import assert_report_invariants, classify_year, report_violations
from src.engine.predicates import (
    act_of,
    agg,
    agg_star,
    delta,
    delta_prime,
    delta_star,
    evaluate,
    null_act,
    predicate_state,
    s62_function,
)
from src.errors import ProtocolInvariantError, QuarterError
from src.ledger import Ledger, LedgerWriter
from src.protocol.paths import is_permissible
from src.schemas import Act, NullMarker, PredicateState


def ledger_of(config, *entries):
    w = LedgerWriter(config)
    for donor, unit, amount, q in entries:
        w.add(donor, unit, amount, q)
    return w.ledger


def test_agg_star(harness):
    ledger = ledger_of(harness, ("D", "HO", 260000, 1), ("D", "CLP", 260000, 1))
    assert agg_star(ledger, "D", 1) == 520000
    assert agg_star(ledger_of(harness), "D", 1) == 0
    assert agg_star(ledger_of(harness, ("D", "CLP", 15000, 1)), "D", 4) == 0
    with pytest.raises(QuarterError):
        agg_star(ledger, "D", 0)


def test_delta_prime_is_strict(harness):
    assert delta_prime(ledger_of(harness, ("D", "HO", 260000, 1), ("D", "CLP", 260000, 1)), "D", 1)
    assert not delta_prime(ledger_of(harness, ("D", "HO", 250000, 1), ("D", "CLP", 250000, 1)), "D", 1)


def test_agg_excludes_prior_section_62(harness):
    ledger = ledger_of(harness, ("D", "CLP", 21000, 1), ("D", "CLP", 310000, 2))
    assert agg(ledger, "D", "CLP", 2, prior_s62={1}) == 310000
    assert agg(ledger, "D", "CLP", 2) == 331000
    assert agg(ledger, "D", "CLP", 1) == 21000
    assert agg(ledger_of(harness, ("D", "CLP", 21000, 2)), "D", "CLP", 1) == 0


@pytest.mark.parametrize("amount, expected", [(310000, True), (293000, False), (300000, False)])
def test_delta_threshold(harness, amount, expected):
    assert delta(ledger_of(harness, ("D", "CLP", amount, 1)), "D", "CLP", 1) is expected


def test_delta_star_and_s62_function(harness):
    both = ledger_of(harness, ("D", "HO", 260000, 1), ("D", "CLP", 260000, 1))
    assert delta_star(both, "D", "HO", 1)
    assert s62_function(both, "D", "HO", 1) == 0

    reporting = ledger_of(harness, ("D", "HO", 210000, 1), ("D", "CLP", 310000, 1))
    assert not delta_star(reporting, "D", "CLP", 1)
    assert s62_function(reporting, "D", "CLP", 1) == 1
    assert delta_star(reporting, "D", "HO", 1)

    quiet = ledger_of(harness, ("D", "CLP", 21000, 1))
    assert not delta_star(quiet, "D", "CLP", 1)
    assert s62_function(quiet, "D", "CLP", 1) == 1


@pytest.mark.parametrize("unit, national, act", [
    (True, False, Act.REPORT),
    (True, True, Act.REPORT),
    (False, True, Act.SECTION_62),
    (False, False, Act.CARRY_FORWARD),
])
def test_act_of(unit, national, act):
    state = predicate_state(unit, national)
    assert not (state.delta and state.delta_star)
    assert state.s62_flag == (0 if state.delta_star else 1)
    assert act_of(state) == act


def test_act_of_rejects_both_predicates():
    with pytest.raises(ProtocolInvariantError):
        act_of(PredicateState(delta=True, delta_star=True, delta_prime=True, s62_flag=0))
    with pytest.raises(ProtocolInvariantError):
        act_of(PredicateState(delta=False, delta_star=True, delta_prime=False, s62_flag=0))


def test_null_act():
    assert null_act(predicate_state(False, True)) == NullMarker.SECTION_62
    assert null_act(predicate_state(True, False)) == NullMarker.QUARTERLY
    assert null_act(predicate_state(False, False)) == NullMarker.CARRIED_FORWARD


def test_single_small_donation_is_carried_forward(harness):
    year = classify_year(ledger_of(harness, ("D", "CLP", 21000, 1)))
    assert year.path("D", "CLP").word == "cccc"
    q1 = year.report(1)
    assert [e.donations[0].amount for e in q1.carried_forward_report] == [21000]
    assert q1.null_entries == ()
    assert [n.marker for n in year.report(2).null_entries] == [NullMarker.CARRIED_FORWARD]
    assert year.report(4).carried_forward_report[0].donations[0].amount == 21000


def test_large_donation_is_reported(harness):
    year = classify_year(ledger_of(harness, ("D", "CLP", 310000, 1)))
    q1 = year.report(1)
    assert [(e.unit, e.total) for e in q1.quarterly_report] == [("CLP", 310000)]
    assert year.path("D", "CLP").word == "rrrr"
    assert [n.marker for n in year.report(3).null_entries] == [NullMarker.QUARTERLY]
    assert year.report(2).quarterly_report == ()


def test_joint_breach_goes_to_section_62(harness):
    year = classify_year(ledger_of(harness, ("D", "HO", 260000, 1), ("D", "CLP", 260000, 1)))
    q1 = year.report(1)
    assert [e.aggregate for e in q1.s62_ec_report] == [520000]
    assert [d.unit for d in q1.s62_audit_report[0].donations] == ["HO", "CLP"]
    assert year.path("D", "HO").word == "ssss"
    assert year.path("D", "CLP").word == "ssss"
    assert {n.marker for n in year.report(2).null_entries} == {NullMarker.SECTION_62}
    assert year.report(2).s62_ec_report == ()


def test_section_62_then_report(harness):
    year = classify_year(ledger_of(
        harness,
        ("D", "HO", 21000, 1), ("D", "HO", 230000, 2), ("D", "HO", 310000, 3),
        ("D", "CLP", 21000, 1), ("D", "CLP", 310000, 2),
    ))
    assert year.path("D", "HO").word == "csrr"
    assert year.path("D", "CLP").word == "crrr"
    q2 = year.report(2)
    assert [(e.unit, e.total) for e in q2.quarterly_report] == [("CLP", 331000)]
    assert [e.aggregate for e in q2.s62_ec_report] == [251000]
    assert [(e.unit, e.total) for e in year.report(3).quarterly_report] == [("HO", 310000)]
    assert_report_invariants(year)


def test_head_office_sub_units_collapse(production):
    year = classify_year(ledger_of(
        production, ("D", "HO-fundraising", 450000, 1), ("D", "CLP-123", 90000, 1)))
    audit = year.report(1).s62_audit_report[0]
    assert [(d.unit, d.receiving_unit) for d in audit.donations] == [
        ("HO", "HO-fundraising"), ("CLP-123", "CLP-123")]
    assert year.report(1).s62_ec_report[0].aggregate == 540000


def test_sub_recordable_donations_go_to_annex(harness):
    year = classify_year(ledger_of(harness, ("D", "CLP", 15000, 2), ("D", "CLP", 21000, 2)))
    q2 = year.report(2)
    assert [d.amount for e in q2.carried_forward_annex for d in e.donations] == [15000]
    assert [d.amount for e in q2.carried_forward_report for d in e.donations] == [21000]
    assert year.report(3).carried_forward_annex == ()


def test_section_62_null_before_first_donation(harness):
    year = classify_year(ledger_of(harness, ("D", "HO", 510000, 1), ("D", "CLP", 21000, 2)))
    assert year.path("D", "HO").word == "rrrr"
    assert year.path("D", "CLP").word == "ssss"
    q1_clp = year.trace("D", "CLP")[0]
    assert q1_clp.marker == NullMarker.SECTION_62
    assert [d.amount for e in year.report(2).s62_audit_report for d in e.donations] == [21000]


def test_pair_with_only_sub_recordable_donations_has_no_path(harness):
    year = classify_year(ledger_of(harness, ("D", "HO", 510000, 1), ("D", "CLP", 15000, 2)))
    assert year.pair_keys() == [("D", "HO")]
    assert all(n.unit == "HO" for rs in year.reports for n in rs.null_entries)
    assert [d.amount for e in year.report(2).carried_forward_annex for d in e.donations] == [15000]


def test_pairs_without_donations_are_absent(harness):
    year = classify_year(ledger_of(harness, ("D", "CLP", 21000, 1)))
    assert year.pair_keys() == [("D", "CLP")]


@settings(max_examples=200, deadline=None)
@given(harness_ledgers())
def test_grammar_and_report_invariants(ledger: Ledger):
    year = classify_year(ledger)
    for donor, unit in year.pair_keys():
        trace = year.trace(donor, unit)
        word = "".join(a.value for a in year.acts(donor, unit))
        assert is_permissible(word)
        primes = [p.state.delta_prime for p in trace]
        assert primes == sorted(primes)
        deltas = [p.state.delta for p in trace]
        assert deltas == sorted(deltas)
        assert all(not (p.state.delta and p.state.delta_star) for p in trace)
    assert report_violations(year, ledger) == []


@settings(max_examples=100, deadline=None)
@given(harness_ledgers())
def test_classifier_states_match_the_predicates(ledger: Ledger):
    year = classify_year(ledger)
    for donor, unit in year.pair_keys():
        for p in year.trace(donor, unit):
            prior_s62 = {d.recorded_seq
                         for rs in year.reports[:p.quarter - 1]
                         for e in rs.s62_audit_report if e.donor == donor
                         for d in e.donations}
            assert p.state == evaluate(ledger, donor, unit, p.quarter, prior_s62)
