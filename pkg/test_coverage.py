import pytest

from src.errors import HarnessConfigError
from src.harness.coverage import CoverageRunner, is_reachable, run_scenario, verify_coverage
from src.harness.scenarios import (
    Scenario,
    brute_force_labels,
    compatible,
    compatible_closed_form,
    enumerate_scenarios,
    ordered_universe,
    universe_size,
)
from src.harness.vectors import Role, make_vector, matches_design_thresholds, vector_table
from src.protocol.paths import path_from_word


def scenario(ho, clp):
    return Scenario(ho=path_from_word(ho), clp=path_from_word(clp))


@pytest.mark.parametrize("word, amounts", [
    ("cccc", (21000, 21000, 21000, 21000)),
    ("ssss", (260000, None, None, None)),
    ("csrr", (21000, 230000, 310000, None)),
    ("ccsr", (21000, 21000, 230000, 310000)),
    ("srrr", (260000, 310000, None, None)),
    ("rrrr", (310000, None, None, None)),
])
def test_vector_amounts(word, amounts):
    assert make_vector(path_from_word(word), Role.CLP).amounts == amounts


def test_vector_table():
    table = vector_table()
    assert len(table) == 30
    assert [v.role for v in table[:15]] == [Role.HO] * 15
    assert table[15].path.word == "cccc" and table[15].role == Role.CLP
    assert make_vector(path_from_word("csrr"), Role.HO).donations() == [(1, 21000), (2, 230000), (3, 310000)]


def test_design_thresholds(harness, production):
    assert matches_design_thresholds(harness.thresholds())
    assert not matches_design_thresholds(production.thresholds())


def test_scenario_counts(harness):
    scenarios = enumerate_scenarios(harness)
    assert universe_size() == len(ordered_universe()) == 225
    assert len(scenarios) == 55
    assert len(brute_force_labels()) == 55
    assert {s.label for s in scenarios} == brute_force_labels()
    assert sum(1 for s in scenarios if s.ho == s.clp) == 15
    assert scenarios[0].label == "11"
    assert scenarios[-1].label == "FF"
    assert all(s.ho.hex >= s.clp.hex for s in scenarios)


def test_closed_form_matches_positionwise_compatibility():
    for pi, pj in ordered_universe():
        assert compatible(pi, pj) == compatible_closed_form(pi, pj)


def test_incompatible_pairs_are_not_scenarios(harness):
    labels = {s.label for s in enumerate_scenarios(harness)}
    assert "71" not in labels   # csss with cccc
    assert "B1" not in labels   # ssss with cccc
    assert "F1" in labels       # rrrr with cccc


def test_unequal_thresholds_are_refused(production):
    with pytest.raises(HarnessConfigError):
        enumerate_scenarios(production)


@pytest.mark.parametrize("ho, clp", [
    ("cccc", "cccc"),
    ("ssss", "ssss"),
    ("csrr", "crrr"),
    ("ccrr", "cccs"),
    ("cssr", "cssr"),
    ("rrrr", "ccsr"),
    ("srrr", "ssss"),
])
def test_run_scenario(harness, ho, clp):
    result = run_scenario(scenario(ho, clp), harness)
    assert result.passed, result.problems or result.error
    assert result.observed == (ho, clp)
    assert result.trace == []


def test_swapped_scenario_swaps_observation(harness):
    forward = run_scenario(scenario("csrr", "crrr"), harness)
    backward = run_scenario(scenario("csrr", "crrr").swapped(), harness)
    assert backward.observed == forward.observed[::-1]


def test_reachability_depends_on_thresholds(harness):
    both_s62 = scenario("ssss", "ssss")
    assert is_reachable(both_s62, harness)
    assert not is_reachable(both_s62, harness.with_unit_thresholds(100000))
    assert is_reachable(scenario("rrrr", "cccc"), harness.with_unit_thresholds(100000))


def test_coverage_certificate_is_valid(harness):
    certificate = verify_coverage(harness, max_workers=4)
    assert certificate.valid, certificate.summary()
    assert certificate.scenario_count == 55
    assert certificate.oracle_count == 55
    assert certificate.universe_size == 225
    assert certificate.enumeration_matches
    assert len(certificate.results) == 55
    assert certificate.model_dump()["valid"] is True


def test_perturbed_thresholds_invalidate_certificate(harness):
    certificate = verify_coverage(harness.with_unit_thresholds(100000))
    assert not certificate.valid
    assert "BB" in certificate.unreachable
    assert "INVALID" in certificate.summary()


def test_progress_callback_errors_do_not_stop_the_run(harness):
    events = []

    def on_progress(stage, agent, status, detail):
        events.append((stage, agent, status))
        raise RuntimeError("display went away")

    certificate = CoverageRunner(harness, on_progress=on_progress, max_workers=2).verify()
    assert certificate.valid
    assert events[0] == ("enumerating", "system", "started")
    assert events[-1] == ("certifying", "system", "done")
    assert sum(1 for stage, _, _ in events if stage == "running") == 1 + 55 + 40
