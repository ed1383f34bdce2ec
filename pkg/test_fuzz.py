import numpy as np
import pytest

from src.harness.fuzz import (
    BACKDATING_LEDGERS,
    GRAMMAR_LEDGERS,
    _draw_ledger,
    backdating_diffs,
    check_ledger,
    fuzz_backdating,
    fuzz_config,
    fuzz_grammar,
    random_ledger,
    replay_with_backdating,
)
from src.protocol.paths import enumerate_paths


def test_random_ledgers_are_reproducible():
    a = random_ledger(np.random.default_rng(7))
    b = random_ledger(np.random.default_rng(7))
    assert a.donations == b.donations
    assert 1 <= len(a.donations) <= 12
    assert all(100 <= d.amount <= 600_000 for d in a.donations)


def test_fuzz_config_units():
    config = fuzz_config(3)
    assert [u.id for u in config.canonical_units()] == ["HO", "CLP-1", "CLP-2", "VIRTUAL"]
    assert set(config.thresholds().unit_threshold.values()) == {300000}


def test_check_ledger_on_known_ledger(writer):
    writer.add("D", "HO", 21000, 1)
    writer.add("D", "HO", 230000, 2)
    writer.add("D", "CLP", 21000, 1)
    writer.add("D", "CLP", 310000, 2)
    violations, words = check_ledger(writer.ledger)
    assert violations == []
    assert sorted(words) == ["crrr", "csss"]


def test_small_grammar_fuzz():
    report = fuzz_grammar(200, seed=11)
    assert report.ok, report.violations[:5]
    assert report.ledgers == 200
    assert report.pairs == sum(report.path_counts.values())
    assert set(report.path_counts) <= {p.word for p in enumerate_paths()}


def test_grammar_fuzz_reports_progress():
    seen = []
    fuzz_grammar(3, seed=1, on_progress=lambda *event: seen.append(event))
    assert seen == [("fuzzing", "system", "done", "3/3")]


def test_replay_with_backdating_matches_recomputation():
    config, draws = _draw_ledger(np.random.default_rng(5), backdate_rate=1.0)
    session = replay_with_backdating(config, draws)
    assert set(session.closed) == {1, 2, 3, 4}
    assert backdating_diffs(session) == []


def test_small_backdating_fuzz():
    report = fuzz_backdating(100, seed=3)
    assert report.ok, report.violations[:5]
    assert report.backdated > 0
    assert report.amended_closes > 0


@pytest.mark.slow
def test_grammar_fuzz_acceptance():
    report = fuzz_grammar(GRAMMAR_LEDGERS)
    assert report.ok, report.violations[:5]


@pytest.mark.slow
def test_backdating_fuzz_acceptance():
    report = fuzz_backdating(BACKDATING_LEDGERS)
    assert report.ok, report.violations[:5]
