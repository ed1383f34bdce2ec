"""
Random-ledger fuzzers.

- grammar: every (donor, unit) act word is in c*s*r*, no donor has Section
  62(12) reporting and carry-forward in the same quarter, every pair of a
  donor's paths is compatible, and the Q4 chart accepts every trace
- backdating: closing quarters one by one with amendment diffs ends in the
  same reports as classifying the final ledger from scratch
"""
import logging
from collections import Counter
from functools import lru_cache
from itertools import combinations
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, computed_field

from ..config import Config, Mode, parse_config
from ..engine.amendments import ReportingSession
from ..engine.classifier import classify_year, report_violations
from ..errors import ProtocolInvariantError
from ..ledger import Ledger, LedgerWriter
from ..protocol.lts import PairTrace, build_quarter_chart, engine_trace_rejection
from ..schemas import QUARTERS, REPORT_SECTIONS, UnitKind
from .scenarios import compatible

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[str, str, str, Optional[str]], None]

GRAMMAR_LEDGERS = 10_000
BACKDATING_LEDGERS = 1_000
DEFAULT_SEED = 2002

MIN_AMOUNT = 100        # £1
MAX_AMOUNT = 600_000    # £6,000
MIN_UNITS, MAX_UNITS = 2, 5
MAX_DONORS = 3
MAX_DONATIONS = 12
BACKDATE_RATE = 0.3

# (accepted quarter, recorded quarter, donor, unit, amount)
Draw = Tuple[int, int, str, str, int]


class FuzzReport(BaseModel):
    kind: str
    seed: int
    ledgers: int
    pairs: int = 0
    donations: int = 0
    backdated: int = 0
    amended_closes: int = 0
    path_counts: Dict[str, int] = Field(default_factory=dict)
    violations: List[str] = Field(default_factory=list)

    @computed_field
    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        status = "OK" if self.ok else f"{len(self.violations)} VIOLATIONS"
        return (f"{self.kind} fuzz (seed {self.seed}): {self.ledgers} ledgers, "
                f"{self.donations} donations, {self.pairs} pairs -> {status}")


@lru_cache(maxsize=None)
def fuzz_config(unit_count: int) -> Config:
    """Harness thresholds over a Head Office plus unit_count - 1 CLPs."""
    units = [{"id": "HO", "kind": UnitKind.HEAD_OFFICE.value, "threshold_pence": 300000}]
    units += [{"id": f"CLP-{i}", "kind": UnitKind.LOCAL.value, "threshold_pence": 300000}
              for i in range(1, unit_count)]
    return parse_config({"mode": Mode.HARNESS.value, "units": units})


def _draw_ledger(rng: np.random.Generator, backdate_rate: float = 0.0) -> Tuple[Config, List[Draw]]:
    unit_count = int(rng.integers(MIN_UNITS, MAX_UNITS, endpoint=True))
    config = fuzz_config(unit_count)
    units = [u.id for u in config.canonical_units() if u.kind != UnitKind.VIRTUAL]
    donors = [f"donor-{i}" for i in range(int(rng.integers(1, MAX_DONORS, endpoint=True)))]
    draws: List[Draw] = []
    for _ in range(int(rng.integers(1, MAX_DONATIONS, endpoint=True))):
        accepted = int(rng.integers(1, 4, endpoint=True))
        recorded = accepted
        if accepted < 4 and rng.random() < backdate_rate:
            recorded = int(rng.integers(accepted + 1, 4, endpoint=True))
        draws.append((accepted, recorded,
                      str(rng.choice(donors)), str(rng.choice(units)),
                      int(rng.integers(MIN_AMOUNT, MAX_AMOUNT, endpoint=True))))
    return config, draws


def random_ledger(rng: np.random.Generator) -> Ledger:
    config, draws = _draw_ledger(rng)
    writer = LedgerWriter(config)
    for accepted, _, donor, unit, amount in draws:
        writer.add(donor, unit, amount, accepted)
    return writer.ledger


def check_ledger(ledger: Ledger) -> Tuple[List[str], List[str]]:
    """(violations, observed path words) for one ledger."""
    try:
        classification = classify_year(ledger)
    except ProtocolInvariantError as e:
        return [str(e)], []

    violations = report_violations(classification, ledger)
    q4_chart = build_quarter_chart(4)
    paths = classification.paths()
    for (donor, unit), path in paths.items():
        reason = engine_trace_rejection(q4_chart, PairTrace.from_pairs(classification.trace(donor, unit)))
        if reason:
            violations.append(f"Q4 chart rejects ({donor}, {unit}) {path.word}: {reason}")
    for donor in ledger.donors():
        mine = [(u, p) for (d, u), p in paths.items() if d == donor]
        for (u1, p1), (u2, p2) in combinations(mine, 2):
            if not compatible(p1, p2):
                violations.append(f"{donor}: {u1} {p1.word} and {u2} {p2.word} are incompatible")
    return violations, [p.word for p in paths.values()]


def _emit(on_progress: Optional[ProgressCallback], done: int, total: int) -> None:
    if on_progress and (done == total or done % 1000 == 0):
        try:
            on_progress("fuzzing", "system", "done" if done == total else "started",
                        f"{done}/{total}")
        except Exception as e:
            logger.warning("[WARN] Progress callback error: %s", e)


def fuzz_grammar(n: int = GRAMMAR_LEDGERS, seed: int = DEFAULT_SEED,
                 on_progress: Optional[ProgressCallback] = None) -> FuzzReport:
    rng = np.random.default_rng(seed)
    report = FuzzReport(kind="grammar", seed=seed, ledgers=n)
    counts: Counter = Counter()
    for i in range(n):
        ledger = random_ledger(rng)
        violations, words = check_ledger(ledger)
        report.donations += len(ledger.donations)
        report.pairs += len(words)
        counts.update(words)
        report.violations.extend(f"ledger {i}: {v}" for v in violations)
        _emit(on_progress, i + 1, n)
    report.path_counts = dict(sorted(counts.items()))
    logger.info("[FUZZ] %s", report.summary())
    return report


def replay_with_backdating(config: Config, draws: List[Draw]) -> ReportingSession:
    """Appends each donation in the quarter it was recorded and closes Q1..Q4 in turn."""
    session = ReportingSession(config)
    for q in QUARTERS:
        for accepted, recorded, donor, unit, amount in draws:
            if recorded == q:
                session.add(donor, unit, amount, accepted)
        session.close_quarter(q)
    return session


def backdating_diffs(session: ReportingSession) -> List[str]:
    scratch = classify_year(session.ledger)
    diffs = []
    for q in QUARTERS:
        for section in REPORT_SECTIONS:
            if getattr(session.closed[q], section) != getattr(scratch.report(q), section):
                diffs.append(f"Q{q} {section} differs from recomputation")
    return diffs


def fuzz_backdating(n: int = BACKDATING_LEDGERS, seed: int = DEFAULT_SEED,
                    on_progress: Optional[ProgressCallback] = None) -> FuzzReport:
    rng = np.random.default_rng(seed)
    report = FuzzReport(kind="backdating", seed=seed, ledgers=n)
    for i in range(n):
        config, draws = _draw_ledger(rng, BACKDATE_RATE)
        report.donations += len(draws)
        report.backdated += sum(1 for accepted, recorded, *_ in draws if recorded > accepted)
        try:
            session = replay_with_backdating(config, draws)
        except ProtocolInvariantError as e:
            report.violations.append(f"ledger {i}: {e}")
            continue
        report.amended_closes += len(session.amendments)
        report.violations.extend(f"ledger {i}: {d}" for d in backdating_diffs(session))
        _emit(on_progress, i + 1, n)
    logger.info("[FUZZ] %s (%d backdated, %d amended closes)",
                report.summary(), report.backdated, report.amended_closes)
    return report
