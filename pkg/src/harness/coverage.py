"""
Coverage certificate.

Runs every enumerated scenario through the engine and checks:
- the observed (HO, CLP) path pair equals the scenario's label
- the swapped scenario yields the swapped observation
- the enumeration equals the independent brute-force oracle
- every report partition holds after Q4 and every engine trace is accepted
  by the path chart and the Q4 chart
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, computed_field

from ..config import Config
from ..engine.classifier import YearClassification, classify_year, report_violations
from ..errors import HarnessConfigError, ProtocolInvariantError
from ..ledger import LedgerWriter
from ..protocol.lts import PairTrace, build_quarter_chart, engine_trace_rejection, path_chart
from ..schemas import UnitKind
from .scenarios import (
    Scenario,
    brute_force_labels,
    check_harness_thresholds,
    enumerate_scenarios,
    universe_size,
)
from .vectors import Role, make_vector, matches_design_thresholds

logger = logging.getLogger(__name__)

# Callback receives: (stage, agent, status, detail)
ProgressCallback = Callable[[str, str, str, Optional[str]], None]

SCENARIO_DONOR = "D"


class ScenarioResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    label: str
    scenario: Scenario
    expected: Tuple[str, str]
    observed: Optional[Tuple[str, str]] = None
    passed: bool = False
    error: Optional[str] = None
    problems: List[str] = Field(default_factory=list)
    trace: List[dict] = Field(default_factory=list, description="Predicate trace, kept on failure")


class CoverageCertificate(BaseModel):
    universe_size: int
    scenario_count: int
    oracle_count: int
    enumeration_matches: bool
    missing_labels: List[str] = Field(default_factory=list)
    extra_labels: List[str] = Field(default_factory=list)
    unreachable: List[str] = Field(default_factory=list)
    swap_failures: List[str] = Field(default_factory=list)
    results: List[ScenarioResult] = Field(default_factory=list)

    @property
    def failures(self) -> List[ScenarioResult]:
        return [r for r in self.results if not r.passed]

    @computed_field
    @property
    def valid(self) -> bool:
        return (self.enumeration_matches and not self.unreachable
                and not self.swap_failures and not self.failures)

    def summary(self) -> str:
        status = "VALID" if self.valid else "INVALID"
        return (f"{status}: {self.scenario_count} scenarios "
                f"({self.scenario_count - len(self.failures)} passed, "
                f"{len(self.failures)} failed, {len(self.swap_failures)} swap failures, "
                f"{len(self.unreachable)} unreachable) out of {self.universe_size} ordered pairs")


def scenario_units(config: Config) -> Tuple[str, str]:
    """(canonical Head Office id, first Local unit id)."""
    local = next((u.id for u in config.canonical_units() if u.kind == UnitKind.LOCAL), None)
    if local is None:
        raise HarnessConfigError("the harness needs one Local unit for the CLP vector")
    return config.head_office_id, local


def is_reachable(scenario: Scenario, config: Config) -> bool:
    """
    A quarter with both units in Section 62(12) reporting needs the two unit
    aggregates, each at most the unit threshold, to exceed the national one.
    """
    unit_threshold = check_harness_thresholds(config)
    both_s = any(x == y == "s" for x, y in zip(scenario.ho.word, scenario.clp.word))
    return not both_s or 2 * unit_threshold > config.national_pence


def _trace_dump(classification: YearClassification) -> List[dict]:
    return [p.model_dump(mode="json") for p in classification.pairs]


def run_scenario(scenario: Scenario, config: Config) -> ScenarioResult:
    """Fresh one-donor ledger, both vectors loaded, the year classified from scratch."""
    ho_unit, clp_unit = scenario_units(config)
    writer = LedgerWriter(config)
    for unit, vector in ((ho_unit, make_vector(scenario.ho, Role.HO)),
                         (clp_unit, make_vector(scenario.clp, Role.CLP))):
        for q, amount in vector.donations():
            writer.add(SCENARIO_DONOR, unit, amount, q)
    ledger = writer.ledger
    expected = (scenario.ho.word, scenario.clp.word)
    base = dict(label=scenario.label, scenario=scenario, expected=expected)

    try:
        classification = classify_year(ledger)
        observed = (classification.path(SCENARIO_DONOR, ho_unit).word,
                    classification.path(SCENARIO_DONOR, clp_unit).word)
    except ProtocolInvariantError as e:
        return ScenarioResult(**base, error=str(e),
                              trace=[d.model_dump(mode="json") for d in ledger.donations])

    problems = report_violations(classification, ledger)
    q4_chart = build_quarter_chart(4)
    for unit in (ho_unit, clp_unit):
        trace = PairTrace.from_pairs(classification.trace(SCENARIO_DONOR, unit))
        for chart in (path_chart(), q4_chart):
            reason = engine_trace_rejection(chart, trace)
            if reason:
                problems.append(f"{chart.name} rejects {unit} trace {trace.word}: {reason}")

    passed = observed == expected and not problems
    return ScenarioResult(**base, observed=observed, passed=passed, problems=problems,
                          trace=[] if passed else _trace_dump(classification))


class CoverageRunner:
    def __init__(self, config: Config, on_progress: Optional[ProgressCallback] = None,
                 max_workers: Optional[int] = None):
        """
        Args:
            config: harness configuration (equal unit thresholds).
            on_progress: optional callback (stage, agent, status, detail) -> None
                - stage: "enumerating" | "running" | "certifying"
                - agent: scenario label or "system"
                - status: "started" | "done" | "error"
            max_workers: thread pool size for scenario runs.
        """
        self.config = config
        self.on_progress = on_progress
        self.max_workers = max_workers

    def _emit(self, stage: str, agent: str, status: str, detail: Optional[str] = None):
        if self.on_progress:
            try:
                self.on_progress(stage, agent, status, detail)
            except Exception as e:
                logger.warning("[WARN] Progress callback error: %s", e)

    def run_all(self, scenarios: List[Scenario]) -> Dict[Tuple[str, str], ScenarioResult]:
        results: Dict[Tuple[str, str], ScenarioResult] = {}
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_key = {
                executor.submit(run_scenario, sc, self.config): (sc.ho.word, sc.clp.word)
                for sc in scenarios
            }
            for future in as_completed(future_to_key):
                key = future_to_key[future]
                result = future.result()
                results[key] = result
                self._emit("running", result.label, "done" if result.passed else "error",
                           f"observed {result.observed}")
        return results

    def verify(self) -> CoverageCertificate:
        self._emit("enumerating", "system", "started")
        thresholds = self.config.thresholds()
        if not matches_design_thresholds(thresholds):
            logger.warning("[WARN] Vector amounts assume recordable £200, units £3,000, "
                           "national £5,000; configured thresholds differ")
        scenarios = enumerate_scenarios(self.config)
        oracle = brute_force_labels()
        labels = {sc.label for sc in scenarios}
        unreachable = [sc.label for sc in scenarios if not is_reachable(sc, self.config)]
        if unreachable:
            logger.warning("[COVERAGE] %d scenarios unreachable under unit %d / national %d: %s",
                           len(unreachable), check_harness_thresholds(self.config),
                           self.config.national_pence, unreachable)
        self._emit("enumerating", "system", "done", f"{len(scenarios)} scenarios")

        swaps = [sc.swapped() for sc in scenarios if sc.ho.hex != sc.clp.hex]
        self._emit("running", "system", "started", f"{len(scenarios) + len(swaps)} runs")
        results = self.run_all(scenarios + swaps)

        self._emit("certifying", "system", "started")
        swap_failures = []
        for sc in scenarios:
            if sc.ho.hex == sc.clp.hex:
                continue
            forward = results[(sc.ho.word, sc.clp.word)].observed
            backward = results[(sc.clp.word, sc.ho.word)].observed
            if forward is None or backward is None or forward != backward[::-1]:
                swap_failures.append(sc.label)

        certificate = CoverageCertificate(
            universe_size=universe_size(),
            scenario_count=len(scenarios),
            oracle_count=len(oracle),
            enumeration_matches=labels == oracle,
            missing_labels=sorted(oracle - labels),
            extra_labels=sorted(labels - oracle),
            unreachable=unreachable,
            swap_failures=swap_failures,
            results=[results[(sc.ho.word, sc.clp.word)] for sc in scenarios],
        )
        logger.info("[COVERAGE] %s", certificate.summary())
        self._emit("certifying", "system", "done", certificate.summary())
        return certificate


def verify_coverage(config: Config, on_progress: Optional[ProgressCallback] = None,
                    max_workers: Optional[int] = None) -> CoverageCertificate:
    return CoverageRunner(config, on_progress, max_workers).verify()
