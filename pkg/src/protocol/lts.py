"""
Act-decide labelled transition systems.

States are labelled by formulas over the per-quarter atoms d1..d4 (δ_p) and
ds1..ds4 (δ*_p); transitions are labelled by acts. The charts themselves are
data: JSON definition files under charts/.
"""
import json
import logging
import re
import threading
from collections import deque
from functools import lru_cache
from pathlib import Path
from types import MappingProxyType
from typing import Dict, FrozenSet, Iterable, List, Literal, Mapping, Optional, Sequence, Set, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pysmt.exceptions import PysmtException
from pysmt.fnode import FNode
from pysmt.parsing import parse
from pysmt.shortcuts import TRUE, And, Bool, Symbol
from pysmt.typing import BOOL

from ..errors import ChartError, QuarterError
from ..schemas import MARKER_ACT, QUARTERS, Act, PairQuarter, Quarter
from .paths import PATH_LENGTH

logger = logging.getLogger(__name__)

CHART_DIR = Path(__file__).parent / "charts"
PATH_CHART = "audonor_paths"
AUDONOR_MACHINE = "audonor_machine"
AUS62DONOR_MACHINE = "aus62donor_machine"

ATOMS: Tuple[str, ...] = tuple(f"d{p}" for p in QUARTERS) + tuple(f"ds{p}" for p in QUARTERS)

Assignment = Mapping[str, bool]


# --- Formulas -------------------------------------------------------------

_SYMBOLS: Dict[str, FNode] = {name: Symbol(name, BOOL) for name in ATOMS}
_HR_SPELLING = {"¬": "!", "~": "!", "∧": "&", "∨": "|", "true": "True", "false": "False"}
_CONSTANTS = ("true", "false", "True", "False")
_WORD = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_HR_TOKEN = re.compile(r"true|false|[¬~∧∨]")
_EVAL_LOCK = threading.RLock()


def parse_formula(text: str) -> FNode:
    """
    Parses `!`, `&`, `|` and parentheses over the atoms d1..d4, ds1..ds4 and
    the constants true/false. `&` binds tighter than `|`.
    """
    if not text.strip():
        raise ChartError("empty formula")
    for word in _WORD.findall(text):
        if word not in _SYMBOLS and word not in _CONSTANTS:
            raise ChartError(f"unknown atom '{word}' in '{text}' (expected one of {', '.join(ATOMS)})")
    hr = _HR_TOKEN.sub(lambda m: _HR_SPELLING[m.group(0)], text)
    try:
        with _EVAL_LOCK:
            formula = parse(hr)
            propositional = formula.get_type().is_bool_type()
    except (PysmtException, SyntaxError) as e:
        raise ChartError(f"bad formula '{text}': {e}") from e
    if not propositional:
        raise ChartError(f"formula '{text}' is not propositional")
    return formula


def formula_atoms(formula: FNode) -> FrozenSet[str]:
    return frozenset(s.symbol_name() for s in formula.get_free_variables())


@lru_cache(maxsize=4096)
def _holds(formula: FNode, true_atoms: FrozenSet[str]) -> bool:
    subs = {_SYMBOLS[name]: Bool(name in true_atoms) for name in formula_atoms(formula)}
    return formula.substitute(subs).simplify().is_true()


def holds(formula: FNode, assignment: Assignment) -> bool:
    """Truth of `formula` under `assignment`; atoms it leaves out are false."""
    with _EVAL_LOCK:
        true_atoms = frozenset(n for n in formula_atoms(formula) if assignment.get(n, False))
        return _holds(formula, true_atoms)


def formula_text(formula: FNode) -> str:
    return formula.serialize()


def conjoin(*formulas: FNode) -> FNode:
    parts = [f for f in formulas if not f.is_true()]
    if not parts:
        return TRUE()
    return parts[0] if len(parts) == 1 else And(parts)


# --- Chart definitions ----------------------------------------------------

class ChartState(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(..., min_length=1)
    formula: str = "true"
    name: Optional[str] = None


class ChartTransition(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    source: str = Field(..., alias="from")
    label: str = Field(..., min_length=1)
    target: str = Field(..., alias="to")


class ChartDefinition(BaseModel):
    """The on-disk chart format."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = "chart"
    kind: Literal["path", "quarter", "machine", "product"] = "path"
    quarter: Optional[Quarter] = None
    initial: str
    states: Tuple[ChartState, ...]
    transitions: Tuple[ChartTransition, ...] = ()
    terminals: Tuple[str, ...] = ()

    @model_validator(mode="after")
    def _quarter_charts_name_their_quarter(self) -> "ChartDefinition":
        if self.kind == "quarter" and self.quarter is None:
            raise ValueError("a quarter chart must state its quarter")
        return self


class ActDecideLTS:
    """
    Immutable, deterministic LTS whose every state is reachable from the
    initial state. Construction validates the definition and raises
    ChartError on any structural defect.
    """

    __slots__ = ("definition", "_formulas", "_delta", "_terminals", "_order")

    def __init__(self, definition: ChartDefinition):
        self.definition = definition
        order: List[str] = []
        formulas: Dict[str, FNode] = {}
        for s in definition.states:
            if s.id in formulas:
                raise ChartError(f"{definition.name}: duplicate state '{s.id}'")
            formulas[s.id] = parse_formula(s.formula)
            order.append(s.id)
        if definition.initial not in formulas:
            raise ChartError(f"{definition.name}: initial state '{definition.initial}' is undefined")

        delta: Dict[Tuple[str, str], str] = {}
        for t in definition.transitions:
            for end in (t.source, t.target):
                if end not in formulas:
                    raise ChartError(f"{definition.name}: transition uses undefined state '{end}'")
            key = (t.source, t.label)
            if key in delta and delta[key] != t.target:
                raise ChartError(
                    f"{definition.name}: nondeterministic on '{t.label}' from '{t.source}'")
            delta[key] = t.target

        unknown = set(definition.terminals) - set(formulas)
        if unknown:
            raise ChartError(f"{definition.name}: undefined terminal states {sorted(unknown)}")

        self._formulas = MappingProxyType(formulas)
        self._delta = MappingProxyType(delta)
        self._terminals = frozenset(definition.terminals)
        self._order = tuple(order)

        live = reachable(self)
        unreachable = [s for s in order if s not in live]
        if unreachable:
            raise ChartError(f"{definition.name}: unreachable states {unreachable}")

    def __setattr__(self, name, value):
        if hasattr(self, "_order"):
            raise AttributeError("ActDecideLTS is immutable")
        object.__setattr__(self, name, value)

    def __repr__(self) -> str:
        return (f"ActDecideLTS({self.name!r}, states={len(self._order)}, "
                f"transitions={len(self._delta)})")

    @property
    def name(self) -> str:
        return self.definition.name

    @property
    def kind(self) -> str:
        return self.definition.kind

    @property
    def quarter(self) -> Optional[int]:
        return self.definition.quarter

    @property
    def initial(self) -> str:
        return self.definition.initial

    @property
    def states(self) -> Tuple[str, ...]:
        return self._order

    @property
    def terminals(self) -> FrozenSet[str]:
        return self._terminals

    @property
    def labels(self) -> Tuple[str, ...]:
        seen: Dict[str, None] = {}
        for _, label in self._delta:
            seen.setdefault(label, None)
        return tuple(seen)

    def formula(self, state: str) -> FNode:
        return self._formulas[state]

    def step(self, state: str, label: str) -> Optional[str]:
        return self._delta.get((state, label))

    def successors(self, state: str) -> List[Tuple[str, str]]:
        return [(label, target) for (src, label), target in self._delta.items() if src == state]


# --- Loading --------------------------------------------------------------

def parse_chart(data: Union[str, bytes, dict]) -> ActDecideLTS:
    try:
        if isinstance(data, dict):
            definition = ChartDefinition.model_validate(data)
        else:
            definition = ChartDefinition.model_validate_json(data)
    except ValidationError as e:
        raise ChartError(f"invalid chart definition: {e}") from e
    return ActDecideLTS(definition)


def load_chart(source: Union[str, Path]) -> ActDecideLTS:
    """Loads a chart file, or a shipped chart by name (e.g. 'quarter_q4')."""
    path = Path(source)
    if not path.exists():
        shipped = CHART_DIR / f"{path.stem}.json"
        if path.parent != Path(".") or not shipped.exists():
            raise ChartError(f"chart file not found: {source}")
        path = shipped
    lts = parse_chart(path.read_text(encoding="utf-8"))
    logger.debug("[LTS] Loaded %r from %s", lts, path)
    return lts


@lru_cache(maxsize=None)
def shipped_chart(name: str) -> ActDecideLTS:
    return load_chart(CHART_DIR / f"{name}.json")


def path_chart() -> ActDecideLTS:
    return shipped_chart(PATH_CHART)


def build_quarter_chart(q: int) -> ActDecideLTS:
    """
    The individual donation reporting chart for quarter q: start (⊥,⊥*),
    transition 1 into aggregation, then 2.p to δ_p, 3.p to δ*_p (p <= q) or
    4 to carried forward.
    """
    if q not in QUARTERS:
        raise QuarterError(f"quarter must be 1..4, got {q}")
    chart = shipped_chart(f"quarter_q{q}")
    if chart.kind != "quarter" or chart.quarter != q:
        raise ChartError(f"{chart.name} is not the chart for Q{q}")
    expected = {f"2.{p}" for p in range(1, q + 1)} | {f"3.{p}" for p in range(1, q + 1)} | {"1", "4"}
    if set(chart.labels) != expected:
        raise ChartError(f"{chart.name} has transitions {sorted(chart.labels)}, "
                         f"expected {sorted(expected)}")
    return chart


# --- Traces and acceptance ------------------------------------------------

class LtsTrace(BaseModel):
    """
    A labelled run request: one transition label and one atom assignment per
    step. The initial state is checked against `initial_assignment`.
    """
    model_config = ConfigDict(frozen=True)

    labels: Tuple[str, ...] = Field(default=(), max_length=PATH_LENGTH)
    assignments: Tuple[Dict[str, bool], ...] = ()
    initial_assignment: Dict[str, bool] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _one_assignment_per_step(self) -> "LtsTrace":
        if len(self.assignments) != len(self.labels):
            raise ValueError(f"{len(self.labels)} labels but {len(self.assignments)} assignments")
        return self

    @classmethod
    def from_word(cls, word: str, assignments: Sequence[Mapping[str, bool]],
                  initial_assignment: Optional[Mapping[str, bool]] = None) -> "LtsTrace":
        return cls(labels=tuple(word), assignments=tuple(dict(a) for a in assignments),
                   initial_assignment=dict(initial_assignment or {}))


def rejection(lts: ActDecideLTS, trace: LtsTrace) -> Optional[str]:
    """None when the trace is accepted, otherwise the reason it is not."""
    state = lts.initial
    if not holds(lts.formula(state), trace.initial_assignment):
        return f"initial state '{state}' formula {formula_text(lts.formula(state))} fails"
    for i, (label, assignment) in enumerate(zip(trace.labels, trace.assignments), start=1):
        nxt = lts.step(state, label)
        if nxt is None:
            return f"step {i}: no '{label}' transition from '{state}'"
        state = nxt
        if not holds(lts.formula(state), assignment):
            return f"step {i}: state '{state}' formula {formula_text(lts.formula(state))} fails"
    return None


def accepts(lts: ActDecideLTS, trace: LtsTrace) -> bool:
    return rejection(lts, trace) is None


def language(lts: ActDecideLTS, length: int = PATH_LENGTH) -> Set[str]:
    """
    Every word of `length` labels that has a run ending in a terminal state
    (any state when the chart declares no terminals). Formulas are ignored.
    """
    words: Set[str] = set()
    frontier = [("", lts.initial)]
    for _ in range(length):
        frontier = [(w + label, target) for w, s in frontier for label, target in lts.successors(s)]
    for word, state in frontier:
        if not lts.terminals or state in lts.terminals:
            words.add(word)
    return words


def reachable(lts: ActDecideLTS, min_steps: int = 0) -> Set[str]:
    """States reachable from the initial state in at least `min_steps` transitions."""
    seen = {(lts.initial, 0)}
    queue = deque(seen)
    while queue:
        state, steps = queue.popleft()
        for _, target in lts.successors(state):
            nxt = (target, min(steps + 1, min_steps))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return {state for state, steps in seen if steps >= min_steps}


def restrict(lts: ActDecideLTS, labels: Iterable[str]) -> ActDecideLTS:
    """The sub-chart using only `labels`, pruned to its reachable part."""
    keep = set(labels)
    d = lts.definition
    transitions = [t for t in d.transitions if t.label in keep]
    live = {d.initial}
    changed = True
    while changed:
        changed = False
        for t in transitions:
            if t.source in live and t.target not in live:
                live.add(t.target)
                changed = True
    return ActDecideLTS(d.model_copy(update={
        "name": f"{d.name} restricted to {sorted(keep)}",
        "states": tuple(s for s in d.states if s.id in live),
        "transitions": tuple(t for t in transitions if t.source in live),
        "terminals": tuple(s for s in d.terminals if s in live),
    }))


def compound_id(left: str, right: str) -> str:
    return f"({left},{right})"


def product(a: ActDecideLTS, b: ActDecideLTS, name: Optional[str] = None) -> ActDecideLTS:
    """
    Parallel composition: shared labels move both machines together, labels
    private to one machine move it alone. Only reachable compound states are
    built; a compound state is terminal when both components are.
    """
    shared = set(a.labels) & set(b.labels)
    initial = (a.initial, b.initial)
    order = [initial]
    index = {initial: 0}
    transitions: List[ChartTransition] = []

    i = 0
    while i < len(order):
        x, y = order[i]
        moves: List[Tuple[str, Tuple[str, str]]] = []
        for label, tx in a.successors(x):
            if label in shared:
                ty = b.step(y, label)
                if ty is not None:
                    moves.append((label, (tx, ty)))
            else:
                moves.append((label, (tx, y)))
        for label, ty in b.successors(y):
            if label not in shared:
                moves.append((label, (x, ty)))
        for label, nxt in moves:
            if nxt not in index:
                index[nxt] = len(order)
                order.append(nxt)
            transitions.append(ChartTransition(source=compound_id(x, y), label=label,
                                               target=compound_id(*nxt)))
        i += 1

    definition = ChartDefinition(
        name=name or f"{a.name} x {b.name}",
        kind="product",
        initial=compound_id(*initial),
        states=tuple(ChartState(id=compound_id(x, y),
                                formula=formula_text(conjoin(a.formula(x), b.formula(y))))
                     for x, y in order),
        transitions=tuple(transitions),
        terminals=tuple(compound_id(x, y) for x, y in order
                        if x in a.terminals and y in b.terminals),
    )
    return ActDecideLTS(definition)


def donor_product() -> ActDecideLTS:
    """AUdonor x AUS62donor, the concurrent per-donor machines."""
    return product(shipped_chart(AUDONOR_MACHINE), shipped_chart(AUS62DONOR_MACHINE),
                   name="AUdonor x AUS62donor")


# --- Engine traces --------------------------------------------------------

QUARTER_LABEL = {Act.REPORT: "2.{p}", Act.SECTION_62: "3.{p}", Act.CARRY_FORWARD: "4"}


class PairTrace(BaseModel):
    """
    The engine's year for one (donor, unit): the act word and, per quarter p,
    the values of the atoms d<p> and ds<p>.
    """
    model_config = ConfigDict(frozen=True)

    donor: str
    unit: str
    word: str = Field(..., pattern=r"^[csr]{4}$")
    atoms: Tuple[Dict[str, bool], ...] = Field(..., min_length=4, max_length=4)

    @classmethod
    def from_pairs(cls, pairs: Sequence[PairQuarter]) -> "PairTrace":
        if len(pairs) != len(QUARTERS):
            raise ChartError(f"expected {len(QUARTERS)} quarters of classification, got {len(pairs)}")
        ordered = sorted(pairs, key=lambda p: p.quarter)
        return cls(
            donor=ordered[0].donor,
            unit=ordered[0].unit,
            word="".join((MARKER_ACT[p.marker] if p.marker else p.act).value for p in ordered),
            atoms=tuple({f"d{p.quarter}": p.state.delta, f"ds{p.quarter}": p.state.delta_star}
                        for p in ordered),
        )

    def cumulative(self, p: int) -> Dict[str, bool]:
        """Atom assignment known at the end of quarter p."""
        merged: Dict[str, bool] = {}
        for atoms in self.atoms[:p]:
            merged.update(atoms)
        return merged

    def path_run(self) -> LtsTrace:
        return LtsTrace.from_word(self.word, [self.cumulative(p) for p in QUARTERS])

    def quarter_runs(self, q: int) -> List[LtsTrace]:
        """One decision run per quarter p <= q on the quarter-q chart."""
        runs = []
        for p in range(1, q + 1):
            act = Act(self.word[p - 1])
            runs.append(LtsTrace(
                labels=("1", QUARTER_LABEL[act].format(p=p)),
                assignments=(self.cumulative(p), self.cumulative(p)),
                initial_assignment=self.cumulative(p - 1),
            ))
        return runs


def engine_trace_rejection(lts: ActDecideLTS, trace: PairTrace) -> Optional[str]:
    if lts.kind == "path":
        return rejection(lts, trace.path_run())
    if lts.kind == "quarter":
        for p, run in enumerate(trace.quarter_runs(lts.quarter), start=1):
            reason = rejection(lts, run)
            if reason:
                return f"Q{p} run: {reason}"
        return None
    raise ChartError(f"engine traces are checked against path or quarter charts, not '{lts.kind}'")


def accepts_engine_trace(lts: ActDecideLTS, trace: PairTrace) -> bool:
    return engine_trace_rejection(lts, trace) is None


def parse_trace(data: Union[str, bytes, dict]) -> Union[PairTrace, LtsTrace]:
    """Reads a trace file: an engine PairTrace (has 'atoms') or a raw LtsTrace."""
    try:
        if not isinstance(data, dict):
            data = json.loads(data)
        if "atoms" in data:
            return PairTrace.model_validate(data)
        return LtsTrace.model_validate(data)
    except (ValueError, ValidationError) as e:
        raise ChartError(f"invalid trace: {e}") from e


def check_trace(lts: ActDecideLTS, trace: Union[PairTrace, LtsTrace]) -> Optional[str]:
    if isinstance(trace, PairTrace):
        return engine_trace_rejection(lts, trace)
    return rejection(lts, trace)
