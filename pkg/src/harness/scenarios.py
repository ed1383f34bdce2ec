"""
Scenario enumeration.

A scenario pairs a Head Office vector with a CLP vector for one donor. Two
paths can share a scenario only when no quarter has Section 62(12) reporting
in one unit and carry-forward in the other; with equal unit thresholds,
swapping the units swaps the observed paths, so each unordered pair is run
once, labelled "ij" with i >= j in hex order.
"""
import logging
from itertools import product
from typing import List, Set, Tuple

from pydantic import BaseModel, ConfigDict

from ..config import Config
from ..errors import HarnessConfigError
from ..protocol.paths import PATH_LENGTH, PathName, enumerate_paths
from ..schemas import UnitKind

logger = logging.getLogger(__name__)


class Scenario(BaseModel):
    model_config = ConfigDict(frozen=True)

    ho: PathName
    clp: PathName

    @property
    def label(self) -> str:
        return f"{self.ho.code}{self.clp.code}"

    def swapped(self) -> "Scenario":
        return Scenario(ho=self.clp, clp=self.ho)

    def __str__(self) -> str:
        return f"{self.label} <HO({self.ho.word}), CLP({self.clp.word})>"


def compatible(pi: PathName, pj: PathName) -> bool:
    """No quarter where one path is s and the other is c."""
    return all({x, y} != {"s", "c"} for x, y in zip(pi.word, pj.word))


def compatible_closed_form(pi: PathName, pj: PathName) -> bool:
    ai, bi, _ = pi.shape()
    aj, bj, _ = pj.shape()
    return ai == aj or (ai < aj and bi == 0) or (aj < ai and bj == 0)


def ordered_universe() -> List[Tuple[PathName, PathName]]:
    paths = enumerate_paths()
    return list(product(paths, repeat=2))


def check_harness_thresholds(config: Config) -> int:
    """Returns the common unit threshold; unequal thresholds cannot be symmetry-reduced."""
    thresholds = {u.threshold for u in config.canonical_units() if u.kind != UnitKind.VIRTUAL}
    if len(thresholds) != 1:
        raise HarnessConfigError(
            f"scenario enumeration needs equal unit thresholds, got {sorted(thresholds)}")
    return thresholds.pop()


def enumerate_scenarios(config: Config) -> List[Scenario]:
    """Unordered compatible pairs in canonical order: by HO hex, then CLP hex."""
    check_harness_thresholds(config)
    paths = enumerate_paths()
    scenarios = [Scenario(ho=pi, clp=pj)
                 for pi in paths for pj in paths
                 if pi.hex >= pj.hex and compatible_closed_form(pi, pj)]
    logger.debug("[COVERAGE] Enumerated %d scenarios", len(scenarios))
    return scenarios


def brute_force_labels() -> Set[str]:
    """Independent oracle: filter all 225 ordered pairs positionwise, then fold symmetry."""
    letters = "csr"
    words = ["".join(w) for w in product(letters, repeat=PATH_LENGTH)]
    grammar = [w for w in words if "".join(sorted(w, key=letters.index)) == w]
    code = {w: format(i, "X") for i, w in enumerate(sorted(grammar, key=lambda w: [letters.index(c) for c in w]), 1)}
    labels = set()
    for wi, wj in product(grammar, repeat=2):
        if any({x, y} == {"s", "c"} for x, y in zip(wi, wj)):
            continue
        hi, lo = sorted((wi, wj), key=lambda w: int(code[w], 16), reverse=True)
        labels.add(code[hi] + code[lo])
    return labels


def universe_size() -> int:
    return len(ordered_universe())
