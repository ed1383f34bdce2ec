"""
Test vectors: four (possibly null) donations from one donor to one unit that,
together with a compatible partner vector, make the engine trace a path.

Amounts assume the harness thresholds (recordable £200, every unit £3,000,
national £5,000). For π = c^a s^b r^d:
- quarters 1..a carry £210
- the first s quarter carries £2,600 when a = 0, else £2,300; later s quarters are null
- the first r quarter carries £3,100; later r quarters are null
"""
from enum import Enum
from typing import List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field

from ..protocol.paths import PathName, enumerate_paths
from ..schemas import Money, Thresholds

CARRY_AMOUNT = 21000
FIRST_S62_AMOUNT = 260000
LATER_S62_AMOUNT = 230000
REPORT_AMOUNT = 310000

DESIGN_RECORDABLE = 20000
DESIGN_UNIT_THRESHOLD = 300000
DESIGN_NATIONAL = 500000


class Role(str, Enum):
    HO = "HO"
    CLP = "CLP"


class TestVector(BaseModel):
    __test__ = False  # not a pytest class

    model_config = ConfigDict(frozen=True)

    role: Role
    path: PathName
    amounts: Tuple[Optional[Money], ...] = Field(..., min_length=4, max_length=4)

    def donations(self) -> List[Tuple[int, int]]:
        """(quarter, amount) for every non-null entry."""
        return [(q, a) for q, a in enumerate(self.amounts, start=1) if a is not None]


def vector_amounts(path: PathName) -> Tuple[Optional[int], ...]:
    a, b, _ = path.shape()
    amounts: List[Optional[int]] = []
    for q, act in enumerate(path.word):
        if act == "c":
            amounts.append(CARRY_AMOUNT)
        elif act == "s":
            first = q == a
            amounts.append((FIRST_S62_AMOUNT if a == 0 else LATER_S62_AMOUNT) if first else None)
        else:
            amounts.append(REPORT_AMOUNT if q == a + b else None)
    return tuple(amounts)


def make_vector(path: PathName, role: Role) -> TestVector:
    return TestVector(role=role, path=path, amounts=vector_amounts(path))


def vector_table() -> List[TestVector]:
    """The 30 vectors: one per path for Head Office, then one per path for the CLP."""
    return [make_vector(p, role) for role in Role for p in enumerate_paths()]


def matches_design_thresholds(t: Thresholds) -> bool:
    return (t.recordable == DESIGN_RECORDABLE
            and t.national == DESIGN_NATIONAL
            and set(t.unit_threshold.values()) == {DESIGN_UNIT_THRESHOLD})
