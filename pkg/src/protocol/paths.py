"""
Reporting-path grammar.

A path is the four-letter act word of one (donor, unit) over a year. Only the
words of c*s*r* are permissible; there are 15 of them, hex-coded 1..F in
lexicographic order with c < s < r.
"""
import math
import re
from functools import lru_cache
from itertools import product
from typing import Dict, List, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from ..errors import GrammarViolation, PathError
from ..schemas import Act

LETTER_ORDER = "csr"
PATH_LENGTH = 4
GRAMMAR = re.compile(r"c*s*r*")
EXPECTED_PATH_COUNT = math.comb(PATH_LENGTH + 2, 2)


class PathName(BaseModel):
    model_config = ConfigDict(frozen=True)

    word: str = Field(..., min_length=PATH_LENGTH, max_length=PATH_LENGTH)
    hex: int = Field(..., ge=1, le=EXPECTED_PATH_COUNT)

    @property
    def code(self) -> str:
        return format(self.hex, "X")

    def shape(self) -> Tuple[int, int, int]:
        """(a, b, d) such that word = c^a s^b r^d."""
        return self.word.count("c"), self.word.count("s"), self.word.count("r")

    def __str__(self) -> str:
        return f"{self.code} {self.word}"


def _check_letters(word: str) -> None:
    bad = sorted(set(word) - set(LETTER_ORDER))
    if bad:
        raise PathError(f"'{word}' contains letters outside {{c,s,r}}: {bad}")
    if len(word) != PATH_LENGTH:
        raise PathError(f"'{word}' is not {PATH_LENGTH} letters long")


def is_permissible(word: str) -> bool:
    _check_letters(word)
    return GRAMMAR.fullmatch(word) is not None


@lru_cache(maxsize=1)
def _table() -> Tuple[PathName, ...]:
    words = ("".join(w) for w in product(LETTER_ORDER, repeat=PATH_LENGTH))
    ordered = sorted(
        (w for w in words if GRAMMAR.fullmatch(w)),
        key=lambda w: [LETTER_ORDER.index(ch) for ch in w],
    )
    return tuple(PathName(word=w, hex=i) for i, w in enumerate(ordered, start=1))


def enumerate_paths() -> List[PathName]:
    return list(_table())


@lru_cache(maxsize=1)
def _by_word() -> Dict[str, PathName]:
    return {p.word: p for p in _table()}


def path_from_word(word: str) -> PathName:
    if not is_permissible(word):
        raise PathError(f"'{word}' is not in c*s*r*")
    return _by_word()[word]


def path_from_hex(code: Union[int, str]) -> PathName:
    value = int(code, 16) if isinstance(code, str) else code
    if not 1 <= value <= EXPECTED_PATH_COUNT:
        raise PathError(f"no path with hex code {code!r}")
    return _table()[value - 1]


def path_of(trace: Sequence[Union[Act, str]]) -> PathName:
    """
    Path of a per-quarter act trace. An impermissible trace means the engine
    broke the grammar, so it is raised as an invariant violation.
    """
    word = "".join(a.value if isinstance(a, Act) else str(a) for a in trace)
    if len(word) != PATH_LENGTH or set(word) - set(LETTER_ORDER):
        raise GrammarViolation(f"trace '{word}' is not a {PATH_LENGTH}-quarter act word")
    if GRAMMAR.fullmatch(word) is None:
        raise GrammarViolation(f"act word '{word}' violates c*s*r*")
    return _by_word()[word]
