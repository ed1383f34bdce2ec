import pytest
from hypothesis import strategies as st

from src.config import HARNESS_CONFIG, PRODUCTION_CONFIG, harness_config, load_config
from src.ledger import LedgerWriter


@pytest.fixture
def harness():
    return harness_config()


@pytest.fixture
def production():
    return load_config(PRODUCTION_CONFIG)


@pytest.fixture
def writer(harness):
    return LedgerWriter(harness)


@pytest.fixture
def harness_path():
    return str(HARNESS_CONFIG)


@st.composite
def harness_ledgers(draw, donors=("A", "B"), units=("HO", "CLP"), max_size=10):
    """Random ledgers under the harness thresholds, amounts £1 to £6,000."""
    w = LedgerWriter(harness_config())
    entries = draw(st.lists(
        st.tuples(st.sampled_from(donors), st.sampled_from(units),
                  st.integers(100, 600_000), st.integers(1, 4)),
        min_size=1, max_size=max_size,
    ))
    for donor, unit, amount, q in entries:
        w.add(donor, unit, amount, q)
    return w.ledger
