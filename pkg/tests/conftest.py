"""Shared fixtures: the worked statements under tests/data and their manifests."""

from pathlib import Path

import pytest
from hypothesis import assume
from hypothesis import strategies as st

from app.ingest import load_manifest, load_statement
from app.models import LineItem, Statement
from app.services.statement_service import normalize

DATA_DIR = Path(__file__).parent / "data"
GOLDEN_DIR = Path(__file__).parent / "golden"


def load_case(name: str):
    raw = load_statement(DATA_DIR / f"{name}.csv")
    manifest = load_manifest(DATA_DIR / f"{name}.json", raw)
    return raw, manifest


def statement_of(rows, periods=None) -> Statement:
    """A normalized statement from (label, values) pairs; periods default to 2001, 2002, ..."""
    periods = periods or tuple(str(2001 + p) for p in range(len(rows[0][1])))
    return Statement(
        periods=tuple(periods),
        rows=tuple(LineItem(id=label, label=label, values=tuple(float(v) for v in values)) for label, values in rows),
    )


def normalized_lines(text: str):
    """Report lines with runs of whitespace collapsed; column widths are not part of the contract."""
    return [" ".join(line.split()) for line in text.splitlines() if line.strip()]


@st.composite
def balanced_statements(draw, max_rows=16, max_periods=3, cell=40):
    """(label, values) rows of small integers whose last row makes every period sum to zero."""
    periods = draw(st.integers(min_value=1, max_value=max_periods))
    count = draw(st.integers(min_value=2, max_value=max_rows))
    cells = st.integers(min_value=-cell, max_value=cell)
    body = [draw(st.lists(cells, min_size=periods, max_size=periods)) for _ in range(count - 1)]
    rows = body + [[-sum(column) for column in zip(*body)]]
    assume(all(any(row) for row in rows))
    return [(f"r{i}", row) for i, row in enumerate(rows)]


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def golden_dir() -> Path:
    return GOLDEN_DIR


@pytest.fixture
def cash_flow_case():
    """Project cash flow statement: revenue, costs, shareholder flows, bank balancing line."""
    return load_case("cash_flow")


@pytest.fixture
def cash_flow_statement(cash_flow_case):
    raw, manifest = cash_flow_case
    return normalize(raw, manifest)


@pytest.fixture
def balance_sheet_case():
    """Balance sheet already restated to add to zero."""
    return load_case("balance_sheet")


@pytest.fixture
def balance_sheet_statement(balance_sheet_case):
    raw, manifest = balance_sheet_case
    return normalize(raw, manifest)


@pytest.fixture
def raw_balance_sheet_case():
    """Balance sheet as printed: footings, liabilities positive."""
    return load_case("balance_sheet_printed")
