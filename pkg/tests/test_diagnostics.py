import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from app.errors import DecompositionError
from app.models import SolverOptions, TargetSpec
from app.services.diagnostics_service import (
    apply_decomposition,
    closest_partition,
    detect_double_count,
    detect_shift,
    diagnose,
    shift_values,
    split_row,
    synthesize_adjustments,
)
from app.services.inclusion_service import two_way_partition
from app.services.statement_service import zero_check
from tests.conftest import balanced_statements, statement_of


# --- CLOSEST PARTITION ---

def _near_miss():
    return statement_of([("a", [10, 10, 10]), ("b", [5, 0, 0]), ("c", [-15, -10, -10])])


def test_closest_partition_and_its_residual():
    diagnosis = closest_partition(_near_miss(), [12, 10, 10])
    assert not diagnosis.exact
    assert diagnosis.best_partition.rows_in("included") == ["a"]
    assert diagnosis.residual == (2.0, 0.0, 0.0)
    assert diagnosis.residual_norm == 2.0
    assert [line.label for line in diagnosis.adjustments] == ["adjustment 2001"]
    assert diagnosis.adjustments[0].values == (2.0, 0.0, 0.0)
    assert diagnosis.decomposition_requests == ["b"]


def test_l1_norm_is_available():
    diagnosis = closest_partition(_near_miss(), [12, 10, 10], SolverOptions(norm="l1"))
    assert diagnosis.norm == "l1"
    assert diagnosis.residual_norm == 2.0


def test_closest_partition_of_a_reachable_target_is_exact(cash_flow_statement):
    diagnosis = closest_partition(cash_flow_statement, [-60, 60, 60, 60, 0])
    assert diagnosis.exact
    assert diagnosis.adjustments == []


def test_three_way_residual_is_split_by_side(balance_sheet_statement):
    spec = TargetSpec(kind="three_way", top_target=(79.5,), bottom_target=(10.0,))
    diagnosis = closest_partition(balance_sheet_statement, spec)
    assert not diagnosis.exact
    assert diagnosis.residual_norm == 0.5
    assert diagnosis.residual[1] == 0.0
    assert all(line.label.startswith(("debt adjustment", "equity adjustment")) for line in diagnosis.adjustments)


@st.composite
def near_miss_cases(draw):
    rows = draw(balanced_statements(max_rows=10, cell=20))
    periods = len(rows[0][1])
    target = draw(st.lists(st.integers(min_value=-60, max_value=60), min_size=periods, max_size=periods))
    return rows, target


@settings(max_examples=100, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(near_miss_cases(), st.sampled_from(["max", "l1"]))
def test_closest_partition_matches_brute_force(case, norm):
    rows, target = case
    values = np.array([row for _, row in rows], dtype=float)
    masks = np.array(list(itertools.product((0, 1), repeat=len(rows))), dtype=float)
    gaps = np.asarray(target, dtype=float) - masks @ values
    norms = np.abs(gaps).max(axis=1) if norm == "max" else np.abs(gaps).sum(axis=1)

    diagnosis = closest_partition(statement_of(rows), target, SolverOptions(norm=norm))
    assert diagnosis.residual_norm == pytest.approx(norms.min(), abs=1e-9)
    assert diagnosis.exact == (norms.min() <= 0.005)


# --- ADJUSTMENTS ---

def test_constant_run_becomes_one_adjustment_line():
    lines = synthesize_adjustments([0, 5, 5, 5, 0], periods=["2008", "2009", "2010", "2011", "2012"])
    assert len(lines) == 1
    assert lines[0].label == "adjustment 2009-2011"
    assert lines[0].values == (0.0, 5.0, 5.0, 5.0, 0.0)


def test_adjustment_lines_add_up_to_the_residual():
    residual = [1, 2, 2, 0, -3]
    lines = synthesize_adjustments(residual, "fee adjustment")
    assert [line.label for line in lines] == ["fee adjustment 1", "fee adjustment 2-3", "fee adjustment 5"]
    assert [sum(values) for values in zip(*(line.values for line in lines))] == [1, 2, 2, 0, -3]


def test_rounding_noise_does_not_split_a_run():
    residual = [0.1 + 0.2, 0.3, 0.3000001, 0]
    lines = synthesize_adjustments(residual, tolerance=0.005)
    assert [line.label for line in lines] == ["adjustment 1-3"]
    assert lines[0].values == (0.1 + 0.2, 0.3, 0.3000001, 0.0)
    assert len(synthesize_adjustments([5, 5.5], tolerance=0.005)) == 2


def test_too_many_adjustment_lines_are_flagged():
    stmt = statement_of([("a", [1, 0, 0, 0, 0, 0]), ("b", [-1, 0, 0, 0, 0, 0])])
    diagnosis = closest_partition(stmt, [0, 1, 2, 3, 4, 5])
    assert len(diagnosis.adjustments) == 5
    assert any("5 adjustment lines are needed" in warning for warning in diagnosis.warnings)


# --- DECOMPOSITION ---

def test_decomposed_row_keeps_the_statement_balanced(cash_flow_statement):
    split = split_row(cash_flow_statement, "Costs/operating", [
        ("fixed costs", [0, -12, -12, -12, 0]),
        ("variable costs", [0, -8, -8, -8, 0]),
    ])
    stmt = apply_decomposition(cash_flow_statement, split)
    assert "Costs/operating" not in stmt.row_ids
    assert stmt.row_ids[2:4] == ["Costs/fixed costs", "Costs/variable costs"]
    assert zero_check(stmt).passed


def test_decomposition_lets_a_finer_target_match(cash_flow_statement):
    target = [-60, 68, 68, 68, 0]
    assert two_way_partition(cash_flow_statement, target) == []
    split = split_row(cash_flow_statement, "Costs/operating", [
        ("fixed costs", [0, -12, -12, -12, 0]),
        ("variable costs", [0, -8, -8, -8, 0]),
    ])
    results = two_way_partition(apply_decomposition(cash_flow_statement, split), target)
    assert results[0].rows_in("included") == ["Revenue", "Costs/construction", "Costs/fixed costs"]


def test_decomposition_must_add_back_exactly(cash_flow_statement):
    split = split_row(cash_flow_statement, "Costs/operating", [("fixed costs", [0, -12, -12, -12, 0])])
    with pytest.raises(DecompositionError, match="sum to"):
        apply_decomposition(cash_flow_statement, split)


def test_decomposition_ids_must_be_new(cash_flow_statement):
    split = split_row(cash_flow_statement, "Costs/operating", [
        ("construction", [0, -12, -12, -12, 0]),
        ("other", [0, -8, -8, -8, 0]),
    ])
    with pytest.raises(DecompositionError, match="already used"):
        apply_decomposition(cash_flow_statement, split)


def test_decomposition_keeps_the_inversion_flag(cash_flow_statement):
    split = split_row(cash_flow_statement, "Increase in cash at bank", [
        ("deposits", [0, -30, -30, -30, 0]),
        ("withdrawals", [0, 0, 0, 0, 90]),
    ])
    stmt = apply_decomposition(cash_flow_statement, split)
    assert stmt.row("deposits").inverted


# --- TIMING SHIFTS ---

def test_shift_values_reports_lost_values():
    assert shift_values([1, 2, 3], 1) == ((0.0, 1.0, 2.0), (3.0,))
    assert shift_values([1, 2, 3], -2) == ((3.0, 0.0, 0.0), (1.0, 2.0))


def _shifted():
    # the model takes row a one period earlier than the statement shows it
    return statement_of([("a", [0, 10, 0]), ("b", [7, 0, 3]), ("c", [-7, -10, -3])])


def test_detect_shift_names_the_row_and_offset():
    findings = detect_shift(_shifted(), [10, 0, 0], window=1)
    assert findings
    first = findings[0]
    assert (first.row_id, first.offset) == ("a", -1)
    assert not first.lossy
    assert not first.restores_zero_check
    assert first.description == "row a matches when moved 1 period earlier"
    assert first.partition.rows_in("included") == ["a"]


def test_detect_shift_is_silent_for_an_exact_match(cash_flow_statement):
    assert detect_shift(cash_flow_statement, [-60, 60, 60, 60, 0], window=2) == []
    assert detect_shift(_shifted(), [10, 0, 0], window=0) == []


# --- DOUBLE COUNTING ---

def _fee_statement():
    return statement_of([("revenue", [100]), ("fees", [-10]), ("debt service", [-60]), ("other", [-30])])


def test_detect_double_count_flags_the_shared_row():
    result = detect_double_count(_fee_statement(), -90, 70)
    assert result.double_counted == ("fees",)
    assert any("double counted on both sides" in warning for warning in result.warnings)


def test_detect_double_count_prefers_a_clean_partition(balance_sheet_statement):
    result = detect_double_count(balance_sheet_statement, 79, 10)
    assert result.double_counted == ()
    assert result.rows_in("bottom") == ["Equity/share capital"]


# --- FULL DIAGNOSIS ---

def test_diagnose_reports_exact_matches(balance_sheet_statement, balance_sheet_case):
    _, manifest = balance_sheet_case
    diagnosis = diagnose(balance_sheet_statement, manifest.target)
    assert diagnosis.exact
    assert diagnosis.best_partition.rows_in("top") == ["Debt/senior loan"]


def test_diagnose_finds_double_counting():
    spec = TargetSpec(kind="three_way", top_target=(-90.0,), bottom_target=(70.0,))
    diagnosis = diagnose(_fee_statement(), spec)
    assert not diagnosis.exact
    assert diagnosis.double_count_findings == ["fees"]
    assert diagnosis.double_count_partition.assignment["fees"] == "both"


def test_diagnose_finds_a_timing_shift_on_an_unbalanced_statement():
    stmt = statement_of([("a", [0, 10, 0]), ("b", [-10, 0, 3]), ("c", [0, 0, -3])])
    diagnosis = diagnose(stmt, TargetSpec(relevant_vector=(10.0, 0.0, 0.0)), SolverOptions(shift_window=1))
    assert not diagnosis.exact
    assert diagnosis.shift_findings[0].row_id == "a"
    assert diagnosis.shift_findings[0].offset == -1
    assert diagnosis.shift_findings[0].restores_zero_check
