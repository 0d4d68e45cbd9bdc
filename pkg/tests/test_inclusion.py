import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from app.errors import ZeroCheckError
from app.models import PartitionResult, SolverOptions, TargetSpec
from app.services.inclusion_service import (
    INCLUDED_LESS_TARGET,
    partition,
    three_way_partition,
    two_way_partition,
    verify_partition,
)
from tests.conftest import balanced_statements, statement_of


def included(result):
    return result.rows_in("included")


# --- TWO-WAY ---

def test_project_rate_excludes_decommissioning(cash_flow_statement, cash_flow_case):
    _, manifest = cash_flow_case
    project = manifest.all_targets[0]
    results = two_way_partition(cash_flow_statement, project)
    assert len(results) == 1
    best = results[0]
    assert included(best) == ["Revenue", "Costs/construction", "Costs/operating"]
    assert best.assignment["Costs/decommissioning"] == "excluded"
    assert best.exact
    assert best.metric_check.passed
    assert best.discrepancies[INCLUDED_LESS_TARGET] == (0.0, 0.0, 0.0, 0.0, 0.0)
    assert best.cluster_totals["excluded"] == (60.0, -60.0, -60.0, -60.0, 0.0)
    assert best.warnings == ()


def test_shareholder_rate_includes_investment_and_dividends(cash_flow_statement, cash_flow_case):
    _, manifest = cash_flow_case
    shareholder = manifest.all_targets[1]
    assert shareholder.relevant_vector == (60.0, -30.0, -30.0, -30.0, 0.0)
    results = two_way_partition(cash_flow_statement, shareholder)
    assert len(results) == 2
    best = results[0]
    assert included(best) == ["Shareholders/initial investment", "Shareholders/dividends"]
    assert best.metric_check.recalculated == pytest.approx(0.2338, abs=0.00005)
    assert best.metric_check.passed
    assert included(results[1]) == [
        "Costs/decommissioning", "Shareholders/initial investment",
        "Shareholders/return of capital", "Increase in cash at bank",
    ]
    assert any(warning.startswith("2 partitions reproduce the target") for warning in best.warnings)


def test_plain_vector_target(cash_flow_statement):
    results = two_way_partition(cash_flow_statement, [-60, 60, 60, 60, 0])
    assert included(results[0]) == ["Revenue", "Costs/construction", "Costs/operating"]
    assert results[0].metric_check is None


def test_source_rows_are_kept_out_of_the_search(cash_flow_statement):
    spec = TargetSpec(source_rows=("dividends",))
    results = two_way_partition(cash_flow_statement, spec)
    assert [result.assignment["Shareholders/dividends"] for result in results] == ["excluded", "excluded"]
    assert included(results[0]) == [
        "Costs/decommissioning", "Shareholders/return of capital", "Increase in cash at bank",
    ]


def test_no_partition_for_an_unreachable_target(cash_flow_statement):
    assert two_way_partition(cash_flow_statement, [-60, 60, 60, 60, -25]) == []


def test_unbalanced_statement_is_refused_unless_waived():
    stmt = statement_of([("a", [10, 5]), ("b", [-10, -4])])
    with pytest.raises(ZeroCheckError):
        two_way_partition(stmt, [10, 5])
    results = two_way_partition(stmt, [10, 5], SolverOptions(waive_zero_check=True))
    assert included(results[0]) == ["a"]


def test_all_zero_rows_are_parked_in_excluded():
    stmt = statement_of([("a", [10, 5]), ("nil", [0, 0]), ("b", [-10, -5])])
    results = two_way_partition(stmt, [10, 5])
    assert len(results) == 1
    assert results[0].assignment["nil"] == "excluded"
    assert results[0].zero_rows == ("nil",)
    assert "row nil is all zeros and is assigned to excluded" in results[0].warnings


def test_max_solutions_keeps_the_preferred_ones():
    stmt = statement_of([("a", [1]), ("b", [1]), ("c", [1]), ("d", [-3])])
    results = two_way_partition(stmt, [1], SolverOptions(max_solutions=2))
    assert len(results) == 2
    assert [included(result) for result in results] == [["c"], ["b"]]
    assert results[0].solver_stats.solutions_found == 3


def test_search_algorithms_agree(cash_flow_statement, cash_flow_case):
    _, manifest = cash_flow_case
    target = manifest.all_targets[1]
    exhaustive = two_way_partition(cash_flow_statement, target, SolverOptions(algorithm="exhaustive"))
    halves = two_way_partition(cash_flow_statement, target, SolverOptions(algorithm="meet_in_middle", workers=2))
    assert [r.assignment for r in exhaustive] == [r.assignment for r in halves]
    assert halves[0].solver_stats.algorithm == "meet_in_middle"


# --- THREE-WAY ---

def test_debt_equity_ratio_prefers_share_capital(balance_sheet_statement, balance_sheet_case):
    _, manifest = balance_sheet_case
    results = three_way_partition(balance_sheet_statement, manifest.target)
    assert len(results) == 2
    best, other = results
    assert best.rows_in("top") == ["Debt/senior loan"]
    assert best.rows_in("bottom") == ["Equity/share capital"]
    assert best.assignment["Debt/equity bridge loan"] == "excluded"
    assert best.assignment["Equity/retained earnings"] == "excluded"
    assert other.rows_in("bottom") == ["Debt/equity bridge loan"]
    assert best.cluster_totals == {"top": (-79.0,), "bottom": (-10.0,), "excluded": (89.0,)}
    assert best.metric_check.recalculated == pytest.approx(79 / 89)
    assert best.metric_check.passed
    assert "differs at Debt/equity bridge loan (excluded vs bottom)" in best.warnings[0]


def test_scalar_targets_apply_to_every_period():
    stmt = statement_of([("a", [-5, -5]), ("b", [-3, -3]), ("c", [8, 8])])
    results = three_way_partition(stmt, 5, 3)
    assert results[0].rows_in("top") == ["a"]
    assert results[0].rows_in("bottom") == ["b"]


def _fee_statement():
    return statement_of([("revenue", [100]), ("fees", [-10]), ("debt service", [-60]), ("other", [-30])])


def test_overlap_is_needed_for_a_double_counted_row():
    stmt = _fee_statement()
    assert three_way_partition(stmt, -90, 70) == []
    results = three_way_partition(stmt, -90, 70, SolverOptions(allow_overlap=True))
    assert results[0].double_counted == ("fees",)
    assert results[0].assignment["fees"] == "both"
    assert results[0].rows_in("top") == ["revenue", "fees"]
    assert results[0].rows_in("bottom") == ["fees", "debt service"]
    # each row is counted once when checking the statement still adds up
    assert results[0].discrepancies["top+bottom+excluded"] == (0.0,)


def test_partition_dispatches_on_the_target_kind(balance_sheet_statement, balance_sheet_case):
    _, manifest = balance_sheet_case
    assert partition(balance_sheet_statement, manifest.target)[0].kind == "three_way"


# --- VERIFICATION ---

def test_verification_reports_a_wrong_assignment(cash_flow_statement):
    assignment = {row_id: "excluded" for row_id in cash_flow_statement.row_ids}
    assignment["Revenue"] = "included"
    report = verify_partition(
        cash_flow_statement, [-60, 60, 60, 60, 0], PartitionResult(kind="two_way", assignment=assignment)
    )
    assert not report.passed
    assert report.failing_lines == [INCLUDED_LESS_TARGET]
    assert report.discrepancies[INCLUDED_LESS_TARGET] == (60.0, 20.0, 20.0, 20.0, 0.0)
    assert report.max_discrepancy == 60.0


def test_verification_reports_missing_and_unknown_rows(cash_flow_statement):
    assignment = {row_id: "excluded" for row_id in cash_flow_statement.row_ids[1:]}
    assignment["goodwill"] = "included"
    report = verify_partition(cash_flow_statement, [0, 0, 0, 0, 0], PartitionResult(kind="two_way", assignment=assignment))
    assert "row Revenue is not assigned" in report.failing_lines
    assert "row goodwill is not in the statement" in report.failing_lines


# --- ORACLE ---

def _brute_force(rows, clusters):
    """Every assignment of rows to `clusters` codes, and the row values as a matrix."""
    values = np.array([row for _, row in rows], dtype=float)
    codes = np.array(list(itertools.product(range(clusters), repeat=len(rows))), dtype=np.int8)
    return codes, values


def _labels(rows, mask):
    return tuple(label for (label, _), chosen in zip(rows, mask) if chosen)


@settings(max_examples=200, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(balanced_statements(), st.data())
def test_search_matches_brute_force(rows, data):
    mask = data.draw(st.lists(st.booleans(), min_size=len(rows), max_size=len(rows)))
    target = [sum(row[p] for (_, row), chosen in zip(rows, mask) if chosen) for p in range(len(rows[0][1]))]
    stmt = statement_of(rows)

    codes, values = _brute_force(rows, 2)
    hits = np.all(np.abs(codes @ values - np.asarray(target, dtype=float)) <= 0.005, axis=1)
    expected = {_labels(rows, combo) for combo in codes[hits]}

    results = two_way_partition(stmt, target, SolverOptions(max_solutions=1 << 16))
    found = {tuple(included(result)) for result in results}
    assert found == expected
    assert results, "the planted subset always reproduces the target"
    keys = [len(included(r)) for r in results]
    assert keys == sorted(keys)
    for result in results[:20]:
        assert verify_partition(stmt, target, result).passed


def _three_way_oracle(rows, top, bottom, clusters):
    codes, values = _brute_force(rows, clusters)
    in_top = np.isin(codes, (1, 3)).astype(float)
    in_bottom = np.isin(codes, (2, 3)).astype(float)
    hits = (np.all(np.abs(in_top @ values + top) <= 0.005, axis=1)
            & np.all(np.abs(in_bottom @ values + bottom) <= 0.005, axis=1))
    return {(_labels(rows, np.isin(combo, (1, 3))), _labels(rows, np.isin(combo, (2, 3)))) for combo in codes[hits]}


def _planted_ratio_targets(rows, plan):
    periods = len(rows[0][1])
    top = np.array([-sum(row[p] for (_, row), code in zip(rows, plan) if code in (1, 3)) for p in range(periods)])
    bottom = np.array([-sum(row[p] for (_, row), code in zip(rows, plan) if code in (2, 3)) for p in range(periods)])
    return top, bottom


@settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(balanced_statements(max_rows=8, max_periods=2, cell=9), st.data())
def test_three_way_search_matches_brute_force(rows, data):
    plan = data.draw(st.lists(st.integers(min_value=0, max_value=2), min_size=len(rows), max_size=len(rows)))
    top, bottom = _planted_ratio_targets(rows, plan)
    expected = _three_way_oracle(rows, top, bottom, clusters=3)

    algorithm = data.draw(st.sampled_from(["exhaustive", "meet_in_middle"]))
    results = three_way_partition(statement_of(rows), top, bottom,
                                  SolverOptions(max_solutions=1 << 14, algorithm=algorithm))
    assert {(tuple(r.rows_in("top")), tuple(r.rows_in("bottom"))) for r in results} == expected
    assert all(not r.double_counted for r in results)


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.filter_too_much])
@given(balanced_statements(max_rows=7, max_periods=2, cell=9), st.data())
def test_overlap_search_matches_brute_force(rows, data):
    plan = data.draw(st.lists(st.integers(min_value=0, max_value=3), min_size=len(rows), max_size=len(rows)))
    top, bottom = _planted_ratio_targets(rows, plan)
    expected = _three_way_oracle(rows, top, bottom, clusters=4)

    results = three_way_partition(statement_of(rows), top, bottom,
                                  SolverOptions(max_solutions=1 << 14, allow_overlap=True))
    assert {(tuple(r.rows_in("top")), tuple(r.rows_in("bottom"))) for r in results} == expected
    for result in results:
        assert set(result.double_counted) == set(result.rows_in("top")) & set(result.rows_in("bottom"))


def test_meet_in_the_middle_finds_a_planted_split_in_thirty_rows():
    rng = np.random.default_rng(30)
    body = rng.integers(-500, 500, size=(29, 3))
    rows = [(f"r{i}", list(map(int, row))) for i, row in enumerate(body)]
    rows.append(("balance", list(map(int, -body.sum(axis=0)))))
    planted = ["r1", "r4", "r9", "r16", "r25"]
    target = [sum(row[p] for label, row in rows if label in planted) for p in range(3)]

    results = two_way_partition(statement_of(rows), target, SolverOptions(algorithm="meet_in_middle", workers=2))
    assert results[0].solver_stats.algorithm == "meet_in_middle"
    assert planted in [included(result) for result in results]
