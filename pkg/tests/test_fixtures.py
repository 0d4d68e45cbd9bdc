import json

import pytest
from pydantic import ValidationError

from app.errors import FixtureError
from app.ingest import parse_manifest, parse_statement
from app.models import DetectionBenchmark, FixtureSpec
from app.services import audit_service
from app.services.fixtures_service import (
    build,
    detects,
    generate,
    inject_fault,
    instance_files,
    run_detection_benchmark,
)
from app.services.statement_service import zero_check


# --- GENERATION ---

def test_generation_is_deterministic_per_seed():
    assert generate(FixtureSpec(seed=7)) == generate(FixtureSpec(seed=7))
    assert generate(FixtureSpec(seed=7)).statement != generate(FixtureSpec(seed=8)).statement


def test_generated_statement_adds_to_zero():
    instance = generate(FixtureSpec(seed=3, rows=10, periods=4))
    stmt = instance.statement
    assert len(stmt.rows) == 10
    assert stmt.periods == ("2001", "2002", "2003", "2004")
    assert stmt.row_ids[-1] == "balance"
    assert zero_check(stmt).passed
    assert not any(item.is_zero() for item in stmt.rows)


@pytest.mark.parametrize("seed", range(5))
def test_planted_partition_is_among_the_solutions(seed):
    assert detects(build(FixtureSpec(seed=seed)))


def test_planted_three_way_partition_uses_both_sides():
    instance = generate(FixtureSpec(seed=2, rows=8, periods=3, kind="three_way"))
    clusters = set(instance.planted.values())
    assert {"top", "bottom"} <= clusters
    assert instance.target.kind == "three_way"
    assert detects(build(FixtureSpec(seed=2, rows=8, periods=3, kind="three_way")))


def test_scaled_values_stay_exact():
    instance = generate(FixtureSpec(seed=1, value_scale=1000.0))
    assert all(value % 1000 == 0 for item in instance.statement.rows for value in item.values)
    assert detects(build(FixtureSpec(seed=1, value_scale=1000.0)))


def test_noise_stays_within_tolerance():
    spec = FixtureSpec(seed=4, noise=True)
    instance = generate(spec)
    assert any(value != round(value) for item in instance.statement.rows for value in item.values)
    assert zero_check(instance.statement, spec.tolerance).passed
    assert detects(build(spec))


@pytest.mark.parametrize(
    "changes",
    [{"rows": 2}, {"periods": 0}, {"value_scale": 0}, {"fault": "timing_shift", "offset": 0}, {"colour": "red"}],
)
def test_invalid_fixture_specs(changes):
    with pytest.raises(ValidationError):
        FixtureSpec(**changes)


# --- FAULTS ---

def test_omission_drops_a_planted_row_from_the_target():
    instance = generate(FixtureSpec(seed=5))
    faulted = inject_fault(instance, "omission")
    assert instance.planted[faulted.row_id] == "included"
    row = instance.statement.row(faulted.row_id)
    expected = tuple(a - b for a, b in zip(instance.target.relevant_vector, row.values))
    assert faulted.instance.target.relevant_vector == expected
    assert faulted.expected_finding == f"row {faulted.row_id} is excluded"
    assert detects(faulted)


def test_sign_error_unbalances_the_statement():
    faulted = inject_fault(generate(FixtureSpec(seed=6)), "sign_error")
    original = faulted.base.statement.row(faulted.row_id).values
    assert faulted.instance.statement.row(faulted.row_id).values == tuple(-v for v in original)
    assert not faulted.instance.statement.normalized
    assert not zero_check(faulted.instance.statement).passed
    assert detects(faulted)


def test_timing_shift_moves_a_planted_row():
    faulted = build(FixtureSpec(seed=9, rows=8, periods=4, fault="timing_shift", offset=1))
    assert faulted.offset == 1
    assert faulted.base.planted[faulted.row_id] != "excluded"
    assert zero_check(faulted.base.statement).passed
    before = faulted.base.statement.row(faulted.row_id).values
    after = faulted.instance.statement.row(faulted.row_id).values
    assert after == (0.0,) + before[:-1]
    assert detects(faulted)


def test_double_count_is_built_on_a_three_way_instance():
    faulted = build(FixtureSpec(seed=11, rows=8, periods=3, fault="double_count"))
    assert faulted.instance.target.kind == "three_way"
    assert faulted.expected_finding == f"row {faulted.row_id} is double counted"
    with pytest.raises(FixtureError, match="three-way"):
        inject_fault(generate(FixtureSpec(seed=11)), "double_count")


def test_faults_that_cannot_apply():
    with pytest.raises(FixtureError):
        inject_fault(generate(FixtureSpec(seed=0)), "none")
    with pytest.raises(FixtureError, match="cannot shift"):
        build(FixtureSpec(periods=2, fault="timing_shift", offset=3))


# --- FILES ---

def test_instance_files_read_back_and_pass_the_audit():
    files = instance_files(build(FixtureSpec(seed=12, rows=9, periods=4)))
    raw = parse_statement(files["statement.csv"])
    manifest = parse_manifest(files["manifest.json"], table=raw)
    _, outcomes = audit_service.run_audit(raw, manifest)
    assert outcomes[0].findings == []
    truth = json.loads(files["truth.json"])
    assert truth["fault"] == "none"
    assert truth["spec"]["seed"] == 12
    assert list(truth["planted"]) == [row.label for row in raw.data_rows]


def test_faulted_files_record_the_expected_finding():
    files = instance_files(build(FixtureSpec(seed=13, fault="sign_error")))
    truth = json.loads(files["truth.json"])
    assert truth["fault"] == "sign_error"
    assert truth["expected_finding"].startswith("zero check fails by -2 x row")


# --- BENCHMARKS ---

def test_benchmark_summary():
    benchmark = DetectionBenchmark(fault="omission", count=4, detected=3, failing_seeds=[2])
    assert benchmark.rate == 0.75
    assert benchmark.summary() == "omission: detected 3/4 (75.0%); failing seeds 2"


def test_sign_errors_are_always_caught():
    benchmark = run_detection_benchmark("sign_error", count=10)
    assert benchmark.rate == 1.0
    assert benchmark.errors == {}


@pytest.mark.parametrize(
    "fault, count, rows, periods",
    [("omission", 10, 12, 6), ("timing_shift", 10, 8, 4), ("double_count", 3, 8, 4)],
)
def test_quick_detection_benchmarks(fault, count, rows, periods):
    benchmark = run_detection_benchmark(fault, count=count, rows=rows, periods=periods)
    assert benchmark.rate >= 0.9, benchmark.summary()


@pytest.mark.slow
@pytest.mark.parametrize(
    "fault, count",
    # double counting searches four clusters per row; 100 seeds keep the run in minutes
    [("omission", 1000), ("sign_error", 1000), ("timing_shift", 1000), ("double_count", 100)],
)
def test_detection_rate_over_many_seeds(fault, count):
    benchmark = run_detection_benchmark(fault, count=count, rows=12, periods=6)
    assert benchmark.count == count
    floor = 1.0 if fault in ("omission", "sign_error") else 0.99
    assert benchmark.rate >= floor, benchmark.summary()
