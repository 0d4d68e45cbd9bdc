"""
Synthetic fixtures for Inclusion Audit.

Generates zero-sum statements with a planted partition from a seeded RNG,
injects the faults inclusion analysis is meant to expose (omission, double
counting, sign errors, timing shifts) and measures how often the designated
detector fires over many seeds.
"""

import json
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from app.errors import FixtureError, InclusionAuditError
from app.ingest.statement_parser import statement_to_csv
from app.models import (
    DetectionBenchmark,
    FaultedInstance,
    FixtureInstance,
    FixtureSpec,
    LineItem,
    SolverOptions,
    Statement,
    TargetSpec,
)
from app.services.diagnostics_service import detect_double_count, detect_shift
from app.services.inclusion_service import partition
from app.services.statement_service import zero_check

logger = logging.getLogger(__name__)

FAULT_CODES = {"none": 0, "omission": 1, "double_count": 2, "sign_error": 3, "timing_shift": 4}
DEFAULT_KIND = {"double_count": "three_way"}


# --- GENERATION ---

def _labels(rows: int) -> List[str]:
    width = len(str(rows))
    return [f"row {i + 1:0{width}d}" for i in range(rows - 1)] + ["balance"]


def _draw_values(rng: np.random.Generator, spec: FixtureSpec) -> np.ndarray:
    """Integer rows, none all zero, closed by a balancing row that is not all zero either."""
    while True:
        body = rng.integers(-spec.max_value, spec.max_value + 1, size=(spec.rows - 1, spec.periods))
        for i in range(len(body)):
            while not body[i].any():
                body[i] = rng.integers(-spec.max_value, spec.max_value + 1, size=spec.periods)
        balance = -body.sum(axis=0)
        if balance.any():
            return np.vstack([body, balance]).astype(float) * spec.value_scale


def _add_noise(rng: np.random.Generator, values: np.ndarray, spec: FixtureSpec) -> np.ndarray:
    # keeps every cluster sum within tolerance of its integer value
    bound = spec.tolerance / (4 * spec.rows)
    noisy = values.copy()
    noisy[:-1] += rng.uniform(-bound, bound, size=noisy[:-1].shape)
    noisy[-1] = [-math.fsum(noisy[:-1, p]) for p in range(spec.periods)]
    return noisy


def _plant(rng: np.random.Generator, spec: FixtureSpec, kind: str) -> Dict[int, str]:
    """Cluster of 30-60% of the rows; for three-way split between top and bottom."""
    low = max(1 if kind == "two_way" else 2, math.ceil(0.3 * spec.rows))
    high = max(low, math.floor(0.6 * spec.rows))
    size = int(rng.integers(low, high + 1))
    chosen = sorted(int(i) for i in rng.choice(spec.rows, size=size, replace=False))
    if kind == "two_way":
        return {i: "included" for i in chosen}
    cut = int(rng.integers(1, size))
    order = [int(i) for i in rng.permutation(chosen)]
    return {i: ("top" if position < cut else "bottom") for position, i in enumerate(order)}


def _statement(spec: FixtureSpec, values: np.ndarray) -> Statement:
    periods = tuple(str(2001 + p) for p in range(spec.periods))
    rows = tuple(
        LineItem(id=label, label=label, values=tuple(float(v) for v in row))
        for label, row in zip(_labels(spec.rows), values)
    )
    return Statement(corner="Year", periods=periods, rows=rows, normalized=True)


def _sum(values: np.ndarray, indices) -> Tuple[float, ...]:
    indices = list(indices)
    return tuple(math.fsum(values[i, p] for i in indices) for p in range(values.shape[1]))


def _target(kind: str, values: np.ndarray, planted: Dict[int, str], name: str = "planted") -> TargetSpec:
    if kind == "two_way":
        return TargetSpec(name=name, kind="two_way", relevant_vector=_sum(values, planted))
    top = [i for i, cluster in planted.items() if cluster in ("top", "both")]
    bottom = [i for i, cluster in planted.items() if cluster in ("bottom", "both")]
    return TargetSpec(
        name=name,
        kind="three_way",
        top_target=tuple(-v for v in _sum(values, top)),
        bottom_target=tuple(-v for v in _sum(values, bottom)),
    )


def _instance(spec: FixtureSpec, kind: str, values: np.ndarray, planted: Dict[int, str]) -> FixtureInstance:
    stmt = _statement(spec, values)
    ids = stmt.row_ids
    return FixtureInstance(
        spec=spec,
        statement=stmt,
        target=_target(kind, values, planted),
        planted={ids[i]: planted.get(i, "excluded") for i in range(len(ids))},
    )


def generate(spec: FixtureSpec) -> FixtureInstance:
    """
    Build the unfaulted instance for a spec: seeded integer rows scaled by
    `value_scale`, a final row making every period sum to zero, and targets
    computed from the planted clusters.

    Raises:
        FixtureError: Invalid spec.
    """
    kind = spec.kind
    if kind == "three_way" and spec.rows < 3:
        raise FixtureError("a three-way fixture needs at least three rows")
    rng = np.random.default_rng(spec.seed)
    values = _draw_values(rng, spec)
    if spec.noise:
        values = _add_noise(rng, values, spec)
    planted = _plant(rng, spec, kind)
    instance = _instance(spec, kind, values, planted)
    logger.debug(f"Generated fixture seed {spec.seed}: {spec.rows} rows, {len(planted)} planted")
    return instance


# --- FAULTS ---

def _values(instance: FixtureInstance) -> np.ndarray:
    return np.array([item.values for item in instance.statement.rows], dtype=float)


def _planted_indices(instance: FixtureInstance, *clusters: str) -> List[int]:
    ids = instance.statement.row_ids
    return [i for i, row_id in enumerate(ids) if instance.planted[row_id] in clusters]


def _replace_target(instance: FixtureInstance, **changes) -> FixtureInstance:
    return instance.model_copy(update={"target": instance.target.model_copy(update=changes)})


def inject_fault(instance: FixtureInstance, fault: Optional[str] = None, offset: Optional[int] = None) -> FaultedInstance:
    """
    Apply one fault to an instance and name the finding it should produce.

    omission drops a planted row from the target; double_count adds a planted
    row into both three-way targets; sign_error negates a row of the statement
    only; timing_shift moves a planted row `offset` periods (after clearing the
    periods it would shift out and rebalancing the statement, so the move is lossless).

    Raises:
        FixtureError: The fault does not apply to the instance.
    """
    spec = instance.spec
    fault = fault or spec.fault
    offset = spec.offset if offset is None else offset
    if fault == "none":
        raise FixtureError("inject_fault needs a fault other than none")
    rng = np.random.default_rng([spec.seed, FAULT_CODES[fault]])
    ids = instance.statement.row_ids
    values = _values(instance)
    kind = instance.target.kind

    if fault == "omission":
        candidates = _planted_indices(instance, "included", "top")
        k = int(rng.choice(candidates))
        if kind == "two_way":
            target = tuple(a - b for a, b in zip(instance.target.relevant_vector, values[k]))
            faulted = _replace_target(instance, relevant_vector=target)
        else:
            target = tuple(a + b for a, b in zip(instance.target.top_target, values[k]))
            faulted = _replace_target(instance, top_target=target)
        return FaultedInstance(instance=faulted, base=instance, fault=fault, row_id=ids[k],
                               expected_finding=f"row {ids[k]} is excluded")

    if fault == "double_count":
        if kind != "three_way":
            raise FixtureError("double counting needs a three-way instance")
        k = int(rng.choice(_planted_indices(instance, "top", "bottom")))
        if instance.planted[ids[k]] == "top":
            faulted = _replace_target(
                instance, bottom_target=tuple(a - b for a, b in zip(instance.target.bottom_target, values[k]))
            )
        else:
            faulted = _replace_target(
                instance, top_target=tuple(a - b for a, b in zip(instance.target.top_target, values[k]))
            )
        return FaultedInstance(instance=faulted, base=instance, fault=fault, row_id=ids[k],
                               expected_finding=f"row {ids[k]} is double counted")

    if fault == "sign_error":
        k = int(rng.integers(0, len(ids)))
        rows = list(instance.statement.rows)
        rows[k] = rows[k].with_values(-values[k])
        faulted = instance.model_copy(update={"statement": instance.statement.replace_rows(rows, normalized=False)})
        return FaultedInstance(instance=faulted, base=instance, fault=fault, row_id=ids[k],
                               expected_finding=f"zero check fails by -2 x row {ids[k]}")

    if fault == "timing_shift":
        return _timing_shift(instance, rng, offset)

    raise FixtureError(f"unknown fault {fault!r}")


def _timing_shift(instance: FixtureInstance, rng: np.random.Generator, offset: int) -> FaultedInstance:
    spec = instance.spec
    periods = spec.periods
    if offset == 0 or abs(offset) >= periods:
        raise FixtureError(f"cannot shift by {offset} in a {periods}-period statement")
    candidates = [i for i in _planted_indices(instance, "included", "top", "bottom") if i != spec.rows - 1]
    if not candidates:
        raise FixtureError("no planted row other than the balancing row to shift")
    k = int(rng.choice(candidates))

    values = _values(instance)
    edge = slice(periods - offset, periods) if offset > 0 else slice(0, -offset)
    values[k, edge] = 0.0
    if not values[k].any():
        interior = (periods - 1 - offset) if offset > 0 else -offset
        values[k, interior] = spec.value_scale * float(rng.integers(1, spec.max_value + 1))
    values[-1] = [-math.fsum(values[:-1, p]) for p in range(periods)]

    index = {row_id: i for i, row_id in enumerate(instance.statement.row_ids)}
    planted = {index[row_id]: cluster for row_id, cluster in instance.planted.items() if cluster != "excluded"}
    base = _instance(spec, instance.target.kind, values, planted)

    shifted = np.zeros(periods)
    if offset > 0:
        shifted[offset:] = values[k, :periods - offset]
    else:
        shifted[:offset] = values[k, -offset:]
    rows = list(base.statement.rows)
    rows[k] = rows[k].with_values(shifted)
    faulted = base.model_copy(update={"statement": base.statement.replace_rows(rows, normalized=False)})
    row_id = base.statement.row_ids[k]
    return FaultedInstance(
        instance=faulted, base=base, fault="timing_shift", row_id=row_id, offset=offset,
        expected_finding=f"row {row_id} shifted by {offset}",
    )


def build(spec: FixtureSpec) -> FaultedInstance:
    """generate, then inject the fault it names (a no-fault spec comes back unchanged)."""
    if spec.fault != "none" and spec.kind != DEFAULT_KIND.get(spec.fault, spec.kind):
        spec = spec.model_copy(update={"kind": DEFAULT_KIND[spec.fault]})
    instance = generate(spec)
    if spec.fault == "none":
        return FaultedInstance(instance=instance, base=instance, fault="none", row_id="", expected_finding="")
    return inject_fault(instance)


# --- DETECTION ---

def detects(faulted: FaultedInstance, opts: Optional[SolverOptions] = None) -> bool:
    """Run the designated detector for the fault and check it names the planted row."""
    opts = opts or SolverOptions(tolerance=faulted.instance.spec.tolerance)
    stmt, target = faulted.instance.statement, faulted.instance.target
    if faulted.fault == "none":
        planted = faulted.instance.planted
        wide = opts.replace(max_solutions=max(opts.max_solutions, 10_000))
        return any(result.assignment == planted for result in partition(stmt, target, wide))
    if faulted.fault == "omission":
        results = partition(stmt, target, opts)
        return bool(results) and results[0].assignment[faulted.row_id] == "excluded"
    if faulted.fault == "sign_error":
        check = zero_check(stmt, opts.tolerance)
        row = faulted.base.statement.row(faulted.row_id)
        expected = [-2 * v for v in row.values]
        return not check.passed and all(abs(a - b) <= opts.tolerance for a, b in zip(check.residuals, expected))
    if faulted.fault == "timing_shift":
        window = max(abs(faulted.offset), opts.shift_window)
        findings = detect_shift(stmt, target, window=window, opts=opts)
        return any(f.row_id == faulted.row_id and f.offset == -faulted.offset for f in findings)
    if faulted.fault == "double_count":
        result = detect_double_count(stmt, target, opts=opts)
        return result is not None and faulted.row_id in result.double_counted
    raise FixtureError(f"unknown fault {faulted.fault!r}")


def run_detection_benchmark(
    fault: str,
    count: int = 1000,
    rows: int = 12,
    periods: int = 6,
    seed0: int = 0,
    offset: int = 1,
    opts: Optional[SolverOptions] = None,
) -> DetectionBenchmark:
    """
    Detection rate of the designated detector over `count` consecutive seeds.
    Failing seeds are logged so they can be replayed one by one.
    """
    logger.info(f"--- Detection benchmark: {fault}, {count} seeds from {seed0} ---")
    detected = 0
    failing: List[int] = []
    errors: Dict[int, str] = {}
    kind = DEFAULT_KIND.get(fault, "two_way")
    for seed in range(seed0, seed0 + count):
        spec = FixtureSpec(seed=seed, rows=rows, periods=periods, kind=kind, fault=fault,
                           offset=offset if fault == "timing_shift" else 1)
        try:
            if detects(build(spec), opts):
                detected += 1
                continue
        except InclusionAuditError as e:
            errors[seed] = str(e)
        failing.append(seed)
        logger.warning(f"{fault} not detected for seed {seed}" + (f": {errors[seed]}" if seed in errors else ""))

    benchmark = DetectionBenchmark(fault=fault, count=count, detected=detected, failing_seeds=failing, errors=errors)
    logger.info(benchmark.summary())
    return benchmark


# --- FILES ---

def manifest_document(instance: FixtureInstance) -> Dict:
    target = instance.target
    if target.kind == "two_way":
        body = {"kind": "two_way", "vector": list(target.relevant_vector)}
    else:
        body = {"kind": "three_way", "top": list(target.top_target), "bottom": list(target.bottom_target)}
    return {"tolerance": instance.spec.tolerance, "target": body}


def ground_truth_document(faulted: FaultedInstance) -> Dict:
    return {
        "spec": faulted.instance.spec.model_dump(mode="json"),
        "planted": faulted.base.planted,
        "fault": faulted.fault,
        "row": faulted.row_id or None,
        "offset": faulted.offset,
        "expected_finding": faulted.expected_finding or None,
    }


def instance_files(faulted: FaultedInstance) -> Dict[str, str]:
    """statement.csv, manifest.json and truth.json contents for the `gen` command."""
    return {
        "statement.csv": statement_to_csv(faulted.instance.statement),
        "manifest.json": json.dumps(manifest_document(faulted.instance), indent=2) + "\n",
        "truth.json": json.dumps(ground_truth_document(faulted), indent=2) + "\n",
    }
