"""
Assignment search for inclusion analysis.

Every row picks one of a few choices (excluded, included; or excluded, top,
bottom and, with overlap, both). Each choice contributes a vector; a solution
is an assignment whose contributions add up to the target within tolerance in
every coordinate. Rows are split in two halves whose partial sums are
enumerated with numpy and then combined, either against every partner
(exhaustive) or through a sorted pivot coordinate (meet in the middle).
Candidates are re-verified with math.fsum on the original values, and the
solution list is sorted canonically so the output never depends on scheduling.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from app.config import Config

logger = logging.getLogger(__name__)

# elements per broadcast block, bounds memory of the exhaustive comparison
_BLOCK_ELEMENTS = 1 << 22

Codes = Tuple[int, ...]


@dataclass
class SearchOutcome:
    solutions: List[Codes]
    algorithm: str
    nodes_explored: int = 0
    solutions_found: int = 0
    truncated: bool = False


@dataclass
class ClosestOutcome:
    codes: Codes
    norm: float
    algorithm: str
    nodes_explored: int = 0
    ties: List[Codes] = field(default_factory=list)


# --- ORDERING ---

def preference_key(codes: Codes, ordering: str = "fewest_rows"):
    """
    fewest_rows: fewer non-excluded rows first, then the code vector in
    statement order (at the first differing row, leaving it excluded wins).
    statement_order: the code vector alone.
    """
    if ordering == "statement_order":
        return tuple(codes)
    return (sum(1 for code in codes if code), tuple(codes))


# --- ENUMERATION ---

def assignment_count(choices: Sequence[np.ndarray]) -> int:
    return math.prod(len(options) for options in choices)


def enumerate_half(choices: Sequence[np.ndarray], dims: int) -> Tuple[np.ndarray, np.ndarray]:
    """All partial sums of a block of rows, with the choice code of each row."""
    sums = np.zeros((1, dims), dtype=float)
    codes = np.zeros((1, 0), dtype=np.int8)
    for options in choices:
        count = len(options)
        sums = (sums[:, None, :] + options[None, :, :]).reshape(-1, dims)
        codes = np.concatenate(
            [np.repeat(codes, count, axis=0), np.tile(np.arange(count, dtype=np.int8), len(codes))[:, None]],
            axis=1,
        )
    return sums, codes


def _split(n: int, choices: Sequence[np.ndarray]) -> int:
    """Split point that balances the assignment counts of the two halves."""
    best, best_gap = n // 2, None
    total = math.log(max(assignment_count(choices), 1))
    running = 0.0
    for index in range(n + 1):
        gap = abs(2 * running - total)
        if best_gap is None or gap < best_gap:
            best, best_gap = index, gap
        if index < n:
            running += math.log(len(choices[index]))
    return best


def _exact_ok(codes: Codes, choices: Sequence[np.ndarray], target: np.ndarray, tolerance: float) -> bool:
    for dim in range(len(target)):
        total = math.fsum(choices[row][code][dim] for row, code in enumerate(codes) if code)
        if abs(total - target[dim]) > tolerance:
            return False
    return True


def _slack(choices: Sequence[np.ndarray], target: np.ndarray, tolerance: float) -> float:
    scale = max([float(np.abs(options).max()) for options in choices if options.size] + [float(np.abs(target).max(initial=0.0)), 1.0])
    return tolerance + 1e-9 * scale * max(len(choices), 1)


# --- EXACT SEARCH ---

def _exhaustive_block(left_sums, left_codes, right_sums, right_codes, target, slack):
    residual = target[None, :] - left_sums
    hits = np.all(np.abs(right_sums[None, :, :] - residual[:, None, :]) <= slack, axis=2)
    li, ri = np.nonzero(hits)
    return [tuple(left_codes[a].tolist() + right_codes[b].tolist()) for a, b in zip(li, ri)]


def _mitm_block(left_sums, left_codes, right_sorted, right_codes_sorted, pivot_sorted, pivot, target, slack):
    residual = target[None, :] - left_sums
    lo = np.searchsorted(pivot_sorted, residual[:, pivot] - slack, side="left")
    hi = np.searchsorted(pivot_sorted, residual[:, pivot] + slack, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return [], 0
    left_index = np.repeat(np.arange(len(left_sums)), counts)
    starts = np.repeat(lo - (np.cumsum(counts) - counts), counts)
    right_index = starts + np.arange(total)
    ok = np.all(np.abs(right_sorted[right_index] - residual[left_index]) <= slack, axis=1)
    matches = [
        tuple(left_codes[a].tolist() + right_codes_sorted[b].tolist())
        for a, b in zip(left_index[ok], right_index[ok])
    ]
    return matches, total


def _run_blocks(task: Callable, blocks: List[slice], workers: int):
    if workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(task, blocks))
    return [task(block) for block in blocks]


def _blocks(total: int, per_block: int) -> List[slice]:
    per_block = max(1, per_block)
    return [slice(start, min(start + per_block, total)) for start in range(0, total, per_block)]


def choose_algorithm(choices: Sequence[np.ndarray], algorithm: str = "auto") -> str:
    if algorithm != "auto":
        return algorithm
    return "exhaustive" if assignment_count(choices) <= Config.EXHAUSTIVE_LIMIT else "meet_in_middle"


def search(
    choices: Sequence[np.ndarray],
    target: Sequence[float],
    tolerance: float,
    max_solutions: int,
    algorithm: str = "auto",
    workers: int = 1,
    ordering: str = "fewest_rows",
    cap: Optional[int] = None,
) -> SearchOutcome:
    """
    Find every assignment whose contributions hit `target` within `tolerance`.

    Args:
        choices: Per row, an array (options x dims); option 0 must be the zero vector.
        target: Vector of length dims.
        tolerance: Absolute tolerance per coordinate.
        max_solutions: Number of solutions kept after canonical sorting.
        algorithm: auto, exhaustive or meet_in_middle (same solution set).
        workers: Threads evaluating disjoint blocks of the left half.
        ordering: Preference rule, see preference_key.
        cap: Matches collected before sorting; reaching it truncates the search.
    """
    target = np.asarray(target, dtype=float)
    dims = len(target)
    n = len(choices)
    cap = cap or Config.SOLUTION_CAP
    algorithm = choose_algorithm(choices, algorithm)
    slack = _slack(choices, target, tolerance)

    split = _split(n, choices)
    left_sums, left_codes = enumerate_half(choices[:split], dims)
    right_sums, right_codes = enumerate_half(choices[split:], dims)

    if algorithm == "exhaustive":
        per_block = _BLOCK_ELEMENTS // max(1, len(right_sums) * max(dims, 1))

        def task(block):
            return _exhaustive_block(left_sums[block], left_codes[block], right_sums, right_codes, target, slack), 0

        nodes = len(left_sums) * len(right_sums)
    else:
        if dims:
            spread = [len(np.unique(right_sums[:, d])) for d in range(dims)]
            pivot = int(np.argmax(spread))
        else:
            pivot = 0
        if dims == 0:
            right_sums = np.zeros((len(right_codes), 1))
            left_sums = np.zeros((len(left_codes), 1))
            target = np.zeros(1)
        order = np.argsort(right_sums[:, pivot], kind="stable")
        right_sorted, right_codes_sorted = right_sums[order], right_codes[order]
        pivot_sorted = right_sorted[:, pivot]
        per_block = max(1, _BLOCK_ELEMENTS // 64)

        def task(block):
            return _mitm_block(
                left_sums[block], left_codes[block], right_sorted, right_codes_sorted, pivot_sorted, pivot, target, slack
            )

        nodes = len(left_sums) + len(right_sums)

    found: List[Codes] = []
    truncated = False
    for matches, candidates in _run_blocks(task, _blocks(len(left_sums), per_block), workers):
        nodes += candidates
        for codes in matches:
            if _exact_ok(codes, choices, target, tolerance):
                found.append(codes)
        if len(found) >= cap:
            truncated = True
            logger.warning(f"Search stopped after collecting {cap} matches; results are truncated")
            break

    found = sorted(set(found), key=lambda codes: preference_key(codes, ordering))
    logger.debug(f"{algorithm} search over {n} rows: {len(found)} solutions, {nodes} nodes")
    return SearchOutcome(
        solutions=found[:max_solutions],
        algorithm=algorithm,
        nodes_explored=nodes,
        solutions_found=len(found),
        truncated=truncated,
    )


# --- CLOSEST SEARCH ---

def residual_norm(residual: np.ndarray, norm: str) -> np.ndarray:
    if norm == "l1":
        return np.abs(residual).sum(axis=-1)
    return np.abs(residual).max(axis=-1, initial=0.0)


def exact_norm(codes: Codes, choices: Sequence[np.ndarray], target: np.ndarray, norm: str) -> Tuple[float, Tuple[float, ...]]:
    """Residual target - contributions computed with fsum, and its norm."""
    residual = tuple(
        float(target[dim]) - math.fsum(choices[row][code][dim] for row, code in enumerate(codes) if code)
        for dim in range(len(target))
    )
    values = [abs(r) for r in residual]
    value = math.fsum(values) if norm == "l1" else max(values, default=0.0)
    return value, residual


def closest(
    choices: Sequence[np.ndarray],
    target: Sequence[float],
    norm: str = "max",
    algorithm: str = "auto",
    ordering: str = "fewest_rows",
    neighbours: int = 16,
) -> ClosestOutcome:
    """
    The assignment whose contributions come nearest to `target` under `norm`.

    Exhaustive enumeration is exact. Meet in the middle only pairs each left
    partial sum with the `neighbours` right sums nearest on the pivot
    coordinate, so its optimum is over that explored space.
    """
    target = np.asarray(target, dtype=float)
    dims = len(target)
    n = len(choices)
    algorithm = choose_algorithm(choices, algorithm)

    split = _split(n, choices)
    left_sums, left_codes = enumerate_half(choices[:split], dims)
    right_sums, right_codes = enumerate_half(choices[split:], dims)

    candidates: List[Tuple[float, Codes]] = []
    nodes = 0
    if algorithm == "exhaustive" or dims == 0:
        per_block = max(1, _BLOCK_ELEMENTS // max(1, len(right_sums) * max(dims, 1)))
        for block in _blocks(len(left_sums), per_block):
            residual = target[None, None, :] - left_sums[block][:, None, :] - right_sums[None, :, :]
            norms = residual_norm(residual, norm)
            best = norms.min()
            li, ri = np.nonzero(norms <= best + 1e-9 * max(1.0, best))
            candidates += [
                (float(norms[a, b]), tuple(left_codes[block][a].tolist() + right_codes[b].tolist()))
                for a, b in zip(li, ri)
            ]
            nodes += norms.size
    else:
        spread = [len(np.unique(right_sums[:, d])) for d in range(dims)]
        pivot = int(np.argmax(spread))
        order = np.argsort(right_sums[:, pivot], kind="stable")
        right_sorted, right_codes_sorted = right_sums[order], right_codes[order]
        wanted = target[None, :] - left_sums
        centre = np.searchsorted(right_sorted[:, pivot], wanted[:, pivot])
        offsets = np.arange(-neighbours, neighbours)
        index = np.clip(centre[:, None] + offsets[None, :], 0, len(right_sorted) - 1)
        residual = wanted[:, None, :] - right_sorted[index]
        norms = residual_norm(residual, norm)
        best = norms.min()
        li, ki = np.nonzero(norms <= best + 1e-9 * max(1.0, best))
        candidates = [
            (float(norms[a, k]), tuple(left_codes[a].tolist() + right_codes_sorted[index[a, k]].tolist()))
            for a, k in zip(li, ki)
        ]
        nodes = norms.size

    # re-rank the near-optimal candidates on exact residuals
    scored = []
    for _, codes in set(candidates):
        value, _ = exact_norm(codes, choices, target, norm)
        scored.append((value, codes))
    best_value = min(value for value, _ in scored)
    ties = sorted(
        (codes for value, codes in scored if value <= best_value + 1e-12 * max(1.0, best_value)),
        key=lambda codes: preference_key(codes, ordering),
    )
    return ClosestOutcome(codes=ties[0], norm=best_value, algorithm=algorithm, nodes_explored=nodes, ties=ties)
