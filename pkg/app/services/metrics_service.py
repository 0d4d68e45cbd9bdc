"""
Metric recalculation for Inclusion Audit.

Periodic NPV/IRR in the common spreadsheet convention (period 0 undiscounted,
default guess 10%) and ratio values from their components, plus the
"calculated from above / reported below / discrepancy" check.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from app.config import Config
from app.errors import ConvergenceError, InclusionAuditError, RatioError, UndefinedIRRError
from app.models import IRRSolution, MetricVerification, RatioComponents

logger = logging.getLogger(__name__)

RATE_FLOOR = -0.999999
RATE_CEILING = 1e6


# --- NPV / IRR ---

def npv(rate: float, flows: Sequence[float]) -> float:
    """
    Net present value, sum of flows[k] / (1 + rate) ** k with k from 0.

    Raises:
        InclusionAuditError: If rate <= -1.
    """
    if rate <= -1:
        raise InclusionAuditError(f"rate must be greater than -1, got {rate}")
    factor = 1.0 + rate
    return math.fsum(flow / factor ** k for k, flow in enumerate(flows))


def _npv_array(rates: np.ndarray, flows: np.ndarray) -> np.ndarray:
    exponents = np.arange(len(flows))
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        discount = (1.0 + rates[:, None]) ** exponents[None, :]
        return (flows[None, :] / discount).sum(axis=1)


def sign_changes(flows: Sequence[float]) -> int:
    signs = [1 if flow > 0 else -1 for flow in flows if flow != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def _scan_points(guess: float) -> np.ndarray:
    """Rates spreading out from the guess towards both ends of the admissible range."""
    below = [-1.0 + (1.0 + guess) * 0.5 ** k for k in range(1, 80)]
    above = [guess + 0.01 * 2.0 ** k for k in range(0, 80)]
    points = [RATE_FLOOR, guess, RATE_CEILING]
    points += [r for r in below if r > RATE_FLOOR]
    points += [r for r in above if r < RATE_CEILING]
    return np.unique(np.array(points, dtype=float))


def _brackets(flows: np.ndarray, guess: float) -> List[Tuple[float, float]]:
    points = _scan_points(guess)
    values = _npv_array(points, flows)
    found = []
    for (a, fa), (b, fb) in zip(zip(points, values), zip(points[1:], values[1:])):
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        if fa == 0:
            found.append((a, a))
        elif fa * fb < 0:
            found.append((a, b))
    if np.isfinite(values[-1]) and values[-1] == 0:
        found.append((points[-1], points[-1]))

    def distance(bracket):
        a, b = bracket
        return 0.0 if a <= guess <= b else min(abs(a - guess), abs(b - guess))

    return sorted(found, key=lambda bracket: (distance(bracket), bracket[0]))


def solve_irr(flows: Sequence[float], guess: float = 0.10) -> IRRSolution:
    """
    Internal rate of return, found by bracketing outward from `guess` and
    refining with Brent's method inside the nearest bracket.

    Raises:
        UndefinedIRRError: The flows never change sign.
        ConvergenceError: No root in (-0.999999, 1e6).
    """
    values = np.asarray(list(flows), dtype=float)
    changes = sign_changes(values)
    if len(values) < 2 or changes == 0:
        raise UndefinedIRRError("IRR is undefined: the cash flow has no sign change")
    if not RATE_FLOOR < guess < RATE_CEILING:
        raise InclusionAuditError(f"IRR guess {guess} is outside ({RATE_FLOOR}, {RATE_CEILING})")

    brackets = _brackets(values, guess)
    if not brackets:
        raise ConvergenceError("IRR did not converge: no root between -99.9999% and 1e8%")

    a, b = brackets[0]
    if a == b:
        rate = float(a)
    else:
        rate = float(brentq(lambda r: npv(r, values), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500))

    scale = float(np.max(np.abs(values)))
    residual = npv(rate, values)
    if abs(residual) > 1e-9 * scale:
        raise ConvergenceError(f"IRR did not converge: residual {residual:g} at rate {rate:g}")

    solution = IRRSolution(
        rate=rate,
        sign_changes=changes,
        possibly_non_unique=changes > 1 or len(brackets) > 1,
        npv_residual=residual,
    )
    if solution.possibly_non_unique:
        logger.warning(
            f"IRR {rate:.6f} may not be unique: {changes} sign changes, {len(brackets)} brackets; "
            "returning the root nearest the guess"
        )
    return solution


def irr(flows: Sequence[float], guess: float = 0.10) -> float:
    """Rate r with npv(r, flows) == 0; see solve_irr for the details."""
    return solve_irr(flows, guess).rate


# --- RATIOS ---

def ratio_value(components: RatioComponents) -> float:
    """A/(A+B) for `share`, A/B for `cover`."""
    top, extra = components.top, components.bottom_extra
    if components.definition == "share":
        denominator = top + extra
    elif components.definition == "cover":
        denominator = extra
    else:
        raise RatioError(f"unknown ratio definition {components.definition!r}")
    if denominator == 0:
        raise RatioError("ratio has a zero denominator")
    return top / denominator


# --- VERIFICATION ---

def verify_metric(
    recalculated: Optional[float],
    reported: Optional[float],
    tol: Optional[float] = None,
    kind: str = "irr",
) -> MetricVerification:
    """
    Compare a recalculated metric with the figure the model reports.

    The default tolerance follows the display precision of the reported figure:
    0.00005 for two-decimal percentages (IRRs), 0.005 for integer percentages (ratios).
    """
    if tol is None:
        tol = Config.RATE_TOLERANCE if kind == "irr" else Config.RATIO_TOLERANCE
    if recalculated is None or reported is None:
        missing = "recalculated" if recalculated is None else "reported"
        return MetricVerification(
            kind=kind, recalculated=recalculated, reported=reported, tolerance=tol, passed=False,
            note=f"no {missing} figure to compare",
        )

    discrepancy = recalculated - reported
    passed = abs(discrepancy) <= tol * (1 + 1e-9)
    return MetricVerification(
        kind=kind,
        recalculated=recalculated,
        reported=reported,
        discrepancy=discrepancy,
        tolerance=tol,
        passed=passed,
    )
