"""
Cell grammar for statement tables.

Accepted forms: ``80``, ``-80``, ``1,200.50``, ``(60)`` for negatives, ``-`` or an
empty cell for zero, and a ``%`` suffix for rates (``83.93%``, ``(5%)``).
"""

import re
from decimal import Decimal, InvalidOperation
from typing import Optional

from app.errors import CellParseError
from app.models import CellValue

_NUMBER = r"[+-]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d*)?|[+-]?\.\d+"
_CELL_RE = re.compile(
    rf"^(?P<open>\()?\s*(?P<number>{_NUMBER})\s*(?P<pct_in>%)?\s*(?P<close>\))?\s*(?P<pct_out>%)?$"
)
_ZERO_MARKS = {"-", "–", "—"}


def parse_cell(text: str, row: Optional[int] = None, column: Optional[int] = None) -> CellValue:
    """
    Parse one trimmed cell string.

    Args:
        text: The cell text.
        row, column: Position used in the error message.

    Returns:
        CellValue with the numeric value and whether it is a rate.

    Raises:
        CellParseError: If the text is not in the grammar.
    """
    text = (text or "").strip()
    if text == "":
        return CellValue(value=0.0, blank=True)
    if text in _ZERO_MARKS:
        return CellValue(value=0.0)

    match = _CELL_RE.match(text)
    if not match:
        raise CellParseError(text, row, column)

    negated = match.group("open") is not None
    if negated != (match.group("close") is not None):
        raise CellParseError(text, row, column)
    if match.group("pct_in") and match.group("pct_out"):
        raise CellParseError(text, row, column)

    number = match.group("number").replace(",", "")
    if negated and number[0] in "+-":
        # a sign inside brackets is ambiguous
        raise CellParseError(text, row, column)

    try:
        amount = Decimal(number)
    except InvalidOperation:
        raise CellParseError(text, row, column)

    is_rate = bool(match.group("pct_in") or match.group("pct_out"))
    if is_rate:
        amount = amount / 100
    if negated:
        amount = -amount

    return CellValue(value=float(amount), is_rate=is_rate)


def parse_number(value, row: Optional[int] = None, column: Optional[int] = None) -> float:
    """Accept a JSON number or a string in the cell grammar."""
    if isinstance(value, bool):
        raise CellParseError(str(value), row, column)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return parse_cell(value, row, column).value
    raise CellParseError(repr(value), row, column)


def _plain(value: float, decimals: Optional[int]) -> str:
    if decimals is not None:
        return f"{value:.{decimals}f}"
    if float(value).is_integer():
        return f"{value:.0f}"
    return repr(float(value))


def format_amount(value: float, blank: bool = False, zero: str = "-", decimals: Optional[int] = None) -> str:
    """
    Render a currency value in statement-table conventions: negatives in
    brackets, zero as a dash (or blank where the source cell was blank).
    """
    if value == 0:
        return "" if blank else zero
    text = _plain(abs(value), decimals)
    if decimals is not None and float(text) == 0:
        return "" if blank else zero
    return f"({text})" if value < 0 else text


def format_rate(value: Optional[float], decimals: int = 2) -> str:
    """Render a rate as a percentage, e.g. 0.8393 -> '83.93%', -0.05 -> '(5.00%)'."""
    if value is None:
        return "n/a"
    scaled = round(value * 100, decimals)
    text = f"{abs(scaled):.{decimals}f}%"
    if scaled < 0 and float(f"{abs(scaled):.{decimals}f}") != 0:
        return f"({text})"
    return text


def rate_decimals(text: str) -> int:
    """Number of decimals a reported percentage was displayed with ('89%' -> 0)."""
    digits = text.strip().strip("()").rstrip("%").strip()
    if "." not in digits:
        return 0
    return len(digits.split(".", 1)[1])
