"""
Row addressing for statements.

Labels repeat across headings ("Total" under assets and under liabilities), so
rows are addressed by (heading path, label, ordinal). References in manifests
are ``label``, ``heading/label`` or either with a ``#n`` ordinal suffix; matching
ignores case and surrounding whitespace.
"""

from typing import Iterable, List, Sequence, Tuple

from pydantic import BaseModel

from app.errors import ManifestError
from app.models import RawRow


class RowAddress(BaseModel):
    """Where a raw record sits in the heading structure of its table."""
    id: str
    heading_path: Tuple[str, ...]
    label: str
    kind: str
    position: int  # index into RawTable.rows


def _fold(text: str) -> str:
    return " ".join(text.split()).casefold()


def build_addresses(rows: Sequence[RawRow]) -> List[RowAddress]:
    """
    Assign heading paths and stable ids to every record.

    A heading stays open until another heading at the same or a shallower
    indentation appears, or until a row sits shallower than the heading's
    first child; a row belongs to every open heading.
    """
    stack: List[List] = []  # [heading indent, label, indent of first child]
    seen = {}
    addresses = []
    for position, row in enumerate(rows):
        while stack and stack[-1][2] is not None and row.indent < stack[-1][2]:
            stack.pop()
        if row.kind == "heading":
            while stack and stack[-1][0] >= row.indent:
                stack.pop()
        if stack and stack[-1][2] is None:
            stack[-1][2] = row.indent
        path = tuple(entry[1] for entry in stack)
        if row.kind == "heading":
            stack.append([row.indent, row.label, None])

        base = "/".join(path + (row.label,))
        seen[base] = seen.get(base, 0) + 1
        row_id = base if seen[base] == 1 else f"{base}#{seen[base]}"
        addresses.append(
            RowAddress(id=row_id, heading_path=path, label=row.label, kind=row.kind, position=position)
        )
    return addresses


def _split_reference(reference: str) -> Tuple[List[str], int]:
    text = reference.strip()
    ordinal = 0
    if "#" in text:
        head, _, tail = text.rpartition("#")
        if tail.strip().isdigit():
            text, ordinal = head, int(tail)
            if ordinal < 1:
                raise ManifestError(f"row reference {reference!r} has an invalid ordinal")
    parts = [_fold(part) for part in text.split("/") if part.strip()]
    if not parts:
        raise ManifestError(f"empty row reference {reference!r}")
    return parts, ordinal


def resolve_reference(reference: str, addresses: Iterable[RowAddress], kinds=("data",)) -> RowAddress:
    """
    Find the single row a manifest reference names.

    Raises:
        ManifestError: If nothing matches or the reference is ambiguous.
    """
    parts, ordinal = _split_reference(reference)
    matches = []
    for address in addresses:
        if address.kind not in kinds:
            continue
        full = [_fold(part) for part in address.heading_path + (address.label,)]
        if full[-len(parts):] == parts and len(parts) <= len(full):
            matches.append(address)

    if ordinal:
        if ordinal > len(matches):
            raise ManifestError(f"row reference {reference!r} does not resolve ({len(matches)} matches)")
        return matches[ordinal - 1]
    if not matches:
        raise ManifestError(f"row reference {reference!r} names no row of the statement")
    if len(matches) > 1:
        candidates = ", ".join(match.id for match in matches)
        raise ManifestError(f"row reference {reference!r} is ambiguous: {candidates}")
    return matches[0]
