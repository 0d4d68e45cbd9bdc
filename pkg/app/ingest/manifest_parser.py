"""
Manifest ingestion for Inclusion Audit.

A manifest is a JSON object recording the manual preparation steps of an
analysis: which rows to invert, which row is the bottom line, which footings
and headings to drop, and the target the model claims to have used.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import ValidationError

from app.errors import InclusionAuditError, ManifestError
from app.ingest.cells import parse_number
from app.ingest.references import build_addresses, resolve_reference
from app.ingest.statement_parser import parse_vector_file
from app.models import Manifest, RawTable, SolverOptions, TargetSpec

logger = logging.getLogger(__name__)

MANIFEST_KEYS = {"invert_rows", "bottom_line", "drop_rows", "target", "targets", "tolerance", "options"}
TARGET_KEYS = {
    "name", "kind", "rows", "row", "vector", "file", "top", "bottom", "reported", "metric",
    "ratio", "metric_tolerance", "guess", "top_name", "bottom_name", "label",
}


def _string_list(value: Any, key: str) -> List[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [value]
    if not isinstance(value, list) or not all(isinstance(item, str) for item in value):
        raise ManifestError(f"'{key}' must be a list of row labels")
    return list(value)


def _vector(value: Any, key: str) -> List[float]:
    items = value if isinstance(value, list) else [value]
    try:
        return [parse_number(item, column=index + 1) for index, item in enumerate(items)]
    except InclusionAuditError as e:
        raise ManifestError(f"target '{key}': {e}")


def _parse_target(data: Any, base_dir: Optional[Path]) -> TargetSpec:
    if not isinstance(data, dict):
        raise ManifestError("'target' must be an object")
    unknown = sorted(set(data) - TARGET_KEYS)
    if unknown:
        raise ManifestError(f"unknown target keys: {', '.join(unknown)}")

    kind = data.get("kind") or ("three_way" if "top" in data or "bottom" in data else "two_way")
    fields: Dict[str, Any] = {"kind": kind}

    sources = [key for key in ("rows", "row", "vector", "file") if key in data]
    if len(sources) > 1:
        raise ManifestError(f"target takes one of rows, vector or file, not {', '.join(sources)}")
    if "rows" in data or "row" in data:
        fields["source_rows"] = tuple(_string_list(data.get("rows", data.get("row")), "rows"))
    elif "vector" in data:
        fields["relevant_vector"] = tuple(_vector(data["vector"], "vector"))
    elif "file" in data:
        path = Path(data["file"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        try:
            fields["relevant_vector"] = tuple(parse_vector_file(path))
        except OSError as e:
            raise ManifestError(f"target file {path}: {e.strerror or e}")

    if "top" in data:
        fields["top_target"] = tuple(_vector(data["top"], "top"))
    if "bottom" in data:
        fields["bottom_target"] = tuple(_vector(data["bottom"], "bottom"))
    if data.get("reported") is not None:
        fields["reported_metric"] = _vector(data["reported"], "reported")[0]
    if data.get("metric") is not None:
        fields["metric_kind"] = data["metric"]
    if data.get("ratio") is not None:
        fields["ratio_definition"] = data["ratio"]
    if data.get("label") is not None:
        fields["metric_label"] = data["label"]
    for key in ("name", "metric_tolerance", "guess", "top_name", "bottom_name"):
        if data.get(key) is not None:
            fields[key] = data[key]

    try:
        return TargetSpec(**fields)
    except ValidationError as e:
        raise ManifestError(f"invalid target: {e.errors()[0]['msg']}")


def parse_manifest(
    manifest_text: str,
    table: Optional[RawTable] = None,
    base_dir: Optional[Union[str, Path]] = None,
) -> Manifest:
    """
    Parse and validate a manifest document.

    Args:
        manifest_text: JSON text; an empty document yields the defaults.
        table: When given, every row reference is checked against it.
        base_dir: Directory that relative target files are resolved against.

    Raises:
        ManifestError: Malformed JSON, unknown keys, non-positive tolerance,
            or references that do not resolve uniquely.
    """
    text = (manifest_text or "").strip()
    try:
        data = json.loads(text) if text else {}
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest is not valid JSON (line {e.lineno}, column {e.colno}): {e.msg}")
    if not isinstance(data, dict):
        raise ManifestError("manifest must be a JSON object")

    unknown = sorted(set(data) - MANIFEST_KEYS)
    if unknown:
        raise ManifestError(f"unknown manifest keys: {', '.join(unknown)}")

    base = Path(base_dir) if base_dir is not None else None
    fields: Dict[str, Any] = {
        "invert_rows": tuple(_string_list(data.get("invert_rows"), "invert_rows")),
        "drop_rows": tuple(_string_list(data.get("drop_rows"), "drop_rows")),
    }
    bottom_line = data.get("bottom_line")
    if bottom_line is not None and not isinstance(bottom_line, str):
        raise ManifestError("'bottom_line' must be a row label or null")
    fields["bottom_line"] = bottom_line

    if "tolerance" in data:
        tolerance = data["tolerance"]
        if isinstance(tolerance, bool) or not isinstance(tolerance, (int, float)) or tolerance <= 0:
            raise ManifestError(f"tolerance must be a positive number, got {tolerance!r}")
        fields["tolerance"] = float(tolerance)

    if data.get("target") is not None:
        fields["target"] = _parse_target(data["target"], base)
    if data.get("targets") is not None:
        if not isinstance(data["targets"], list):
            raise ManifestError("'targets' must be a list of target objects")
        fields["targets"] = tuple(_parse_target(item, base) for item in data["targets"])

    options = data.get("options") or {}
    if not isinstance(options, dict):
        raise ManifestError("'options' must be an object")
    try:
        fields["options"] = SolverOptions(**options)
    except ValidationError as e:
        error = e.errors()[0]
        location = ".".join(str(part) for part in error["loc"])
        raise ManifestError(f"invalid option {location}: {error['msg']}")

    manifest = Manifest(**fields)
    if table is not None:
        check_references(manifest, table)

    logger.debug(
        f"Manifest: {len(manifest.invert_rows)} inversions, bottom line {manifest.bottom_line!r}, "
        f"{len(manifest.all_targets)} targets"
    )
    return manifest


def check_references(manifest: Manifest, table: RawTable) -> None:
    """Every reference must name exactly one row of the table."""
    addresses = build_addresses(table.rows)
    for reference in manifest.invert_rows:
        resolve_reference(reference, addresses)
    if manifest.bottom_line is not None:
        resolve_reference(manifest.bottom_line, addresses)
    for reference in manifest.drop_rows:
        resolve_reference(reference, addresses, kinds=("data", "heading", "metric"))
    for target in manifest.all_targets:
        for reference in target.source_rows:
            resolve_reference(reference, addresses)


def load_manifest(path: Union[str, Path], table: Optional[RawTable] = None) -> Manifest:
    path = Path(path)
    try:
        return parse_manifest(path.read_text(encoding="utf-8-sig"), table=table, base_dir=path.parent)
    except ManifestError as e:
        raise ManifestError(f"{path}: {e}")
