"""
Ingest Package - Inclusion Audit
"""

from .cells import format_amount, format_rate, parse_cell, parse_number, rate_decimals
from .manifest_parser import check_references, load_manifest, parse_manifest
from .references import RowAddress, build_addresses, resolve_reference
from .statement_parser import (
    load_statement,
    parse_row_values,
    parse_statement,
    parse_vector_file,
    read_text,
    statement_to_csv,
)

__all__ = [
    # Cells
    "parse_cell",
    "parse_number",
    "format_amount",
    "format_rate",
    "rate_decimals",
    # Statements
    "parse_statement",
    "parse_row_values",
    "parse_vector_file",
    "load_statement",
    "read_text",
    "statement_to_csv",
    # Manifests
    "parse_manifest",
    "load_manifest",
    "check_references",
    # References
    "RowAddress",
    "build_addresses",
    "resolve_reference",
]
