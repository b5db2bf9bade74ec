"""Validation and formatting utilities."""

from .validators import (
    ValidationReport,
    Violation,
    validate_chain,
    validate_partition,
    validate_coupling,
    parse_tolerance_overrides
)
from .formatters import (
    format_float,
    to_json,
    format_csv,
    format_elapsed,
    format_count,
    format_summary,
    format_error_message
)

__all__ = [
    'ValidationReport',
    'Violation',
    'validate_chain',
    'validate_partition',
    'validate_coupling',
    'parse_tolerance_overrides',
    'format_float',
    'to_json',
    'format_csv',
    'format_elapsed',
    'format_count',
    'format_summary',
    'format_error_message'
]
