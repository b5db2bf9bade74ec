"""Formatting utilities: deterministic JSON, CSV lines and human-readable summaries."""

import datetime
import json
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import humanize
import numpy as np


def format_float(value: float) -> str:
    """
    Format a float with 17 significant digits.

    Args:
        value: Number to format

    Returns:
        Shortest round-trip-safe text, or "inf", "-inf", "nan"
    """
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    text = format(value, ".17g")
    if text == "-0":
        return "0"
    return text


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    if isinstance(obj, Enum):
        obj = obj.value
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        text = format_float(obj)
        return json.dumps(text) if text in ("inf", "-inf", "nan") else text
    if isinstance(obj, (str, Path)):
        return json.dumps(str(obj))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = sorted(((str(k), v) for k, v in obj.items()), key=lambda kv: kv[0])
        body = ",\n".join(f"{pad}{json.dumps(k)}: {_encode(v, indent, level + 1)}" for k, v in items)
        return "{\n" + body + "\n" + close + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple, set, frozenset)):
        values = sorted(obj) if isinstance(obj, (set, frozenset)) else list(obj)
        if not values:
            return "[]"
        body = ",\n".join(f"{pad}{_encode(v, indent, level + 1)}" for v in values)
        return "[\n" + body + "\n" + close + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(obj: Any, indent: int = 2) -> str:
    """
    Serialize to JSON with sorted keys and 17 significant digits.

    Infinite values become the string "inf"; numpy scalars and arrays and
    objects with ``to_dict`` are accepted. Identical inputs give identical bytes.
    """
    return _encode(obj, indent, 0) + "\n"


def format_csv(header: Sequence[str], rows: Iterable[Sequence[float]],
               footer: Optional[List[str]] = None) -> str:
    """
    Format numeric rows as CSV, followed by ``#``-prefixed footer lines.

    Args:
        header: Column names
        rows: Numeric rows
        footer: Trailing comment lines (without the leading "# ")

    Returns:
        CSV text ending with a newline
    """
    lines = [",".join(header)]
    lines.extend(",".join(format_float(v) for v in row) for row in rows)
    lines.extend(f"# {line}" for line in (footer or []))
    return "\n".join(lines) + "\n"


def format_elapsed(seconds: float) -> str:
    """Human-readable duration, e.g. "1 second and 250 milliseconds"."""
    return humanize.precisedelta(datetime.timedelta(seconds=seconds),
                                 minimum_unit="milliseconds", format="%0.0f")


def format_count(count: int) -> str:
    """Integer with thousands separators."""
    return humanize.intcomma(int(count))


def format_summary(title: str, values: Dict[str, Any]) -> str:
    """
    Format a one-line summary for log output.

    Args:
        title: Leading label
        values: Named values; floats are shortened to 6 significant digits

    Returns:
        Summary line
    """
    parts = []
    for key, value in values.items():
        if isinstance(value, (float, np.floating)):
            value = "inf" if math.isinf(value) else f"{float(value):.6g}"
        elif isinstance(value, (int, np.integer)) and not isinstance(value, bool):
            value = format_count(value)
        parts.append(f"{key}={value}")
    return f"{title}: " + ", ".join(parts)


def format_error_message(message: str) -> str:
    """Format an error message for stderr."""
    return f"error: {message}"
