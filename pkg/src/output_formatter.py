# src/output_formatter.py

"""
Component responsible for serializing results as JSON, JSON lines or CSV.

CSV output starts with '# key=value' lines echoing the resolved run
configuration, followed by a header row and fixed per-command columns.
"""

import csv
import io
import json
import logging
import math
import os
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)


def to_jsonable(value: Any) -> Any:
    """Recursively convert numpy scalars/arrays, Fractions and tuples to JSON types."""
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple, range)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(item) for item in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else value.numerator
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def format_json(payload: Dict[str, Any]) -> str:
    return json.dumps(to_jsonable(payload), indent=2) + "\n"


def format_json_lines(records: Iterable[Dict[str, Any]]) -> str:
    return "".join(json.dumps(to_jsonable(record), sort_keys=True) + "\n" for record in records)


def _flatten(config: Dict[str, Any], prefix: str = "") -> List[str]:
    lines = []
    for key, value in config.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            lines.extend(_flatten(value, prefix=f"{name}."))
        else:
            lines.append(f"# {name}={json.dumps(to_jsonable(value))}")
    return lines


def format_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]], config: Optional[Dict[str, Any]] = None) -> str:
    """
    Render rows under a fixed header, preceded by the configuration echo.

    Args:
        columns: Column names.
        rows: Row values, one sequence per row, in column order.
        config: Resolved run configuration to echo as comment lines.
    """
    buffer = io.StringIO()
    for line in _flatten(config or {}):
        buffer.write(line + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"Row {row!r} does not match columns {list(columns)}")
        writer.writerow([to_jsonable(item) for item in row])
    return buffer.getvalue()


def write_output(text: str, output_path: Optional[str] = None) -> None:
    """Write text to output_path (creating parent directories) or to stdout."""
    if output_path is None:
        print(text, end="")
        return
    directory = os.path.dirname(output_path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(output_path, 'w', encoding='utf-8') as f:
        f.write(text)
    logger.info(f"Output written to {output_path}")
