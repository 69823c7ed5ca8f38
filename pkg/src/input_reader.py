# src/input_reader.py

"""
Component responsible for reading path files.

Accepted layouts:
  - one positive integer per line, with optional '#' comment lines and an
    optional 'x' header line (the CSV written by `simulate`, whose
    '# result.origin_included=true' line marks the first value as x_0);
  - a JSON array of integers;
  - a JSON object carrying the path under "path" or "result.path" (the JSON
    written by `simulate`), optionally with "origin_included".
"""

import json
import logging
import os
from typing import Any, List, Optional

from .branching import Path
from .exceptions import PathFileError

logger = logging.getLogger(__name__)

CSV_HEADER = "x"
ORIGIN_ECHO = "# result.origin_included="


def read_file_content(file_path: str) -> str:
    """
    Reads and returns the content of a text file.

    Args:
        file_path: The absolute or relative path to the input text file.

    Returns:
        The content of the file as a string.

    Raises:
        PathFileError: If the file does not exist, is not a file or is not UTF-8 text.
    """
    if not os.path.exists(file_path):
        raise PathFileError(f"Path file not found: {file_path}")
    if not os.path.isfile(file_path):
        raise PathFileError(f"Path file is not a file: {file_path}")

    try:
        with open(file_path, 'r', encoding='utf-8') as f:
            return f.read()
    except UnicodeDecodeError as e:
        raise PathFileError(f"Error decoding file {file_path} as UTF-8: {e}") from e
    except OSError as e:
        raise PathFileError(f"Could not read file {file_path}: {e}") from e


def _positive_int(value: Any, line_number: Optional[int], where: str) -> int:
    if isinstance(value, bool):
        raise PathFileError(f"{where}: expected a positive integer, got {value!r}", line_number)
    if isinstance(value, str):
        try:
            value = int(value.strip())
        except ValueError:
            raise PathFileError(f"{where}: expected a positive integer, got {value.strip()!r}", line_number) from None
    if not isinstance(value, int):
        raise PathFileError(f"{where}: expected a positive integer, got {value!r}", line_number)
    if value < 1:
        raise PathFileError(f"{where}: population must be >= 1, got {value}", line_number)
    return value


def _parse_json(text: str, drop_origin: bool) -> Path:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise PathFileError(f"Invalid JSON: {e.msg}", e.lineno) from e

    origin_included = drop_origin
    if isinstance(payload, dict):
        container = payload.get('result', payload)
        if not isinstance(container, dict) or 'path' not in container:
            raise PathFileError("JSON object carries no 'path' entry")
        origin_included = bool(container.get('origin_included', drop_origin))
        payload = container['path']
    if not isinstance(payload, list):
        raise PathFileError("JSON path must be an array of integers")

    values = [_positive_int(item, None, f"entry {index}") for index, item in enumerate(payload)]
    return Path(tuple(values), origin_included=origin_included)


def _parse_lines(text: str, drop_origin: bool) -> Path:
    values: List[int] = []
    origin_included = drop_origin
    header_allowed = True
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if line.startswith(ORIGIN_ECHO):
            flag = line[len(ORIGIN_ECHO):].strip().lower()
            if flag not in ("true", "false"):
                raise PathFileError(f"origin_included must be true or false, got {flag!r}", line_number)
            origin_included = drop_origin or flag == "true"
            continue
        if not line or line.startswith('#'):
            continue
        if header_allowed and line.lower() == CSV_HEADER:
            header_allowed = False
            continue
        header_allowed = False
        values.append(_positive_int(line, line_number, "path value"))
    return Path(tuple(values), origin_included=origin_included)


def parse_path_text(text: str, drop_origin: bool = False) -> Path:
    """
    Parse path text in any accepted layout.

    Args:
        text: File content.
        drop_origin: Whether the first value is the hidden origin x_0.

    Raises:
        PathFileError: On malformed content, naming the offending line.
    """
    stripped = text.lstrip()
    if stripped.startswith('[') or stripped.startswith('{'):
        path = _parse_json(text, drop_origin)
    else:
        path = _parse_lines(text, drop_origin)
    if not path.values:
        raise PathFileError("Path file contains no values")
    return path


def read_path_file(file_path: str, drop_origin: bool = False) -> Path:
    """Read and parse a path file."""
    path = parse_path_text(read_file_content(file_path), drop_origin)
    logger.info(f"Read {len(path)} values from {file_path} (origin_included={path.origin_included})")
    return path
