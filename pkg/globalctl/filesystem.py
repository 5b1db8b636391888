"""
File output: JSON documents, JSON-lines streams and CSV tables, creating
parent directories as needed. Every writer supports a dry run.
"""

import csv
import json
import logging
from pathlib import Path

logger = logging.getLogger(__name__)


def _prepare(to_file: str, dryrun: bool) -> Path:
    path = Path(to_file)
    logger.debug(f"writing {path} (dryrun={dryrun})")
    if not dryrun:
        path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_json(document, to_file: str, dryrun: bool = False) -> str:
    """
    Writes a JSON document, creating directories as needed.

    Args:
        document: JSON-compatible object
        to_file: Destination file path
        dryrun: If True, don't actually write

    Returns:
        The destination path
    """
    path = _prepare(to_file, dryrun)
    if not dryrun:
        path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    return str(path)


def write_text(text: str, to_file: str, dryrun: bool = False) -> str:
    """
    Writes pre-rendered text (for example a serialized pulse program).

    Args:
        text: File contents
        to_file: Destination file path
        dryrun: If True, don't actually write

    Returns:
        The destination path
    """
    path = _prepare(to_file, dryrun)
    if not dryrun:
        path.write_text(text, encoding="utf-8")
    return str(path)


def write_csv(
    rows: list[dict], columns: list[str], to_file: str, dryrun: bool = False
) -> str:
    """
    Writes rows as CSV with a header line in the given column order.

    Args:
        rows: One dict per row; keys outside ``columns`` are ignored
        columns: Column names, in order
        to_file: Destination file path
        dryrun: If True, don't actually write

    Returns:
        The destination path
    """
    path = _prepare(to_file, dryrun)
    if not dryrun:
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=columns, extrasaction="ignore")
            writer.writeheader()
            for row in rows:
                writer.writerow(row)
    return str(path)


def read_json(from_file: str):
    """
    Reads a JSON document.

    Args:
        from_file: Source file path

    Returns:
        Parsed document

    Raises:
        ValueError: If the file is missing or not valid JSON
    """
    path = Path(from_file)
    if not path.is_file():
        raise ValueError(f"Cannot read {from_file}: no such file")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValueError(f"Cannot parse {from_file}: {exc}") from exc


def read_text(from_file: str) -> str:
    """Reads a text file, raising ValueError if it does not exist."""
    path = Path(from_file)
    if not path.is_file():
        raise ValueError(f"Cannot read {from_file}: no such file")
    return path.read_text(encoding="utf-8")
