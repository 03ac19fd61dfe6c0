import csv
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence

import numpy as np

from TrajCert.application.models.errors import ArtifactError

# Configure logging
logger = logging.getLogger(__name__)


def format_number(value: Any) -> str:
    """
    Render one CSV cell.

    Floats use repr (shortest string that parses back to the same double), missing or
    non-finite NaN values become "nan", bools become 0/1.
    """
    if value is None:
        return "nan"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        return repr(value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> int:
    """
    Write a header and rows with LF line endings.

    Returns:
        Number of data rows written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            if len(row) != len(header):
                raise ArtifactError(f"row {count} has {len(row)} cells, header has {len(header)}", path)
            writer.writerow([format_number(v) for v in row])
            count += 1
    logger.debug(f"Wrote {count} rows to {path}")
    return count


def read_csv(path: Path, expected_header: Sequence[str] = None) -> List[Dict[str, str]]:
    """
    Read a CSV file into dict rows.

    Raises:
        ArtifactError: If the file is missing, empty, ragged or its header differs from expected_header
    """
    path = Path(path)
    if not path.is_file():
        raise ArtifactError("missing file", path)
    try:
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None:
                raise ArtifactError("empty file", path)
            if expected_header is not None and list(header) != list(expected_header):
                raise ArtifactError(f"unexpected header {header}, expected {list(expected_header)}", path)
            rows = []
            for line_no, cells in enumerate(reader, start=2):
                if len(cells) != len(header):
                    raise ArtifactError(f"line {line_no} has {len(cells)} cells, header has {len(header)}", path)
                rows.append(dict(zip(header, cells)))
    except (OSError, UnicodeDecodeError, csv.Error) as e:
        raise ArtifactError(f"unreadable: {e}", path) from e
    return rows


def parse_float(row: Dict[str, str], column: str, path: Path) -> float:
    try:
        return float(row[column])
    except (KeyError, ValueError) as e:
        raise ArtifactError(f"bad value in column {column!r}: {row.get(column)!r}", path) from e


def float_column(rows: Sequence[Dict[str, str]], column: str, path: Path) -> np.ndarray:
    return np.array([parse_float(row, column, path) for row in rows], dtype=np.float64)
