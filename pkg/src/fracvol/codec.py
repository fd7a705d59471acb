import csv
import json
import math
from pathlib import (
    Path,
)
from typing import (
    Any,
    Iterable,
    Sequence,
    TextIO,
)

SIGNIFICANT_DIGITS = 9

PATHS_HEADER = ("path_id", "t", "S", "Y", "Z", "WH")
TABLE_HEADER = ("sigma", "H", "mean", "cv", "paper_mean", "paper_cv")
WEIGHTS_HEADER = ("j", "i", "t_j", "weight")
LOADINGS_HEADER = ("j", "t_j", "origin_loading", "diagonal_loading")


def format_number(value: float) -> str:
    """9 significant digits, '.' as decimal separator whatever the locale."""
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{SIGNIFICANT_DIGITS}g}"


def format_cell(value: Any) -> str:  # noqa: ANN401 typing.Any disallowed
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format_number(value)
    return str(value)


def write_csv(
    stream: TextIO,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    count = 0
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"Row {row!r} does not match header {header!r}")
        writer.writerow([format_cell(value) for value in row])
        count += 1
    return count


def write_csv_file(
    path: Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as stream:
        return write_csv(stream, header, rows)


def read_csv_file(path: Path) -> list[dict[str, str]]:
    with path.open(encoding="utf-8", newline="") as stream:
        return list(csv.DictReader(stream))


def encode_json(value: Any) -> str:  # noqa: ANN401 typing.Any disallowed
    return json.dumps(value, indent=2, sort_keys=True, allow_nan=True)
