"""Result tables and their CSV/JSON serialization."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        width = len(self.columns)
        for row in self.rows:
            if len(row) != width:
                raise ValueError(f"row has {len(row)} values, expected {width}")

    def append(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values, expected {len(self.columns)}")
        self.rows.append(list(values))

    def column(self, name):
        idx = self.columns.index(name)
        return [row[idx] for row in self.rows]


def _cell(value):
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            return repr(value)
        return format(value, ".17g")
    return str(value)


def _plain(value):
    """Python scalars only, so JSON output never depends on numpy types."""
    if hasattr(value, "item"):
        value = value.item()
    return value


def to_csv(table: ResultTable) -> str:
    buf = io.StringIO()
    for key, value in table.metadata.items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell(_plain(v)) for v in row])
    return buf.getvalue()


def to_json(table: ResultTable) -> str:
    doc = {
        "metadata": table.metadata,
        "columns": table.columns,
        "rows": [[_plain(v) for v in row] for row in table.rows],
    }
    return json.dumps(doc, indent=1) + "\n"


def emit(table: ResultTable, fmt="csv", path=None) -> str:
    """Serialize ``table``; write it to ``path`` when given."""
    if fmt == "csv":
        text = to_csv(table)
    elif fmt == "json":
        text = to_json(table)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def _parse_cell(text):
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def from_csv(text) -> ResultTable:
    lines = text.splitlines()
    metadata = {}
    while lines and lines[0].startswith("#"):
        key, _, value = lines.pop(0)[2:].partition(": ")
        metadata[key] = value
    reader = csv.reader(lines)
    columns = next(reader)
    return ResultTable(columns, [[_parse_cell(c) for c in row] for row in reader], metadata)


def from_json(text) -> ResultTable:
    doc = json.loads(text)
    return ResultTable(doc["columns"], doc["rows"], doc["metadata"])
