"""CSV/JSON emission for evaluation results with deterministic byte output."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from ..errors import IoFailure


@dataclass(frozen=True)
class FootprintTable:
    """Per-system storage and memory footprint in MB; None marks not-applicable."""

    systems: tuple  # of (name, storage_mb, memory_mb)

    def to_rows(self):
        return ["system", "storage_mb", "memory_mb"], [list(s) for s in self.systems]

    def to_document(self) -> dict:
        return {
            "systems": [
                {"system": name, "storage_mb": storage, "memory_mb": memory}
                for name, storage, memory in self.systems
            ]
        }


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def render(result, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(result.to_document(), indent=2, ensure_ascii=False) + "\n"
    if fmt == "csv":
        header, rows = result.to_rows()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}; expected 'csv' or 'json'")


def emit_report(result, path, fmt: str = "json") -> Path:
    """Write ``result`` (anything with ``to_rows``/``to_document``) to ``path``."""
    text = render(result, fmt)
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write report {path}: {exc}") from exc
    return path
