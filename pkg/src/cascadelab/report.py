"""Row reports (CSV/JSON) and the run manifest written beside every output."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .errors import ValidationError


def fmt_float(x: float) -> str:
    """12 significant digits; infinities spelled inf/-inf."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(float(x), ".12g")


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return fmt_float(v)
    if v is None:
        return ""
    return str(v)


def _jsonable(v: Any) -> Any:
    # round floats through the same 12-digit text so CSV and JSON agree
    if isinstance(v, bool) or v is None:
        return v
    if isinstance(v, float):
        if math.isinf(v) or math.isnan(v):
            return fmt_float(v)
        return float(fmt_float(v))
    if hasattr(v, "item"):
        return _jsonable(v.item())
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


def render_rows(rows: Sequence[dict], fmt: str, columns: Sequence[str] | None = None) -> str:
    """CSV or JSON text for rows sharing one schema; column order is first-seen order."""
    if columns is None:
        columns = list(rows[0].keys()) if rows else []
    for r in rows:
        if set(r) != set(columns):
            raise ValidationError("rows do not share one schema")
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_cell(r[c]) for c in columns])
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([{c: _jsonable(r[c]) for c in columns} for r in rows], indent=1) + "\n"
    raise ValidationError(f"unknown report format {fmt!r}")


def dumps_json(obj: Any) -> str:
    return json.dumps(_jsonable(obj), indent=1, sort_keys=False) + "\n"


@dataclass
class RunManifest:
    subcommand: str
    inputs: list[str]
    params: dict
    seed: int | None
    argv: list[str]
    outputs: list[str] = field(default_factory=list)
    version: str = __version__

    def to_json(self) -> str:
        return dumps_json(asdict(self))

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        data = json.loads(text)
        return cls(**data)


def manifest_path(output: str | Path) -> Path:
    p = Path(output)
    return p.with_name(p.name + ".manifest.json")


def write_output(path: str | Path, text: str, manifest: RunManifest | None = None) -> None:
    """Write ``text`` to ``path`` and the manifest beside it."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(text, encoding="utf-8")
    if manifest is not None:
        if str(p) not in manifest.outputs:
            manifest.outputs.append(str(p))
        manifest_path(p).write_text(manifest.to_json(), encoding="utf-8")


def emit_report(rows: Sequence[dict], fmt: str, path: str | Path, manifest: RunManifest | None = None, columns=None) -> str:
    text = render_rows(rows, fmt, columns)
    write_output(path, text, manifest)
    return text
