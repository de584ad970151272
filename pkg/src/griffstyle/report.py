"""Deterministic CSV/JSON report files with an embedded run header."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__


def header(config: Mapping, inputs: Mapping[str, str]) -> dict:
    return {"artifact": "griffstyle", "version": __version__,
            "config": dict(config), "inputs": dict(inputs)}


def _clean(value):
    if isinstance(value, float) and value != value:
        return None
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    return value


def write_json(path: Path, meta: Mapping, data) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps({"meta": _clean(meta), "data": _clean(data)}, indent=1, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, meta: Mapping, columns: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for key in ("artifact", "version"):
        buf.write(f"# {key}: {meta[key]}\n")
    buf.write(f"# config: {json.dumps(_clean(meta['config']), sort_keys=True)}\n")
    buf.write(f"# inputs: {json.dumps(meta['inputs'], sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def _fmt(value):
    if isinstance(value, float):
        return "" if value != value else repr(round(value, 6))
    return value


def read_csv(path: Path) -> list[dict]:
    """Read a report CSV back, skipping the ``#`` header lines."""
    lines = [line for line in Path(path).read_text(encoding="utf-8").splitlines()
             if not line.startswith("#")]
    return list(csv.DictReader(lines))
