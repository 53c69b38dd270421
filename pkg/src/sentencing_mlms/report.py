"""Deterministic report serialization (JSON summary, CSV or JSONL traces).

Reports contain no timestamps or host details: the same configuration and
seeds always produce the same bytes.  Floats are written with 12 significant
digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from .config import FORMATS

TRACE_FIELDS = ("step", "y", "y_hat", "rel_err", "theta_norm")
SIG_DIGITS = 12


def artifact_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _round(x: float):
    if not math.isfinite(x):
        return None
    return float(f"{x:.{SIG_DIGITS}g}")


def normalize(obj: Any):
    """Convert numpy scalars/arrays and tuples to JSON-ready plain data with
    floats rounded to 12 significant digits."""
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return normalize(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _round(float(obj))
    return obj


@dataclass
class Report:
    """What a command produced.

    ``summary`` is the JSON body; ``rows`` are the per-step (or per-seed)
    records written by the CSV and JSONL formats, with ``columns`` giving
    their order.
    """

    command: str
    config_hash: str
    seeds: list[int]
    summary: dict
    rows: list[dict] = field(default_factory=list)
    columns: Sequence[str] = TRACE_FIELDS

    def header(self) -> dict:
        return {
            "artifact_version": artifact_version(),
            "command": self.command,
            "config_hash": self.config_hash,
            "seeds": list(self.seeds),
        }


def trace_rows(y, y_hat, rel_err, theta_norm) -> list[dict]:
    """Per-step trace records (1-based step)."""
    return [
        {"step": k + 1, "y": y[k], "y_hat": y_hat[k], "rel_err": rel_err[k], "theta_norm": theta_norm[k]}
        for k in range(len(y))
    ]


def render_report(report: Report, fmt: str = "json") -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; choose from {FORMATS}")
    head = normalize(report.header())
    if fmt == "json":
        body = {**head, "summary": normalize(report.summary)}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
    rows = [normalize({c: r.get(c) for c in report.columns}) for r in report.rows]
    if fmt == "jsonl":
        lines = [json.dumps({"meta": head, "summary": normalize(report.summary)}, sort_keys=True)]
        lines += [json.dumps(r, separators=(",", ":")) for r in rows]
        return "\n".join(lines) + "\n"
    buf = io.StringIO()
    for key in ("artifact_version", "command", "config_hash"):
        buf.write(f"# {key}={head[key]}\n")
    buf.write(f"# seeds={','.join(str(s) for s in head['seeds'])}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(report.columns)
    for r in rows:
        writer.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in report.columns])
    return buf.getvalue()


def emit_report(report: Report, path: Optional[str], fmt: str = "json", stream=None) -> str:
    """Write ``report`` to ``path`` (or ``stream`` when ``path`` is None)."""
    text = render_report(report, fmt)
    if path is None:
        if stream is not None:
            stream.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")
    return text


def parse_report(text: str, fmt: str = "json") -> dict:
    """Inverse of :func:`render_report`: ``{"meta": ..., "summary": ..., "rows": [...]}``.

    CSV reports carry no summary; their values come back as floats (or
    ``None`` for empty cells).
    """
    if fmt == "json":
        body = json.loads(text)
        summary = body.pop("summary")
        return {"meta": body, "summary": summary, "rows": []}
    if fmt == "jsonl":
        lines = text.splitlines()
        first = json.loads(lines[0])
        return {"meta": first["meta"], "summary": first["summary"], "rows": [json.loads(l) for l in lines[1:]]}
    if fmt == "csv":
        meta: dict = {}
        body_lines = []
        for line in text.splitlines():
            if line.startswith("# "):
                key, _, value = line[2:].partition("=")
                meta[key] = [int(s) for s in value.split(",") if s] if key == "seeds" else value
            else:
                body_lines.append(line)
        reader = csv.DictReader(body_lines)
        rows = [{k: (float(v) if v != "" else None) for k, v in r.items()} for r in reader]
        return {"meta": meta, "summary": None, "rows": rows}
    raise ValueError(f"unknown format {fmt!r}")
