"""CSV ingestion and validation for case files.

Required columns: ``case_id, group, a, x1, x2, x3, x4, lower, upper, y``.
Conviction features are ``z_1..z_m1`` and other features ``v_1..v_m2``
unless explicit column lists are given.  ``y`` may be left empty for
prediction-only rows.  Other columns are kept in :attr:`Dataset.rows` but not
used by the model.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ValidationError
from .sms_core import CaseRecord

BASE_COLUMNS = ("case_id", "group", "a", "x1", "x2", "x3", "x4", "lower", "upper", "y")

EXCLUSIVITY_COLUMNS = (
    "voluntary_surrender",
    "confession",
    "plea_guilt_accept_punishment",
    "voluntary_plea_in_court",
)
# Admissible combinations of the four mitigating features above; the all-zero
# tuple (none applies) is admitted as well.
ALLOWED_COMBINATIONS = frozenset(
    {
        (1, 0, 0, 0),
        (1, 0, 1, 0),
        (0, 1, 0, 0),
        (0, 1, 1, 0),
        (0, 0, 1, 0),
        (0, 0, 0, 1),
        (0, 0, 0, 0),
    }
)


@dataclass
class RowError:
    line: int
    column: Optional[str]
    message: str

    def as_dict(self) -> dict:
        return {"line": self.line, "column": self.column, "message": self.message}


@dataclass
class Dataset:
    """Validated records in file order plus any row-level errors."""

    records: list[CaseRecord]
    lines: list[int]
    rows: list[dict]
    z_columns: tuple[str, ...]
    v_columns: tuple[str, ...]
    errors: list[RowError] = field(default_factory=list)

    @property
    def m1(self) -> int:
        return len(self.z_columns)

    @property
    def m2(self) -> int:
        return len(self.v_columns)

    def __len__(self):
        return len(self.records)


def _numbered(header: Sequence[str], prefix: str) -> tuple[str, ...]:
    pat = re.compile(rf"^{prefix}_(\d+)$")
    idx = sorted(int(m.group(1)) for h in header if (m := pat.match(h)))
    if idx != list(range(1, len(idx) + 1)):
        raise ValidationError(f"{prefix}_* columns must be numbered contiguously from 1, found {idx}")
    return tuple(f"{prefix}_{i}" for i in idx)


def infer_feature_columns(
    header: Sequence[str],
    z_columns: Optional[Sequence[str]] = None,
    v_columns: Optional[Sequence[str]] = None,
) -> tuple[tuple[str, ...], tuple[str, ...]]:
    z = tuple(z_columns) if z_columns is not None else _numbered(header, "z")
    v = tuple(v_columns) if v_columns is not None else _numbered(header, "v")
    missing = [c for c in (*BASE_COLUMNS, *z, *v) if c not in header]
    if missing:
        raise ValidationError(f"missing required columns: {', '.join(missing)}")
    overlap = set(z) & set(v)
    if overlap:
        raise ValidationError(f"columns assigned to both z and v: {sorted(overlap)}")
    return z, v


def _number(raw: str, column: str) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"not a number: {raw!r}", column=column) from None


def _record(row: Mapping[str, str], z_cols, v_cols) -> CaseRecord:
    y_raw = (row["y"] or "").strip()
    return CaseRecord(
        case_id=row["case_id"],
        group=(row["group"] or "custom").strip(),
        a=_number(row["a"], "a"),
        x=tuple(_number(row[f"x{i}"], f"x{i}") for i in range(1, 5)),
        z=tuple(_number(row[c], c) for c in z_cols),
        v=tuple(_number(row[c], c) for c in v_cols),
        lower=_number(row["lower"], "lower"),
        upper=_number(row["upper"], "upper"),
        y=_number(y_raw, "y") if y_raw else None,
    )


def _relabel(exc: ValidationError, rec_cols: Mapping[str, str]) -> Optional[str]:
    # CaseRecord reports z_i / v_i; map back to the CSV header name.
    return rec_cols.get(exc.column, exc.column)


def load_dataset(
    path,
    z_columns: Optional[Sequence[str]] = None,
    v_columns: Optional[Sequence[str]] = None,
    strict: bool = False,
) -> Dataset:
    """Read a case file.

    Rows failing validation are collected in :attr:`Dataset.errors` with their
    line numbers (the header is line 1).  With ``strict=True`` the first bad
    row raises :class:`ValidationError` instead.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError("file is empty")
        header = [h.strip() for h in reader.fieldnames]
        reader.fieldnames = header
        z_cols, v_cols = infer_feature_columns(header, z_columns, v_columns)
        rec_cols = {f"z_{i}": c for i, c in enumerate(z_cols, 1)}
        rec_cols.update({f"v_{i}": c for i, c in enumerate(v_cols, 1)})
        ds = Dataset([], [], [], z_cols, v_cols)
        for lineno, row in enumerate(reader, start=2):
            if None in row or any(v is None for v in row.values()):
                err = ValidationError("wrong number of fields", row=lineno)
                if strict:
                    raise err
                ds.errors.append(RowError(lineno, None, "wrong number of fields"))
                continue
            try:
                rec = _record(row, z_cols, v_cols)
            except ValidationError as exc:
                column = _relabel(exc, rec_cols)
                message = str(exc).split(": ", 1)[-1] if exc.column else str(exc)
                if strict:
                    raise ValidationError(message, row=lineno, column=column) from exc
                ds.errors.append(RowError(lineno, column, message))
                continue
            ds.records.append(rec)
            ds.lines.append(lineno)
            ds.rows.append(dict(row))
    return ds


@dataclass
class ExclusivityReport:
    checked: bool
    notice: Optional[str] = None
    flagged: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.flagged

    def as_dict(self) -> dict:
        return {"checked": self.checked, "notice": self.notice, "flagged": list(self.flagged)}


def _flag(raw) -> Optional[int]:
    try:
        val = float(raw)
    except (TypeError, ValueError):
        return None
    return int(val) if val in (0.0, 1.0) else None


def validate_exclusivity(rows: Iterable[Mapping[str, str]], lines: Optional[Sequence[int]] = None) -> ExclusivityReport:
    """Flag rows whose four mitigating-feature indicators form an
    inadmissible combination (e.g. surrender together with confession)."""
    rows = list(rows)
    if rows and any(c not in rows[0] for c in EXCLUSIVITY_COLUMNS):
        absent = [c for c in EXCLUSIVITY_COLUMNS if c not in rows[0]]
        return ExclusivityReport(False, f"exclusivity check skipped: columns absent ({', '.join(absent)})")
    if not rows:
        return ExclusivityReport(False, "exclusivity check skipped: no rows")
    report = ExclusivityReport(True)
    for i, row in enumerate(rows):
        combo = tuple(_flag(row[c]) for c in EXCLUSIVITY_COLUMNS)
        if combo not in ALLOWED_COMBINATIONS:
            report.flagged.append(
                {
                    "line": lines[i] if lines is not None else i + 2,
                    "case_id": row.get("case_id"),
                    "combination": [row[c] for c in EXCLUSIVITY_COLUMNS],
                }
            )
    return report


def check_combination(combo: Sequence[int]) -> bool:
    return tuple(int(c) for c in combo) in ALLOWED_COMBINATIONS


def write_dataset(path, records: Sequence[CaseRecord], extra: Optional[Sequence[Mapping[str, object]]] = None):
    """Write records in the format read by :func:`load_dataset`."""
    if not records:
        raise ValueError("no records to write")
    m1, m2 = records[0].m1, records[0].m2
    extra_cols = list(extra[0]) if extra else []
    header = [
        "case_id", "group", "a", "x1", "x2", "x3", "x4",
        *(f"z_{i}" for i in range(1, m1 + 1)),
        *(f"v_{j}" for j in range(1, m2 + 1)),
        *extra_cols,
        "lower", "upper", "y",
    ]

    def fmt(x):
        return f"{x:.12g}" if isinstance(x, float) else str(x)

    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, r in enumerate(records):
            row = [r.case_id, r.group, fmt(r.a), *(fmt(int(t)) for t in r.x)]
            row += [fmt(int(t)) for t in (*r.z, *r.v)]
            row += [fmt(extra[k][c]) for c in extra_cols]
            row += [fmt(r.lower), fmt(r.upper), "" if r.y is None else fmt(r.y)]
            w.writerow(row)
