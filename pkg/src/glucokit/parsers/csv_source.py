"""Generic CSV reader and the canonical raw-file writer."""

from __future__ import annotations

import csv
import math
import re
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from glucokit.core import (
    BASAL, BOLUS, CARBS, CGM, HEARTRATE, DatasetFrame, EventKind, EventRecord, sort_records,
)
from glucokit.errors import InvalidValueError, ParseError, SchemaError
from glucokit.parsers.merge import basal_rate_for

RAW_HEADER = ("date", "CGM", "bolus", "basal", "carbs", "heartrate")

_TIME_COLUMNS = ("date", "timestamp", "time", "datetime")
_KIND_BY_HEADER = {
    "cgm": EventKind.CGM,
    "bolus": EventKind.BOLUS,
    "basal": EventKind.BASAL,
    "carbs": EventKind.CARBS,
    "heartrate": EventKind.HEARTRATE,
}
_RAW_COLUMN_BY_HEADER = {"CGM": CGM, "bolus": BOLUS, "basal": BASAL, "carbs": CARBS, "heartrate": HEARTRATE}

_RFC3339 = re.compile(
    r"^\d{4}-\d{2}-\d{2}[Tt]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$")
_PLAIN = re.compile(r"^\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2}$")


def parse_timestamp(text: str) -> datetime:
    """Parse an RFC 3339 instant or a naive ``YYYY-MM-DD HH:MM:SS`` (taken as UTC)."""
    text = text.strip()
    if _PLAIN.match(text):
        return datetime.strptime(text, "%Y-%m-%d %H:%M:%S").replace(tzinfo=timezone.utc)
    if _RFC3339.match(text):
        norm = text[:-1] + "+00:00" if text[-1] in "Zz" else text
        norm = norm.replace("t", "T")
        frac = re.search(r"\.(\d+)", norm)
        if frac:
            # fromisoformat on 3.10 accepts only 3 or 6 fractional digits.
            norm = norm.replace(frac.group(0), "." + frac.group(1)[:6].ljust(6, "0"))
        return datetime.fromisoformat(norm).astimezone(timezone.utc)
    raise ValueError(f"unrecognised timestamp {text!r}")


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_csv(path) -> list[EventRecord]:
    """Read a CSV with a timestamp column and any of CGM/bolus/basal/carbs/heartrate.

    Every non-empty cell becomes one record of its column's kind. Basal cells
    are rates in U/hr that stay active until the next basal cell.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty, expected a header row") from None
        lowered = [h.strip().lower() for h in header]
        time_idx = next((i for i, h in enumerate(lowered) if h in _TIME_COLUMNS), None)
        if time_idx is None:
            raise SchemaError(f"{path}: no timestamp column (expected one of {', '.join(_TIME_COLUMNS)})")
        value_cols = [(i, _KIND_BY_HEADER[h]) for i, h in enumerate(lowered) if h in _KIND_BY_HEADER]

        records = []
        for rownum, row in enumerate(reader, start=2):
            if not any(cell.strip() for cell in row):
                continue
            try:
                ts = parse_timestamp(row[time_idx])
            except (ValueError, IndexError):
                cell = row[time_idx] if time_idx < len(row) else ""
                raise ParseError(f"{path}: row {rownum}: unparseable timestamp {cell!r}") from None
            for i, kind in value_cols:
                cell = row[i].strip() if i < len(row) else ""
                if not cell:
                    continue
                try:
                    value = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {rownum}: non-numeric {header[i].strip()} value {cell!r}") from None
                try:
                    records.append(EventRecord(ts, kind, value))
                except InvalidValueError as exc:
                    raise ParseError(f"{path}: row {rownum}: {exc}") from None
    return sort_records(records)


def _cell(value: float) -> str:
    if math.isnan(value):
        return ""
    return repr(float(value))


def write_raw_csv(frame: DatasetFrame, path) -> Path:
    """Write the canonical raw CSV: one row per grid bin, empty cells for missing.

    Floats are written with ``repr`` so re-reading recovers them exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(frame)
    empty = np.full(n, np.nan)
    cols = {h: frame.columns.get(name, empty) for h, name in _RAW_COLUMN_BY_HEADER.items()}
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RAW_HEADER)
        for i in range(n):
            basal = cols["basal"][i]
            basal_cell = "" if math.isnan(basal) else repr(basal_rate_for(float(basal), frame.interval_minutes))
            writer.writerow([
                format_timestamp(frame.timestamp(i)),
                _cell(cols["CGM"][i]),
                _cell(cols["bolus"][i]),
                basal_cell,
                _cell(cols["carbs"][i]),
                _cell(cols["heartrate"][i]),
            ])
    return path
