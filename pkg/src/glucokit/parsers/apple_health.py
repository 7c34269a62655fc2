"""Streaming reader for Apple Health ``export.xml`` files.

Exports routinely reach several gigabytes, so the file is consumed with
``iterparse`` and every element is cleared once handled.
"""

from __future__ import annotations

import logging
from collections import Counter
from datetime import datetime
from pathlib import Path
from xml.etree import ElementTree

from glucokit.core import EventKind, EventRecord, GlucoseUnit, convert_glucose, sort_records
from glucokit.errors import InvalidValueError, ParseError

log = logging.getLogger(__name__)

BLOOD_GLUCOSE = "HKQuantityTypeIdentifierBloodGlucose"
INSULIN_DELIVERY = "HKQuantityTypeIdentifierInsulinDelivery"
CARBOHYDRATES = "HKQuantityTypeIdentifierDietaryCarbohydrates"
HEART_RATE = "HKQuantityTypeIdentifierHeartRate"

# HKInsulinDeliveryReason: 1 = basal, 2 = bolus
_REASON_BASAL = "1"

_DATE_FORMAT = "%Y-%m-%d %H:%M:%S %z"


def _parse_date(text: str) -> datetime:
    return datetime.strptime(text.strip(), _DATE_FORMAT)


def _byte_offset(path: Path, line: int, column: int) -> int:
    offset = 0
    with path.open("rb") as fh:
        for i, raw in enumerate(fh, start=1):
            if i == line:
                return offset + column
            offset += len(raw)
    return offset


def read_apple_health(path) -> tuple[list[EventRecord], Counter]:
    """Return (records, skipped) where ``skipped`` counts ignored Record types."""
    path = Path(path)
    records: list[EventRecord] = []
    skipped: Counter = Counter()
    context = ElementTree.iterparse(str(path), events=("start", "end"))
    root = None
    try:
        for event, elem in context:
            if event == "start":
                if root is None:
                    root = elem
                continue
            if elem.tag == "Record":
                rec = _convert(elem, skipped)
                if rec is not None:
                    records.append(rec)
                elem.clear()
                if root is not None:
                    root.clear()
            elif elem is not root and elem.tag != "MetadataEntry":
                elem.clear()
    except ElementTree.ParseError as exc:
        line, column = exc.position
        offset = _byte_offset(path, line, column)
        raise ParseError(f"{path}: malformed XML at byte offset {offset} (line {line}, column {column})") from None
    if skipped:
        log.warning("skipped %d Apple Health records of unsupported types", sum(skipped.values()))
    return sort_records(records), skipped


def parse_apple_health(path) -> list[EventRecord]:
    return read_apple_health(path)[0]


def _convert(elem, skipped: Counter):
    rtype = elem.get("type", "")
    if rtype not in (BLOOD_GLUCOSE, INSULIN_DELIVERY, CARBOHYDRATES, HEART_RATE):
        skipped[rtype] += 1
        return None
    try:
        start = _parse_date(elem.get("startDate", ""))
        value = float(elem.get("value", ""))
    except ValueError:
        raise ParseError(f"Record of type {rtype} has an unparseable date or value: "
                         f"startDate={elem.get('startDate')!r} value={elem.get('value')!r}") from None
    try:
        if rtype == BLOOD_GLUCOSE:
            unit = elem.get("unit", "mg/dL")
            if "mmol" in unit.lower():
                value = convert_glucose(value, GlucoseUnit.MMOLL, GlucoseUnit.MGDL)
            return EventRecord(start, EventKind.CGM, value)
        if rtype == CARBOHYDRATES:
            return EventRecord(start, EventKind.CARBS, value)
        if rtype == HEART_RATE:
            return EventRecord(start, EventKind.HEARTRATE, value)
        reason = None
        for meta in elem.iter("MetadataEntry"):
            if meta.get("key") == "HKInsulinDeliveryReason":
                reason = meta.get("value")
        end = _parse_date(elem.get("endDate", elem.get("startDate")))
        minutes = (end - start).total_seconds() / 60
        if reason == _REASON_BASAL and minutes > 0:
            return EventRecord(start, EventKind.BASAL, value * 60 / minutes, duration_minutes=minutes)
        return EventRecord(start, EventKind.BOLUS, value)
    except (InvalidValueError, ValueError) as exc:
        raise ParseError(f"Record of type {rtype} at {elem.get('startDate')}: {exc}") from None
