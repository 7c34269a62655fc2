"""Reader for the per-subject XML layout of the Ohio T1DM dataset.

A file holds one ``<patient>`` element with one child per signal, e.g.::

    <patient id="559">
      <glucose_level><event ts="07-12-2021 01:17:00" value="101"/></glucose_level>
      <basal><event ts="07-12-2021 00:00:00" value="0.7"/></basal>
      <temp_basal><event ts_begin="..." ts_end="..." value="0.0"/></temp_basal>
      <bolus><event ts_begin="..." ts_end="..." type="normal" dose="3.1"/></bolus>
      <meal><event ts="..." type="Lunch" carbs="45"/></meal>
      <basis_heart_rate><event ts="..." value="72"/></basis_heart_rate>
    </patient>
"""

from __future__ import annotations

from datetime import datetime, timezone
from pathlib import Path
from xml.etree import ElementTree

from glucokit.core import EventKind, EventRecord, sort_records
from glucokit.errors import InvalidValueError, ParseError

_TS_FORMAT = "%d-%m-%Y %H:%M:%S"


def _ts(path, section, elem, attr) -> datetime:
    text = elem.get(attr)
    try:
        return datetime.strptime((text or "").strip(), _TS_FORMAT).replace(tzinfo=timezone.utc)
    except ValueError:
        raise ParseError(f"{path}: <{section}> event has unparseable {attr}={text!r}: "
                         f"{ElementTree.tostring(elem, encoding='unicode').strip()}") from None


def _num(path, section, elem, attr) -> float:
    text = elem.get(attr)
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ParseError(f"{path}: <{section}> event has unparseable {attr}={text!r}") from None


def parse_ohio(path) -> list[EventRecord]:
    path = Path(path)
    try:
        root = ElementTree.parse(str(path)).getroot()
    except ElementTree.ParseError as exc:
        raise ParseError(f"{path}: malformed XML: {exc}") from None
    if root.find("glucose_level") is None:
        raise ParseError(f"{path}: missing mandatory <glucose_level> section")

    out: list[EventRecord] = []

    def add(section, *args, **kwargs):
        try:
            out.append(EventRecord(*args, **kwargs))
        except InvalidValueError as exc:
            raise ParseError(f"{path}: <{section}> event: {exc}") from None

    for ev in root.iterfind("glucose_level/event"):
        add("glucose_level", _ts(path, "glucose_level", ev, "ts"), EventKind.CGM,
            _num(path, "glucose_level", ev, "value"))
    for ev in root.iterfind("bolus/event"):
        add("bolus", _ts(path, "bolus", ev, "ts_begin"), EventKind.BOLUS, _num(path, "bolus", ev, "dose"))
    for ev in root.iterfind("basal/event"):
        add("basal", _ts(path, "basal", ev, "ts"), EventKind.BASAL, _num(path, "basal", ev, "value"))
    for ev in root.iterfind("temp_basal/event"):
        begin = _ts(path, "temp_basal", ev, "ts_begin")
        end = _ts(path, "temp_basal", ev, "ts_end")
        minutes = max((end - begin).total_seconds() / 60, 0.0)
        add("temp_basal", begin, EventKind.BASAL, _num(path, "temp_basal", ev, "value"),
            duration_minutes=minutes)
    for ev in root.iterfind("meal/event"):
        add("meal", _ts(path, "meal", ev, "ts"), EventKind.CARBS, _num(path, "meal", ev, "carbs"))
    for ev in root.iterfind("basis_heart_rate/event"):
        add("basis_heart_rate", _ts(path, "basis_heart_rate", ev, "ts"), EventKind.HEARTRATE,
            _num(path, "basis_heart_rate", ev, "value"))
    return sort_records(out)
