"""Nightscout REST client (``/api/v1/entries.json`` and ``/api/v1/treatments.json``)."""

from __future__ import annotations

import hashlib
import logging
import re
import time
from datetime import datetime, timezone
from typing import Callable, Optional

import requests

from glucokit.core import CGM_MAX_MGDL, CGM_MIN_MGDL, EventKind, EventRecord, sort_records
from glucokit.errors import AuthError, InvalidValueError, ParseError, TransportError

log = logging.getLogger(__name__)

MAX_ATTEMPTS = 3
BACKOFF_SECONDS = 1.0
TIMEOUT_SECONDS = 30.0
PAGE_SIZE = 1000

# Nightscout access tokens look like "<subject>-<16 hex chars>"; anything
# else is treated as the site's API secret.
_TOKEN_RE = re.compile(r"^[A-Za-z0-9_.]+-[0-9a-f]{16}$")


class NightscoutClient:
    def __init__(self, base_url: str, credentials: Optional[str] = None, *,
                 session: Optional[requests.Session] = None,
                 max_attempts: int = MAX_ATTEMPTS, backoff: float = BACKOFF_SECONDS,
                 timeout: float = TIMEOUT_SECONDS, page_size: int = PAGE_SIZE,
                 sleep: Callable[[float], None] = time.sleep):
        self.base_url = base_url.rstrip("/")
        self.session = session or requests.Session()
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.timeout = timeout
        self.page_size = page_size
        self.sleep = sleep
        self.headers = {"Accept": "application/json"}
        self.auth_params = {}
        if credentials:
            if _TOKEN_RE.match(credentials):
                self.auth_params["token"] = credentials
            else:
                self.headers["api-secret"] = hashlib.sha1(credentials.encode("utf-8")).hexdigest()

    def get_json(self, endpoint: str, params: dict):
        url = f"{self.base_url}/api/v1/{endpoint}"
        last_error = None
        for attempt in range(self.max_attempts):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.get(url, params={**params, **self.auth_params},
                                        headers=self.headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
                log.debug("GET %s failed (attempt %d): %s", url, attempt + 1, exc)
                continue
            if resp.status_code == 401:
                raise AuthError(f"{url}: HTTP 401 unauthorized; check the API secret or token")
            if resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                continue
            if resp.status_code >= 400:
                raise TransportError(f"{url}: HTTP {resp.status_code}")
            try:
                return resp.json()
            except ValueError:
                raise ParseError(f"{endpoint}: response body is not valid JSON") from None
        raise TransportError(f"{url}: giving up after {self.max_attempts} attempts: {last_error}")

    def _paged(self, endpoint, field, lower, upper, key):
        """Walk newest-to-oldest pages until a short page is returned."""
        items = []
        while True:
            params = {"count": self.page_size}
            if lower is not None:
                params[f"find[{field}][$gte]"] = lower
            if upper is not None:
                params[f"find[{field}][$lt]"] = upper
            page = self.get_json(endpoint, params)
            if not isinstance(page, list):
                raise ParseError(f"{endpoint}: expected a JSON array, got {type(page).__name__}")
            items.extend(page)
            if len(page) < self.page_size:
                return items
            oldest = min(key(endpoint, item) for item in page)
            if upper is not None and oldest >= upper:
                raise ParseError(f"{endpoint}: pagination did not advance")
            upper = oldest

    def entries(self, start: Optional[datetime] = None, end: Optional[datetime] = None) -> list:
        return self._paged("entries.json", "date",
                           _epoch_ms(start) if start else None, _epoch_ms(end) if end else None,
                           lambda ep, item: _entry_ms(ep, item))

    def treatments(self, start: Optional[datetime] = None, end: Optional[datetime] = None) -> list:
        return self._paged("treatments.json", "created_at",
                           _iso(start) if start else None, _iso(end) if end else None,
                           lambda ep, item: _iso(_treatment_time(ep, item)))


def _epoch_ms(ts: datetime) -> int:
    return int(ts.astimezone(timezone.utc).timestamp() * 1000)


def _iso(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.000Z")


def _entry_ms(endpoint, item) -> int:
    if not isinstance(item, dict) or not isinstance(item.get("date"), (int, float)):
        raise ParseError(f"{endpoint}: malformed entry {item!r}")
    return int(item["date"])


def _treatment_time(endpoint, item) -> datetime:
    if not isinstance(item, dict):
        raise ParseError(f"{endpoint}: malformed treatment {item!r}")
    raw = item.get("created_at")
    try:
        text = str(raw).replace("Z", "+00:00")
        ts = datetime.fromisoformat(re.sub(r"\.(\d{3})(\d*)", r".\1", text))
    except ValueError:
        raise ParseError(f"{endpoint}: treatment has unparseable created_at {raw!r}") from None
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def entries_to_records(entries: list) -> list[EventRecord]:
    out = []
    for item in entries:
        ms = _entry_ms("entries", item)
        if item.get("type", "sgv") != "sgv" or "sgv" not in item:
            continue
        try:
            sgv = float(item["sgv"])
        except (TypeError, ValueError):
            raise ParseError(f"entries: malformed sgv in {item!r}") from None
        # sgv codes below the sensor floor encode errors, not readings
        if not CGM_MIN_MGDL <= sgv <= CGM_MAX_MGDL:
            continue
        out.append(EventRecord(datetime.fromtimestamp(ms / 1000, tz=timezone.utc), EventKind.CGM, sgv))
    return out


def treatments_to_records(treatments: list) -> list[EventRecord]:
    out = []
    for item in treatments:
        ts = _treatment_time("treatments", item)
        try:
            if item.get("eventType") == "Temp Basal":
                rate = item.get("absolute", item.get("rate"))
                if rate is not None:
                    out.append(EventRecord(ts, EventKind.BASAL, float(rate),
                                           duration_minutes=float(item.get("duration") or 0)))
            if item.get("insulin"):
                out.append(EventRecord(ts, EventKind.BOLUS, float(item["insulin"])))
            if item.get("carbs"):
                out.append(EventRecord(ts, EventKind.CARBS, float(item["carbs"])))
        except (TypeError, ValueError, InvalidValueError) as exc:
            raise ParseError(f"treatments: malformed treatment {item!r}: {exc}") from None
    return out


def parse_nightscout(desc, *, client: Optional[NightscoutClient] = None) -> list[EventRecord]:
    """Fetch CGM entries and treatments for ``desc.time_range`` from a Nightscout site."""
    if client is None:
        client = NightscoutClient(desc.location, desc.credentials)
    start, end = desc.time_range or (None, None)
    records = entries_to_records(client.entries(start, end))
    records += treatments_to_records(client.treatments(start, end))
    return sort_records(records)
