"""Data acquisition: each parser yields EventRecords that merge into a DatasetFrame."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

from glucokit.core import DatasetFrame, EventRecord
from glucokit.errors import InvalidParameterError
from glucokit.parsers.apple_health import parse_apple_health, read_apple_health
from glucokit.parsers.csv_source import RAW_HEADER, parse_csv, write_raw_csv
from glucokit.parsers.merge import merge_to_frame
from glucokit.parsers.nightscout import NightscoutClient, parse_nightscout
from glucokit.parsers.ohio import parse_ohio
from glucokit.parsers.synthetic import SynthParams, synth_generate


class SourceKind(enum.Enum):
    NIGHTSCOUT = "nightscout"
    APPLE_HEALTH = "apple_health"
    OHIO_T1DM = "ohio_t1dm"
    CSV = "csv"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class SourceDescriptor:
    kind: SourceKind
    location: Optional[str] = None
    credentials: Optional[str] = None
    time_range: Optional[tuple[datetime, datetime]] = None
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind is SourceKind.NIGHTSCOUT:
            if not self.location or not str(self.location).startswith(("http://", "https://")):
                raise InvalidParameterError("a Nightscout source needs an http(s) base URL")
        elif self.kind is SourceKind.SYNTHETIC:
            if "seed" not in self.params:
                raise InvalidParameterError("a synthetic source needs a 'seed' parameter")
        else:
            if not self.location or not Path(self.location).is_file():
                raise InvalidParameterError(f"{self.kind.value} source file not readable: {self.location!r}")


# Registry of record-producing parsers; third-party sources (e.g. Tidepool)
# plug in with register_parser.
_PARSERS: dict[SourceKind | str, Callable[[SourceDescriptor], list[EventRecord]]] = {
    SourceKind.NIGHTSCOUT: parse_nightscout,
    SourceKind.APPLE_HEALTH: lambda d: parse_apple_health(d.location),
    SourceKind.OHIO_T1DM: lambda d: parse_ohio(d.location),
    SourceKind.CSV: lambda d: parse_csv(d.location),
}


def register_parser(name: str, func: Callable[[SourceDescriptor], list[EventRecord]]) -> None:
    _PARSERS[name] = func


def load_frame(desc: SourceDescriptor, interval_minutes: int = 5) -> DatasetFrame:
    """Run the parser for ``desc`` and merge its records onto the grid."""
    if desc.kind is SourceKind.SYNTHETIC:
        params = dict(desc.params)
        seed = params.pop("seed")
        days = params.pop("days", 14)
        return synth_generate(seed, days, params)
    return merge_to_frame(_PARSERS[desc.kind](desc), interval_minutes)


__all__ = [
    "SourceKind", "SourceDescriptor", "register_parser", "load_frame",
    "parse_nightscout", "parse_apple_health", "read_apple_health", "parse_ohio", "parse_csv",
    "synth_generate", "SynthParams", "merge_to_frame", "write_raw_csv", "RAW_HEADER",
    "NightscoutClient",
]
