import hashlib
import json
import threading
from datetime import datetime, timedelta, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from urllib.parse import parse_qs, urlparse

import numpy as np
import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from glucokit.core import (
    BASAL, BOLUS, CARBS, CGM, HEARTRATE, MGDL_PER_MMOLL, EventKind, EventRecord, validate_frame,
)
from glucokit.errors import (
    AuthError, EmptySourceError, InvalidParameterError, ParseError, SchemaError, TransportError,
)
from glucokit.parsers import (
    SourceDescriptor, SourceKind, load_frame, merge_to_frame, parse_apple_health, parse_csv, parse_nightscout,
    parse_ohio, read_apple_health, synth_generate, write_raw_csv,
)
from glucokit.parsers.merge import basal_delivered, basal_rate_for
from glucokit.parsers.nightscout import NightscoutClient, entries_to_records, treatments_to_records
from glucokit.parsers.synthetic import CARB_KERNEL, INSULIN_KERNEL, SynthParams

from conftest import T0

FIX = Path(__file__).parent / "fixtures"
UTC = timezone.utc


def rec(minutes, kind, value, duration=None):
    return EventRecord(T0 + timedelta(minutes=minutes), kind, value, duration)


def is_sorted(records):
    keys = [r.timestamp for r in records]
    return keys == sorted(keys)


# --------------------------------------------------------------------- merge

class TestMerge:
    def test_mean_of_two_cgm_in_bin(self):
        f = merge_to_frame([rec(0, EventKind.CGM, 100), rec(2, EventKind.CGM, 110)])
        assert len(f) == 1 and f[CGM][0] == 105

    def test_bolus_sum(self):
        f = merge_to_frame([rec(0, EventKind.CGM, 100), rec(1, EventKind.BOLUS, 1.0),
                            rec(3, EventKind.BOLUS, 2.0), rec(5, EventKind.CGM, 100)])
        assert f[BOLUS][0] == 3.0 and np.isnan(f[BOLUS][1])

    def test_basal_delivered_matches_per_minute_integration(self):
        f = merge_to_frame([rec(0, EventKind.BASAL, 1.2), rec(0, EventKind.CGM, 100),
                            rec(5, EventKind.CGM, 100)])
        # independent oracle: integrate the rate minute by minute over the bin
        per_minute = sum(1.2 / 60 for _ in range(5))
        assert f[BASAL][0] == pytest.approx(0.1, abs=1e-15)
        assert f[BASAL][0] == pytest.approx(per_minute, abs=1e-12)

    def test_half_open_bins(self):
        f = merge_to_frame([rec(0, EventKind.CGM, 100), rec(5, EventKind.CGM, 200),
                            rec(4.99, EventKind.CARBS, 10), rec(5, EventKind.CARBS, 20)])
        # 4.99 min truncates to 4:59 (second precision), still the first bin
        assert f[CARBS].tolist() == [10, 20]

    def test_grid_spans_first_to_last_cgm_with_missing_bins(self):
        f = merge_to_frame([rec(0, EventKind.CGM, 100), rec(17, EventKind.CGM, 130)])
        assert len(f) == 4
        assert f.start == T0
        assert np.isnan(f[CGM][1]) and np.isnan(f[CGM][2]) and f[CGM][3] == 130

    def test_basal_schedule_and_temp_override(self):
        recs = [rec(m, EventKind.CGM, 100) for m in range(0, 40, 5)]
        recs += [rec(0, EventKind.BASAL, 0.6), rec(10, EventKind.BASAL, 1.8, duration=10),
                 rec(30, EventKind.BASAL, 1.2)]
        got = merge_to_frame(recs)[BASAL]
        expected = [basal_delivered(r, 5) for r in (0.6, 0.6, 1.8, 1.8, 0.6, 0.6, 1.2, 1.2)]
        assert got.tolist() == expected

    def test_no_cgm(self):
        with pytest.raises(EmptySourceError):
            merge_to_frame([rec(0, EventKind.BOLUS, 1)])

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 300), st.sampled_from(list(EventKind)),
                              st.floats(10, 400)), min_size=1, max_size=40),
           st.randoms(use_true_random=False))
    def test_permutation_invariant_and_conserving(self, items, rnd):
        records = [rec(0, EventKind.CGM, 100)] + [
            rec(m, k, v, duration=(15.0 if k is EventKind.BASAL and m % 2 else None)) for m, k, v in items]
        shuffled = list(records)
        rnd.shuffle(shuffled)
        a = merge_to_frame(records)
        b = merge_to_frame(shuffled)
        assert a.equals(b)
        assert validate_frame(a).ok
        end = a.timestamp(len(a))
        for kind, col in ((EventKind.BOLUS, BOLUS), (EventKind.CARBS, CARBS)):
            inside = [r.value for r in records if r.kind is kind and r.timestamp < end]
            if inside:
                assert np.nansum(a[col]) == pytest.approx(sum(inside), rel=1e-12)

    @given(st.floats(0, 10, allow_nan=False), st.sampled_from([1, 5, 7, 15]))
    def test_basal_inverse_exact(self, rate, interval):
        delivered = basal_delivered(rate, interval)
        assert basal_delivered(basal_rate_for(delivered, interval), interval) == delivered


# ----------------------------------------------------------------------- csv

class TestCsv:
    HEADER = "date,CGM,bolus,basal,carbs,heartrate\n"

    def test_single_row(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text(self.HEADER + "2024-01-01T12:00:00Z,110,,,,\n")
        out = parse_csv(p)
        assert out == [EventRecord(datetime(2024, 1, 1, 12, tzinfo=UTC), EventKind.CGM, 110)]

    def test_header_only(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text(self.HEADER)
        assert parse_csv(p) == []

    def test_bad_cell_names_row(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text(self.HEADER + "2024-01-01T12:00:00Z,abc,,,,\n")
        with pytest.raises(ParseError, match="row 2"):
            parse_csv(p)

    def test_bad_timestamp_names_row(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text(self.HEADER + "2024-01-01T12:00:00Z,100,,,,\nyesterday,100,,,,\n")
        with pytest.raises(ParseError, match="row 3"):
            parse_csv(p)

    def test_missing_timestamp_column(self, tmp_path):
        p = tmp_path / "a.csv"
        p.write_text("CGM,bolus\n100,\n")
        with pytest.raises(SchemaError):
            parse_csv(p)

    def test_sample_fixture_formats(self):
        out = parse_csv(FIX / "sample.csv")
        assert is_sorted(out)
        kinds = sorted(r.kind.value for r in out)
        assert kinds.count("CGM") == 5 and kinds.count("BOLUS") == 1 and kinds.count("HEARTRATE") == 2
        last = [r for r in out if r.kind is EventKind.CGM][-1]
        assert last.timestamp == datetime(2024, 1, 1, 12, 20, tzinfo=UTC)

    def test_raw_round_trip(self, tmp_path):
        frame = synth_generate(3, 2, {"noise_std": 4.0})
        path = write_raw_csv(frame, tmp_path / "r.csv")
        assert path.read_text().splitlines()[0] == self.HEADER.strip()
        assert merge_to_frame(parse_csv(path), 5).equals(frame)


# -------------------------------------------------------------- apple health

class TestAppleHealth:
    def test_fixture(self):
        records, skipped = read_apple_health(FIX / "apple_health_sample.xml")
        assert is_sorted(records)
        cgm = [r for r in records if r.kind is EventKind.CGM]
        assert cgm[0].value == pytest.approx(5.5 * MGDL_PER_MMOLL)
        assert cgm[0].value == pytest.approx(99.1, abs=0.05)
        assert cgm[0].timestamp == datetime(2024, 1, 1, 12, 0, tzinfo=UTC)
        assert cgm[2].value == 112
        hr = [r for r in records if r.kind is EventKind.HEARTRATE]
        assert [r.value for r in hr] == [72]
        bolus = [r for r in records if r.kind is EventKind.BOLUS]
        assert [r.value for r in bolus] == [2.5]
        basal = [r for r in records if r.kind is EventKind.BASAL]
        assert basal[0].duration_minutes == 30 and basal[0].value == pytest.approx(0.8)
        assert skipped == {"HKQuantityTypeIdentifierStepCount": 2}

    def test_zero_matching_records(self, tmp_path):
        p = tmp_path / "export.xml"
        p.write_text('<HealthData><Record type="HKQuantityTypeIdentifierStepCount" value="3" '
                     'startDate="2024-01-01 10:00:00 +0000"/></HealthData>')
        records, skipped = read_apple_health(p)
        assert records == [] and sum(skipped.values()) == 1

    def test_malformed_reports_byte_offset(self, tmp_path):
        p = tmp_path / "export.xml"
        body = '<HealthData>\n<Record type="x" value="1">\n</HealthData>'
        p.write_text(body)
        with pytest.raises(ParseError, match=r"byte offset \d+"):
            parse_apple_health(p)


# ---------------------------------------------------------------------- ohio

class TestOhio:
    def test_fixture(self):
        out = parse_ohio(FIX / "ohio_sample.xml")
        assert is_sorted(out)
        cgm = [r.value for r in out if r.kind is EventKind.CGM]
        assert cgm == [142, 146, 150, 151, 149]     # sorted although the file is not
        assert [r.value for r in out if r.kind is EventKind.CARBS] == [45]
        assert [r.value for r in out if r.kind is EventKind.BOLUS] == [3.1]
        basal = [r for r in out if r.kind is EventKind.BASAL]
        assert [(r.value, r.duration_minutes) for r in basal] == [(0.9, None), (0.0, 5.0)]
        assert [r.value for r in out if r.kind is EventKind.HEARTRATE] == [72, 76]

    def test_fixture_frame(self):
        f = load_frame(SourceDescriptor(SourceKind.OHIO_T1DM, str(FIX / "ohio_sample.xml")))
        assert f[CGM].tolist() == [142, 146, 150, 151, 149]
        assert f[BASAL].tolist() == [0.075, 0.075, 0.0, 0.075, 0.075]
        assert f[HEARTRATE][0] == 74

    def test_missing_glucose_section(self, tmp_path):
        p = tmp_path / "s.xml"
        p.write_text('<patient id="1"><meal><event ts="07-12-2021 01:05:00" carbs="45"/></meal></patient>')
        with pytest.raises(ParseError, match="glucose_level"):
            parse_ohio(p)

    def test_bad_timestamp_cites_element(self, tmp_path):
        p = tmp_path / "s.xml"
        p.write_text('<patient><glucose_level><event ts="2021/12/07" value="100"/></glucose_level></patient>')
        with pytest.raises(ParseError, match="2021/12/07"):
            parse_ohio(p)


# ---------------------------------------------------------------- nightscout

ENTRIES = json.loads((FIX / "nightscout_entries.json").read_text())
TREATMENTS = json.loads((FIX / "nightscout_treatments.json").read_text())
SECRET = "correct horse battery"


class _Site:
    """In-process stand-in for a Nightscout REST server."""

    def __init__(self):
        self.entries = ENTRIES
        self.treatments = TREATMENTS
        self.fail_first = 0
        self.bad_json = False
        self.requests = []

    def handler(self):
        site = self

        class H(BaseHTTPRequestHandler):
            def log_message(self, *a):
                pass

            def do_GET(self):
                url = urlparse(self.path)
                q = {k: v[0] for k, v in parse_qs(url.query).items()}
                site.requests.append((url.path, q, dict(self.headers)))
                if site.fail_first > 0:
                    site.fail_first -= 1
                    return self._send(503, b"busy")
                ok = (self.headers.get("api-secret") == hashlib.sha1(SECRET.encode()).hexdigest()
                      or q.get("token") == "reader-0123456789abcdef")
                if not ok:
                    return self._send(401, b'{"status":401}')
                if site.bad_json:
                    return self._send(200, b"[{not json")
                if url.path.endswith("entries.json"):
                    items, field, num = site.entries, "date", True
                elif url.path.endswith("treatments.json"):
                    items, field, num = site.treatments, "created_at", False
                else:
                    return self._send(404, b"")
                conv = (lambda v: float(v)) if num else (lambda v: v)
                lo, hi = q.get(f"find[{field}][$gte]"), q.get(f"find[{field}][$lt]")
                sel = [i for i in items if (lo is None or conv(i[field]) >= conv(lo))
                       and (hi is None or conv(i[field]) < conv(hi))]
                sel.sort(key=lambda i: i[field], reverse=True)
                sel = sel[:int(q.get("count", 10))]
                return self._send(200, json.dumps(sel).encode())

            def _send(self, code, body):
                self.send_response(code)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(body)))
                self.end_headers()
                self.wfile.write(body)

        return H


@pytest.fixture
def site():
    s = _Site()
    server = ThreadingHTTPServer(("127.0.0.1", 0), s.handler())
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    s.url = f"http://127.0.0.1:{server.server_address[1]}"
    yield s
    server.shutdown()
    server.server_close()


def _client(site, creds=SECRET, **kw):
    kw.setdefault("sleep", lambda s: None)
    return NightscoutClient(site.url, creds, **kw)


class TestNightscout:
    def test_entry_mapping(self):
        out = entries_to_records([{"sgv": 120, "date": 1704110400000, "type": "sgv"}])
        assert out == [EventRecord(datetime(2024, 1, 1, 12, tzinfo=UTC), EventKind.CGM, 120)]

    def test_empty_entries(self):
        assert entries_to_records([]) == []

    def test_treatment_mapping(self):
        out = treatments_to_records([{"insulin": 2.5, "created_at": "2024-01-01T12:00:00.000Z"}])
        assert out == [EventRecord(datetime(2024, 1, 1, 12, tzinfo=UTC), EventKind.BOLUS, 2.5)]

    def test_fetch_with_pagination_and_secret(self, site):
        desc = SourceDescriptor(SourceKind.NIGHTSCOUT, site.url, SECRET,
                                (datetime(2024, 1, 1, 11, 0, tzinfo=UTC), datetime(2024, 1, 1, 13, tzinfo=UTC)))
        out = parse_nightscout(desc, client=_client(site, page_size=2))
        assert is_sorted(out)
        assert [r.value for r in out if r.kind is EventKind.CGM] == [112, 120, 128]   # sgv=5 code and mbg skipped
        assert [r.value for r in out if r.kind is EventKind.BOLUS] == [0.5, 2.5]
        assert [r.value for r in out if r.kind is EventKind.CARBS] == [30]
        basal = [r for r in out if r.kind is EventKind.BASAL]
        assert [(r.value, r.duration_minutes) for r in basal] == [(1.2, 30.0)]
        entry_calls = [q for path, q, _ in site.requests if path.endswith("entries.json")]
        assert len(entry_calls) >= 3                     # 5 items, pages of 2
        assert entry_calls[0]["find[date][$gte]"] == str(1704106800000)

    def test_token_in_query(self, site):
        client = _client(site, "reader-0123456789abcdef")
        assert len(client.entries()) == 5
        _, q, headers = site.requests[-1]
        assert q["token"] == "reader-0123456789abcdef" and "api-secret" not in {k.lower() for k in headers}

    def test_unauthorized(self, site):
        with pytest.raises(AuthError):
            _client(site, "wrong").entries()

    def test_retries_then_succeeds(self, site):
        site.fail_first = 2
        sleeps = []
        assert len(_client(site, sleep=sleeps.append).entries()) == 5
        assert sleeps == [1.0, 2.0]

    def test_gives_up_after_bounded_retries(self, site):
        site.fail_first = 10
        with pytest.raises(TransportError):
            _client(site).entries()
        assert len(site.requests) == 3

    def test_unreachable(self):
        client = NightscoutClient("http://127.0.0.1:9", SECRET, sleep=lambda s: None, timeout=2)
        with pytest.raises(TransportError):
            client.entries()

    def test_malformed_json_names_endpoint(self, site):
        site.bad_json = True
        with pytest.raises(ParseError, match="entries"):
            _client(site).entries()

    def test_descriptor_needs_url(self):
        with pytest.raises(InvalidParameterError):
            SourceDescriptor(SourceKind.NIGHTSCOUT, "not-a-url")


# ----------------------------------------------------------------- synthetic

class TestSynthetic:
    def test_fixed_point(self):
        f = synth_generate(7, 1, {"noise_std": 0, "meals": (), "baseline": 120, "circadian_amplitude": 0})
        assert np.all(f[CGM] == 120)
        assert len(f) == 288

    def test_deterministic(self):
        a = synth_generate(7, 2, {"noise_std": 5})
        b = synth_generate(7, 2, {"noise_std": 5})
        assert a.equals(b)
        assert not a.equals(synth_generate(8, 2, {"noise_std": 5}))

    def test_single_meal_raises_glucose(self):
        f = synth_generate(7, 1, {"meals": ((600, 50),), "bolus_fraction": 0.0, "meal_time_jitter": 0,
                                  "meal_size_jitter": 0})
        assert f[CGM].max() > 120
        # brute-force oracle: without reversion the rise equals the carb kernel's cumulative effect
        g = synth_generate(7, 1, {"meals": ((600, 50),), "bolus_fraction": 0.0, "meal_time_jitter": 0,
                                  "meal_size_jitter": 0, "reversion": 0.0})
        assert g[CGM][-1] == pytest.approx(120 + 50 * 40 / 10, rel=1e-12)

    def test_kernels_normalized_and_shaped(self):
        assert CARB_KERNEL.sum() == pytest.approx(1.0) and len(CARB_KERNEL) == 12
        assert INSULIN_KERNEL.sum() == pytest.approx(1.0) and len(INSULIN_KERNEL) == 36
        assert abs(np.argmax(INSULIN_KERNEL) * 5 + 2.5 - 75) <= 2.5     # peak bin brackets 75 min
        assert np.argmax(CARB_KERNEL) in (5, 6)

    def test_clamped(self):
        f = synth_generate(1, 2, {"noise_std": 60})
        assert f[CGM].min() >= 40 and f[CGM].max() <= 400
        assert validate_frame(f).ok

    def test_negative_sensitivity(self):
        with pytest.raises(InvalidParameterError):
            synth_generate(1, 1, SynthParams(insulin_sensitivity=-1))

    def test_descriptor_requires_seed(self):
        with pytest.raises(InvalidParameterError):
            SourceDescriptor(SourceKind.SYNTHETIC, params={"days": 1})


# ------------------------------------------------------------ fuzzed parsers

@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10_000), st.sampled_from(["CGM", "bolus", "carbs", "heartrate"]),
                          st.floats(10, 600).map(lambda v: round(v, 2))), max_size=30))
def test_csv_output_sorted_and_valid(tmp_path_factory, rows):
    p = tmp_path_factory.mktemp("fuzz") / "f.csv"
    cols = ["CGM", "bolus", "carbs", "heartrate"]
    lines = ["timestamp," + ",".join(cols)]
    for minute, col, value in rows:
        ts = (T0 + timedelta(minutes=minute)).strftime("%Y-%m-%d %H:%M:%S")
        lines.append(ts + "," + ",".join(repr(value) if c == col else "" for c in cols))
    p.write_text("\n".join(lines) + "\n")
    out = parse_csv(p)
    assert is_sorted(out) and len(out) == len(rows)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 10_000), st.floats(1, 600).map(lambda v: round(v)),
                          st.floats(0, 20).map(lambda v: round(v, 2))), max_size=20))
def test_nightscout_mapping_sorted_and_valid(items):
    entries = [{"date": 1704067200000 + m * 60000, "sgv": s, "type": "sgv"} for m, s, _ in items]
    treatments = [{"created_at": (T0 + timedelta(minutes=m)).strftime("%Y-%m-%dT%H:%M:%S.000Z"), "insulin": u}
                  for m, _, u in items]

    class Fake:
        def entries(self, start, end):
            return entries

        def treatments(self, start, end):
            return treatments

    out = parse_nightscout(SourceDescriptor(SourceKind.NIGHTSCOUT, "http://x"), client=Fake())
    assert is_sorted(out)
    assert sum(r.kind is EventKind.CGM for r in out) == sum(10 <= s <= 600 for _, s, _ in items)


def test_requests_session_used(site):
    session = requests.Session()
    client = NightscoutClient(site.url, SECRET, session=session)
    assert client.session is session and len(client.treatments()) == 4
