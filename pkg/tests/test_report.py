"""Summary table assembly and CSV rendering."""

from datetime import datetime, timedelta, timezone

from ctro import rfc3339
from ctro.probe import ProbeVerdict, make_report
from ctro.registry import Registry, load_registry
from ctro.report import build_table, table_to_csv
from ctro.snapshots import FetchMeta, Snapshot, SnapshotStore

from conftest import fp, fp_set

T0 = datetime(2019, 10, 1, tzinfo=timezone.utc)
META = FetchMeta(http_status=200, cors_allowed=False, tls_ok=True)


def put(history, log, tags, hours=0, meta=META):
    history.put_snapshot(Snapshot.build(
        log, T0 + timedelta(hours=hours), [fp(t) for t in tags], meta))


def small_registry():
    doc = {
        "version": "1",
        "logs": [
            {"name": "argon", "operator": "Google",
             "url": "https://ct.example/argon2020",
             "google_state": "usable", "apple_state": "usable"},
        ],
        "vendors": [],
        "sentinel_roots": {"mmd_root": fp("mmd").hex,
                           "revoked_root": fp("bad").hex},
    }
    return load_registry(doc)


def seeded_history():
    history = SnapshotStore()
    put(history, "argon", ["a", "b", "b", "mmd"])       # 4 total, 3 distinct
    put(history, "other", ["a", "c"])                    # no registry entry
    return history


class TestBuildTable:
    def test_one_row_per_log_sorted(self):
        rows = build_table(seeded_history(), small_registry())
        assert [r.log_name for r in rows] == ["argon", "other"]

    def test_counts_and_registry_join(self):
        rows = build_table(seeded_history(), small_registry())
        argon, other = rows
        assert (argon.operator, argon.google_state) == ("Google", "usable")
        assert (argon.total, argon.distinct, argon.duplicates) == (4, 3, 1)
        assert other.operator == "" and other.google_state == ""
        assert (other.total, other.distinct, other.duplicates) == (2, 2, 0)

    def test_distinct_group_ids(self):
        history = SnapshotStore()
        put(history, "a1", ["x", "y"])
        put(history, "a2", ["y", "x"])   # same distinct set as a1
        put(history, "b", ["z"])
        rows = build_table(history, Registry(logs=()))
        groups = {r.log_name: r.group_id for r in rows}
        assert groups["a1"] == groups["a2"] == 1
        assert groups["b"] == 2

    def test_sentinel_columns(self):
        rows = build_table(seeded_history(), small_registry())
        argon, other = rows
        assert argon.sentinel_hits == {"mmd_root": "+", "revoked_root": "-"}
        assert other.sentinel_hits == {"mmd_root": "-", "revoked_root": "-"}

    def test_probe_symbols(self):
        history = seeded_history()
        history.put_probe(make_report("argon", T0, ProbeVerdict(
            submission="plus_minus", expiration_constraint="yes",
            rejects_expired="no", cors=True, notes=())))
        rows = build_table(history, small_registry())
        argon = rows[0]
        assert argon.submission == "±"
        assert argon.expiration_constraint == "+"
        assert argon.rejects_expired == "-"
        assert argon.cors == "+"

    def test_unprobed_log_has_empty_indicator_cells(self):
        rows = build_table(seeded_history(), small_registry())
        other = rows[1]
        assert (other.submission, other.expiration_constraint,
                other.rejects_expired, other.cors) == ("", "", "", "")

    def test_latest_probe_wins(self):
        history = seeded_history()
        history.put_probe(make_report("argon", T0, ProbeVerdict(
            submission="minus", expiration_constraint="unknown",
            rejects_expired="unknown", cors=False, notes=())))
        history.put_probe(make_report("argon", T0 + timedelta(days=1),
                                      ProbeVerdict(
            submission="plus", expiration_constraint="no",
            rejects_expired="no", cors=False, notes=())))
        rows = build_table(history, small_registry())
        assert rows[0].submission == "+"

    def test_coverage_column(self):
        doc = {
            "version": "1",
            "logs": [],
            "vendors": [],
            "sentinel_roots": {},
        }
        registry = load_registry(doc)
        # hand the registry an in-memory vendor store
        from ctro.certs import DistinctStore
        from ctro.registry import VendorStore
        from datetime import date
        vendor = VendorStore(
            vendor="acme", as_of=date(2019, 10, 1),
            store=DistinctStore.from_fingerprints(fp_set(["a", "b", "c", "d"])),
            source_path="", source_format="fingerprint_list")
        registry = Registry(logs=(), vendors=(vendor,),
                            sentinel_roots={})
        history = SnapshotStore()
        put(history, "argon", ["a", "b", "c"])
        rows = build_table(history, registry)
        assert rows[0].coverage_pct == {"acme": 75.0}


class TestCsv:
    def test_header(self):
        history = seeded_history()
        rows = build_table(history, small_registry())
        text = table_to_csv(rows, small_registry())
        header = text.splitlines()[0]
        assert header == ("log,operator,google_state,apple_state,total,"
                          "distinct,duplicates,distinct_list,"
                          "submission,expiration_constraint,rejects_expired,"
                          "cors,flapping,sentinel_mmd_root,"
                          "sentinel_revoked_root")

    def test_row_values(self):
        history = seeded_history()
        history.put_probe(make_report("argon", T0, ProbeVerdict(
            submission="plus", expiration_constraint="yes",
            rejects_expired="yes", cors=True, notes=())))
        text = table_to_csv(build_table(history, small_registry()),
                            small_registry())
        lines = text.splitlines()
        assert lines[1] == "argon,Google,usable,usable,4,3,1,1,+,+,+,+,-,+,-"
        assert lines[2] == "other,,,,2,2,0,2,,,,,-,-,-"

    def test_coverage_formatting_one_decimal(self):
        from ctro.certs import DistinctStore
        from ctro.registry import VendorStore
        from datetime import date
        vendor = VendorStore(
            vendor="acme", as_of=date(2019, 10, 1),
            store=DistinctStore.from_fingerprints(
                fp_set([str(i) for i in range(325)])),
            source_path="", source_format="fingerprint_list")
        registry = Registry(logs=(), vendors=(vendor,), sentinel_roots={})
        history = SnapshotStore()
        put(history, "big", [str(i) for i in range(323)])
        text = table_to_csv(build_table(history, registry), registry)
        assert "coverage_acme" in text.splitlines()[0]
        assert ",99.4," in text.splitlines()[1]

    def test_trailing_newline_and_stability(self):
        history = seeded_history()
        registry = small_registry()
        a = table_to_csv(build_table(history, registry), registry)
        b = table_to_csv(build_table(history, registry), registry)
        assert a == b
        assert a.endswith("\n")
