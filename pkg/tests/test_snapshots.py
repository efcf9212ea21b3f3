import json
from datetime import datetime, timedelta, timezone

import pytest

from ctro.certs import CertFingerprint
from ctro.snapshots import (
    ChangeEvent,
    FetchMeta,
    OutOfOrder,
    ProbeRecord,
    SchemaError,
    Snapshot,
    SnapshotStore,
    UnknownLog,
)

from conftest import blob, fp

META = FetchMeta(http_status=200, cors_allowed=True, tls_ok=True)
T0 = datetime(2019, 10, 1, tzinfo=timezone.utc)


def at(hours):
    return T0 + timedelta(hours=hours)


def snap(log, tags, hours=0, meta=META):
    return Snapshot.build(log, at(hours), [fp(t) for t in tags], meta)


class TestPutAndGet:
    def test_round_trip(self):
        store = SnapshotStore()
        store.put_snapshot(snap("argon", ["a", "b", "a"], hours=0))
        got = store.latest("argon")
        assert got.raw_entries == (fp("a"), fp("b"), fp("a"))
        assert got.taken_at == T0
        assert got.fetch_meta == META
        assert got.raw_count == 3 and got.distinct_count == 2

    def test_changed_flag(self):
        store = SnapshotStore()
        assert store.put_snapshot(snap("argon", ["a", "b"], 0)) is True
        # same distinct set, different order and duplication: unchanged
        assert store.put_snapshot(snap("argon", ["b", "a", "a"], 1)) is False
        assert store.put_snapshot(snap("argon", ["a", "c"], 2)) is True

    def test_out_of_order(self):
        store = SnapshotStore()
        store.put_snapshot(snap("argon", ["a"], 2))
        with pytest.raises(OutOfOrder):
            store.put_snapshot(snap("argon", ["a"], 2))
        with pytest.raises(OutOfOrder):
            store.put_snapshot(snap("argon", ["a"], 1))
        # other logs keep independent clocks
        store.put_snapshot(snap("yeti", ["a"], 1))

    def test_store_fp_validated(self):
        store = SnapshotStore()
        bad = Snapshot(
            log_name="argon",
            taken_at=T0,
            raw_entries=(fp("a"),),
            store_fp=snap("argon", ["b"]).store_fp,
            fetch_meta=META,
        )
        with pytest.raises(ValueError):
            store.put_snapshot(bad)

    def test_unknown_log(self):
        store = SnapshotStore()
        with pytest.raises(UnknownLog):
            store.latest("nope")
        with pytest.raises(UnknownLog):
            store.snapshots("nope")
        with pytest.raises(UnknownLog):
            store.change_events("nope")

    def test_log_names_sorted(self):
        store = SnapshotStore()
        store.put_snapshot(snap("yeti", ["a"], 0))
        store.put_snapshot(snap("argon", ["a"], 0))
        assert store.log_names() == ["argon", "yeti"]

    def test_time_range(self):
        store = SnapshotStore()
        for h in range(5):
            store.put_snapshot(snap("argon", ["a"], h))
        got = store.snapshots("argon", since=at(1), until=at(3))
        assert [s.taken_at for s in got] == [at(1), at(2), at(3)]


class TestCerts:
    def test_put_and_lookup(self):
        store = SnapshotStore()
        assert store.put_cert(blob("a")) == fp("a")
        store.put_cert(blob("a"))
        assert store.cert_count() == 1
        assert store.cert(fp("a")) == blob("a")
        assert store.cert(fp("b")) is None

    def test_distinct_store_carries_known_blobs(self):
        store = SnapshotStore()
        store.put_cert(blob("a"))
        store.put_snapshot(snap("argon", ["a", "b"], 0))
        distinct = store.distinct_store(store.latest("argon"))
        assert distinct.members == frozenset({fp("a"), fp("b")})
        assert distinct.blobs == {fp("a"): blob("a")}


class TestChangeEvents:
    def test_spec_sequence(self):
        # A, A, B, B, C distinct sets: two events
        store = SnapshotStore()
        sets = [["a"], ["a"], ["b"], ["b"], ["c"]]
        for h, tags in enumerate(sets):
            store.put_snapshot(snap("argon", tags, h))
        events = store.change_events("argon")
        assert len(events) == 2
        assert events[0].added == frozenset({fp("b")})
        assert events[0].removed == frozenset({fp("a")})
        assert (events[0].from_ts, events[0].to_ts) == (at(1), at(2))
        assert events[1].added == frozenset({fp("c")})

    def test_duplication_is_not_change(self):
        store = SnapshotStore()
        store.put_snapshot(snap("argon", ["a", "b"], 0))
        store.put_snapshot(snap("argon", ["b", "b", "a"], 1))
        assert store.change_events("argon") == []

    def test_range_filtering(self):
        store = SnapshotStore()
        sets = [["a"], ["b"], ["c"], ["d"]]
        for h, tags in enumerate(sets):
            store.put_snapshot(snap("argon", tags, h))
        assert len(store.change_events("argon")) == 3
        assert len(store.change_events("argon", since=at(1))) == 2

    def test_size_timeline(self):
        store = SnapshotStore()
        store.put_snapshot(snap("argon", ["a"], 0))
        store.put_snapshot(snap("argon", ["a", "b", "b"], 1))
        assert store.size_timeline("argon") == [(at(0), 1), (at(1), 2)]


class TestProbes:
    VERDICT = {"submission": "plus", "expiration_constraint": "yes",
               "rejects_expired": "yes", "cors": True}
    EVIDENCE = [{"request": "in_window#1", "status": 200, "ok": True,
                 "detail": ""}]

    def test_round_trip(self):
        store = SnapshotStore()
        store.put_probe(ProbeRecord("argon", at(0), self.VERDICT,
                                    tuple(self.EVIDENCE)))
        got = store.probes("argon")
        assert len(got) == 1
        assert got[0].verdict == self.VERDICT
        assert got[0].evidence == tuple(self.EVIDENCE)
        assert store.last_probe_at("argon") == at(0)
        assert store.last_probe_at("yeti") is None


class TestInterchange:
    def populate(self, store):
        store.put_cert(blob("a"))
        store.put_cert(blob("b"))
        store.put_snapshot(snap("argon", ["a", "b"], 0))
        store.put_snapshot(snap("argon", ["b"], 1))
        store.put_snapshot(snap("yeti", ["a", "a"], 0,
                                meta=FetchMeta(200, False, True)))
        store.put_probe(ProbeRecord("argon", at(2), TestProbes.VERDICT,
                                    tuple(TestProbes.EVIDENCE)))

    def test_export_shape(self):
        store = SnapshotStore()
        self.populate(store)
        lines = store.export().splitlines()
        assert json.loads(lines[0]) == {"format": "ctro-snapshots", "version": 1}
        kinds = []
        for line in lines[1:]:
            obj = json.loads(line)
            if "probe" in obj:
                kinds.append("probe")
            elif "cert" in obj:
                kinds.append("cert")
            else:
                kinds.append("snapshot")
        assert kinds == ["snapshot"] * 3 + ["probe"] + ["cert"] * 2
        # cert lines sorted by fingerprint
        cert_lines = [json.loads(l)["cert"] for l in lines[1:] if "cert" in l]
        assert cert_lines == sorted(cert_lines)

    def test_round_trip_byte_identical(self):
        store = SnapshotStore()
        self.populate(store)
        exported = store.export()
        clone = SnapshotStore()
        clone.import_stream(exported)
        assert clone.export() == exported

    def test_range_limits_snapshots_not_certs(self):
        store = SnapshotStore()
        self.populate(store)
        text = store.export(since=at(1))
        lines = [json.loads(l) for l in text.splitlines()[1:]]
        snaps = [l for l in lines if "log" in l]
        certs = [l for l in lines if "cert" in l]
        assert len(snaps) == 1 and snaps[0]["taken_at"] == "2019-10-01T01:00:00Z"
        assert len(certs) == 2

    def test_bad_header(self):
        store = SnapshotStore()
        with pytest.raises(SchemaError):
            store.import_stream('{"format":"other","version":1}\n')
        with pytest.raises(SchemaError):
            store.import_stream("")

    def test_unknown_field_rejected(self):
        store = SnapshotStore()
        good = SnapshotStore()
        self.populate(good)
        lines = good.export().splitlines()
        obj = json.loads(lines[1])
        obj["surprise"] = 1
        doctored = "\n".join([lines[0], json.dumps(obj)]) + "\n"
        with pytest.raises(SchemaError) as err:
            store.import_stream(doctored)
        assert err.value.lineno == 2

    def test_bad_meta_type_rejected(self):
        store = SnapshotStore()
        line = json.dumps({
            "log": "argon", "taken_at": "2019-10-01T00:00:00Z",
            "raw": [fp("a").hex],
            "meta": {"http_status": True, "cors_allowed": True, "tls_ok": True},
        })
        stream = '{"format":"ctro-snapshots","version":1}\n' + line + "\n"
        with pytest.raises(SchemaError):
            store.import_stream(stream)

    def test_cert_fingerprint_mismatch_rejected(self):
        store = SnapshotStore()
        import base64
        line = json.dumps({
            "cert": fp("b").hex,
            "der": base64.b64encode(blob("a")).decode(),
        })
        stream = '{"format":"ctro-snapshots","version":1}\n' + line + "\n"
        with pytest.raises(SchemaError):
            store.import_stream(stream)

    def test_non_json_line(self):
        store = SnapshotStore()
        stream = '{"format":"ctro-snapshots","version":1}\nwat\n'
        with pytest.raises(SchemaError) as err:
            store.import_stream(stream)
        assert err.value.lineno == 2

    def test_persistence_on_disk(self, tmp_path):
        path = tmp_path / "history.sqlite"
        store = SnapshotStore(path)
        self.populate(store)
        store.close()
        reopened = SnapshotStore(path)
        assert reopened.log_names() == ["argon", "yeti"]
        assert reopened.latest("argon").distinct_members == frozenset({fp("b")})
