"""Certificate identity layer: fingerprints, parsing, dedupe, store digest."""

import hashlib
import random
from datetime import datetime, timezone

import pytest

from conftest import blob, distinct, fp, raw_store
from ctro import certgen
from ctro.certs import (
    CertFingerprint,
    DistinctStore,
    MalformedDer,
    RootStore,
    dedupe,
    describe,
    parse_cert,
    store_fingerprint,
)


class TestFingerprint:
    def test_matches_sha256_of_der(self):
        der = blob("a")
        assert CertFingerprint.of(der).digest == hashlib.sha256(der).digest()

    def test_hex_form(self):
        h = fp("a").hex
        assert len(h) == 64 and h == h.lower()
        assert CertFingerprint.from_hex(h) == fp("a")

    def test_equality_iff_same_bytes(self):
        assert CertFingerprint.of(blob("x")) == CertFingerprint.of(blob("x"))
        assert CertFingerprint.of(blob("x")) != CertFingerprint.of(blob("y"))

    def test_rejects_bad_lengths(self):
        with pytest.raises(ValueError):
            CertFingerprint(b"\x00" * 31)
        with pytest.raises(ValueError):
            CertFingerprint.from_hex("ab" * 31)


class TestParseCert:
    def test_self_signed_root(self, sample_cert):
        meta = parse_cert(sample_cert)
        assert meta.self_signed is True
        assert meta.parse_ok is True
        assert "ctro" in meta.subject
        assert meta.subject == meta.issuer
        assert meta.not_before < meta.not_after

    def test_leaf_not_self_signed(self, signing_material):
        leaf, _root = certgen.leaf_chain(
            signing_material, "leaf", datetime(2030, 1, 1, tzinfo=timezone.utc)
        )
        meta = parse_cert(leaf)
        assert meta.self_signed is False
        assert meta.subject != meta.issuer

    def test_inverted_validity_accepted_with_warning(self):
        der = certgen.make_inverted_validity_cert()
        meta = parse_cert(der)
        assert meta.parse_ok is True
        assert meta.not_before > meta.not_after
        assert any("inverted" in w for w in meta.warnings)

    def test_truncated_der_rejected(self, sample_cert):
        with pytest.raises(MalformedDer):
            parse_cert(sample_cert[:10])

    def test_garbage_rejected(self):
        with pytest.raises(MalformedDer):
            parse_cert(b"not a certificate")

    def test_describe_keeps_unparseable_blob(self):
        der = blob("junk")
        meta = describe(der)
        assert meta.parse_ok is False
        assert meta.fingerprint == CertFingerprint.of(der)

    def test_fingerprint_matches_source(self, sample_cert):
        assert parse_cert(sample_cert).fingerprint == CertFingerprint.of(sample_cert)


class TestDedupe:
    def test_yeti_style_counts(self):
        # 533 raw entries where 2 fingerprints appear twice -> 531 distinct
        tags = [f"c{i}" for i in range(531)] + ["c0", "c1"]
        ds, dups = dedupe(raw_store(tags))
        assert len(ds) == 531
        assert sum(extra for _, extra in dups) == 2
        assert {f for f, _ in dups} == {fp("c0"), fp("c1")}

    def test_empty_store(self):
        ds, dups = dedupe(raw_store([]))
        assert len(ds) == 0 and dups == []

    def test_triplicated_entries(self):
        # brute-force multiset oracle: 10 blobs repeated 3x -> 10 distinct, 20 extras
        tags = [f"t{i}" for i in range(10)] * 3
        ds, dups = dedupe(raw_store(tags))
        assert len(ds) == 10
        assert all(extra == 2 for _, extra in dups)
        assert sum(extra for _, extra in dups) == 20

    def test_extras_plus_distinct_equals_raw(self, rng):
        for _ in range(50):
            tags = [rng.randrange(20) for _ in range(rng.randrange(0, 60))]
            store = raw_store(tags)
            ds, dups = dedupe(store)
            assert len(ds) + sum(e for _, e in dups) == len(store.entries)

    def test_idempotent(self, rng):
        tags = [rng.randrange(15) for _ in range(40)]
        ds, _ = dedupe(raw_store(tags))
        again, dups = dedupe(
            RootStore(
                entries=tuple(ds.blobs[f] for f in sorted(ds.members)),
                retrieved_at=datetime(2020, 1, 1, tzinfo=timezone.utc),
                source="again",
            )
        )
        assert again.members == ds.members
        assert dups == []

    def test_first_occurrence_blob_kept(self):
        ds, _ = dedupe(raw_store(["a", "b", "a"]))
        assert ds.blobs[fp("a")] == blob("a")


class TestStoreFingerprint:
    def test_order_invariant(self):
        a = distinct(["x", "y", "z"])
        b = DistinctStore.from_blobs([blob("z"), blob("x"), blob("y")])
        assert store_fingerprint(a) == store_fingerprint(b)

    def test_direct_recomputation_oracle(self):
        # independent recompute: concat sorted raw digests, hash once
        ds = distinct(["p", "q", "r"])
        cat = b"".join(sorted(f.digest for f in ds.members))
        assert store_fingerprint(ds).digest == hashlib.sha256(cat).digest()

    def test_subset_differs(self):
        assert store_fingerprint(distinct(["a"])) != store_fingerprint(distinct(["a", "b"]))

    def test_shuffle_and_duplication_invariance(self):
        base = [f"s{i}" for i in range(100)]
        reference = store_fingerprint(dedupe(raw_store(base))[0])
        r = random.Random(7)
        for _ in range(1000):
            tags = list(base)
            r.shuffle(tags)
            tags += [r.choice(base) for _ in range(r.randrange(0, 10))]
            ds, _ = dedupe(raw_store(tags))
            assert store_fingerprint(ds) == reference
