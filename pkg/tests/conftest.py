"""Shared fixtures: deterministic blobs, a reusable signing root, and the
synthetic 57-log registry/store fixture used across analysis tests."""

import hashlib
import random
from datetime import datetime, timezone

import pytest

from ctro import certgen
from ctro.certs import CertFingerprint, DistinctStore, RootStore


def blob(tag) -> bytes:
    """Deterministic pseudo-DER blob for identity-level tests (never parsed)."""
    seed = str(tag).encode()
    return b"\x30\x82" + hashlib.sha256(seed).digest() + seed


def fp(tag) -> CertFingerprint:
    return CertFingerprint.of(blob(tag))


def raw_store(tags, source="test", ts=None) -> RootStore:
    return RootStore(
        entries=tuple(blob(t) for t in tags),
        retrieved_at=ts or datetime(2020, 1, 1, tzinfo=timezone.utc),
        source=source,
    )


def distinct(tags) -> DistinctStore:
    return DistinctStore.from_blobs([blob(t) for t in tags])


def fp_set(tags):
    return frozenset(fp(t) for t in tags)


@pytest.fixture(scope="session")
def signing_material():
    return certgen.SigningMaterial.generate()


@pytest.fixture(scope="session")
def sample_cert(signing_material):
    """One parseable self-signed root DER."""
    return signing_material.root_der


@pytest.fixture
def rng():
    return random.Random(0xC7B0)
