"""Certificate identity layer: fingerprints, parsing, dedup, store fingerprints.

Every other part of the observatory identifies certificates by the SHA-256
of their DER encoding (the de facto identity used by public CT tooling),
and identifies whole root sets by a digest over the sorted unique
certificate hashes.  Raw root lists keep their wire order and duplicates;
deduplicated sets are a separate type.
"""

import hashlib
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

from cryptography import x509

# A certificate blob is its raw DER encoding.
CertBlob = bytes


class MalformedDer(ValueError):
    """Input bytes are not a parseable X.509 Certificate structure."""


@dataclass(frozen=True, order=True)
class CertFingerprint:
    """SHA-256 digest of a certificate's DER bytes."""

    digest: bytes

    def __post_init__(self):
        if len(self.digest) != 32:
            raise ValueError("fingerprint digest must be 32 bytes")

    @classmethod
    def of(cls, der: CertBlob) -> "CertFingerprint":
        return cls(hashlib.sha256(der).digest())

    @classmethod
    def from_hex(cls, hex64: str) -> "CertFingerprint":
        if len(hex64) != 64:
            raise ValueError("fingerprint hex must be 64 chars")
        return cls(bytes.fromhex(hex64))

    @property
    def hex(self) -> str:
        return self.digest.hex()

    def __repr__(self):
        return f"CertFingerprint({self.hex[:12]}…)"


@dataclass(frozen=True, order=True)
class StoreFingerprint:
    """SHA-256 over the member fingerprints of a deduplicated store,
    concatenated in bytewise-ascending order."""

    digest: bytes

    @property
    def hex(self) -> str:
        return self.digest.hex()

    def __repr__(self):
        return f"StoreFingerprint({self.hex[:12]}…)"


@dataclass(frozen=True)
class CertMeta:
    """Parsed summary of one certificate, or a fingerprint-only stub when
    parsing failed (parse_ok False)."""

    fingerprint: CertFingerprint
    subject: str
    issuer: str
    not_before: Optional[datetime]
    not_after: Optional[datetime]
    self_signed: bool
    parse_ok: bool = True
    warnings: Tuple[str, ...] = ()


@dataclass(frozen=True)
class RootStore:
    """A root list exactly as served: wire order kept, duplicates kept."""

    entries: Tuple[CertBlob, ...]
    retrieved_at: datetime
    source: str


@dataclass(frozen=True)
class DistinctStore:
    """Deduplicated certificate set.

    ``blobs`` maps members to their DER where known; membership-only
    stores (e.g. a vendor list distributed as hashes) have no blobs.
    """

    members: frozenset
    blobs: Mapping[CertFingerprint, CertBlob] = field(default_factory=dict)

    def __len__(self):
        return len(self.members)

    def __contains__(self, fp: CertFingerprint) -> bool:
        return fp in self.members

    @classmethod
    def from_blobs(cls, blobs: Iterable[CertBlob]) -> "DistinctStore":
        mapping = {CertFingerprint.of(b): b for b in blobs}
        return cls(members=frozenset(mapping), blobs=mapping)

    @classmethod
    def from_fingerprints(cls, fps: Iterable[CertFingerprint]) -> "DistinctStore":
        return cls(members=frozenset(fps), blobs={})


def _dn_string(name: x509.Name) -> str:
    """RFC 4514-style rendering, attributes in encoded order.

    Unknown attribute types fall back to their dotted OID form.
    """
    parts = []
    for rdn in name.rdns:
        for attr in rdn:
            parts.append(attr.rfc4514_string())
    return ",".join(parts)


def parse_cert(blob: CertBlob) -> CertMeta:
    """Parse DER into a CertMeta summary.

    Parsing is tolerant: a structurally valid certificate whose validity
    interval is inverted (notBefore > notAfter) is accepted and flagged
    via ``warnings``.  Raises MalformedDer when the bytes are not an
    X.509 Certificate at all.
    """
    fp = CertFingerprint.of(blob)
    try:
        cert = x509.load_der_x509_certificate(blob)
        subject = _dn_string(cert.subject)
        issuer = _dn_string(cert.issuer)
        not_before = cert.not_valid_before_utc
        not_after = cert.not_valid_after_utc
        self_signed = cert.subject.public_bytes() == cert.issuer.public_bytes()
    except MalformedDer:
        raise
    except Exception as exc:
        raise MalformedDer(f"not a parseable X.509 certificate: {exc}") from exc
    warnings = ()
    if not_before > not_after:
        warnings = ("validity interval inverted: notBefore > notAfter",)
    return CertMeta(
        fingerprint=fp,
        subject=subject,
        issuer=issuer,
        not_before=not_before,
        not_after=not_after,
        self_signed=self_signed,
        warnings=warnings,
    )


def describe(blob: CertBlob) -> CertMeta:
    """parse_cert that degrades to a fingerprint-only record instead of
    raising, so unparseable wire entries are retained."""
    try:
        return parse_cert(blob)
    except MalformedDer:
        return CertMeta(
            fingerprint=CertFingerprint.of(blob),
            subject="",
            issuer="",
            not_before=None,
            not_after=None,
            self_signed=False,
            parse_ok=False,
            warnings=("unparseable DER",),
        )


def dedupe(store: RootStore) -> Tuple[DistinctStore, List[Tuple[CertFingerprint, int]]]:
    """Collapse a raw root list to its distinct set.

    Returns the DistinctStore plus every fingerprint that appeared more
    than once, with its count of extra occurrences, in first-appearance
    order.  Sum of extras == len(entries) - len(distinct).
    """
    counts: Dict[CertFingerprint, int] = {}
    blobs: Dict[CertFingerprint, CertBlob] = {}
    for blob in store.entries:
        fp = CertFingerprint.of(blob)
        if fp not in counts:
            counts[fp] = 0
            blobs[fp] = blob
        counts[fp] += 1
    duplicates = [(fp, n - 1) for fp, n in counts.items() if n > 1]
    return DistinctStore(members=frozenset(blobs), blobs=blobs), duplicates


def store_fingerprint(store: DistinctStore) -> StoreFingerprint:
    """Digest identifying the member set: SHA-256 over the raw 32-byte
    member fingerprints concatenated in bytewise-ascending order."""
    h = hashlib.sha256()
    for fp in sorted(store.members):
        h.update(fp.digest)
    return StoreFingerprint(h.digest())
