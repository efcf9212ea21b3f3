"""Self-issued certificate material for probes, mocks, and tests.

Live probing needs chains rooted in a CA the target log accepts; against
the mock log we inject our own root and issue leaves with chosen validity
windows.  EC P-256 keys keep generation fast enough for test suites.
"""

import base64
import json
from dataclasses import dataclass
from datetime import datetime, timedelta, timezone
from pathlib import Path
from typing import Optional, Tuple

from cryptography import x509
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.x509.oid import NameOID

from .certs import CertBlob, CertFingerprint


def _name(cn: str, org: str = "ctro test PKI") -> x509.Name:
    return x509.Name(
        [
            x509.NameAttribute(NameOID.ORGANIZATION_NAME, org),
            x509.NameAttribute(NameOID.COMMON_NAME, cn),
        ]
    )


def make_root(
    cn: str = "ctro test root",
    not_before: Optional[datetime] = None,
    not_after: Optional[datetime] = None,
) -> Tuple[CertBlob, ec.EllipticCurvePrivateKey]:
    """Self-signed CA certificate; validity defaults to a wide window."""
    key = ec.generate_private_key(ec.SECP256R1())
    nb = not_before or datetime(2015, 1, 1, tzinfo=timezone.utc)
    na = not_after or datetime(2055, 1, 1, tzinfo=timezone.utc)
    name = _name(cn)
    cert = (
        x509.CertificateBuilder()
        .subject_name(name)
        .issuer_name(name)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(nb)
        .not_valid_after(na)
        .add_extension(x509.BasicConstraints(ca=True, path_length=None), critical=True)
        .sign(key, hashes.SHA256())
    )
    return cert.public_bytes(serialization.Encoding.DER), key


def issue_leaf(
    root_der: CertBlob,
    root_key: ec.EllipticCurvePrivateKey,
    cn: str,
    not_before: datetime,
    not_after: datetime,
) -> CertBlob:
    """Leaf certificate signed by the given root."""
    issuer = x509.load_der_x509_certificate(root_der).subject
    key = ec.generate_private_key(ec.SECP256R1())
    cert = (
        x509.CertificateBuilder()
        .subject_name(_name(cn))
        .issuer_name(issuer)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(not_before)
        .not_valid_after(not_after)
        .sign(root_key, hashes.SHA256())
    )
    return cert.public_bytes(serialization.Encoding.DER)


def make_inverted_validity_cert() -> CertBlob:
    """Certificate whose notAfter precedes its notBefore.

    The builder refuses to produce one, so a normal certificate is issued
    and the encoded notAfter UTCTime is byte-patched to an earlier date.
    The signature no longer matches, which is irrelevant here: nothing in
    the observatory verifies signatures.
    """
    key = ec.generate_private_key(ec.SECP256R1())
    name = _name("inverted validity")
    nb = datetime(2020, 1, 1, tzinfo=timezone.utc)
    # distinctive time avoids accidental byte collisions elsewhere in the DER
    na = datetime(2021, 7, 3, 4, 5, 6, tzinfo=timezone.utc)
    cert = (
        x509.CertificateBuilder()
        .subject_name(name)
        .issuer_name(name)
        .public_key(key.public_key())
        .serial_number(x509.random_serial_number())
        .not_valid_before(nb)
        .not_valid_after(na)
        .sign(key, hashes.SHA256())
    )
    der = cert.public_bytes(serialization.Encoding.DER)
    needle, patch = b"210703040506Z", b"190703040506Z"
    assert der.count(needle) == 1
    return der.replace(needle, patch)


@dataclass
class SigningMaterial:
    """A root we control plus its private key, used to build probe chains."""

    root_der: CertBlob
    root_key: ec.EllipticCurvePrivateKey

    @property
    def root_fingerprint(self) -> CertFingerprint:
        return CertFingerprint.of(self.root_der)

    def save(self, path) -> None:
        key_pem = self.root_key.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )
        doc = {
            "root_cert": base64.b64encode(self.root_der).decode("ascii"),
            "root_key_pem": key_pem.decode("ascii"),
        }
        Path(path).write_text(json.dumps(doc, indent=2))

    @classmethod
    def load(cls, path) -> "SigningMaterial":
        doc = json.loads(Path(path).read_text())
        key = serialization.load_pem_private_key(
            doc["root_key_pem"].encode("ascii"), password=None
        )
        return cls(root_der=base64.b64decode(doc["root_cert"]), root_key=key)

    @classmethod
    def generate(cls, cn: str = "ctro probe root") -> "SigningMaterial":
        der, key = make_root(cn)
        return cls(root_der=der, root_key=key)


def leaf_chain(
    material: SigningMaterial,
    cn: str,
    not_after: datetime,
    not_before: Optional[datetime] = None,
) -> Tuple[CertBlob, CertBlob]:
    """Two-element chain (leaf, root) with the requested expiry."""
    nb = not_before or (not_after - timedelta(days=365 * 3))
    leaf = issue_leaf(material.root_der, material.root_key, cn, nb, not_after)
    return leaf, material.root_der
