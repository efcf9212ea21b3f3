"""Known logs, their program states, and vendor trust stores.

The observatory keeps its own registry document rather than parsing the
vendor-hosted log list formats, which drift over time.  Vendor stores
load from PEM bundles or from hash lists (one SHA-256 per line); the
latter yield membership-only stores without certificate bytes.
"""

import base64
import enum
import json
import re
from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Set, Tuple

from . import rfc3339
from .certs import CertFingerprint, DistinctStore
from .client import LogEndpoint


class SchemaError(ValueError):
    """Registry document violates the schema; carries the offending path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class FormatError(ValueError):
    """Vendor store file is not parseable in the declared format."""


class ProgramState(enum.Enum):
    USABLE = "usable"
    QUALIFIED = "qualified"
    READONLY = "readonly"
    RETIRED = "retired"
    PENDING = "pending"
    REJECTED = "rejected"
    NO_STATE = "no_state"
    NOT_LISTED = "not_listed"

    @classmethod
    def parse(cls, text: str) -> "ProgramState":
        try:
            return cls(text)
        except ValueError:
            raise ValueError(f"unknown program state {text!r}") from None


@dataclass(frozen=True)
class LogRecord:
    name: str
    operator: str
    endpoint: LogEndpoint
    google_state: ProgramState
    apple_state: ProgramState
    temporal_window: Optional[Tuple[datetime, datetime]] = None


@dataclass(frozen=True)
class VendorStore:
    vendor: str
    as_of: date
    store: DistinctStore
    source_path: str = ""
    source_format: str = ""


@dataclass(frozen=True)
class Registry:
    logs: Tuple[LogRecord, ...]
    vendors: Tuple[VendorStore, ...] = ()
    sentinel_roots: Dict[str, CertFingerprint] = field(default_factory=dict)

    def log(self, name: str) -> Optional[LogRecord]:
        for rec in self.logs:
            if rec.name == name:
                return rec
        return None

    def vendor(self, name: str) -> Optional[VendorStore]:
        for v in self.vendors:
            if v.vendor == name:
                return v
        return None


_HEX64 = re.compile(r"^[0-9a-f]{64}$")
_PEM_BLOCK = re.compile(
    r"-----BEGIN CERTIFICATE-----(.*?)-----END CERTIFICATE-----", re.S
)

_LOG_FIELDS = {"name", "operator", "url", "google_state", "apple_state",
               "temporal_window", "tls_verify"}
_VENDOR_FIELDS = {"vendor", "as_of", "path", "format"}


def _require(cond, path, message):
    if not cond:
        raise SchemaError(path, message)


def _parse_state(value, path) -> ProgramState:
    _require(isinstance(value, str), path, "expected string")
    try:
        return ProgramState.parse(value)
    except ValueError as exc:
        raise SchemaError(path, str(exc)) from None


def _parse_window(value, path):
    if value is None:
        return None
    _require(isinstance(value, dict), path, "expected object or null")
    _require(set(value) == {"start", "end"}, path, "expected keys start,end")
    try:
        start, end = rfc3339.parse(value["start"]), rfc3339.parse(value["end"])
    except (ValueError, TypeError) as exc:
        raise SchemaError(path, f"bad timestamp: {exc}") from None
    _require(start < end, path, "window start must precede end")
    return (start, end)


def load_registry(document, base_dir=None) -> Registry:
    """Validate and load a registry document (parsed JSON object).

    Vendor store files referenced by the document are loaded relative to
    ``base_dir``.  Raises SchemaError naming the offending field.
    """
    _require(isinstance(document, dict), "$", "expected object")
    unknown = set(document) - {"version", "logs", "vendors", "sentinel_roots"}
    _require(not unknown, "$", f"unknown fields: {sorted(unknown)}")
    _require(isinstance(document.get("version"), str), "version", "expected string")

    logs: List[LogRecord] = []
    seen: Set[str] = set()
    raw_logs = document.get("logs", [])
    _require(isinstance(raw_logs, list), "logs", "expected array")
    for i, entry in enumerate(raw_logs):
        path = f"logs[{i}]"
        _require(isinstance(entry, dict), path, "expected object")
        unknown = set(entry) - _LOG_FIELDS
        _require(not unknown, path, f"unknown fields: {sorted(unknown)}")
        for key in ("name", "operator", "url"):
            _require(isinstance(entry.get(key), str) and entry[key], f"{path}.{key}",
                     "expected non-empty string")
        _require(entry["name"] not in seen, f"{path}.name",
                 f"duplicate log name {entry['name']!r}")
        seen.add(entry["name"])
        tls_verify = entry.get("tls_verify", True)
        _require(isinstance(tls_verify, bool), f"{path}.tls_verify", "expected boolean")
        logs.append(
            LogRecord(
                name=entry["name"],
                operator=entry["operator"],
                endpoint=LogEndpoint(base_url=entry["url"], tls_verify=tls_verify),
                google_state=_parse_state(entry.get("google_state"), f"{path}.google_state"),
                apple_state=_parse_state(entry.get("apple_state"), f"{path}.apple_state"),
                temporal_window=_parse_window(entry.get("temporal_window"),
                                              f"{path}.temporal_window"),
            )
        )

    vendors: List[VendorStore] = []
    raw_vendors = document.get("vendors", [])
    _require(isinstance(raw_vendors, list), "vendors", "expected array")
    for i, entry in enumerate(raw_vendors):
        path = f"vendors[{i}]"
        _require(isinstance(entry, dict), path, "expected object")
        unknown = set(entry) - _VENDOR_FIELDS
        _require(not unknown, path, f"unknown fields: {sorted(unknown)}")
        for key in _VENDOR_FIELDS:
            _require(isinstance(entry.get(key), str) and entry[key], f"{path}.{key}",
                     "expected non-empty string")
        _require(entry["format"] in ("pem", "fingerprint_list"), f"{path}.format",
                 "expected 'pem' or 'fingerprint_list'")
        try:
            as_of = date.fromisoformat(entry["as_of"])
        except ValueError as exc:
            raise SchemaError(f"{path}.as_of", str(exc)) from None
        file_path = Path(base_dir or ".") / entry["path"]
        vendors.append(
            load_vendor_store(file_path, entry["format"], entry["vendor"], as_of,
                              source_path=entry["path"])
        )

    sentinels: Dict[str, CertFingerprint] = {}
    raw_sentinels = document.get("sentinel_roots", {})
    _require(isinstance(raw_sentinels, dict), "sentinel_roots", "expected object")
    for name, hex64 in raw_sentinels.items():
        path = f"sentinel_roots.{name}"
        _require(isinstance(hex64, str) and _HEX64.match(hex64 or ""), path,
                 "expected 64-char lowercase hex")
        sentinels[name] = CertFingerprint.from_hex(hex64)

    return Registry(logs=tuple(logs), vendors=tuple(vendors), sentinel_roots=sentinels)


def load_registry_file(path) -> Registry:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"not valid JSON: {exc}") from None
    return load_registry(document, base_dir=path.parent)


def emit_registry(reg: Registry) -> dict:
    """Canonical document form; load_registry(emit_registry(r)) == r
    up to vendor store file contents."""
    doc = {"version": "1", "logs": [], "vendors": [], "sentinel_roots": {}}
    for rec in reg.logs:
        window = None
        if rec.temporal_window:
            window = {
                "start": rfc3339.format(rec.temporal_window[0]),
                "end": rfc3339.format(rec.temporal_window[1]),
            }
        doc["logs"].append(
            {
                "name": rec.name,
                "operator": rec.operator,
                "url": rec.endpoint.base_url,
                "google_state": rec.google_state.value,
                "apple_state": rec.apple_state.value,
                "temporal_window": window,
                "tls_verify": rec.endpoint.tls_verify,
            }
        )
    for v in reg.vendors:
        doc["vendors"].append(
            {
                "vendor": v.vendor,
                "as_of": v.as_of.isoformat(),
                "path": v.source_path,
                "format": v.source_format,
            }
        )
    for name in sorted(reg.sentinel_roots):
        doc["sentinel_roots"][name] = reg.sentinel_roots[name].hex
    return doc


def load_vendor_store(path, format: str, vendor: str, as_of: date,
                      source_path: str = "") -> VendorStore:
    """Load a vendor trust bundle.

    ``pem`` bundles are split into certificates and deduplicated;
    ``fingerprint_list`` files hold one hex SHA-256 per line and produce
    a membership-only store.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    if format == "pem":
        blocks = _PEM_BLOCK.findall(text)
        if not blocks:
            raise FormatError(f"{path}: no PEM certificate blocks found")
        blobs = []
        for i, body in enumerate(blocks):
            try:
                blobs.append(base64.b64decode("".join(body.split()), validate=True))
            except Exception:
                raise FormatError(f"{path}: bad base64 in PEM block {i}") from None
        store = DistinctStore.from_blobs(blobs)
    elif format == "fingerprint_list":
        fps = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip().lower()
            if not line or line.startswith("#"):
                continue
            if not _HEX64.match(line):
                raise FormatError(f"{path}:{lineno}: expected 64 hex chars")
            fps.append(CertFingerprint.from_hex(line))
        store = DistinctStore.from_fingerprints(fps)
    else:
        raise FormatError(f"unknown vendor store format {format!r}")
    return VendorStore(vendor=vendor, as_of=as_of, store=store,
                       source_path=source_path or str(path), source_format=format)


def trusted_logs(reg: Registry, program: str,
                 states: Sequence[ProgramState] = None) -> List[LogRecord]:
    """Logs whose state in the named program (google|apple) is in ``states``,
    in stable name order."""
    if program not in ("google", "apple"):
        raise ValueError(f"unknown program {program!r}")
    wanted = set(states if states is not None else DEFAULT_TRUSTED_STATES)
    picked = [
        rec
        for rec in reg.logs
        if (rec.google_state if program == "google" else rec.apple_state) in wanted
    ]
    return sorted(picked, key=lambda r: r.name)


DEFAULT_TRUSTED_STATES = (ProgramState.USABLE, ProgramState.QUALIFIED)


def parse_states(text: str) -> Tuple[ProgramState, ...]:
    """Comma-separated state list, e.g. 'usable,qualified'."""
    parts = [p.strip() for p in text.split(",") if p.strip()]
    return tuple(ProgramState.parse(p) for p in parts)
