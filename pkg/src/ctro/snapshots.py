"""Snapshot history: one row per (log, retrieval time) with the raw
fingerprint sequence, plus a shared certificate table and probe results.

Storage is SQLite; the durable interchange format is the canonical
NDJSON stream produced by export().  Export output is deterministic
(sorted lines, fixed key order, canonical timestamps) so that

    export(import(export(x))) == export(x)

holds byte for byte.
"""

import base64
import json
import sqlite3
import threading
from dataclasses import dataclass, field
from datetime import datetime
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from . import rfc3339
from .certs import (
    CertBlob,
    CertFingerprint,
    DistinctStore,
    StoreFingerprint,
    store_fingerprint,
)


class OutOfOrder(ValueError):
    """Snapshot timestamp not later than the last stored one for that log."""


class UnknownLog(KeyError):
    """No snapshots recorded for that log name."""


class SchemaError(ValueError):
    """Import stream violates the interchange schema; carries line number."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class FetchMeta:
    http_status: int
    cors_allowed: bool
    tls_ok: bool


@dataclass(frozen=True)
class Snapshot:
    log_name: str
    taken_at: datetime
    raw_entries: Tuple[CertFingerprint, ...]
    store_fp: StoreFingerprint
    fetch_meta: FetchMeta

    @classmethod
    def build(cls, log_name: str, taken_at: datetime,
              raw_entries: Sequence[CertFingerprint],
              fetch_meta: FetchMeta) -> "Snapshot":
        distinct = DistinctStore.from_fingerprints(raw_entries)
        return cls(
            log_name=log_name,
            taken_at=taken_at,
            raw_entries=tuple(raw_entries),
            store_fp=store_fingerprint(distinct),
            fetch_meta=fetch_meta,
        )

    @property
    def distinct_members(self) -> frozenset:
        return frozenset(self.raw_entries)

    @property
    def distinct_count(self) -> int:
        return len(self.distinct_members)

    @property
    def raw_count(self) -> int:
        return len(self.raw_entries)


@dataclass(frozen=True)
class ChangeEvent:
    log_name: str
    from_ts: datetime
    to_ts: datetime
    added: frozenset
    removed: frozenset


@dataclass(frozen=True)
class ProbeRecord:
    log_name: str
    at: datetime
    verdict: Dict[str, object]
    evidence: Tuple[Dict[str, object], ...]


_SCHEMA = """
CREATE TABLE IF NOT EXISTS certs (
    fp  TEXT PRIMARY KEY,
    der BLOB NOT NULL
);
CREATE TABLE IF NOT EXISTS snapshots (
    log_name     TEXT NOT NULL,
    taken_at_us  INTEGER NOT NULL,
    raw          TEXT NOT NULL,
    store_fp     TEXT NOT NULL,
    http_status  INTEGER NOT NULL,
    cors_allowed INTEGER NOT NULL,
    tls_ok       INTEGER NOT NULL,
    UNIQUE (log_name, taken_at_us)
);
CREATE INDEX IF NOT EXISTS idx_snapshots_log ON snapshots (log_name, taken_at_us);
CREATE TABLE IF NOT EXISTS probes (
    log_name TEXT NOT NULL,
    at_us    INTEGER NOT NULL,
    verdict  TEXT NOT NULL,
    evidence TEXT NOT NULL,
    UNIQUE (log_name, at_us)
);
"""

_HEADER = {"format": "ctro-snapshots", "version": 1}


def _dumps(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


class SnapshotStore:
    """Append-only history of root-store snapshots.

    Safe for concurrent use from multiple threads within one process;
    all access to the shared connection is serialized by an internal
    lock (sqlite3 connections must not be used from two threads at
    once).
    """

    def __init__(self, path=":memory:"):
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._lock = threading.Lock()
        with self._lock:
            self._conn.executescript(_SCHEMA)
            self._conn.commit()

    def close(self):
        with self._lock:
            self._conn.close()

    def _fetchall(self, query: str, args=()) -> list:
        with self._lock:
            return self._conn.execute(query, args).fetchall()

    # -- writes ------------------------------------------------------

    def put_snapshot(self, snap: Snapshot) -> bool:
        """Append one snapshot.  Returns True when the distinct member
        set differs from the previous snapshot of the same log (the
        first snapshot always counts as changed)."""
        recomputed = store_fingerprint(
            DistinctStore.from_fingerprints(snap.raw_entries))
        if recomputed != snap.store_fp:
            raise ValueError("snapshot store_fp does not match raw entries")
        with self._lock:
            row = self._conn.execute(
                "SELECT taken_at_us, raw FROM snapshots WHERE log_name=? "
                "ORDER BY taken_at_us DESC LIMIT 1",
                (snap.log_name,),
            ).fetchone()
            taken_us = rfc3339.to_epoch_us(snap.taken_at)
            changed = True
            if row is not None:
                if taken_us <= row[0]:
                    raise OutOfOrder(
                        f"{snap.log_name}: {rfc3339.format(snap.taken_at)} is not "
                        f"later than the last stored snapshot")
                changed = set(json.loads(row[1])) != {
                    fp.hex for fp in snap.raw_entries}
            self._conn.execute(
                "INSERT INTO snapshots VALUES (?,?,?,?,?,?,?)",
                (
                    snap.log_name,
                    taken_us,
                    _dumps([fp.hex for fp in snap.raw_entries]),
                    snap.store_fp.hex,
                    snap.fetch_meta.http_status,
                    int(snap.fetch_meta.cors_allowed),
                    int(snap.fetch_meta.tls_ok),
                ),
            )
            self._conn.commit()
        return changed

    def put_cert(self, der: CertBlob) -> CertFingerprint:
        fp = CertFingerprint.of(der)
        with self._lock:
            self._conn.execute(
                "INSERT OR IGNORE INTO certs VALUES (?,?)", (fp.hex, der))
            self._conn.commit()
        return fp

    def put_probe(self, record: ProbeRecord):
        with self._lock:
            self._conn.execute(
                "INSERT OR REPLACE INTO probes VALUES (?,?,?,?)",
                (
                    record.log_name,
                    rfc3339.to_epoch_us(record.at),
                    _dumps(record.verdict),
                    _dumps(list(record.evidence)),
                ),
            )
            self._conn.commit()

    # -- reads -------------------------------------------------------

    def log_names(self) -> List[str]:
        rows = self._fetchall(
            "SELECT DISTINCT log_name FROM snapshots ORDER BY log_name")
        return [r[0] for r in rows]

    def _row_to_snapshot(self, row) -> Snapshot:
        return Snapshot(
            log_name=row[0],
            taken_at=rfc3339.from_epoch_us(row[1]),
            raw_entries=tuple(CertFingerprint.from_hex(h) for h in json.loads(row[2])),
            store_fp=StoreFingerprint(digest=bytes.fromhex(row[3])),
            fetch_meta=FetchMeta(http_status=row[4], cors_allowed=bool(row[5]),
                                 tls_ok=bool(row[6])),
        )

    def snapshots(self, log_name: str, since: Optional[datetime] = None,
                  until: Optional[datetime] = None) -> List[Snapshot]:
        """All snapshots of one log in ascending time order."""
        if log_name not in self.log_names():
            raise UnknownLog(log_name)
        query = "SELECT * FROM snapshots WHERE log_name=?"
        args: list = [log_name]
        if since is not None:
            query += " AND taken_at_us >= ?"
            args.append(rfc3339.to_epoch_us(since))
        if until is not None:
            query += " AND taken_at_us <= ?"
            args.append(rfc3339.to_epoch_us(until))
        query += " ORDER BY taken_at_us"
        return [self._row_to_snapshot(r) for r in self._fetchall(query, args)]

    def latest(self, log_name: str) -> Snapshot:
        rows = self._fetchall(
            "SELECT * FROM snapshots WHERE log_name=? ORDER BY taken_at_us DESC "
            "LIMIT 1", (log_name,))
        row = rows[0] if rows else None
        if row is None:
            raise UnknownLog(log_name)
        return self._row_to_snapshot(row)

    def cert(self, fp: CertFingerprint) -> Optional[CertBlob]:
        rows = self._fetchall("SELECT der FROM certs WHERE fp=?", (fp.hex,))
        return bytes(rows[0][0]) if rows else None

    def cert_count(self) -> int:
        return self._fetchall("SELECT COUNT(*) FROM certs")[0][0]

    def blobs_for(self, fps: Iterable[CertFingerprint]) -> Dict[CertFingerprint, CertBlob]:
        out = {}
        for fp in fps:
            der = self.cert(fp)
            if der is not None:
                out[fp] = der
        return out

    def distinct_store(self, snap: Snapshot) -> DistinctStore:
        """Distinct member view of a snapshot, with whatever certificate
        bytes the store has on hand."""
        members = frozenset(snap.raw_entries)
        return DistinctStore(members=members, blobs=self.blobs_for(members))

    def probes(self, log_name: Optional[str] = None) -> List[ProbeRecord]:
        query = "SELECT log_name, at_us, verdict, evidence FROM probes"
        args: tuple = ()
        if log_name is not None:
            query += " WHERE log_name=?"
            args = (log_name,)
        query += " ORDER BY log_name, at_us"
        return [
            ProbeRecord(
                log_name=r[0],
                at=rfc3339.from_epoch_us(r[1]),
                verdict=json.loads(r[2]),
                evidence=tuple(json.loads(r[3])),
            )
            for r in self._fetchall(query, args)
        ]

    def last_probe_at(self, log_name: str) -> Optional[datetime]:
        row = self._fetchall(
            "SELECT MAX(at_us) FROM probes WHERE log_name=?", (log_name,))[0]
        return rfc3339.from_epoch_us(row[0]) if row[0] is not None else None

    # -- derived views -----------------------------------------------

    def change_events(self, log_name: str, since: Optional[datetime] = None,
                      until: Optional[datetime] = None) -> List[ChangeEvent]:
        """Consecutive snapshot pairs whose distinct member sets differ."""
        snaps = self.snapshots(log_name, since, until)
        events = []
        for prev, cur in zip(snaps, snaps[1:]):
            before, after = prev.distinct_members, cur.distinct_members
            if before == after:
                continue
            events.append(
                ChangeEvent(
                    log_name=log_name,
                    from_ts=prev.taken_at,
                    to_ts=cur.taken_at,
                    added=frozenset(after - before),
                    removed=frozenset(before - after),
                )
            )
        return events

    def size_timeline(self, log_name: str) -> List[Tuple[datetime, int]]:
        """(taken_at, distinct size) for every snapshot, ascending."""
        return [(s.taken_at, s.distinct_count) for s in self.snapshots(log_name)]

    # -- interchange ---------------------------------------------------

    def export(self, since: Optional[datetime] = None,
               until: Optional[datetime] = None) -> str:
        """Canonical NDJSON stream: header, snapshots, probes, certs.

        Snapshot and probe lines honor the time range; the certificate
        section always carries every known blob so an imported store can
        resolve members to bytes.
        """
        lines = [_dumps(dict(_HEADER))]
        for log_name in self.log_names():
            for snap in self.snapshots(log_name, since, until):
                lines.append(_dumps({
                    "log": snap.log_name,
                    "taken_at": rfc3339.format(snap.taken_at),
                    "raw": [fp.hex for fp in snap.raw_entries],
                    "meta": {
                        "http_status": snap.fetch_meta.http_status,
                        "cors_allowed": snap.fetch_meta.cors_allowed,
                        "tls_ok": snap.fetch_meta.tls_ok,
                    },
                }))
        probe_lines = []
        for record in self.probes():
            at = record.at
            if since is not None and at < since:
                continue
            if until is not None and at > until:
                continue
            probe_lines.append(_dumps({
                "probe": {
                    "log": record.log_name,
                    "at": rfc3339.format(at),
                    "verdict": record.verdict,
                    "evidence": list(record.evidence),
                }
            }))
        lines.extend(probe_lines)
        rows = self._fetchall("SELECT fp, der FROM certs ORDER BY fp")
        for fp_hex, der in rows:
            lines.append(_dumps({
                "cert": fp_hex,
                "der": base64.b64encode(bytes(der)).decode("ascii"),
            }))
        return "\n".join(lines) + "\n"

    def import_stream(self, text: str):
        """Strict import of an export() stream into this store.

        Every line is validated; an unknown field name raises SchemaError
        rather than being dropped.
        """
        lines = text.splitlines()
        if not lines:
            raise SchemaError(1, "empty stream")
        header = _parse_json_line(lines[0], 1)
        if header != _HEADER:
            raise SchemaError(1, f"bad header {header!r}")
        for lineno, line in enumerate(lines[1:], start=2):
            if not line.strip():
                continue
            obj = _parse_json_line(line, lineno)
            if not isinstance(obj, dict):
                raise SchemaError(lineno, "expected object")
            if set(obj) == {"log", "taken_at", "raw", "meta"}:
                self._import_snapshot(obj, lineno)
            elif set(obj) == {"probe"}:
                self._import_probe(obj["probe"], lineno)
            elif set(obj) == {"cert", "der"}:
                self._import_cert(obj, lineno)
            else:
                raise SchemaError(
                    lineno, f"unrecognized line with fields {sorted(obj)}")

    def _import_snapshot(self, obj, lineno):
        if not (isinstance(obj["log"], str) and obj["log"]):
            raise SchemaError(lineno, "log: expected non-empty string")
        try:
            taken_at = rfc3339.parse(obj["taken_at"])
        except (ValueError, TypeError) as exc:
            raise SchemaError(lineno, f"taken_at: {exc}") from None
        if not isinstance(obj["raw"], list):
            raise SchemaError(lineno, "raw: expected array")
        try:
            raw = [CertFingerprint.from_hex(h) for h in obj["raw"]]
        except (ValueError, TypeError) as exc:
            raise SchemaError(lineno, f"raw: {exc}") from None
        meta = obj["meta"]
        if not isinstance(meta, dict) or set(meta) != {
                "http_status", "cors_allowed", "tls_ok"}:
            raise SchemaError(lineno, "meta: expected http_status,cors_allowed,tls_ok")
        if not isinstance(meta["http_status"], int) or isinstance(
                meta["http_status"], bool):
            raise SchemaError(lineno, "meta.http_status: expected integer")
        for key in ("cors_allowed", "tls_ok"):
            if not isinstance(meta[key], bool):
                raise SchemaError(lineno, f"meta.{key}: expected boolean")
        snap = Snapshot.build(
            log_name=obj["log"],
            taken_at=taken_at,
            raw_entries=raw,
            fetch_meta=FetchMeta(http_status=meta["http_status"],
                                 cors_allowed=meta["cors_allowed"],
                                 tls_ok=meta["tls_ok"]),
        )
        try:
            self.put_snapshot(snap)
        except OutOfOrder as exc:
            raise SchemaError(lineno, str(exc)) from None

    def _import_probe(self, obj, lineno):
        if not isinstance(obj, dict) or set(obj) != {"log", "at", "verdict",
                                                     "evidence"}:
            raise SchemaError(lineno, "probe: expected log,at,verdict,evidence")
        if not (isinstance(obj["log"], str) and obj["log"]):
            raise SchemaError(lineno, "probe.log: expected non-empty string")
        try:
            at = rfc3339.parse(obj["at"])
        except (ValueError, TypeError) as exc:
            raise SchemaError(lineno, f"probe.at: {exc}") from None
        if not isinstance(obj["verdict"], dict):
            raise SchemaError(lineno, "probe.verdict: expected object")
        if not isinstance(obj["evidence"], list):
            raise SchemaError(lineno, "probe.evidence: expected array")
        self.put_probe(ProbeRecord(log_name=obj["log"], at=at,
                                   verdict=obj["verdict"],
                                   evidence=tuple(obj["evidence"])))

    def _import_cert(self, obj, lineno):
        try:
            der = base64.b64decode(obj["der"], validate=True)
        except Exception:
            raise SchemaError(lineno, "der: bad base64") from None
        fp = CertFingerprint.of(der)
        try:
            claimed = CertFingerprint.from_hex(obj["cert"])
        except (ValueError, TypeError) as exc:
            raise SchemaError(lineno, f"cert: {exc}") from None
        if claimed != fp:
            raise SchemaError(lineno, "cert: fingerprint does not match der")
        self.put_cert(der)


def _parse_json_line(line: str, lineno: int):
    try:
        return json.loads(line)
    except json.JSONDecodeError as exc:
        raise SchemaError(lineno, f"not valid JSON: {exc}") from None
