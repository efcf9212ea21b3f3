"""HTTP API over one observatory state (history store + registry).

Every endpoint is a thin serializer over the analysis module -- the API
adds no arithmetic of its own.  Responses embed the snapshot timestamp
they were computed from, and identical state yields byte-identical
bodies.  Cross-origin headers are always permissive, on every response
including errors.
"""

import csv
import io
import json
import re
import threading
from dataclasses import dataclass, field
from datetime import datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Tuple
from urllib.parse import parse_qs, unquote, urlsplit

from . import client, collect, rfc3339
from .analysis import (
    coverage_matrix,
    frequency,
    mismanagement_flags,
    overlap_matrix,
)
from .certs import CertFingerprint, DistinctStore, describe
from .registry import ProgramState, Registry, parse_states, trusted_logs
from .setexpr import ParseError, UnboundIdentifier, eval_setexpr, identifiers, parse_setexpr
from .snapshots import SnapshotStore, UnknownLog

MAX_EXPR_BYTES = 4096
MAX_EXPR_IDENTIFIERS = 64

DEFAULT_ADDR = "127.0.0.1"
DEFAULT_PORT = 8572


class ApiError(Exception):
    def __init__(self, http_status: int, code: str, message: str, **extra):
        super().__init__(message)
        self.http_status = http_status
        self.code = code
        self.message = message
        self.extra = extra

    def body(self) -> dict:
        doc = {"code": self.code, "message": self.message}
        doc.update(self.extra)
        return doc


class ApiState:
    """Shared server state; collection runs single-flight."""

    def __init__(self, history: SnapshotStore, registry: Registry,
                 ui_dir=None, fetch_timeout=client.DEFAULT_TIMEOUT):
        self.history = history
        self.registry = registry
        self.ui_dir = Path(ui_dir) if ui_dir else None
        self.fetch_timeout = fetch_timeout
        self._collection_lock = threading.Lock()
        self._collection_thread: Optional[threading.Thread] = None

    # -- derived views ---------------------------------------------------

    def latest_stores(self) -> Dict[str, DistinctStore]:
        return {
            name: self.history.distinct_store(self.history.latest(name))
            for name in self.history.log_names()
        }

    def as_of(self) -> Optional[str]:
        stamps = [self.history.latest(name).taken_at
                  for name in self.history.log_names()]
        return rfc3339.format(max(stamps)) if stamps else None

    def set_env(self) -> Dict[str, DistinctStore]:
        env = {v.vendor: v.store for v in self.registry.vendors}
        env.update(self.latest_stores())
        return env

    # -- collection -------------------------------------------------------

    def start_collection(self) -> bool:
        """Kick off a sweep unless one is already running."""
        if not self._collection_lock.acquire(blocking=False):
            return False

        def run():
            try:
                collect.collect_into(self.history, self.registry,
                                     timeout=self.fetch_timeout)
            finally:
                self._collection_lock.release()

        self._collection_thread = threading.Thread(target=run, daemon=True)
        self._collection_thread.start()
        return True

    def wait_collection(self, timeout: float = 30.0):
        thread = self._collection_thread
        if thread is not None:
            thread.join(timeout)


def _fp_hexes(fps) -> List[str]:
    return sorted(fp.hex for fp in fps)


def _log_or_404(state: ApiState, name: str):
    try:
        return state.history.latest(name)
    except UnknownLog:
        raise ApiError(404, "unknown_log", f"no snapshots for log {name!r}",
                       log=name) from None


# -- endpoint handlers ----------------------------------------------------
# each returns a JSON-serializable object (or a (content_type, bytes) pair)


def _endpoint_logs(state: ApiState, match, query, body):
    known = set(state.history.log_names())
    names = sorted(known | {rec.name for rec in state.registry.logs})
    flags = {f.log_name: f for f in mismanagement_flags(
        state.history, state.registry)}
    logs = []
    for name in names:
        record = state.registry.log(name)
        entry: dict = {"name": name}
        if record is not None:
            window = None
            if record.temporal_window:
                window = {"start": rfc3339.format(record.temporal_window[0]),
                          "end": rfc3339.format(record.temporal_window[1])}
            entry.update({
                "operator": record.operator,
                "url": record.endpoint.base_url,
                "google_state": record.google_state.value,
                "apple_state": record.apple_state.value,
                "temporal_window": window,
            })
        if name in known:
            snap = state.history.latest(name)
            entry["latest"] = {
                "taken_at": rfc3339.format(snap.taken_at),
                "total": snap.raw_count,
                "distinct": snap.distinct_count,
                "store_fp": snap.store_fp.hex,
                "http_status": snap.fetch_meta.http_status,
                "cors_allowed": snap.fetch_meta.cors_allowed,
                "tls_ok": snap.fetch_meta.tls_ok,
            }
            flag = flags[name]
            entry["flags"] = {
                "has_duplicates": flag.has_duplicates,
                "duplicate_count": flag.duplicate_count,
                "flapping": flag.flapping,
                "missing_mmd_root": flag.missing_mmd_root,
                "sentinel_hits": flag.sentinel_hits,
            }
        else:
            entry["latest"] = None
            entry["flags"] = None
        logs.append(entry)
    return {"as_of": state.as_of(), "logs": logs}


def _endpoint_store_latest(state: ApiState, match, query, body):
    name = unquote(match.group(1))
    snap = _log_or_404(state, name)
    return {
        "log": name,
        "as_of": rfc3339.format(snap.taken_at),
        "store_fp": snap.store_fp.hex,
        "total": snap.raw_count,
        "distinct": snap.distinct_count,
        "members": _fp_hexes(snap.distinct_members),
        "meta": {
            "http_status": snap.fetch_meta.http_status,
            "cors_allowed": snap.fetch_meta.cors_allowed,
            "tls_ok": snap.fetch_meta.tls_ok,
        },
    }


def _endpoint_coverage(state: ApiState, match, query, body):
    stores = state.latest_stores()
    vendors = [v for v in state.registry.vendors if len(v.store)]
    cells = coverage_matrix(stores, vendors)
    return {
        "as_of": state.as_of(),
        "vendors": sorted(v.vendor for v in vendors),
        "cells": [
            {"log": c.log_name, "vendor": c.vendor, "covered": c.covered,
             "vendor_size": c.vendor_size, "pct": c.pct}
            for c in cells
        ],
    }


def _endpoint_overlap(state: ApiState, match, query, body):
    stores = state.latest_stores()
    matrix = overlap_matrix(stores)
    return {
        "as_of": state.as_of(),
        "names": list(stores),
        "sizes": [len(stores[name]) for name in stores],
        "matrix": [[cell.value for cell in row] for row in matrix],
        "intersections": [[cell.intersection for cell in row] for row in matrix],
    }


def _endpoint_frequency(state: ApiState, match, query, body):
    program = query.get("program", [""])[0]
    states_text = query.get("states", ["usable,qualified"])[0]
    stores = state.latest_stores()
    universe = "all"
    if program:
        try:
            states = parse_states(states_text)
            records = trusted_logs(state.registry, program, states)
        except ValueError as exc:
            raise ApiError(400, "bad_request", str(exc)) from None
        wanted = {rec.name for rec in records}
        stores = {name: store for name, store in stores.items()
                  if name in wanted}
        universe = f"{program}:{','.join(s.value for s in states)}"
    if not stores:
        return {"as_of": state.as_of(), "universe": universe,
                "store_count": 0, "buckets": {}, "members": {}}
    dist = frequency(stores, universe=universe)
    return {
        "as_of": state.as_of(),
        "universe": dist.universe,
        "store_count": dist.store_count,
        "buckets": {str(n): count for n, count in dist.buckets.items()},
        "members": {str(n): [fp.hex for fp in fps]
                    for n, fps in dist.members.items()},
    }


def _endpoint_timeline(state: ApiState, match, query, body):
    name = unquote(match.group(1))
    _log_or_404(state, name)
    points = state.history.size_timeline(name)
    return {
        "log": name,
        "as_of": rfc3339.format(points[-1][0]),
        "points": [{"t": rfc3339.format(ts), "distinct": n}
                   for ts, n in points],
    }


def _endpoint_events(state: ApiState, match, query, body):
    name = unquote(match.group(1))
    snap = _log_or_404(state, name)
    events = state.history.change_events(name)
    return {
        "log": name,
        "as_of": rfc3339.format(snap.taken_at),
        "events": [
            {"from": rfc3339.format(e.from_ts), "to": rfc3339.format(e.to_ts),
             "added": _fp_hexes(e.added), "removed": _fp_hexes(e.removed)}
            for e in events
        ],
    }


def _endpoint_set(state: ApiState, match, query, body):
    if not isinstance(body, dict) or not isinstance(body.get("expr"), str):
        raise ApiError(400, "bad_request", "body must be {\"expr\": string}")
    text = body["expr"]
    if len(text.encode("utf-8")) > MAX_EXPR_BYTES:
        raise ApiError(400, "expr_too_large",
                       f"expression exceeds {MAX_EXPR_BYTES} bytes")
    try:
        expr = parse_setexpr(text)
    except ParseError as exc:
        raise ApiError(400, "parse_error", str(exc), offset=exc.offset) from None
    if len(identifiers(expr)) > MAX_EXPR_IDENTIFIERS:
        raise ApiError(400, "expr_too_large",
                       f"more than {MAX_EXPR_IDENTIFIERS} identifiers")
    try:
        result = eval_setexpr(expr, state.set_env())
    except UnboundIdentifier as exc:
        raise ApiError(400, "unbound_identifier", str(exc),
                       name=exc.name) from None
    return {
        "expr": text,
        "as_of": state.as_of(),
        "size": len(result),
        "fingerprints": _fp_hexes(result.members),
    }


def _cert_row(state: ApiState, fp: CertFingerprint,
              inclusion: Mapping[CertFingerprint, int]) -> dict:
    der = state.history.cert(fp)
    row = {
        "fingerprint": fp.hex,
        "subject": None,
        "issuer": None,
        "not_before": None,
        "not_after": None,
        "self_signed": None,
        "parse_ok": False,
        "included_in": inclusion.get(fp, 0),
    }
    if der is not None:
        meta = describe(der)
        row.update({
            "subject": meta.subject,
            "issuer": meta.issuer,
            "not_before": rfc3339.format(meta.not_before)
            if meta.not_before else None,
            "not_after": rfc3339.format(meta.not_after)
            if meta.not_after else None,
            "self_signed": meta.self_signed,
            "parse_ok": meta.parse_ok,
        })
    return row


def _endpoint_certs(state: ApiState, match, query, body):
    stores = state.latest_stores()
    inclusion: Dict[CertFingerprint, int] = {}
    for store in stores.values():
        for fp in store.members:
            inclusion[fp] = inclusion.get(fp, 0) + 1

    include = query.get("include", [""])[0]
    if include:
        try:
            fps = [CertFingerprint.from_hex(h.strip())
                   for h in include.split(",") if h.strip()]
        except ValueError as exc:
            raise ApiError(400, "bad_request",
                           f"bad include fingerprint: {exc}") from None
    else:
        fps = list(inclusion)

    rows = [_cert_row(state, fp, inclusion) for fp in sorted(set(fps))]

    subject = query.get("filter_subject", [""])[0]
    if subject:
        needle = subject.lower()
        rows = [r for r in rows
                if r["subject"] and needle in r["subject"].lower()]
    expired = query.get("expired", [""])[0]
    if expired:
        if expired not in ("true", "false"):
            raise ApiError(400, "bad_request", "expired must be true or false")
        now = rfc3339.utcnow()
        def is_expired(row):
            return (row["not_after"] is not None
                    and rfc3339.parse(row["not_after"]) < now)
        rows = [r for r in rows if is_expired(r) == (expired == "true")]

    return {"as_of": state.as_of(), "count": len(rows), "certs": rows}


def _certs_to_csv(doc: dict) -> bytes:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    columns = ["fingerprint", "subject", "issuer", "not_before", "not_after",
               "self_signed", "included_in", "parse_ok"]
    writer.writerow(columns)
    for row in doc["certs"]:
        writer.writerow(["" if row[c] is None else row[c] for c in columns])
    return out.getvalue().encode("utf-8")


def _endpoint_fetch(state: ApiState, match, query, body):
    if not state.start_collection():
        raise ApiError(409, "collection_running",
                       "a collection sweep is already running")
    return {"status": "started"}


_ROUTES = [
    ("GET", re.compile(r"^/api/logs$"), _endpoint_logs),
    ("GET", re.compile(r"^/api/stores/([^/]+)/latest$"), _endpoint_store_latest),
    ("GET", re.compile(r"^/api/coverage$"), _endpoint_coverage),
    ("GET", re.compile(r"^/api/overlap$"), _endpoint_overlap),
    ("GET", re.compile(r"^/api/frequency$"), _endpoint_frequency),
    ("GET", re.compile(r"^/api/timeline/([^/]+)$"), _endpoint_timeline),
    ("GET", re.compile(r"^/api/events/([^/]+)$"), _endpoint_events),
    ("POST", re.compile(r"^/api/set$"), _endpoint_set),
    ("GET", re.compile(r"^/api/certs$"), _endpoint_certs),
    ("POST", re.compile(r"^/api/fetch$"), _endpoint_fetch),
]

_CONTENT_TYPES = {
    ".html": "text/html; charset=utf-8",
    ".js": "text/javascript; charset=utf-8",
    ".css": "text/css; charset=utf-8",
    ".json": "application/json",
    ".map": "application/json",
    ".svg": "image/svg+xml",
    ".png": "image/png",
    ".ico": "image/x-icon",
    ".txt": "text/plain; charset=utf-8",
}

_BUILTIN_INDEX = """<!doctype html>
<title>root-store observatory</title>
<h1>root-store observatory API</h1>
<p>No explorer UI is installed. The JSON API is live:</p>
<ul>
<li>GET /api/logs</li>
<li>GET /api/stores/{log}/latest</li>
<li>GET /api/coverage &middot; /api/overlap &middot; /api/frequency</li>
<li>GET /api/timeline/{log} &middot; /api/events/{log}</li>
<li>POST /api/set {"expr": "A &amp; B"}</li>
<li>GET /api/certs?include=&amp;filter_subject=&amp;expired=</li>
<li>POST /api/fetch</li>
</ul>
"""


class _ApiHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    @property
    def state(self) -> ApiState:
        return self.server.state

    def log_message(self, format, *args):
        pass

    def _send(self, status: int, content_type: str, payload: bytes):
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(payload)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.send_header("Access-Control-Allow-Headers", "Content-Type, Accept")
        self.end_headers()
        self.wfile.write(payload)

    def _send_json(self, status: int, obj):
        body = json.dumps(obj, separators=(",", ":"),
                          ensure_ascii=False).encode("utf-8")
        self._send(status, "application/json", body)

    def do_OPTIONS(self):
        self._send(204, "text/plain", b"")

    def do_GET(self):
        self._dispatch("GET")

    def do_POST(self):
        self._dispatch("POST")

    def _read_body(self):
        length = int(self.headers.get("Content-Length", "0"))
        if length == 0:
            return None
        raw = self.rfile.read(min(length, 1 << 20))
        try:
            return json.loads(raw)
        except json.JSONDecodeError:
            return raw

    def _dispatch(self, method: str):
        url = urlsplit(self.path)
        path = url.path
        query = parse_qs(url.query)
        try:
            matched_path = False
            for route_method, pattern, handler in _ROUTES:
                match = pattern.match(path)
                if not match:
                    continue
                matched_path = True
                if route_method != method:
                    continue
                body = self._read_body() if method == "POST" else None
                doc = handler(self.state, match, query, body)
                if (handler is _endpoint_certs
                        and "text/csv" in self.headers.get("Accept", "")):
                    self._send(200, "text/csv; charset=utf-8",
                               _certs_to_csv(doc))
                else:
                    self._send_json(200, doc)
                return
            if matched_path:
                raise ApiError(405, "method_not_allowed",
                               f"{method} not allowed here")
            if path.startswith("/api/"):
                raise ApiError(404, "not_found", f"no such endpoint: {path}")
            if method != "GET":
                raise ApiError(405, "method_not_allowed",
                               f"{method} not allowed here")
            self._serve_static(path)
        except ApiError as exc:
            self._send_json(exc.http_status, exc.body())

    def _serve_static(self, path: str):
        ui_dir = self.state.ui_dir
        if path in ("", "/"):
            path = "/index.html"
        if ui_dir is not None:
            candidate = (ui_dir / unquote(path).lstrip("/")).resolve()
            if (candidate.is_file()
                    and str(candidate).startswith(str(ui_dir.resolve()))):
                content_type = _CONTENT_TYPES.get(
                    candidate.suffix, "application/octet-stream")
                self._send(200, content_type, candidate.read_bytes())
                return
        if path == "/index.html":
            self._send(200, "text/html; charset=utf-8",
                       _BUILTIN_INDEX.encode("utf-8"))
            return
        raise ApiError(404, "not_found", f"no such file: {path}")


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True


class ApiServer:
    """Lifecycle wrapper; binds an ephemeral port when port=0."""

    def __init__(self, state: ApiState, addr: str = DEFAULT_ADDR,
                 port: int = 0):
        self.state = state
        self._server = _Server((addr, port), _ApiHandler)
        self._server.state = state
        self._thread: Optional[threading.Thread] = None
        self.addr = self._server.server_address[0]
        self.port = self._server.server_address[1]

    @property
    def url(self) -> str:
        return f"http://{self.addr}:{self.port}/"

    def start(self) -> str:
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()
        return self.url

    def serve_forever(self):
        self._server.serve_forever()

    def stop(self):
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()
