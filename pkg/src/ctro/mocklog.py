"""In-process log server reproducing the behavior classes the observatory
must cope with: duplicated roots, alternating (flapping) root lists,
temporal-shard windows, expired-chain rejection, rate limiting, missing
CORS headers, and plain unreachability.

The handlers are pure functions of (config, state, request); the flap
decision for request index i derives from a seeded hash so a given seed
replays the exact same alternation sequence.  The HTTP wrapper binds an
ephemeral localhost port.
"""

import base64
import binascii
import hashlib
import json
import struct
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Dict, List, Optional, Sequence, Tuple

from . import rfc3339
from .certs import CertBlob, CertFingerprint, MalformedDer, parse_cert


@dataclass(frozen=True)
class MockLogConfig:
    roots: Tuple[CertBlob, ...]
    alternate_roots: Optional[Tuple[CertBlob, ...]] = None
    flap_probability: float = 0.0
    expiry_window: Optional[Tuple[datetime, datetime]] = None
    reject_expired: bool = False
    rate_limit_after: Optional[int] = None
    cors_enabled: bool = True
    offline: bool = False
    log_id: bytes = bytes(32)

    def __post_init__(self):
        if not 0.0 <= self.flap_probability <= 1.0:
            raise ValueError("flap_probability must be within [0,1]")
        if self.flap_probability > 0 and self.alternate_roots is None:
            raise ValueError("flap_probability requires alternate_roots")
        if self.expiry_window is not None:
            start, end = self.expiry_window
            if not start < end:
                raise ValueError("expiry_window start must precede end")
        if len(self.log_id) != 32:
            raise ValueError("log_id must be 32 bytes")
        if self.rate_limit_after is not None and self.rate_limit_after < 1:
            raise ValueError("rate_limit_after must be positive")


@dataclass
class MockLogState:
    accepted_entries: List[Tuple[Tuple[CertBlob, ...], datetime]] = field(
        default_factory=list)
    request_counter: int = 0   # add-chain requests seen
    get_roots_counter: int = 0


Response = Tuple[int, List[Tuple[str, str]], bytes]


def flap_decision(seed: int, index: int, probability: float) -> bool:
    """Whether request #index serves the alternate list.  Hash-derived so
    the sequence replays for a fixed seed regardless of call history."""
    if probability <= 0.0:
        return False
    digest = hashlib.sha256(f"{seed}:{index}".encode("ascii")).digest()
    draw = int.from_bytes(digest[:8], "big") / 2**64
    return draw < probability


def _headers(cfg: MockLogConfig) -> List[Tuple[str, str]]:
    headers = [("Content-Type", "application/json")]
    if cfg.cors_enabled:
        headers.append(("Access-Control-Allow-Origin", "*"))
    return headers


def _body(obj) -> bytes:
    return json.dumps(obj, separators=(",", ":")).encode("ascii")


def handle_get_roots(cfg: MockLogConfig, state: MockLogState,
                     rng_seed: int = 0) -> Response:
    """Serve the configured roots verbatim, duplicates included; flip to
    the alternate list per the seeded flap decision."""
    index = state.get_roots_counter
    state.get_roots_counter += 1
    roots = cfg.roots
    if flap_decision(rng_seed, index, cfg.flap_probability):
        roots = cfg.alternate_roots
    body = _body({"certificates": [
        base64.b64encode(der).decode("ascii") for der in roots]})
    return 200, _headers(cfg), body


def _reject(cfg, status, code) -> Response:
    return status, _headers(cfg), _body({"error_code": code})


def handle_add_chain(cfg: MockLogConfig, state: MockLogState,
                     request_body: bytes, now: datetime) -> Response:
    """Accept or reject a submitted chain.

    Decision order: rate limit, then decodability, then temporal window
    (leaf not_after within [start, end)), then expiry, then acceptance
    with a deterministic digest standing in for the SCT signature.
    """
    state.request_counter += 1
    if cfg.rate_limit_after is not None and state.request_counter > cfg.rate_limit_after:
        return _reject(cfg, 429, "rate limited")

    try:
        doc = json.loads(request_body)
        chain = tuple(base64.b64decode(item, validate=True)
                      for item in doc["chain"])
        if not chain:
            raise ValueError("empty chain")
        leaf = parse_cert(chain[0])
        if leaf.not_after is None:
            raise MalformedDer("leaf has no notAfter")
    except (ValueError, KeyError, TypeError, binascii.Error, MalformedDer):
        return _reject(cfg, 400, "malformed chain")

    if cfg.expiry_window is not None:
        start, end = cfg.expiry_window
        if not (start <= leaf.not_after < end):
            return _reject(cfg, 400, "not in temporal window")
    if cfg.reject_expired and leaf.not_after < now:
        return _reject(cfg, 400, "expired")

    timestamp_ms = rfc3339.to_epoch_us(now) // 1000
    signature = hashlib.sha256(
        cfg.log_id + struct.pack(">Q", timestamp_ms)
        + leaf.fingerprint.digest).digest()
    state.accepted_entries.append((chain, now))
    return 200, _headers(cfg), _body({
        "sct_version": 0,
        "id": base64.b64encode(cfg.log_id).decode("ascii"),
        "timestamp": timestamp_ms,
        "extensions": "",
        "signature": base64.b64encode(signature).decode("ascii"),
    })


class _Handler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def handle(self):
        # offline mode: accept the TCP connection, then drop it without
        # a byte of HTTP, so clients see an aborted connection
        if self.server.mock.config.offline:
            self.close_connection = True
            return
        super().handle()

    def _respond(self, response: Response):
        status, headers, body = response
        self.send_response(status)
        for name, value in headers:
            self.send_header(name, value)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        mock = self.server.mock
        if self.path.rstrip("/").endswith("ct/v1/get-roots"):
            with mock.lock:
                response = handle_get_roots(mock.config, mock.state, mock.seed)
            self._respond(response)
        else:
            self._respond((404, _headers(mock.config),
                           _body({"error_code": "no such endpoint"})))

    def do_POST(self):
        mock = self.server.mock
        if self.path.rstrip("/").endswith("ct/v1/add-chain"):
            length = int(self.headers.get("Content-Length", "0"))
            body = self.rfile.read(length)
            with mock.lock:
                response = handle_add_chain(mock.config, mock.state, body,
                                            mock.now())
            self._respond(response)
        else:
            self._respond((404, _headers(mock.config),
                           _body({"error_code": "no such endpoint"})))

    def log_message(self, format, *args):
        pass


class _Server(ThreadingHTTPServer):
    daemon_threads = True
    allow_reuse_address = True


class MockLog:
    """Mock server lifecycle wrapper.

    ``now_override`` freezes the server clock, letting scenarios whose
    temporal windows lie in the past or future behave as if probed at a
    chosen instant.
    """

    def __init__(self, config: MockLogConfig, seed: int = 0,
                 now_override: Optional[datetime] = None):
        self.config = config
        self.seed = seed
        self.now_override = now_override
        self.state = MockLogState()
        self.lock = threading.Lock()
        self._server: Optional[_Server] = None
        self._thread: Optional[threading.Thread] = None
        self._port: Optional[int] = None

    def now(self) -> datetime:
        return self.now_override or rfc3339.utcnow()

    def start(self) -> str:
        self._server = _Server(("127.0.0.1", 0), _Handler)
        self._server.mock = self
        self._port = self._server.server_address[1]
        self._thread = threading.Thread(target=self._server.serve_forever,
                                        daemon=True)
        self._thread.start()
        return self.url

    @property
    def port(self) -> int:
        if self._port is None:
            raise RuntimeError("mock log not started")
        return self._port

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}/"

    def stop(self):
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._thread.join(timeout=5)
            self._server = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.stop()


def config_from_document(doc: dict) -> Tuple[MockLogConfig, int,
                                             Optional[datetime]]:
    """Parse the JSON config shape (snake_case field names; roots as
    base64, log_id as hex, window timestamps RFC 3339).  Returns the
    config plus the server-level seed and frozen-clock override."""
    known = {"roots", "alternate_roots", "flap_probability", "expiry_window",
             "reject_expired", "rate_limit_after", "cors_enabled", "offline",
             "log_id", "seed", "now"}
    unknown = set(doc) - known
    if unknown:
        raise ValueError(f"unknown mock config fields: {sorted(unknown)}")

    def decode_list(key):
        if doc.get(key) is None:
            return None
        return tuple(base64.b64decode(item, validate=True) for item in doc[key])

    window = None
    if doc.get("expiry_window") is not None:
        raw = doc["expiry_window"]
        window = (rfc3339.parse(raw["start"]), rfc3339.parse(raw["end"]))
    config = MockLogConfig(
        roots=decode_list("roots") or (),
        alternate_roots=decode_list("alternate_roots"),
        flap_probability=float(doc.get("flap_probability", 0.0)),
        expiry_window=window,
        reject_expired=bool(doc.get("reject_expired", False)),
        rate_limit_after=doc.get("rate_limit_after"),
        cors_enabled=bool(doc.get("cors_enabled", True)),
        offline=bool(doc.get("offline", False)),
        log_id=bytes.fromhex(doc["log_id"]) if "log_id" in doc else bytes(32),
    )
    now_override = rfc3339.parse(doc["now"]) if "now" in doc else None
    return config, int(doc.get("seed", 0)), now_override


def mock_from_file(path) -> MockLog:
    with open(path) as handle:
        doc = json.load(handle)
    config, seed, now_override = config_from_document(doc)
    return MockLog(config, seed=seed, now_override=now_override)
