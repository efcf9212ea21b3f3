import base64
import json
import socket
import threading
from datetime import date, datetime, timezone
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from ctro.client import (
    LogEndpoint,
    USER_AGENT,
    add_chain,
    fetch_all,
    get_roots,
)
from ctro.mocklog import MockLog, MockLogConfig
from ctro.registry import LogRecord, ProgramState, Registry

from conftest import blob, fp


def free_dead_port():
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return port


class CannedServer:
    """Returns a fixed response regardless of path; for error-path tests."""

    def __init__(self, status=200, body=b"{}",
                 content_type="application/json", cors=None):
        outer = self

        class Handler(BaseHTTPRequestHandler):
            def do_GET(self):
                outer.seen_headers = dict(self.headers)
                self.send_response(outer.status)
                self.send_header("Content-Type", outer.content_type)
                if outer.cors:
                    self.send_header("Access-Control-Allow-Origin", outer.cors)
                self.send_header("Content-Length", str(len(outer.body)))
                self.end_headers()
                self.wfile.write(outer.body)

            do_POST = do_GET

            def log_message(self, *args):
                pass

        self.status, self.body = status, body
        self.content_type, self.cors = content_type, cors
        self.seen_headers = {}
        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    @property
    def url(self):
        return f"http://127.0.0.1:{self.server.server_address[1]}/"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


class TestLogEndpoint:
    def test_normalization(self):
        assert LogEndpoint("https://oak.ct.letsencrypt.org/2020").base_url == \
            "https://oak.ct.letsencrypt.org/2020/"
        assert LogEndpoint("ct.example.com").base_url == "https://ct.example.com/"
        ep = LogEndpoint("http://127.0.0.1:9/")
        assert ep.url("ct/v1/get-roots") == "http://127.0.0.1:9/ct/v1/get-roots"


class TestGetRoots:
    def test_success_preserves_order_and_duplicates(self):
        with MockLog(MockLogConfig(roots=(blob("a"), blob("b"), blob("a")))) as mock:
            result = get_roots(LogEndpoint(mock.url))
        assert result.ok
        assert result.http_status == 200
        assert result.cors_allowed is True
        assert result.tls_ok is True
        assert result.store.entries == (blob("a"), blob("b"), blob("a"))
        assert result.store.source == mock.url
        assert result.latency >= 0

    def test_cors_absent(self):
        with MockLog(MockLogConfig(roots=(blob("a"),),
                                   cors_enabled=False)) as mock:
            result = get_roots(LogEndpoint(mock.url))
        assert result.ok and result.cors_allowed is False

    def test_unreachable(self):
        result = get_roots(LogEndpoint(f"http://127.0.0.1:{free_dead_port()}/"),
                           timeout=(1, 2))
        assert not result.ok
        assert result.error.kind == "unreachable"
        assert result.http_status == 0
        assert result.tls_ok is False

    def test_http_error(self):
        server = CannedServer(status=503, body=b"down")
        try:
            result = get_roots(LogEndpoint(server.url))
        finally:
            server.close()
        assert result.error.kind == "http_error"
        assert result.http_status == 503
        assert result.tls_ok is True

    def test_malformed_bodies(self):
        cases = [
            b"not json at all",
            b'{"no_certificates": []}',
            b'{"certificates": "nope"}',
            b'{"certificates": ["!!!not-base64!!!"]}',
        ]
        for body in cases:
            server = CannedServer(status=200, body=body)
            try:
                result = get_roots(LogEndpoint(server.url))
            finally:
                server.close()
            assert result.error.kind == "body_malformed", body
            assert result.http_status == 200

    def test_user_agent_sent(self):
        server = CannedServer(status=200, body=b'{"certificates": []}')
        try:
            get_roots(LogEndpoint(server.url))
            assert server.seen_headers.get("User-Agent") == USER_AGENT
        finally:
            server.close()

    def test_cors_requires_wildcard(self):
        server = CannedServer(status=200, body=b'{"certificates": []}',
                              cors="https://example.com")
        try:
            result = get_roots(LogEndpoint(server.url))
        finally:
            server.close()
        assert result.cors_allowed is False


class TestAddChain:
    def test_accept(self, signing_material):
        from ctro.certgen import leaf_chain
        from datetime import timedelta
        cfg = MockLogConfig(roots=(signing_material.root_der,),
                            log_id=b"\x07" * 32)
        now = datetime(2020, 6, 15, tzinfo=timezone.utc)
        chain = leaf_chain(signing_material, "x", now + timedelta(days=30))
        with MockLog(cfg, now_override=now) as mock:
            result = add_chain(LogEndpoint(mock.url), chain)
        assert result.accepted
        assert result.sct.version == 0
        assert base64.b64decode(result.sct.log_id) == b"\x07" * 32
        assert result.sct.timestamp == 1592179200000

    def test_reject_carries_excerpt(self):
        with MockLog(MockLogConfig(roots=(blob("a"),))) as mock:
            result = add_chain(LogEndpoint(mock.url), [b"junk"])
        assert not result.accepted
        assert result.http_status == 400
        assert "malformed chain" in result.body_excerpt

    def test_transport_failure(self):
        ep = LogEndpoint(f"http://127.0.0.1:{free_dead_port()}/")
        result = add_chain(ep, [blob("a")], timeout=(1, 2))
        assert not result.accepted
        assert result.http_status == 0

    def test_incomplete_receipt_not_accepted(self):
        server = CannedServer(status=200, body=b'{"sct_version": 0}')
        try:
            result = add_chain(LogEndpoint(server.url), [blob("a")])
        finally:
            server.close()
        assert not result.accepted
        assert result.http_status == 200


class TestFetchAll:
    def test_mixed_outcomes(self):
        dead = free_dead_port()
        with MockLog(MockLogConfig(roots=(blob("a"),))) as mock:
            reg = Registry(logs=(
                LogRecord(name="live", operator="op",
                          endpoint=LogEndpoint(mock.url),
                          google_state=ProgramState.USABLE,
                          apple_state=ProgramState.USABLE),
                LogRecord(name="dead", operator="op",
                          endpoint=LogEndpoint(f"http://127.0.0.1:{dead}/"),
                          google_state=ProgramState.USABLE,
                          apple_state=ProgramState.USABLE),
            ))
            results = fetch_all(reg, concurrency_limit=4, timeout=(1, 2))
        assert list(results) == ["dead", "live"]
        assert results["live"].ok
        assert results["dead"].error.kind == "unreachable"
