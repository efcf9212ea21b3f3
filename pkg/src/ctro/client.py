"""HTTP client for the log read path (root retrieval and chain submission).

Every fetch records transport facts alongside the payload: HTTP status,
whether the response carried a permissive CORS header, and whether the
TLS handshake succeeded.  TLS failures are classified before generic
connection failures so certificate problems are not misreported as
unreachability.
"""

import base64
import binascii
import concurrent.futures
import logging
import time
import urllib3
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import requests

from . import __version__, rfc3339
from .certs import CertBlob, RootStore

logger = logging.getLogger(__name__)

USER_AGENT = f"ctro/{__version__} (root-store observatory)"

DEFAULT_TIMEOUT = (10, 60)  # (connect, read) seconds


@dataclass(frozen=True)
class LogEndpoint:
    """Base URL of a log plus transport options.

    The URL is normalized to end with a single slash so API paths can be
    appended directly.
    """

    base_url: str
    log_id: Optional[bytes] = None
    tls_verify: bool = True

    def __post_init__(self):
        url = self.base_url
        if not url.startswith(("http://", "https://")):
            url = "https://" + url
        object.__setattr__(self, "base_url", url.rstrip("/") + "/")

    def url(self, api_path: str) -> str:
        return self.base_url + api_path.lstrip("/")


@dataclass(frozen=True)
class FetchError:
    kind: str  # unreachable | tls_failure | http_error | body_malformed
    detail: str


@dataclass(frozen=True)
class FetchResult:
    store: Optional[RootStore]
    http_status: int  # 0 when no response was received
    cors_allowed: bool
    tls_ok: bool
    latency: float
    error: Optional[FetchError] = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.store is not None


@dataclass(frozen=True)
class Sct:
    version: int
    log_id: str
    timestamp: int
    extensions: str
    signature: str


@dataclass(frozen=True)
class SubmissionResult:
    accepted: bool
    http_status: int  # 0 when no response was received
    sct: Optional[Sct] = None
    body_excerpt: str = ""


def _cors_allowed(response) -> bool:
    return response.headers.get("Access-Control-Allow-Origin", "") == "*"


def _session_request(method: str, ep: LogEndpoint, api_path: str, timeout,
                     json_body=None):
    if not ep.tls_verify:
        urllib3.disable_warnings(urllib3.exceptions.InsecureRequestWarning)
    return requests.request(
        method,
        ep.url(api_path),
        json=json_body,
        timeout=timeout,
        verify=ep.tls_verify,
        headers={"User-Agent": USER_AGENT},
    )


def get_roots(ep: LogEndpoint, timeout=DEFAULT_TIMEOUT) -> FetchResult:
    """Fetch the accepted-roots list; never raises on transport failure."""
    started = time.monotonic()
    retrieved_at = rfc3339.utcnow()

    def fail(kind, detail, status=0, cors=False, tls=False):
        return FetchResult(
            store=None,
            http_status=status,
            cors_allowed=cors,
            tls_ok=tls,
            latency=time.monotonic() - started,
            error=FetchError(kind, detail),
        )

    try:
        response = _session_request("GET", ep, "ct/v1/get-roots", timeout)
    except requests.exceptions.SSLError as exc:
        return fail("tls_failure", str(exc))
    except (requests.exceptions.ConnectionError, requests.exceptions.Timeout) as exc:
        return fail("unreachable", str(exc))

    cors = _cors_allowed(response)
    if response.status_code != 200:
        return fail("http_error", f"status {response.status_code}",
                    status=response.status_code, cors=cors, tls=True)
    try:
        body = response.json()
        entries = body["certificates"]
        if not isinstance(entries, list):
            raise TypeError("certificates is not an array")
        blobs: List[CertBlob] = [
            base64.b64decode(item, validate=True) for item in entries
        ]
    except (ValueError, KeyError, TypeError, binascii.Error) as exc:
        return fail("body_malformed", str(exc), status=200, cors=cors, tls=True)

    store = RootStore(entries=tuple(blobs), retrieved_at=retrieved_at,
                      source=ep.base_url)
    return FetchResult(
        store=store,
        http_status=200,
        cors_allowed=cors,
        tls_ok=True,
        latency=time.monotonic() - started,
    )


def add_chain(ep: LogEndpoint, chain: Sequence[CertBlob],
              timeout=DEFAULT_TIMEOUT) -> SubmissionResult:
    """Submit a chain (leaf first).  Accepted means HTTP 200 with a
    complete receipt body; transport failure reports status 0."""
    payload = {"chain": [base64.b64encode(der).decode("ascii") for der in chain]}
    try:
        response = _session_request("POST", ep, "ct/v1/add-chain", timeout,
                                    json_body=payload)
    except requests.exceptions.RequestException as exc:
        return SubmissionResult(accepted=False, http_status=0,
                                body_excerpt=str(exc)[:200])

    excerpt = response.text[:200]
    if response.status_code != 200:
        return SubmissionResult(accepted=False, http_status=response.status_code,
                                body_excerpt=excerpt)
    try:
        body = response.json()
        sct = Sct(
            version=int(body["sct_version"]),
            log_id=str(body["id"]),
            timestamp=int(body["timestamp"]),
            extensions=str(body.get("extensions", "")),
            signature=str(body["signature"]),
        )
    except (ValueError, KeyError, TypeError):
        return SubmissionResult(accepted=False, http_status=200,
                                body_excerpt=excerpt)
    return SubmissionResult(accepted=True, http_status=200, sct=sct,
                            body_excerpt=excerpt)


def fetch_all(registry, concurrency_limit: int = 8,
              timeout=DEFAULT_TIMEOUT) -> Dict[str, FetchResult]:
    """Fetch roots from every registry log concurrently, keyed by log name.

    One slow or dead log must not stall the sweep, so each fetch runs in
    its own worker with independent timeouts.
    """
    results: Dict[str, FetchResult] = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=concurrency_limit) as pool:
        futures = {
            pool.submit(get_roots, rec.endpoint, timeout): rec.name
            for rec in registry.logs
        }
        for future in concurrent.futures.as_completed(futures):
            name = futures[future]
            results[name] = future.result()
            if results[name].error:
                logger.info("fetch %s: %s (%s)", name, results[name].error.kind,
                            results[name].error.detail)
    return dict(sorted(results.items()))
