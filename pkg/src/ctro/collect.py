"""One collection sweep: fetch every registry log's roots and append
snapshots (and any new certificate bytes) to the history store.

Failed fetches are reported in the result map but never recorded as
snapshots; the history holds observations, not absences.
"""

from datetime import datetime
from typing import Dict, Optional

from . import client, rfc3339
from .certs import CertFingerprint
from .registry import Registry
from .snapshots import FetchMeta, Snapshot, SnapshotStore


def collect_into(history: SnapshotStore, registry: Registry,
                 now: Optional[datetime] = None, concurrency: int = 8,
                 timeout=client.DEFAULT_TIMEOUT) -> Dict[str, client.FetchResult]:
    """Fetch all logs concurrently, persist successes, return every result."""
    results = client.fetch_all(registry, concurrency_limit=concurrency,
                               timeout=timeout)
    taken_at = now or rfc3339.utcnow()
    for name, result in results.items():
        if not result.ok:
            continue
        raw = []
        for der in result.store.entries:
            raw.append(history.put_cert(der))
        history.put_snapshot(Snapshot.build(
            log_name=name,
            taken_at=taken_at,
            raw_entries=raw,
            fetch_meta=FetchMeta(
                http_status=result.http_status,
                cors_allowed=result.cors_allowed,
                tls_ok=result.tls_ok,
            ),
        ))
    return results
