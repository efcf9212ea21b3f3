"""Active behavioral probing: submit prepared chains and classify the
log's submission policy from the responses.

The verdict is a pure function of the evidence list, so replaying the
recorded evidence reproduces the verdict exactly.  Tri-state fields use
"unknown" for transport failure: a dead connection must never read as a
policy decision.
"""

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Dict, List, Optional, Sequence, Tuple

from . import client, rfc3339
from .certgen import SigningMaterial, leaf_chain
from .certs import CertBlob, DistinctStore
from .snapshots import ProbeRecord

Chain = Tuple[CertBlob, ...]


class RootNotAccepted(ValueError):
    """The signing root is not in the target log's root list, so probe
    chains built from it would be rejected for the wrong reason."""


@dataclass(frozen=True)
class ProbeChainSet:
    in_window: Chain
    out_of_window: Chain
    expired: Chain


@dataclass(frozen=True)
class ProbeNote:
    request: str
    status: int  # 0 = no response (transport failure)
    ok: bool
    detail: str = ""

    def to_dict(self) -> Dict[str, object]:
        return {"request": self.request, "status": self.status,
                "ok": self.ok, "detail": self.detail}

    @classmethod
    def from_dict(cls, doc) -> "ProbeNote":
        return cls(request=doc["request"], status=doc["status"],
                   ok=doc["ok"], detail=doc.get("detail", ""))


@dataclass(frozen=True)
class ProbeVerdict:
    submission: str             # plus | minus | plus_minus | unknown
    expiration_constraint: str  # yes | no | unknown
    rejects_expired: str        # yes | no | unknown
    cors: bool
    notes: Tuple[ProbeNote, ...]

    def to_dict(self) -> Dict[str, object]:
        return {
            "submission": self.submission,
            "expiration_constraint": self.expiration_constraint,
            "rejects_expired": self.rejects_expired,
            "cors": self.cors,
        }


def verdict_from_notes(notes: Sequence[ProbeNote]) -> ProbeVerdict:
    """Classify recorded evidence.

    A rejected out-of-window (or expired) submission only demonstrates a
    constraint when some in-window submission was accepted; otherwise
    the rejection could mean anything.
    """
    notes = tuple(notes)
    in_notes = [n for n in notes if n.request.startswith("in_window")]
    accepted = any(n.ok for n in in_notes)
    rejected = any(not n.ok and n.status >= 400 for n in in_notes)
    if accepted and rejected:
        submission = "plus_minus"
    elif accepted:
        submission = "plus"
    elif rejected:
        submission = "minus"
    else:
        submission = "unknown"

    def constraint(request: str) -> str:
        note = next((n for n in notes if n.request == request), None)
        if note is None or note.status == 0:
            return "unknown"
        if note.ok:
            return "no"
        return "yes" if accepted else "unknown"

    cors_note = next((n for n in notes if n.request == "get-roots"), None)
    return ProbeVerdict(
        submission=submission,
        expiration_constraint=constraint("out_of_window"),
        rejects_expired=constraint("expired"),
        cors=bool(cors_note and "cors=true" in cors_note.detail),
        notes=notes,
    )


def probe_log(ep: client.LogEndpoint, chains: ProbeChainSet,
              repeats: int = 3) -> ProbeVerdict:
    """Run the probe protocol: get-roots for the CORS check, then the
    in-window chain ``repeats`` times, then the out-of-window and the
    expired chain once each."""
    notes: List[ProbeNote] = []
    fetch = client.get_roots(ep)
    notes.append(ProbeNote(
        request="get-roots",
        status=fetch.http_status,
        ok=fetch.ok,
        detail=f"cors={'true' if fetch.cors_allowed else 'false'}",
    ))

    def submit(request: str, chain: Chain):
        result = client.add_chain(ep, chain)
        notes.append(ProbeNote(
            request=request,
            status=result.http_status,
            ok=result.accepted,
            detail=result.body_excerpt[:80],
        ))

    for k in range(1, repeats + 1):
        submit(f"in_window#{k}", chains.in_window)
    submit("out_of_window", chains.out_of_window)
    submit("expired", chains.expired)
    return verdict_from_notes(notes)


def build_probe_chains(target_roots: DistinctStore,
                       material: SigningMaterial,
                       window: Optional[Tuple[datetime, datetime]] = None,
                       now: Optional[datetime] = None) -> ProbeChainSet:
    """Self-issue the three probe chains against our own root.

    Only meaningful when that root is in the target's list (true for the
    mock, where the config injects it).  Without a window the
    out-of-window chain is dated decades out so any window-enforcing log
    still rejects it.  A window entirely in the future makes a
    "expired yet in-window" chain impossible; the expired chain then
    falls outside the window and its rejection is not attributable.
    """
    if material.root_fingerprint not in target_roots:
        raise RootNotAccepted(material.root_fingerprint.hex)
    now = now or rfc3339.utcnow()

    if window is not None:
        start, end = window
        in_after = min(max(now + timedelta(days=60), start + timedelta(days=1)),
                       end - timedelta(days=1))
        out_after = end + timedelta(days=365)
        expired_after = max(now - timedelta(days=30), start + timedelta(hours=12))
    else:
        in_after = now + timedelta(days=60)
        out_after = now + timedelta(days=365 * 30)
        expired_after = now - timedelta(days=30)
    if expired_after >= now:
        expired_after = now - timedelta(hours=1)

    return ProbeChainSet(
        in_window=leaf_chain(material, "probe in window", in_after),
        out_of_window=leaf_chain(material, "probe out of window", out_after),
        expired=leaf_chain(material, "probe expired", expired_after),
    )


def make_report(log_name: str, at: datetime,
                verdict: ProbeVerdict) -> ProbeRecord:
    return ProbeRecord(
        log_name=log_name,
        at=at,
        verdict=verdict.to_dict(),
        evidence=tuple(n.to_dict() for n in verdict.notes),
    )


def replay_report(record: ProbeRecord) -> ProbeVerdict:
    """Re-derive the verdict from persisted evidence."""
    return verdict_from_notes([ProbeNote.from_dict(d) for d in record.evidence])
