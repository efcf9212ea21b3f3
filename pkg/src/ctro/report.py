"""Per-log summary table: one row per observed log with counts,
distinct-list group, vendor coverage percentages, and the latest probe
classification, rendered as CSV.

Indicator columns use +/- (± for partial submission success); cells
that cannot be derived (no probe yet, no vendor stores) stay empty.
"""

import csv
import io
from dataclasses import dataclass
from typing import Dict, List, Optional

from .analysis import coverage, distinct_lists, mismanagement_flags
from .registry import Registry
from .snapshots import SnapshotStore

_SUBMISSION_SYMBOL = {"plus": "+", "minus": "-", "plus_minus": "±",
                      "unknown": ""}
_TRISTATE_SYMBOL = {"yes": "+", "no": "-", "unknown": ""}


def _flag(value: bool) -> str:
    return "+" if value else "-"


@dataclass(frozen=True)
class TableRow:
    log_name: str
    operator: str
    google_state: str
    apple_state: str
    total: int
    distinct: int
    duplicates: int
    group_id: int
    coverage_pct: Dict[str, float]      # vendor -> pct
    submission: str                     # +, -, ±, or ""
    expiration_constraint: str
    rejects_expired: str
    cors: str
    flapping: str
    sentinel_hits: Dict[str, str]       # sentinel name -> +/-


def build_table(history: SnapshotStore, registry: Registry) -> List[TableRow]:
    """Assemble rows for every log with at least one snapshot, in name
    order.  Registry metadata and probe verdicts are joined when present."""
    log_names = history.log_names()
    stores = {name: history.distinct_store(history.latest(name))
              for name in log_names}
    groups = {name: g.group_id for g in distinct_lists(stores)
              for name in g.logs}
    flags = {f.log_name: f for f in mismanagement_flags(history, registry)}

    rows = []
    for name in log_names:
        latest = history.latest(name)
        record = registry.log(name)
        cover = {}
        for vendor in registry.vendors:
            if len(vendor.store):
                cell = coverage(stores[name], vendor, log_name=name)
                cover[vendor.vendor] = cell.pct
        probes = history.probes(name)
        verdict = probes[-1].verdict if probes else {}
        flag = flags[name]
        rows.append(TableRow(
            log_name=name,
            operator=record.operator if record else "",
            google_state=record.google_state.value if record else "",
            apple_state=record.apple_state.value if record else "",
            total=latest.raw_count,
            distinct=latest.distinct_count,
            duplicates=flag.duplicate_count,
            group_id=groups[name],
            coverage_pct=cover,
            submission=_SUBMISSION_SYMBOL.get(verdict.get("submission", ""), ""),
            expiration_constraint=_TRISTATE_SYMBOL.get(
                verdict.get("expiration_constraint", ""), ""),
            rejects_expired=_TRISTATE_SYMBOL.get(
                verdict.get("rejects_expired", ""), ""),
            cors=_flag(verdict["cors"]) if "cors" in verdict else "",
            flapping=_flag(flag.flapping),
            sentinel_hits={sentinel: _flag(flag.sentinel_hits[sentinel])
                           for sentinel in sorted(flag.sentinel_hits)},
        ))
    return rows


def table_to_csv(rows: List[TableRow], registry: Registry) -> str:
    vendors = sorted(v.vendor for v in registry.vendors)
    sentinels = sorted(registry.sentinel_roots)
    header = (["log", "operator", "google_state", "apple_state", "total",
               "distinct", "duplicates", "distinct_list"]
              + [f"coverage_{v}" for v in vendors]
              + ["submission", "expiration_constraint", "rejects_expired",
                 "cors", "flapping"]
              + [f"sentinel_{s}" for s in sentinels])
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(
            [row.log_name, row.operator, row.google_state, row.apple_state,
             row.total, row.distinct, row.duplicates, row.group_id]
            + [f"{row.coverage_pct[v]:.1f}" if v in row.coverage_pct else ""
               for v in vendors]
            + [row.submission, row.expiration_constraint,
               row.rejects_expired, row.cors, row.flapping]
            + [row.sentinel_hits.get(s, "") for s in sentinels])
    return out.getvalue()
