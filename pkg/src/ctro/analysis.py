"""Comparison mathematics over distinct root stores.

Denominator conventions, which are easy to mix up:
  - coverage: vendor store is the denominator (fraction of the vendor
    covered by the log).
  - overlap: the row store X is the denominator, |X ∩ Y| / |X|, so the
    matrix is asymmetric.

Percentages round half-up to one decimal for display; raw ratios are
carried alongside so nothing downstream depends on the rounding.
"""

from collections import Counter
from dataclasses import dataclass, field
from datetime import timedelta
from decimal import Decimal, ROUND_HALF_UP
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .certs import CertFingerprint, DistinctStore, StoreFingerprint, store_fingerprint
from .registry import Registry, VendorStore
from .snapshots import Snapshot, SnapshotStore


class EmptyVendor(ValueError):
    """Coverage against an empty vendor store is undefined."""


def round_pct(covered: int, total: int) -> float:
    """100*covered/total, rounded half-up to one decimal."""
    pct = Decimal(covered * 100) / Decimal(total)
    return float(pct.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class CoverageCell:
    log_name: str
    vendor: str
    covered: int
    vendor_size: int

    @property
    def pct(self) -> float:
        return round_pct(self.covered, self.vendor_size)

    @property
    def ratio(self) -> float:
        return self.covered / self.vendor_size


def coverage(log_store: DistinctStore, vendor: VendorStore,
             log_name: str = "") -> CoverageCell:
    """How much of the vendor store the log store covers."""
    vendor_size = len(vendor.store)
    if vendor_size == 0:
        raise EmptyVendor(vendor.vendor)
    covered = len(log_store.members & vendor.store.members)
    return CoverageCell(log_name=log_name, vendor=vendor.vendor,
                        covered=covered, vendor_size=vendor_size)


def coverage_matrix(stores: Mapping[str, DistinctStore],
                    vendors: Sequence[VendorStore]) -> List[CoverageCell]:
    """Cross product as a flat cell list, ordered (log name, vendor name)."""
    cells = []
    for log_name in sorted(stores):
        for vendor in sorted(vendors, key=lambda v: v.vendor):
            cells.append(coverage(stores[log_name], vendor, log_name=log_name))
    return cells


@dataclass(frozen=True)
class OverlapCell:
    x: str
    y: str
    intersection: int
    x_size: int

    @property
    def value(self) -> float:
        # empty X overlaps nothing, including itself
        return self.intersection / self.x_size if self.x_size else 0.0


def overlap(x: DistinctStore, y: DistinctStore) -> float:
    """|X ∩ Y| / |X|; 0 when X is empty."""
    if not len(x):
        return 0.0
    return len(x.members & y.members) / len(x)


def overlap_matrix(stores: Mapping[str, DistinctStore]) -> List[List[OverlapCell]]:
    """Rows and columns follow the mapping's own order; row store is the
    denominator."""
    names = list(stores)
    matrix = []
    for xn in names:
        row = []
        xs = stores[xn]
        for yn in names:
            row.append(OverlapCell(
                x=xn, y=yn,
                intersection=len(xs.members & stores[yn].members),
                x_size=len(xs),
            ))
        matrix.append(row)
    return matrix


@dataclass(frozen=True)
class FrequencyDistribution:
    """How many stores include each distinct certificate.

    buckets[n] counts certificates present in exactly n of the
    considered stores; members[n] lists them in fingerprint order.
    """

    buckets: Dict[int, int]
    members: Dict[int, Tuple[CertFingerprint, ...]]
    universe: str
    store_count: int

    @property
    def universe_size(self) -> int:
        return sum(self.buckets.values())

    def bucket_of(self, fp: CertFingerprint) -> Optional[int]:
        for n, fps in self.members.items():
            if fp in fps:
                return n
        return None


def frequency(stores: Mapping[str, DistinctStore],
              universe: str = "") -> FrequencyDistribution:
    """Count, for every certificate in the union, how many stores carry it."""
    if not stores:
        raise ValueError("frequency requires at least one store")
    counts: Counter = Counter()
    for store in stores.values():
        counts.update(store.members)
    members: Dict[int, List[CertFingerprint]] = {}
    for fp, n in counts.items():
        members.setdefault(n, []).append(fp)
    ordered = {n: tuple(sorted(fps)) for n, fps in sorted(members.items())}
    return FrequencyDistribution(
        buckets={n: len(fps) for n, fps in ordered.items()},
        members=ordered,
        universe=universe,
        store_count=len(stores),
    )


@dataclass(frozen=True)
class DistinctGroup:
    group_id: int
    store_fp: StoreFingerprint
    logs: Tuple[str, ...]
    size: int


def distinct_lists(stores: Mapping[str, DistinctStore]) -> List[DistinctGroup]:
    """Group logs serving identical distinct sets; ids run 1..k in the
    order each set is first seen."""
    order: List[StoreFingerprint] = []
    groups: Dict[StoreFingerprint, List[str]] = {}
    sizes: Dict[StoreFingerprint, int] = {}
    for name, store in stores.items():
        key = store_fingerprint(store)
        if key not in groups:
            order.append(key)
            groups[key] = []
            sizes[key] = len(store)
        groups[key].append(name)
    return [
        DistinctGroup(group_id=i, store_fp=key, logs=tuple(groups[key]),
                      size=sizes[key])
        for i, key in enumerate(order, start=1)
    ]


MMD_SENTINEL = "mmd_root"

FLAPPING_WINDOW = timedelta(days=30)


@dataclass(frozen=True)
class MismanagementFlags:
    log_name: str
    has_duplicates: bool
    duplicate_count: int
    flapping: bool
    missing_mmd_root: bool
    sentinel_hits: Dict[str, bool]


def _runs(snaps: Sequence[Snapshot]):
    """Compress consecutive snapshots with equal store fingerprints into
    (fp, first_ts, last_ts) runs."""
    runs = []
    for snap in snaps:
        if runs and runs[-1][0] == snap.store_fp:
            runs[-1] = (runs[-1][0], runs[-1][1], snap.taken_at)
        else:
            runs.append((snap.store_fp, snap.taken_at, snap.taken_at))
    return runs


def detect_flapping(snaps: Sequence[Snapshot],
                    window: timedelta = FLAPPING_WINDOW) -> bool:
    """True when some list reappears after an excursion to a different
    list, with the whole A,B,A alternation inside the window."""
    runs = _runs(snaps)
    for i in range(len(runs) - 2):
        if runs[i][0] == runs[i + 2][0] and (runs[i + 2][1] - runs[i][2]) <= window:
            return True
    return False


def mismanagement_flags(history: SnapshotStore, registry: Registry,
                        window: timedelta = FLAPPING_WINDOW,
                        ) -> List[MismanagementFlags]:
    """Per-log indicator flags, derived from snapshot history plus the
    registry's sentinel roots."""
    flags = []
    for log_name in history.log_names():
        snaps = history.snapshots(log_name)
        latest = snaps[-1]
        members = latest.distinct_members
        hits = {name: fp in members
                for name, fp in sorted(registry.sentinel_roots.items())}
        mmd = registry.sentinel_roots.get(MMD_SENTINEL)
        flags.append(MismanagementFlags(
            log_name=log_name,
            has_duplicates=latest.raw_count > latest.distinct_count,
            duplicate_count=latest.raw_count - latest.distinct_count,
            flapping=detect_flapping(snaps, window),
            missing_mmd_root=(mmd is not None and mmd not in members),
            sentinel_hits=hits,
        ))
    return flags
