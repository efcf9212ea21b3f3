"""Command-line frontdoor.

State lives in a data directory (--data-dir, $CTRO_DATA_DIR, or
./ctro-data): history.sqlite, registry.json, signing_material.json.
Exit codes: 0 success, 1 operational error, 2 usage error.
"""

import argparse
import csv
import os
import sys
import time
from datetime import timedelta
from pathlib import Path
from typing import List, Optional

from . import __version__, client, collect, rfc3339
from .analysis import (
    coverage_matrix,
    frequency,
    mismanagement_flags,
    overlap_matrix,
)
from .api import ApiServer, ApiState, DEFAULT_ADDR, DEFAULT_PORT
from .certgen import SigningMaterial
from .certs import DistinctStore, dedupe
from .mocklog import mock_from_file
from .probe import RootNotAccepted, build_probe_chains, make_report, probe_log
from .registry import Registry, load_registry_file
from .report import build_table, table_to_csv
from .setexpr import eval_setexpr, parse_setexpr
from .snapshots import SnapshotStore

PROBE_COOLDOWN = timedelta(days=1)


def data_dir_of(args) -> Path:
    path = Path(args.data_dir or os.environ.get("CTRO_DATA_DIR")
                or "./ctro-data")
    path.mkdir(parents=True, exist_ok=True)
    return path


def history_of(args) -> SnapshotStore:
    return SnapshotStore(data_dir_of(args) / "history.sqlite")


def registry_of(args, required: bool = True) -> Registry:
    path = Path(args.registry) if args.registry else (
        data_dir_of(args) / "registry.json")
    if not path.exists():
        if required:
            raise FileNotFoundError(f"registry file not found: {path}")
        return Registry(logs=())
    return load_registry_file(path)


def material_of(args) -> SigningMaterial:
    path = data_dir_of(args) / "signing_material.json"
    if path.exists():
        return SigningMaterial.load(path)
    material = SigningMaterial.generate()
    material.save(path)
    return material


def _print_csv(rows, header):
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def _timeout(args):
    if getattr(args, "timeout", None):
        return (args.timeout, args.timeout)
    return client.DEFAULT_TIMEOUT


# -- subcommands ------------------------------------------------------------


def cmd_fetch(args) -> int:
    history = history_of(args)
    registry = registry_of(args)
    results = collect.collect_into(history, registry,
                                   concurrency=args.concurrency,
                                   timeout=_timeout(args))
    succeeded = 0
    for name, result in results.items():
        if result.ok:
            succeeded += 1
            distinct, _ = dedupe(result.store)
            print(f"{name}: {len(result.store.entries)} roots, "
                  f"{len(distinct)} distinct")
        else:
            print(f"{name}: {result.error.kind}: {result.error.detail}",
                  file=sys.stderr)
    if registry.logs and succeeded == 0:
        return 1
    return 0


def cmd_watch(args) -> int:
    sweeps = 0
    while args.count is None or sweeps < args.count:
        if sweeps:
            time.sleep(args.interval)
        code = cmd_fetch(args)
        sweeps += 1
        print(f"sweep {sweeps} done", file=sys.stderr)
        if code != 0 and args.count is not None:
            return code
    return 0


def cmd_report(args) -> int:
    from . import figures
    history = history_of(args)
    registry = registry_of(args, required=False)
    rows = build_table(history, registry)
    text = table_to_csv(rows, registry)
    sys.stdout.write(text)

    out_dir = Path(args.out) if args.out else data_dir_of(args) / "reports"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "table1.csv").write_text(text)
    written = [str(out_dir / "table1.csv")]

    stores = {name: history.distinct_store(history.latest(name))
              for name in history.log_names()}
    vendors = [v for v in registry.vendors if len(v.store)]
    if stores and vendors:
        written.append(figures.coverage_figure(
            coverage_matrix(stores, vendors), out_dir / "coverage.png"))
    if stores:
        written.append(figures.overlap_figure(
            overlap_matrix(stores), out_dir / "overlap.png"))
        written.append(figures.frequency_figure(
            frequency(stores, universe="all"), out_dir / "frequency.png"))
        timelines = {name: history.size_timeline(name) for name in stores}
        written.append(figures.timelines_figure(
            timelines, out_dir / "timelines.png"))
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


def cmd_coverage(args) -> int:
    history = history_of(args)
    registry = registry_of(args)
    stores = {name: history.distinct_store(history.latest(name))
              for name in history.log_names()}
    vendors = [v for v in registry.vendors if len(v.store)]
    cells = coverage_matrix(stores, vendors)
    _print_csv(
        [[c.log_name, c.vendor, c.covered, c.vendor_size, f"{c.pct:.1f}"]
         for c in cells],
        ["log", "vendor", "covered", "vendor_size", "pct"])
    return 0


def cmd_overlap(args) -> int:
    history = history_of(args)
    stores = {name: history.distinct_store(history.latest(name))
              for name in history.log_names()}
    matrix = overlap_matrix(stores)
    names = list(stores)
    _print_csv(
        [[row[0].x] + [repr(cell.value) for cell in row] for row in matrix],
        ["x"] + names)
    return 0


def cmd_freq(args) -> int:
    from .registry import parse_states, trusted_logs
    history = history_of(args)
    stores = {name: history.distinct_store(history.latest(name))
              for name in history.log_names()}
    universe = "all"
    if args.program:
        registry = registry_of(args)
        wanted = {rec.name for rec in trusted_logs(
            registry, args.program, parse_states(args.states))}
        stores = {n: s for n, s in stores.items() if n in wanted}
        universe = f"{args.program}:{args.states}"
    if not stores:
        print("no stores in scope", file=sys.stderr)
        return 1
    dist = frequency(stores, universe=universe)
    _print_csv(sorted(dist.buckets.items()), ["included_in", "count"])
    return 0


def cmd_events(args) -> int:
    history = history_of(args)
    events = history.change_events(args.log)
    _print_csv(
        [[rfc3339.format(e.from_ts), rfc3339.format(e.to_ts),
          len(e.added), len(e.removed)] for e in events],
        ["from", "to", "added", "removed"])
    return 0


def cmd_flags(args) -> int:
    history = history_of(args)
    registry = registry_of(args, required=False)
    sentinels = sorted(registry.sentinel_roots)
    flags = mismanagement_flags(history, registry)
    _print_csv(
        [[f.log_name, f.has_duplicates, f.duplicate_count, f.flapping,
          f.missing_mmd_root] + [f.sentinel_hits[s] for s in sentinels]
         for f in flags],
        ["log", "has_duplicates", "duplicate_count", "flapping",
         "missing_mmd_root"] + [f"sentinel_{s}" for s in sentinels])
    return 0


def cmd_set(args) -> int:
    history = history_of(args)
    registry = registry_of(args, required=False)
    env = {v.vendor: v.store for v in registry.vendors}
    env.update({name: history.distinct_store(history.latest(name))
                for name in history.log_names()})
    result = eval_setexpr(parse_setexpr(args.expr), env)
    for hex_fp in sorted(fp.hex for fp in result.members):
        print(hex_fp)
    return 0


def cmd_probe(args) -> int:
    history = history_of(args)
    now = rfc3339.parse(args.now) if args.now else rfc3339.utcnow()
    window = None
    if args.url:
        name = args.name or args.url
        endpoint = client.LogEndpoint(args.url)
        if args.window_start and args.window_end:
            window = (rfc3339.parse(args.window_start),
                      rfc3339.parse(args.window_end))
    else:
        if not args.log:
            print("probe: either --log or --url is required", file=sys.stderr)
            return 1
        registry = registry_of(args)
        record = registry.log(args.log)
        if record is None:
            print(f"probe: log {args.log!r} not in registry", file=sys.stderr)
            return 1
        name, endpoint, window = args.log, record.endpoint, record.temporal_window

    last = history.last_probe_at(name)
    if last is not None and now - last < PROBE_COOLDOWN and not args.force:
        print(f"probe: {name} was probed at {rfc3339.format(last)}; "
              "submissions are limited to one per day (use --force)",
              file=sys.stderr)
        return 1

    material = material_of(args)
    fetched = client.get_roots(endpoint, timeout=_timeout(args))
    if fetched.ok:
        target = dedupe(fetched.store)[0]
    else:
        # unreachable target: membership can't be checked, probe anyway
        # and let the evidence record the transport failures
        target = DistinctStore.from_blobs([material.root_der])
    try:
        chains = build_probe_chains(target, material, window=window, now=now)
    except RootNotAccepted:
        print(f"probe: {name} does not list the local signing root; "
              "chains built from it would be rejected as untrusted",
              file=sys.stderr)
        return 1
    verdict = probe_log(endpoint, chains, repeats=args.repeats)
    history.put_probe(make_report(name, now, verdict))

    print(f"log: {name}")
    print(f"submission: {verdict.submission}")
    print(f"expiration_constraint: {verdict.expiration_constraint}")
    print(f"rejects_expired: {verdict.rejects_expired}")
    print(f"cors: {'true' if verdict.cors else 'false'}")
    for note in verdict.notes:
        print(f"  {note.request}: status={note.status} "
              f"ok={str(note.ok).lower()} {note.detail}".rstrip())
    return 0


def cmd_export(args) -> int:
    history = history_of(args)
    text = history.export()
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def cmd_import(args) -> int:
    history = history_of(args)
    history.import_stream(Path(args.file).read_text())
    print(f"imported {args.file}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    history = history_of(args)
    registry = registry_of(args, required=False)
    ui_dir = args.ui_dir
    if ui_dir is None:
        bundled = Path(__file__).parent / "ui"
        if bundled.is_dir():
            ui_dir = bundled
    state = ApiState(history, registry, ui_dir=ui_dir)
    server = ApiServer(state, addr=args.addr, port=args.port)
    print(f"listening on {server.url}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_mocklog(args) -> int:
    mock = mock_from_file(args.config)
    mock.start()
    print(mock.url, flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        mock.stop()
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctro",
        description="Root-store observatory for Certificate Transparency "
                    "logs: collect, compare, probe, explore.")
    parser.add_argument("--version", action="version",
                        version=f"ctro {__version__}")
    parser.add_argument("--data-dir", default=None,
                        help="state directory (default: $CTRO_DATA_DIR "
                             "or ./ctro-data)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, registry=True, timeout=False):
        if registry:
            p.add_argument("--registry", default=None,
                           help="registry JSON (default: DATA_DIR/registry.json)")
        if timeout:
            p.add_argument("--timeout", type=float, default=None,
                           help="per-request timeout in seconds")

    p = sub.add_parser("fetch", help="collect all logs' roots once")
    common(p, timeout=True)
    p.add_argument("--concurrency", type=int, default=8)
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("watch", help="collect on a fixed interval")
    common(p, timeout=True)
    p.add_argument("--interval", type=float, default=3600.0,
                   help="seconds between sweeps (default 3600)")
    p.add_argument("--count", type=int, default=None,
                   help="stop after this many sweeps (default: run forever)")
    p.add_argument("--concurrency", type=int, default=8)
    p.set_defaults(func=cmd_watch)

    p = sub.add_parser("report", help="render the per-log summary report")
    common(p)
    p.add_argument("what", choices=["table1"])
    p.add_argument("--out", default=None,
                   help="output directory (default: DATA_DIR/reports)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("coverage", help="vendor coverage matrix as CSV")
    common(p)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("overlap", help="pairwise overlap matrix as CSV")
    common(p, registry=False)
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("freq", help="inclusion-count distribution as CSV")
    common(p)
    p.add_argument("--program", choices=["google", "apple"], default=None)
    p.add_argument("--states", default="usable,qualified")
    p.set_defaults(func=cmd_freq)

    p = sub.add_parser("events", help="change events of one log as CSV")
    common(p, registry=False)
    p.add_argument("log")
    p.set_defaults(func=cmd_events)

    p = sub.add_parser("flags", help="mismanagement indicator flags as CSV")
    common(p)
    p.set_defaults(func=cmd_flags)

    p = sub.add_parser("set", help="evaluate a set expression over stores")
    common(p)
    p.add_argument("expr", metavar='"EXPR"',
                   help="e.g. \"mozilla - oak2020\" (& | - and parentheses)")
    p.set_defaults(func=cmd_set)

    p = sub.add_parser("probe", help="classify a log's submission behavior")
    common(p, timeout=True)
    p.add_argument("--log", default=None, help="registry log name")
    p.add_argument("--url", default=None, help="probe a raw base URL instead")
    p.add_argument("--name", default=None,
                   help="record name for --url targets")
    p.add_argument("--window-start", default=None)
    p.add_argument("--window-end", default=None)
    p.add_argument("--now", default=None,
                   help="probe clock override (RFC 3339)")
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--force", action="store_true",
                   help="ignore the one-probe-per-day limit")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("export", help="write the history as NDJSON")
    common(p, registry=False)
    p.add_argument("--out", default=None, help="file (default: stdout)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("import", help="load an exported NDJSON stream")
    common(p, registry=False)
    p.add_argument("file")
    p.set_defaults(func=cmd_import)

    p = sub.add_parser("serve", help="serve the HTTP API and explorer UI")
    common(p)
    p.add_argument("--addr", default=DEFAULT_ADDR)
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--ui-dir", default=None,
                   help="static assets directory for the explorer")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("mocklog", help="run a mock log from a JSON config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_mocklog)

    return parser


def cli_dispatch(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(cli_dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
