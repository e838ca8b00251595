"""Command line front end: fetch, analyze, report, replicate.

Exit codes: 0 success, 2 configuration error, 3 transport or quota
failure, 4 storage or I/O failure, 5 empty eligible sample, 6 replication
check failure. Expected failures print a one-line error to standard
error, never a stack trace.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from .ingestion import (
    API_KEY_ENV,
    ConfigError,
    EmptySampleError,
    FetchConfig,
    ParseError,
    SnapshotStore,
    StorageError,
    Transport,
    TransportError,
    default_transport,
    dedup_latest,
    fetch_by_ids,
    fetch_sweep,
    load_snapshots,
    select_study_sample,
    store_snapshots,
)
from .metrics import compute_metrics
from .report import (
    RENDER_FORMATS,
    bundle_from_json,
    build_report,
    load_binspec_file,
    rebin_bundle,
    render,
    render_histogram_plot,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_TRANSPORT = 3
EXIT_STORAGE = 4
EXIT_EMPTY = 5
EXIT_REPLICATION = 6

DRIFT_NOTICE = (
    "The bundled replication target is structural (sample sizes, table"
    " shapes, value bounds, the category table), not numeric: the per-video"
    " dataset behind the original 2013 case study was never published and"
    " live statistics have drifted since, so its table values are not"
    " reproducible from today's API."
)

logger = logging.getLogger(__name__)


def _bundled_path(relative: str) -> Path:
    return Path(str(resources.files("engage").joinpath(relative)))


class _CountingTransport:
    """Wraps any transport to count the pages actually fetched."""

    def __init__(self, inner: Transport):
        self._inner = inner
        self.pages = 0

    def get_page(self, params: dict[str, str]) -> dict:
        self.pages += 1
        return self._inner.get_page(params)


def _write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc


def _load_config_file(path: str | None, command: str) -> dict:
    """Per-command section of the optional JSON config file; flags win."""
    if not path:
        return {}
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    section = data.get(command, {})
    if not isinstance(section, dict):
        raise ConfigError(f"config section {command!r} must be an object")
    return section


def _resolve(args: argparse.Namespace, cfg: dict, key: str, default=None):
    value = getattr(args, key, None)
    if value is None:
        value = cfg.get(key, default)
    return value


def _as_int(value, key: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None


def _detect_sweeps(directory: Path) -> int:
    count = 0
    while (directory / f"sweep{count + 1}_page1.json").is_file():
        count += 1
    if count == 0:
        raise ConfigError(f"no sweep fixtures (sweep1_page1.json) in {directory}")
    return count


def _read_id_list(path: Path) -> list[str]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read id list {path}: {exc}") from exc
    ids = [line.strip() for line in lines]
    ids = [v for v in ids if v and not v.startswith("#")]
    if not ids:
        raise ConfigError(f"id list {path} is empty")
    return ids


def _collect_sweeps(config: FetchConfig, occasions: int):
    collected = []
    pages = 0
    for sweep in range(1, occasions + 1):
        transport = _CountingTransport(default_transport(config, sweep=sweep))
        collected.extend(fetch_sweep(config, transport=transport))
        pages += transport.pages
    return collected, pages


# --- subcommands -------------------------------------------------------------

def run_fetch(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config, "fetch")
    offline = args.offline
    if offline is None and args.region is None:
        offline = cfg.get("offline")
    region = _resolve(args, cfg, "region", "US")
    store_path = Path(_resolve(args, cfg, "store", "snapshots.jsonl"))
    occasions = _resolve(args, cfg, "occasions")

    if offline is not None:
        fixture = Path(offline)
        if not fixture.is_dir():
            raise ConfigError(f"offline fixture directory not found: {fixture}")
        config = FetchConfig(fixture_dir=fixture)
        occasions = _as_int(occasions, "occasions") if occasions is not None \
            else _detect_sweeps(fixture)
    else:
        config = FetchConfig(
            api_key=os.environ.get(API_KEY_ENV, ""), region_code=region
        )
        occasions = _as_int(occasions, "occasions") if occasions is not None else 1

    if args.ids is not None:
        if offline is not None:
            raise ConfigError("--ids re-queries the live API; drop --offline")
        ids_path = Path(args.ids) if args.ids else _bundled_path(
            "fixtures/sampled_video_ids.txt"
        )
        video_ids = _read_id_list(ids_path)
        transport = _CountingTransport(default_transport(config))
        collected = fetch_by_ids(config, video_ids, transport=transport)
        pages = transport.pages
    else:
        collected, pages = _collect_sweeps(config, occasions)

    unique = dedup_latest(collected)
    store_snapshots(SnapshotStore(store_path), collected)
    print(f"fetched {pages} pages, {len(collected)} snapshots, {len(unique)} unique ids")
    print(f"store: {store_path}")
    return EXIT_OK


def _require(value, command: str, flag: str) -> str:
    if value is None:
        raise ConfigError(f"{command} needs {flag} (flag or config file section)")
    return value


def run_analyze(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config, "analyze")
    store_path = Path(_require(_resolve(args, cfg, "store"), "analyze", "--store"))
    n = _as_int(_resolve(args, cfg, "n", 100), "n")
    out = Path(_resolve(args, cfg, "out", "bundle.json"))
    bins_path = _resolve(args, cfg, "bins")

    bins = None
    if bins_path:
        try:
            bins = load_binspec_file(Path(bins_path))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"bad bins file {bins_path}: {exc}") from exc

    candidates = load_snapshots(SnapshotStore(store_path))
    sample = select_study_sample(candidates, n=n)
    if not sample.snapshots:
        raise EmptySampleError(
            f"no comment-enabled videos among {len(candidates.snapshots)} in {store_path}"
        )

    bundle = build_report(sample, bins=bins)
    for note in bundle.provenance["coverage_notes"]:
        print(f"warning: {note}", file=sys.stderr)
    _write_text(out, render(bundle, "json"))
    print(f"analyzed {len(sample.snapshots)} videos ({sample.selection_note})")
    print(f"bundle: {out}")
    return EXIT_OK


def _parse_formats(raw: str) -> list[str]:
    formats = []
    for token in raw.split(","):
        token = token.strip()
        if not token:
            continue
        if token not in RENDER_FORMATS:
            raise ConfigError(
                f"unknown format {token!r}; expected a comma list of {', '.join(RENDER_FORMATS)}"
            )
        if token not in formats:
            formats.append(token)
    if not formats:
        raise ConfigError("no output format selected")
    return formats


def _load_bundle(path: Path):
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except OSError as exc:
        raise StorageError(f"cannot read bundle {path}: {exc}") from exc
    except ValueError as exc:
        raise StorageError(f"bundle {path} is not valid JSON: {exc}") from exc
    try:
        return bundle_from_json(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise StorageError(f"bundle {path} is malformed: {exc}") from exc


def _write_report_files(bundle, out_dir: Path, formats: Sequence[str]) -> list[Path]:
    written = []
    for fmt in formats:
        path = out_dir / f"report.{fmt}"
        _write_text(path, render(bundle, fmt))
        written.append(path)
    # plot files accompany the human-readable render only
    if "md" in formats:
        for name in sorted(bundle.histograms):
            for style, suffix in (("text", "txt"), ("svg", "svg")):
                path = out_dir / f"hist_{name.lower()}.{suffix}"
                _write_text(path, render_histogram_plot(
                    bundle.histograms[name], style=style, title=name
                ))
                written.append(path)
    return written


def run_report(args: argparse.Namespace) -> int:
    cfg = _load_config_file(args.config, "report")
    bundle_path = Path(_require(_resolve(args, cfg, "bundle"), "report", "--bundle"))
    formats = _parse_formats(_resolve(args, cfg, "format", "md,csv,json"))
    out_dir = Path(_resolve(args, cfg, "out", "report"))
    bins_path = _resolve(args, cfg, "bins")

    bundle = _load_bundle(bundle_path)
    if bins_path:
        try:
            bins = load_binspec_file(Path(bins_path))
            bundle = rebin_bundle(bundle, bins)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"bad bins file {bins_path}: {exc}") from exc

    written = _write_report_files(bundle, out_dir, formats)
    print(f"wrote {len(written)} files to {out_dir}")
    return EXIT_OK


def run_replicate(args: argparse.Namespace) -> int:
    fixture = Path(args.fixture_dir) if args.fixture_dir else _bundled_path(
        "fixtures/replication"
    )
    if not fixture.is_dir():
        raise ConfigError(f"replication fixture directory not found: {fixture}")
    expected_path = fixture / "expected.json"
    try:
        expected = json.loads(expected_path.read_text(encoding="utf-8"))
        expected_unique = int(expected["unique_ids"])
        expected_n = int(expected["sample_n"])
        expected_upper = int(expected["upper_quartile_n"])
        expected_categories = [[str(c), int(k)] for c, k in expected["categories"]]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"bad replication manifest {expected_path}: {exc}") from exc

    out_dir = Path(args.out) if args.out else Path("replication")
    store = SnapshotStore(out_dir / "snapshots.jsonl")
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        store.path.unlink(missing_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot prepare {out_dir}: {exc}") from exc

    config = FetchConfig(fixture_dir=fixture)
    occasions = _detect_sweeps(fixture)
    collected, pages = _collect_sweeps(config, occasions)
    store_snapshots(store, collected)
    print(f"fetched {pages} pages, {len(collected)} snapshots ({occasions} sweeps)")

    candidates = load_snapshots(store)
    sample = select_study_sample(candidates, n=expected_n)
    if not sample.snapshots:
        raise EmptySampleError("fixture produced no comment-enabled videos")
    bundle = build_report(sample)
    _write_text(out_dir / "bundle.json", render(bundle, "json"))
    _write_report_files(bundle, out_dir, RENDER_FORMATS)
    print(f"artifacts: {out_dir}")

    disp_bad = [
        s.video_id
        for s in sample.snapshots
        if (d := compute_metrics(s).disp) is not None and not 0 <= d <= 1
    ]
    categories = [[name, count] for name, count in bundle.categories]
    checks = [
        (
            "unique ids",
            len(candidates.snapshots) == expected_unique,
            f"{len(candidates.snapshots)} in store (expected {expected_unique})",
        ),
        (
            "sample size",
            len(sample.snapshots) == expected_n
            and all(s.comments_enabled for s in sample.snapshots),
            f"{len(sample.snapshots)} comment-enabled videos (expected {expected_n})",
        ),
        (
            "quartile subsample",
            bundle.provenance["upper_quartile_n"] == expected_upper,
            f"{bundle.provenance['upper_quartile_n']} in top three quartiles "
            f"(expected {expected_upper})",
        ),
        (
            "category table",
            categories == expected_categories,
            "matches the manifest" if categories == expected_categories
            else f"got {categories}, expected {expected_categories}",
        ),
        (
            "DisP bounds",
            not disp_bad,
            "all defined DisP within [0, 1]" if not disp_bad
            else f"out of [0, 1] for {', '.join(disp_bad[:5])}",
        ),
    ]
    for name, ok, detail in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    failed = [name for name, ok, _ in checks if not ok]
    if failed:
        print(f"replication check failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_REPLICATION
    print("replication checks passed")
    return EXIT_OK


# --- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="engage",
        description=(
            "Relative engagement rates (CpkI, VpkI, DisP) over video"
            " statistics snapshots: fetch trending samples, analyze a"
            " frozen store, render report tables and histograms.\n\n"
            + DRIFT_NOTICE
        ),
        epilog=(
            "exit codes: 0 success, 2 configuration, 3 transport/quota,"
            " 4 storage/I/O, 5 empty eligible sample, 6 replication check"
            f" failure. Live fetching reads the API key from ${API_KEY_ENV}."
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", metavar="FILE",
        help="JSON config file with one section per command; flags win",
    )

    fetch = sub.add_parser(
        "fetch", parents=[common],
        help="sample the trending chart (live or offline fixtures) into the store",
        description=(
            "Sample the trending chart and append the snapshots to the"
            " store. Offline mode replays recorded sweep fixtures instead"
            " of the live API. --ids re-queries an explicit id list; ids"
            " from past studies return today's drifted counters."
        ),
    )
    mode = fetch.add_mutually_exclusive_group()
    mode.add_argument("--offline", metavar="DIR",
                      help="replay recorded sweeps from this fixture directory")
    mode.add_argument("--region", metavar="CC",
                      help="two-letter region code for the live chart (default US)")
    fetch.add_argument("--occasions", type=int, metavar="K",
                       help="number of sweeps (default: all recorded sweeps, live 1)")
    fetch.add_argument("--store", metavar="PATH",
                       help="snapshot store to append to (default snapshots.jsonl)")
    fetch.add_argument(
        "--ids", nargs="?", const="", metavar="FILE",
        help="fetch these video ids live instead of the chart"
             " (default: the bundled historical id list; non-reproducing)",
    )
    fetch.set_defaults(func=run_fetch)

    analyze = sub.add_parser(
        "analyze", parents=[common],
        help="select the study sample from a store and compute the report bundle",
        description=(
            "Load the store, keep the n highest-view comment-enabled"
            " videos, compute summaries, correlation matrices, histograms"
            " and the category table, and write them as one bundle JSON."
        ),
    )
    analyze.add_argument("--store", metavar="PATH",
                         help="snapshot store to read (required here or in the config)")
    analyze.add_argument("--n", type=int, metavar="N",
                         help="sample size (default 100)")
    analyze.add_argument("--out", metavar="FILE",
                         help="bundle output path (default bundle.json)")
    analyze.add_argument("--bins", metavar="FILE",
                         help="JSON per-metric bin overrides")
    analyze.set_defaults(func=run_analyze)

    report = sub.add_parser(
        "report", parents=[common],
        help="render a bundle to Markdown/CSV/JSON tables and histogram plots",
        description=(
            "Render a saved bundle. Markdown gets significance stars and"
            " bold moderate correlations plus text/SVG histograms; CSV and"
            " JSON carry the raw numbers."
        ),
    )
    report.add_argument("--bundle", metavar="FILE",
                        help="bundle JSON written by analyze (required here or in the config)")
    report.add_argument("--format", metavar="LIST",
                        help="comma list of md,csv,json (default all)")
    report.add_argument("--bins", metavar="FILE",
                        help="JSON per-metric bin overrides, applied before rendering")
    report.add_argument("--out", metavar="DIR",
                        help="output directory (default report)")
    report.set_defaults(func=run_report)

    replicate = sub.add_parser(
        "replicate", parents=[common],
        help="run the bundled offline pipeline and verify its structural claims",
        description=(
            "Run fetch (offline fixtures), analyze and report end to end,"
            " then verify the structural claims of the original protocol:"
            " unique id count, sample size with commenting enabled, the"
            " top-three-quartile subsample size, the category table and"
            " DisP bounds. Prints a pass/fail checklist.\n\n" + DRIFT_NOTICE
        ),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    replicate.add_argument("--out", metavar="DIR",
                           help="artifact directory (default replication)")
    replicate.add_argument("--fixture-dir", metavar="DIR",
                           help="alternate fixture directory (default: bundled)")
    replicate.set_defaults(func=run_replicate)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        return _fail(exc, EXIT_CONFIG)
    except (TransportError, ParseError) as exc:
        return _fail(exc, EXIT_TRANSPORT)
    except StorageError as exc:
        return _fail(exc, EXIT_STORAGE)
    except EmptySampleError as exc:
        return _fail(exc, EXIT_EMPTY)


def _fail(exc: Exception, code: int) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
