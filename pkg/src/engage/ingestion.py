"""Acquire video statistics from the live trending API or recorded fixtures.

The sampling protocol mirrors how the study sample was collected: several
fetch sweeps of the trending chart (the API pages in blocks of at most 50),
union of the sweeps deduplicated by video id keeping the latest snapshot,
then selection of the top-n videos by views among those with commenting
enabled. Snapshots persist in an append-only JSON-lines store so an
analysis can be re-run on frozen data.

Transports are pluggable: :class:`LiveTransport` talks HTTPS with rate
limiting, :class:`FixtureTransport` replays recorded pages from a
directory (files named ``sweep<k>_page<j>.json``), so the whole pipeline
runs hermetically offline.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable, Protocol, Sequence

import requests

from .metrics import VideoStatsSnapshot, normalize_snapshot
from .stats import StudySample

logger = logging.getLogger(__name__)

API_URL = "https://www.googleapis.com/youtube/v3/videos"
API_KEY_ENV = "ENGAGE_API_KEY"

# Compact display labels for the platform's numeric category ids.
CATEGORY_LABELS = {
    "1": "Film",
    "2": "Autos",
    "10": "Music",
    "15": "Animals",
    "17": "Sports",
    "19": "Travel",
    "20": "Gaming",
    "22": "People",
    "23": "Comedy",
    "24": "Entertainment",
    "25": "News",
    "26": "Howto",
    "27": "Education",
    "28": "Tech",
    "29": "Nonprofit",
}


class EngageError(Exception):
    """Base for all expected failures raised by this package."""


class ConfigError(EngageError):
    """Invalid configuration (bad flag value, missing API key)."""


class TransportError(EngageError):
    """A page could not be fetched."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class QuotaExceededError(TransportError):
    """The API reported an exhausted quota; callers should back off."""


class ParseError(EngageError):
    """A payload field could not be interpreted."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class StorageError(EngageError):
    """The snapshot store could not be read or written."""


class EmptySampleError(EngageError):
    """No snapshots remained after all sweeps."""


@dataclass(frozen=True)
class FetchConfig:
    """Fetch parameters; the API key comes from the environment, never flags."""

    api_key: str = ""
    region_code: str = "US"
    page_size: int = 50
    max_pages: int = 10
    request_interval_ms: int = 200
    fixture_dir: Path | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.page_size <= 50:
            raise ConfigError(f"page_size must be in [1, 50], got {self.page_size}")
        if self.max_pages < 1:
            raise ConfigError(f"max_pages must be >= 1, got {self.max_pages}")
        if self.request_interval_ms < 0:
            raise ConfigError("request_interval_ms must be >= 0")
        if len(self.region_code) != 2 or not self.region_code.isalpha():
            raise ConfigError(f"region_code must be 2 letters, got {self.region_code!r}")


def format_rfc3339(dt: datetime) -> str:
    """UTC, second precision, trailing Z."""
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc).replace(microsecond=0)
    return dt.isoformat().replace("+00:00", "Z")


def parse_rfc3339(text: str) -> datetime:
    try:
        dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ParseError(f"bad timestamp {text!r}: {exc}", field="fetched_at") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _utc_now_seconds() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


class Transport(Protocol):
    """One API page fetch; fixture and live implementations share this shape."""

    def get_page(self, params: dict[str, str]) -> dict: ...


class LiveTransport:
    """HTTPS transport with a fixed inter-request delay."""

    def __init__(
        self,
        api_key: str,
        request_interval_ms: int = 200,
        base_url: str = API_URL,
        session: requests.Session | None = None,
    ):
        if not api_key:
            raise ConfigError(f"live fetching needs an API key in ${API_KEY_ENV}")
        self._api_key = api_key
        self._interval = request_interval_ms / 1000.0
        self._base_url = base_url
        self._session = session or requests.Session()
        self._last_request = 0.0

    def _throttle(self) -> None:
        wait = self._last_request + self._interval - time.monotonic()
        if wait > 0:
            time.sleep(wait)
        self._last_request = time.monotonic()

    def get_page(self, params: dict[str, str]) -> dict:
        self._throttle()
        try:
            resp = self._session.get(
                self._base_url, params={**params, "key": self._api_key}, timeout=30
            )
        except requests.RequestException as exc:
            raise TransportError(f"request failed: {exc}") from exc
        if resp.status_code == 403 and _is_quota_error(resp):
            raise QuotaExceededError("API quota exceeded", status=403)
        if not 200 <= resp.status_code < 300:
            raise TransportError(f"HTTP {resp.status_code} from API", status=resp.status_code)
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ParseError(f"response body is not JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ParseError("response body is not a JSON object")
        return payload


def _is_quota_error(resp: requests.Response) -> bool:
    try:
        errors = resp.json().get("error", {}).get("errors", [])
    except ValueError:
        return False
    reasons = {e.get("reason") for e in errors if isinstance(e, dict)}
    return bool(reasons & {"quotaExceeded", "dailyLimitExceeded", "rateLimitExceeded"})


class FixtureTransport:
    """Replays recorded pages from ``<dir>/sweep<k>_page<j>.json``.

    The first request of sweep k serves ``sweep<k>_page1.json``; pagination
    follows the recorded ``nextPageToken`` values, which name the next
    page file. A recorded page may carry ``recordedAt`` so replays keep
    their original fetch timestamps.
    """

    def __init__(self, directory: Path | str, sweep: int = 1):
        self._directory = Path(directory)
        self._sweep = sweep

    def get_page(self, params: dict[str, str]) -> dict:
        token = params.get("pageToken") or f"sweep{self._sweep}_page1"
        path = self._directory / f"{token}.json"
        if not path.is_file():
            raise TransportError(f"fixture page not found: {path}")
        try:
            with open(path, encoding="utf-8") as f:
                payload = json.load(f)
        except (OSError, ValueError) as exc:
            raise ParseError(f"bad fixture page {path.name}: {exc}") from exc
        if not isinstance(payload, dict):
            raise ParseError(f"fixture page {path.name} is not a JSON object")
        return payload


def default_transport(config: FetchConfig, sweep: int = 1) -> Transport:
    """Fixture transport when a fixture directory is configured, else live."""
    if config.fixture_dir is not None:
        return FixtureTransport(config.fixture_dir, sweep=sweep)
    return LiveTransport(config.api_key, request_interval_ms=config.request_interval_ms)


def _count_field(stats: dict, api_name: str, field: str, video_id: str) -> int | None:
    if api_name not in stats:
        return None
    raw = stats[api_name]
    try:
        value = int(raw)
    except (TypeError, ValueError):
        raise ParseError(
            f"video {video_id}: {field} is not an integer: {raw!r}", field=field
        ) from None
    if value < 0:
        # kept as-is: the analysis-side range checks are the guard for bad feeds
        logger.warning("video %s: negative %s count %d in payload", video_id, field, value)
    return value


def parse_video_item(item: dict, fetched_at: datetime) -> VideoStatsSnapshot:
    """One API item to a snapshot; raises ParseError naming the bad field."""
    video_id = item.get("id")
    if not isinstance(video_id, str) or not video_id:
        raise ParseError(f"item has no usable id: {video_id!r}", field="video_id")
    stats = item.get("statistics")
    if not isinstance(stats, dict):
        raise ParseError(f"video {video_id}: missing statistics block", field="views")
    views = _count_field(stats, "viewCount", "views", video_id)
    if views is None:
        raise ParseError(f"video {video_id}: missing views", field="views")
    likes = _count_field(stats, "likeCount", "likes", video_id)
    dislikes = _count_field(stats, "dislikeCount", "dislikes", video_id)
    comments = _count_field(stats, "commentCount", "comments", video_id)

    snippet = item.get("snippet") or {}
    category_id = str(snippet.get("categoryId", "")) if isinstance(snippet, dict) else ""
    category = CATEGORY_LABELS.get(category_id, f"Category {category_id}" if category_id else "")

    return normalize_snapshot(
        VideoStatsSnapshot(
            video_id=video_id,
            fetched_at=fetched_at,
            views=views,
            likes=likes,
            dislikes=dislikes,
            comments=comments,
            # the API omits the comment count when commenting is disabled
            comments_enabled=comments is not None,
            category=category,
        )
    )


def _parse_page(payload: dict) -> tuple[list[VideoStatsSnapshot], str | None]:
    items = payload.get("items")
    if not isinstance(items, list):
        raise ParseError("page has no items list", field="items")
    recorded = payload.get("recordedAt")
    fetched_at = parse_rfc3339(recorded) if recorded else _utc_now_seconds()
    snapshots = [parse_video_item(item, fetched_at) for item in items]
    next_token = payload.get("nextPageToken")
    if next_token is not None and not isinstance(next_token, str):
        raise ParseError(f"bad nextPageToken: {next_token!r}", field="nextPageToken")
    return snapshots, next_token


def fetch_trending_page(
    config: FetchConfig,
    page_token: str | None = None,
    transport: Transport | None = None,
) -> tuple[list[VideoStatsSnapshot], str | None]:
    """Fetch and parse one page of the trending chart.

    Returns up to ``page_size`` snapshots and the token for the next page
    (``None`` on the last one). Snapshots are stamped with the recorded
    fetch time if the page carries one, else with the current UTC time.
    """
    if transport is None:
        transport = default_transport(config)
    params = {
        "chart": "mostPopular",
        "part": "snippet,statistics",
        "maxResults": str(config.page_size),
        "regionCode": config.region_code,
    }
    if page_token:
        params["pageToken"] = page_token
    return _parse_page(transport.get_page(params))


def fetch_sweep(
    config: FetchConfig,
    transport: Transport | None = None,
    sweep: int = 1,
) -> list[VideoStatsSnapshot]:
    """One full pass over the chart: follow page tokens up to max_pages."""
    if transport is None:
        transport = default_transport(config, sweep=sweep)
    snapshots: list[VideoStatsSnapshot] = []
    token: str | None = None
    for _ in range(config.max_pages):
        page, token = fetch_trending_page(config, page_token=token, transport=transport)
        snapshots.extend(page)
        if token is None:
            break
    return snapshots


def dedup_latest(snapshots: Iterable[VideoStatsSnapshot]) -> list[VideoStatsSnapshot]:
    """One snapshot per video id: latest fetched_at wins, ties go to the
    later-read record. Output keeps first-encounter order of the ids."""
    order: list[str] = []
    best: dict[str, VideoStatsSnapshot] = {}
    for snap in snapshots:
        current = best.get(snap.video_id)
        if current is None:
            order.append(snap.video_id)
            best[snap.video_id] = snap
        elif snap.fetched_at >= current.fetched_at:
            best[snap.video_id] = snap
    return [best[video_id] for video_id in order]


def sample_trending(
    config: FetchConfig,
    occasions: int = 1,
    transport_factory: Callable[[int], Transport] | None = None,
) -> StudySample:
    """Run fetch sweeps and union them into a deduplicated sample.

    In fixture mode each occasion replays one recorded sweep; in live mode
    every occasion is a fresh sweep of the current chart (spreading
    occasions over days is done by re-running the fetch command, with the
    snapshot store accumulating the union).
    """
    if occasions < 1:
        raise ConfigError(f"occasions must be >= 1, got {occasions}")
    if transport_factory is None:
        transport_factory = lambda sweep: default_transport(config, sweep=sweep)

    collected: list[VideoStatsSnapshot] = []
    for sweep in range(1, occasions + 1):
        collected.extend(fetch_sweep(config, transport_factory(sweep)))
    if not collected:
        raise EmptySampleError("no snapshots after all sweeps")

    unique = dedup_latest(collected)
    times = sorted(s.fetched_at for s in unique)
    note = (
        f"{occasions} sweep(s), {len(collected)} snapshots, {len(unique)} unique ids, "
        f"fetched {format_rfc3339(times[0])}..{format_rfc3339(times[-1])}"
    )
    return StudySample(snapshots=tuple(unique), selection_note=note)


def fetch_by_ids(
    config: FetchConfig,
    video_ids: Sequence[str],
    transport: Transport | None = None,
) -> list[VideoStatsSnapshot]:
    """Fetch current statistics for explicit video ids, in batches.

    Statistics drift over time, so re-querying a historical id list yields
    present-day counters, not the ones originally studied.
    """
    if transport is None:
        transport = default_transport(config)
    snapshots: list[VideoStatsSnapshot] = []
    for start in range(0, len(video_ids), config.page_size):
        batch = video_ids[start : start + config.page_size]
        params = {"part": "snippet,statistics", "id": ",".join(batch)}
        page, _ = _parse_page(transport.get_page(params))
        snapshots.extend(page)
    return snapshots


def select_study_sample(candidates: StudySample, n: int) -> StudySample:
    """The n highest-view videos with commenting enabled.

    Ties at the cut go to the lower video id. Fewer than n eligible
    candidates is a shortfall, not a fault: all eligible are returned and
    the selection note records the shortfall.
    """
    if n < 1:
        raise ConfigError(f"sample size must be >= 1, got {n}")
    eligible = [s for s in candidates.snapshots if s.comments_enabled]
    eligible.sort(key=lambda s: (-s.views, s.video_id))
    chosen = tuple(eligible[:n])

    note = (
        f"{candidates.selection_note}; top {len(chosen)} of {len(eligible)} "
        f"comment-enabled by views"
    ).lstrip("; ")
    if len(eligible) < n:
        logger.warning("only %d eligible videos for requested n=%d", len(eligible), n)
        note += f" (shortfall: requested {n})"
    return StudySample(snapshots=chosen, selection_note=note)


SNAPSHOT_FIELDS = (
    "video_id", "fetched_at", "views", "likes", "dislikes", "comments",
    "comments_enabled", "category",
)


@dataclass(frozen=True)
class SnapshotStore:
    """Append-only line-delimited JSON file of snapshots."""

    path: Path

    def __post_init__(self) -> None:
        object.__setattr__(self, "path", Path(self.path))


def snapshot_to_record(snapshot: VideoStatsSnapshot) -> dict:
    return {
        "video_id": snapshot.video_id,
        "fetched_at": format_rfc3339(snapshot.fetched_at),
        "views": snapshot.views,
        "likes": snapshot.likes,
        "dislikes": snapshot.dislikes,
        "comments": snapshot.comments,
        "comments_enabled": snapshot.comments_enabled,
        "category": snapshot.category,
    }


def snapshot_from_record(record: dict) -> VideoStatsSnapshot:
    if not isinstance(record, dict):
        raise ParseError("record is not a JSON object")
    video_id = record.get("video_id")
    if not isinstance(video_id, str) or not video_id:
        raise ParseError(f"bad video_id: {video_id!r}", field="video_id")
    raw_time = record.get("fetched_at")
    if not isinstance(raw_time, str):
        raise ParseError(f"bad fetched_at: {raw_time!r}", field="fetched_at")
    counts = {}
    for field in ("views", "likes", "dislikes", "comments"):
        value = record.get(field)
        if field == "views" and not _is_int(value):
            raise ParseError(f"bad views: {value!r}", field="views")
        if value is not None and not _is_int(value):
            raise ParseError(f"bad {field}: {value!r}", field=field)
        counts[field] = value
    enabled = record.get("comments_enabled")
    if not isinstance(enabled, bool):
        raise ParseError(f"bad comments_enabled: {enabled!r}", field="comments_enabled")
    category = record.get("category", "")
    if not isinstance(category, str):
        raise ParseError(f"bad category: {category!r}", field="category")
    return normalize_snapshot(
        VideoStatsSnapshot(
            video_id=video_id,
            fetched_at=parse_rfc3339(raw_time),
            views=counts["views"],
            likes=counts["likes"],
            dislikes=counts["dislikes"],
            comments=counts["comments"],
            comments_enabled=enabled,
            category=category,
        )
    )


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def store_snapshots(store: SnapshotStore, snapshots: Sequence[VideoStatsSnapshot]) -> int:
    """Append one record per snapshot; returns the number written.

    Appending never rewrites existing lines; deduplication happens on read.
    """
    if not snapshots:
        return 0
    try:
        store.path.parent.mkdir(parents=True, exist_ok=True)
        with open(store.path, "a", encoding="utf-8") as f:
            for snap in snapshots:
                f.write(json.dumps(snapshot_to_record(snap), ensure_ascii=False) + "\n")
    except OSError as exc:
        raise StorageError(f"cannot write {store.path}: {exc}") from exc
    return len(snapshots)


def load_snapshots(
    store: SnapshotStore,
    where: Callable[[VideoStatsSnapshot], bool] | None = None,
    lenient: bool = False,
) -> StudySample:
    """Read the store back into a deduplicated sample.

    A malformed line aborts with an error naming the line number; in
    lenient mode it is skipped with a warning instead, and the count of
    skipped lines lands in the selection note.
    """
    try:
        with open(store.path, encoding="utf-8") as f:
            lines = f.readlines()
    except OSError as exc:
        raise StorageError(f"cannot read {store.path}: {exc}") from exc

    snapshots: list[VideoStatsSnapshot] = []
    skipped = 0
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            snapshot = snapshot_from_record(record)
        except (ValueError, ParseError) as exc:
            if not lenient:
                raise StorageError(f"{store.path.name} line {lineno}: {exc}") from exc
            logger.warning("%s line %d skipped: %s", store.path.name, lineno, exc)
            skipped += 1
            continue
        if where is None or where(snapshot):
            snapshots.append(snapshot)

    unique = dedup_latest(snapshots)
    note = f"loaded {len(snapshots)} records from {store.path.name}, {len(unique)} unique ids"
    if skipped:
        note += f", {skipped} malformed line(s) skipped"
    return StudySample(snapshots=tuple(unique), selection_note=note)
