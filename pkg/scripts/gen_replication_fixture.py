"""Regenerate the bundled offline replication fixture.

Builds three recorded trending sweeps over a universe of 106 videos: the
100 ids from the bundled historical sample list (all comment-enabled)
plus 6 synthetic comment-disabled ids. Sweeps overlap so deduplication is
exercised, repeated videos grow their counters between sweeps so
latest-wins matters, and the category spread of the 100 reproduces the
historical frequency table. Counter magnitudes are synthetic: the real
per-video statistics of the 2013 sample were never published.

Deterministic: a fixed RNG seed, so reruns are byte-identical.

Usage: python scripts/gen_replication_fixture.py
"""

from __future__ import annotations

import json
import math
import random
import sys
from collections import Counter
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from engage.ingestion import CATEGORY_LABELS  # noqa: E402

FIXTURE_DIR = ROOT / "src" / "engage" / "fixtures"
OUT_DIR = FIXTURE_DIR / "replication"

SEED = 20131210
DISABLED_COUNT = 6
PAGE_SIZE = 50
SWEEP_SLICES = ((0, 60), (30, 90), (46, 106))
SWEEP_DATES = ("2013-12-10T09:00:00Z", "2013-12-13T09:00:00Z", "2013-12-17T09:00:00Z")

# historical category spread of the 100 sampled videos (label -> count)
CATEGORY_SPREAD = {
    "Entertainment": 24,
    "Tech": 15,
    "Sports": 11,
    "Comedy": 9,
    "Education": 9,
    "News": 8,
    "Film": 7,
    "Animals": 4,
    "Music": 4,
    "People": 4,
    "Nonprofit": 3,
    "Howto": 1,
    "Travel": 1,
}

ID_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789-_"

VIEW_RANGE = (7_000, 36_000_000)


def synth_video(rng: random.Random, video_id: str, category_id: str, enabled: bool) -> dict:
    views = int(math.exp(rng.uniform(math.log(VIEW_RANGE[0]), math.log(VIEW_RANGE[1]))))
    cpki = min(max(rng.lognormvariate(0.5, 1.0), 0.05), 14.0)
    vpki = min(max(rng.lognormvariate(2.0, 0.8), 0.3), 60.0)
    disp = rng.betavariate(2, 16)
    return {
        "id": video_id,
        "category_id": category_id,
        "enabled": enabled,
        "views": views,
        "cpki": cpki,
        "vpki": vpki,
        "disp": disp,
    }


def counters(video: dict, sweep: int) -> dict:
    # counters keep growing between occasions so later snapshots win dedup
    views = video["views"] + round(video["views"] * 0.02 * (sweep - 1))
    comments = max(1, round(views * video["cpki"] / 1000))
    votes = max(1, round(views * video["vpki"] / 1000))
    dislikes = round(votes * video["disp"])
    stats = {
        "viewCount": str(views),
        "likeCount": str(votes - dislikes),
        "dislikeCount": str(dislikes),
    }
    if video["enabled"]:
        stats["commentCount"] = str(comments)
    return stats


def item(video: dict, sweep: int) -> dict:
    return {
        "kind": "youtube#video",
        "id": video["id"],
        "snippet": {
            "title": f"Sample video {video['id']}",
            "categoryId": video["category_id"],
        },
        "statistics": counters(video, sweep),
    }


def main() -> None:
    rng = random.Random(SEED)
    ids = [
        line.strip()
        for line in (FIXTURE_DIR / "sampled_video_ids.txt").read_text().splitlines()
        if line.strip()
    ]
    assert len(ids) == len(set(ids)) == sum(CATEGORY_SPREAD.values())

    label_to_id = {label: cid for cid, label in CATEGORY_LABELS.items()}
    category_ids = [
        label_to_id[label]
        for label, count in CATEGORY_SPREAD.items()
        for _ in range(count)
    ]
    rng.shuffle(category_ids)

    taken = set(ids)
    disabled_ids = []
    while len(disabled_ids) < DISABLED_COUNT:
        vid = "".join(rng.choice(ID_ALPHABET) for _ in range(11))
        if vid not in taken:
            taken.add(vid)
            disabled_ids.append(vid)

    videos = [
        synth_video(rng, vid, cid, enabled=True)
        for vid, cid in zip(ids, category_ids)
    ]
    # comment-disabled videos drop out at selection whatever their views
    disabled = [
        synth_video(rng, vid, rng.choice(sorted(label_to_id.values())), enabled=False)
        for vid in disabled_ids
    ]
    universe = list(videos)
    for slot, video in zip(sorted(rng.sample(range(len(ids) + DISABLED_COUNT), DISABLED_COUNT)), disabled):
        universe.insert(slot, video)
    assert len(universe) == len(ids) + DISABLED_COUNT

    # sanity: none of the derived rate columns may be (near-)constant
    assert len({round(v["cpki"], 4) for v in videos}) > 10
    assert len({round(v["vpki"], 4) for v in videos}) > 10
    assert len({round(v["disp"], 4) for v in videos}) > 10

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for sweep, ((start, end), date) in enumerate(zip(SWEEP_SLICES, SWEEP_DATES), start=1):
        chart = universe[start:end]
        pages = [chart[i : i + PAGE_SIZE] for i in range(0, len(chart), PAGE_SIZE)]
        for page_no, page_items in enumerate(pages, start=1):
            payload = {
                "kind": "youtube#videoListResponse",
                "recordedAt": date,
                "items": [item(v, sweep) for v in page_items],
            }
            if page_no < len(pages):
                payload["nextPageToken"] = f"sweep{sweep}_page{page_no + 1}"
            path = OUT_DIR / f"sweep{sweep}_page{page_no}.json"
            path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
            print(f"wrote {path.relative_to(ROOT)} ({len(page_items)} items)")

    spread = Counter()
    for video in videos:
        spread[CATEGORY_LABELS[video["category_id"]]] += 1
    categories = sorted(spread.items(), key=lambda kv: (-kv[1], kv[0]))
    expected = {
        "unique_ids": len(universe),
        "sample_n": len(videos),
        "upper_quartile_n": len(videos) - len(videos) // 4,
        "categories": [[name, count] for name, count in categories],
    }
    path = OUT_DIR / "expected.json"
    path.write_text(json.dumps(expected, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {path.relative_to(ROOT)}")


if __name__ == "__main__":
    main()
