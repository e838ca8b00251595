import math
import random
from datetime import datetime, timezone

import pytest
from scipy import stats as scipy_stats

from engage.metrics import VideoStatsSnapshot
from engage.stats import (
    ALL_QUARTILES,
    BinSpec,
    StudySample,
    TOP_THREE_QUARTILES,
    category_counts,
    correlation_matrix,
    histogram,
    pearson,
    quartile_filter,
    summarize,
)

NOW = datetime(2013, 12, 10, 9, 0, 0, tzinfo=timezone.utc)


def snap(video_id, views, category="Entertainment"):
    return VideoStatsSnapshot(
        video_id=video_id, fetched_at=NOW, views=views, category=category
    )


def sample_of(views_list):
    return StudySample(
        snapshots=tuple(snap(f"vid{i:08d}", v) for i, v in enumerate(views_list))
    )


# values frozen from a 50-digit direct-formula computation
SUMMARY_CASES = [
    ([2, 4, 4, 4, 5, 5, 7, 9],
     (5.0, 2.138089935299395, 0.8184875533567997, 0.940625)),
    ([1.5, 2.5, 2.5, 2.75, 3.25, 4.75],
     (2.875, 1.0810874155219827, 0.9348875702875334, 1.9460093225428237)),
    ([1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
     (5.5, 3.0276503540974917, 0.0, -1.2)),
    ([0.1, 0.1, 0.1, 0.2, 0.9],
     (0.28, 0.3492849839314596, 2.1542838971316844, 4.677506046761623)),
    ([12.0, 7.5, 3.25, 9800.125, 0.5, 2.0, 2.0],
     (1403.9107142857142, 3702.384637462758, 2.6457448745487775, 6.999974039398916)),
]


@pytest.mark.parametrize("values,expected", SUMMARY_CASES)
def test_summarize_matches_frozen_oracle(values, expected):
    mean, sd, skew, kurt = expected
    s = summarize(values)
    assert s.n == len(values)
    assert s.mean == pytest.approx(mean, rel=1e-12)
    assert s.std_dev == pytest.approx(sd, rel=1e-12)
    assert s.skewness == pytest.approx(skew, rel=1e-9, abs=1e-12)
    assert s.kurtosis == pytest.approx(kurt, rel=1e-9)
    assert s.min == min(values)
    assert s.max == max(values)


def test_summarize_matches_scipy_on_random_vectors():
    rng = random.Random(23)
    for _ in range(50):
        xs = [rng.uniform(-50, 50) for _ in range(rng.randrange(5, 40))]
        s = summarize(xs)
        n = len(xs)
        assert s.std_dev == pytest.approx(
            math.sqrt(sum((x - s.mean) ** 2 for x in xs) / (n - 1)), rel=1e-12
        )
        assert s.skewness == pytest.approx(
            float(scipy_stats.skew(xs, bias=False)), rel=1e-9, abs=1e-12
        )
        assert s.kurtosis == pytest.approx(
            float(scipy_stats.kurtosis(xs, bias=False)), rel=1e-9, abs=1e-12
        )


def test_summarize_small_and_degenerate():
    assert summarize([]).n == 0
    assert summarize([None, None]).n == 0
    one = summarize([5])
    assert (one.n, one.mean, one.std_dev) == (1, 5.0, None)
    two = summarize([1, 2])
    assert two.std_dev is not None and two.skewness is None
    three = summarize([1, 2, 4])
    assert three.skewness is not None and three.kurtosis is None
    flat = summarize([3, 3, 3, 3, 3])
    assert flat.std_dev == 0 and flat.skewness is None and flat.kurtosis is None


def test_summarize_skips_absent_values():
    s = summarize([None, 1, None, 3])
    assert s.n == 2
    assert s.mean == 2.0


def test_bin_mode_prefers_lowest_on_tie():
    bins = BinSpec(edges=(0.0, 1.0, 2.0, 3.0))
    s = summarize([0.5, 0.6, 1.5, 1.7, 2.5], bins=bins)
    assert s.bin_mode == "0-1"
    tied = summarize([0.5, 1.5], bins=bins)
    assert tied.bin_mode == "0-1"


def test_bin_mode_absent_when_nothing_in_range():
    bins = BinSpec(edges=(0.0, 1.0))
    s = summarize([5.0, 6.0], bins=bins)
    assert s.bin_mode is None


def test_binspec_validation_and_index():
    with pytest.raises(ValueError):
        BinSpec(edges=(1.0,))
    with pytest.raises(ValueError):
        BinSpec(edges=(1.0, 1.0))
    with pytest.raises(ValueError):
        BinSpec(edges=(0.0, 1.0, 2.0), labels=("only one",))
    bins = BinSpec(edges=(0.0, 1.0, 2.0))
    assert bins.bin_index(-0.1) == -1
    assert bins.bin_index(0.0) == 0
    assert bins.bin_index(0.999) == 0
    assert bins.bin_index(1.0) == 1
    # the top edge belongs to the last bin, everything beyond overflows
    assert bins.bin_index(2.0) == 1
    assert bins.bin_index(2.0001) == 2


def test_histogram_conserves_counts():
    bins = BinSpec(edges=(0.0, 10.0, 20.0))
    values = [-5, 0, 3, 9.999, 10, 15, 20, 25, None, 99]
    hist = histogram(values, bins)
    defined = sum(1 for v in values if v is not None)
    assert hist.underflow + hist.overflow + sum(c for _, c in hist.rows) == defined
    assert hist.underflow == 1
    assert hist.overflow == 2
    # 0, 3, 9.999 in [0,10); 10, 15 and the closing edge 20 in [10,20]
    assert [c for _, c in hist.rows] == [3, 3]


def test_pearson_hand_case_is_exact():
    cell = pearson([1, 2, 3, 4], [1, 3, 2, 4])
    assert cell.r == 0.8
    assert cell.p_value == pytest.approx(0.2, rel=1e-12)
    assert cell.n == 4
    assert cell.error is None


def test_pearson_perfect_and_anti():
    xs = [1.0, 2.0, 5.0, 7.0, 11.0]
    assert pearson(xs, [2 * x for x in xs]).r == 1.0
    assert pearson(xs, [-x for x in xs]).r == -1.0
    assert pearson(xs, [2 * x for x in xs]).p_value is None


def test_pearson_matches_scipy():
    rng = random.Random(29)
    for _ in range(50):
        n = rng.randrange(5, 60)
        xs = [rng.gauss(0, 10) for _ in range(n)]
        ys = [0.7 * x + rng.gauss(0, 5) for x in xs]
        cell = pearson(xs, ys)
        ref_r, ref_p = scipy_stats.pearsonr(xs, ys)
        assert cell.r == pytest.approx(float(ref_r), rel=1e-12, abs=1e-12)
        assert cell.p_value == pytest.approx(float(ref_p), rel=1e-9, abs=1e-12)


def test_pearson_affine_invariance():
    rng = random.Random(31)
    xs = [rng.uniform(0, 100) for _ in range(30)]
    ys = [rng.uniform(0, 100) for _ in range(30)]
    base = pearson(xs, ys).r
    for _ in range(50):
        a = rng.uniform(0.01, 50)
        b = rng.uniform(-100, 100)
        assert pearson(xs, [a * y + b for y in ys]).r == pytest.approx(base, abs=1e-12)
        assert pearson(xs, [-a * y + b for y in ys]).r == pytest.approx(-base, abs=1e-12)


def test_pearson_degenerate_inputs():
    with pytest.raises(ValueError):
        pearson([1, 2], [1, 2, 3])
    short = pearson([1], [2])
    assert short.error == "fewer than 2 pairs" and short.r is None
    constant = pearson([3, 3, 3], [1, 2, 3])
    assert constant.error == "constant series" and constant.p_value is None


def test_pearson_pairwise_deletion():
    cell = pearson([1, None, 2, 3, 4], [1, 9, None, 2, 4])
    # only the (1,1), (3,2), (4,4) pairs survive
    assert cell.n == 3


def test_correlation_matrix_shape_and_symmetry():
    rng = random.Random(37)
    cols = {
        "a": [rng.random() for _ in range(20)],
        "b": [rng.random() for _ in range(20)],
        "c": [rng.random() for _ in range(20)],
    }
    m = correlation_matrix(cols)
    assert m.names == ("a", "b", "c")
    for i in range(3):
        assert m.cells[i][i].r == 1.0
        for j in range(3):
            assert m.cells[i][j] is m.cells[j][i]


def test_correlation_matrix_degenerate_column():
    m = correlation_matrix({"a": [1, 2, 3], "b": [5, 5, 5]})
    assert m.cell("b", "b").error == "constant series"
    assert m.cell("a", "b").error == "constant series"
    assert m.cell("a", "a").r == 1.0


def test_correlation_matrix_rejects_ragged_columns():
    with pytest.raises(ValueError):
        correlation_matrix({"a": [1, 2], "b": [1, 2, 3]})


def test_quartile_filter_keeps_exactly_75_of_100():
    rng = random.Random(41)
    views = [rng.randrange(1_000, 10_000_000) for _ in range(100)]
    sample = sample_of(views)
    kept = quartile_filter(sample, key=lambda s: s.views)
    assert len(kept.snapshots) == 75
    cut = sorted(views)[25]
    assert all(s.views >= cut for s in kept.snapshots)


def test_quartile_filter_all_quartiles_is_identity():
    sample = sample_of([5, 3, 9, 1])
    assert quartile_filter(sample, key=lambda s: s.views, keep=ALL_QUARTILES) is sample


def test_quartile_filter_preserves_input_order():
    sample = sample_of([40, 10, 30, 20])
    kept = quartile_filter(sample, key=lambda s: s.views, keep=TOP_THREE_QUARTILES)
    # drops the single lowest (views=10), keeps the rest in sample order
    assert [s.views for s in kept.snapshots] == [40, 30, 20]


def test_quartile_filter_breaks_ties_by_video_id():
    snaps = tuple(snap(vid, 100) for vid in ("d", "c", "b", "a"))
    sample = StudySample(snapshots=snaps)
    kept = quartile_filter(sample, key=lambda s: s.views, keep={2, 3, 4})
    assert sorted(s.video_id for s in kept.snapshots) == ["b", "c", "d"]


def test_quartile_filter_bottom_quartile_only():
    sample = sample_of([1, 2, 3, 4, 5, 6, 7, 8])
    kept = quartile_filter(sample, key=lambda s: s.views, keep={1})
    assert sorted(s.views for s in kept.snapshots) == [1, 2]


def test_quartile_filter_rejects_bad_quartiles():
    with pytest.raises(ValueError):
        quartile_filter(sample_of([1, 2]), key=lambda s: s.views, keep={0, 1})


def test_quartile_sizes_for_odd_n():
    # floor boundaries: n=10 -> drop floor(10/4)=2
    kept = quartile_filter(sample_of(list(range(10))), key=lambda s: s.views)
    assert len(kept.snapshots) == 8


def test_study_sample_rejects_duplicate_ids():
    with pytest.raises(ValueError):
        StudySample(snapshots=(snap("same", 1), snap("same", 2)))


def test_category_counts_sorted_by_count_then_name():
    snaps = (
        snap("a1", 1, "News"),
        snap("a2", 1, "News"),
        snap("a3", 1, "Comedy"),
        snap("a4", 1, "Animals"),
        snap("a5", 1, "Comedy"),
    )
    counts = category_counts(StudySample(snapshots=snaps))
    assert counts == [("Comedy", 2), ("News", 2), ("Animals", 1)]
