"""Descriptive statistics, binning, Pearson correlation and sample filtering.

All functions are pure and skip absent (``None``) observations; counts of
defined observations travel with every result so downstream tables can
report their own n. Conventions: sample standard deviation (n-1 in the
denominator), adjusted Fisher-Pearson skewness (G1) and bias-corrected
excess kurtosis (G2), the forms mainstream statistics packages print.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from scipy.special import betainc

from .metrics import VideoStatsSnapshot

Number = int | float | Fraction
OptionalNumber = Number | None


@dataclass(frozen=True)
class SampleSummary:
    """Descriptive statistics of one variable over a sample.

    Statistics are ``None`` when too few defined observations exist to
    compute them (skewness needs n >= 3, kurtosis n >= 4, both need a
    non-zero standard deviation).
    """

    n: int
    mean: float | None = None
    std_dev: float | None = None
    min: float | None = None
    max: float | None = None
    skewness: float | None = None
    kurtosis: float | None = None
    bin_mode: str | None = None


@dataclass(frozen=True)
class BinSpec:
    """Histogram bins: left-closed right-open, the last bin closed on both ends.

    ``labels`` are display strings, one per bin; generated from the edges
    when not supplied.
    """

    edges: tuple[float, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if len(self.edges) < 2:
            raise ValueError("BinSpec needs at least 2 edges")
        if any(a >= b for a, b in zip(self.edges, self.edges[1:])):
            raise ValueError("BinSpec edges must be strictly increasing")
        if self.labels is not None and len(self.labels) != len(self.edges) - 1:
            raise ValueError(
                f"BinSpec has {len(self.edges) - 1} bins but {len(self.labels)} labels"
            )

    @property
    def bin_labels(self) -> tuple[str, ...]:
        if self.labels is not None:
            return self.labels
        return tuple(
            f"{_fmt_edge(a)}-{_fmt_edge(b)}" for a, b in zip(self.edges, self.edges[1:])
        )

    def bin_index(self, value: float) -> int:
        """Index of the bin holding ``value``; -1 = underflow, len = overflow."""
        if value < self.edges[0]:
            return -1
        if value > self.edges[-1]:
            return len(self.edges) - 1
        if value == self.edges[-1]:
            return len(self.edges) - 2
        lo, hi = 0, len(self.edges) - 1
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if value >= self.edges[mid]:
                lo = mid
            else:
                hi = mid
        return lo


def _fmt_edge(x: float) -> str:
    if x == int(x):
        return str(int(x))
    return f"{x:g}"


@dataclass(frozen=True)
class Histogram:
    """Bin counts plus explicit under/overflow buckets for out-of-range values."""

    rows: tuple[tuple[str, int], ...]
    underflow: int = 0
    overflow: int = 0

    @property
    def n_defined(self) -> int:
        return sum(count for _, count in self.rows) + self.underflow + self.overflow


@dataclass(frozen=True)
class CorrelationCell:
    """Pearson r with its two-tailed p-value and the pair count used.

    ``r`` is ``None`` when the correlation is undefined (constant series or
    fewer than 2 pairs), with ``error`` naming the condition. ``p_value``
    is ``None`` when |r| = 1 exactly or n < 3.
    """

    r: float | None
    p_value: float | None
    n: int
    error: str | None = None


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric matrix of pairwise correlation cells."""

    names: tuple[str, ...]
    cells: tuple[tuple[CorrelationCell, ...], ...]

    def cell(self, row: str, col: str) -> CorrelationCell:
        return self.cells[self.names.index(row)][self.names.index(col)]


@dataclass(frozen=True)
class StudySample:
    """An ordered, deduplicated collection of snapshots plus provenance."""

    snapshots: tuple[VideoStatsSnapshot, ...]
    selection_note: str = ""

    def __post_init__(self) -> None:
        ids = [s.video_id for s in self.snapshots]
        if len(set(ids)) != len(ids):
            dupes = sorted({v for v, c in Counter(ids).items() if c > 1})
            raise ValueError(f"duplicate video ids in sample: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)


def _defined(values: Iterable[OptionalNumber]) -> list[float]:
    return [float(v) for v in values if v is not None]


def summarize(values: Iterable[OptionalNumber], bins: BinSpec | None = None) -> SampleSummary:
    """Descriptive statistics over the defined entries of ``values``.

    Mean, sample standard deviation, min, max, G1 skewness, G2 excess
    kurtosis and (given ``bins``) the label of the most populated bin;
    ties go to the lowest bin.
    """
    xs = _defined(values)
    n = len(xs)
    if n == 0:
        return SampleSummary(n=0)

    mean = math.fsum(xs) / n
    lo, hi = min(xs), max(xs)

    std_dev = skew = kurt = None
    if n >= 2:
        m2 = math.fsum((x - mean) ** 2 for x in xs)
        std_dev = math.sqrt(m2 / (n - 1))
        if std_dev > 0:
            z3 = math.fsum(((x - mean) / std_dev) ** 3 for x in xs)
            z4 = math.fsum(((x - mean) / std_dev) ** 4 for x in xs)
            if n >= 3:
                skew = n / ((n - 1) * (n - 2)) * z3
            if n >= 4:
                kurt = (
                    n * (n + 1) / ((n - 1) * (n - 2) * (n - 3)) * z4
                    - 3 * (n - 1) ** 2 / ((n - 2) * (n - 3))
                )

    bin_mode = None
    if bins is not None:
        hist = histogram(xs, bins)
        best = max(hist.rows, key=lambda row: row[1], default=None)
        if best is not None and best[1] > 0:
            # max() keeps the first (lowest) bin on ties
            bin_mode = best[0]

    return SampleSummary(
        n=n, mean=mean, std_dev=std_dev, min=lo, max=hi, skewness=skew, kurtosis=kurt,
        bin_mode=bin_mode,
    )


def pearson(
    xs: Sequence[OptionalNumber], ys: Sequence[OptionalNumber]
) -> CorrelationCell:
    """Pearson product-moment correlation with a two-tailed p-value.

    Pairs with either member absent are dropped first. The p-value comes
    from t = r * sqrt((n-2) / (1-r^2)) with n-2 degrees of freedom,
    evaluated through the regularized incomplete beta function.

    Raises ``ValueError`` on length mismatch; degenerate data (constant
    series, fewer than 2 pairs) yields an error cell, not an exception.
    """
    if len(xs) != len(ys):
        raise ValueError(f"series lengths differ: {len(xs)} != {len(ys)}")
    pairs = [(float(x), float(y)) for x, y in zip(xs, ys) if x is not None and y is not None]
    n = len(pairs)
    if n < 2:
        return CorrelationCell(r=None, p_value=None, n=n, error="fewer than 2 pairs")

    px = [x for x, _ in pairs]
    py = [y for _, y in pairs]
    mx = math.fsum(px) / n
    my = math.fsum(py) / n
    ssx = math.fsum((x - mx) ** 2 for x in px)
    ssy = math.fsum((y - my) ** 2 for y in py)
    if ssx == 0 or ssy == 0:
        return CorrelationCell(r=None, p_value=None, n=n, error="constant series")
    cov = math.fsum((x - mx) * (y - my) for x, y in pairs)
    r = cov / math.sqrt(ssx * ssy)
    r = max(-1.0, min(1.0, r))
    return CorrelationCell(r=r, p_value=_pearson_p(r, n), n=n)


def _pearson_p(r: float, n: int) -> float | None:
    if n < 3 or abs(r) == 1.0:
        return None
    df = n - 2
    # two-tailed p for t = r*sqrt(df/(1-r^2)); df/(df+t^2) reduces to 1-r^2
    return float(betainc(df / 2.0, 0.5, 1.0 - r * r))


def correlation_matrix(
    columns: Mapping[str, Sequence[OptionalNumber]]
) -> CorrelationMatrix:
    """Symmetric matrix of pairwise correlations over named columns.

    Rows where either member of a pair is absent are deleted pairwise, so
    each cell carries its own n. Diagonal cells are exactly r = 1 except
    for degenerate columns, which get error cells across their whole row
    and column.
    """
    names = tuple(columns.keys())
    series = [columns[name] for name in names]
    length = len(series[0]) if series else 0
    for name, col in zip(names, series):
        if len(col) != length:
            raise ValueError(f"column {name!r} has length {len(col)}, expected {length}")

    k = len(names)
    cells: list[list[CorrelationCell | None]] = [[None] * k for _ in range(k)]
    for i in range(k):
        xi = series[i]
        defined = [float(v) for v in xi if v is not None]
        if len(defined) < 2:
            diag = CorrelationCell(r=None, p_value=None, n=len(defined), error="fewer than 2 pairs")
        elif min(defined) == max(defined):
            diag = CorrelationCell(r=None, p_value=None, n=len(defined), error="constant series")
        else:
            diag = CorrelationCell(r=1.0, p_value=None, n=len(defined))
        cells[i][i] = diag
        for j in range(i + 1, k):
            cell = pearson(xi, series[j])
            cells[i][j] = cell
            cells[j][i] = cell
    return CorrelationMatrix(
        names=names, cells=tuple(tuple(row) for row in cells)  # type: ignore[arg-type]
    )


ALL_QUARTILES = frozenset({1, 2, 3, 4})
TOP_THREE_QUARTILES = frozenset({2, 3, 4})


def quartile_filter(
    sample: StudySample,
    key: Callable[[VideoStatsSnapshot], Number],
    keep: frozenset[int] | set[int] = TOP_THREE_QUARTILES,
) -> StudySample:
    """Keep only the members falling in the given rank-based quartiles.

    Members are ranked ascending by ``key`` (ties broken by video_id);
    rank boundaries sit at floor(q*n/4), so keeping the top three
    quartiles of an n=100 sample drops the 25 lowest and retains 75.
    Output preserves the sample's original order.
    """
    if not keep <= ALL_QUARTILES:
        raise ValueError(f"quartile set must be within {{1,2,3,4}}, got {sorted(keep)}")
    n = len(sample.snapshots)
    if n == 0 or set(keep) == ALL_QUARTILES:
        return sample

    ranked = sorted(sample.snapshots, key=lambda s: (key(s), s.video_id))
    bounds = [0] + [n * q // 4 for q in (1, 2, 3)] + [n]
    keep_ids = set()
    for q in range(1, 5):
        if q in keep:
            keep_ids.update(s.video_id for s in ranked[bounds[q - 1]:bounds[q]])

    kept = tuple(s for s in sample.snapshots if s.video_id in keep_ids)
    label = f"quartiles {sorted(keep)}"
    note = f"{sample.selection_note}; kept {label} ({len(kept)} of {n})".lstrip("; ")
    return StudySample(snapshots=kept, selection_note=note)


def histogram(values: Iterable[OptionalNumber], bins: BinSpec) -> Histogram:
    """Count defined values into the bins, plus under/overflow buckets."""
    labels = bins.bin_labels
    counts = [0] * len(labels)
    under = over = 0
    for v in values:
        if v is None:
            continue
        idx = bins.bin_index(float(v))
        if idx < 0:
            under += 1
        elif idx >= len(counts):
            over += 1
        else:
            counts[idx] += 1
    return Histogram(
        rows=tuple(zip(labels, counts)), underflow=under, overflow=over,
    )


def category_counts(sample: StudySample) -> list[tuple[str, int]]:
    """Category frequencies, sorted by count descending then name ascending."""
    counts = Counter(s.category for s in sample.snapshots)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
