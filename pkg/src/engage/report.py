"""Render an analyzed sample into tables and plots.

The bundle holds descriptive statistics for the basic counters and the
derived rates, two correlation matrices (full sample and the top three
quartiles by views), per-rate histograms and the category table. Renders
are pure functions of the bundle: the same bundle always produces the
same bytes, in Markdown (display rounding, significance stars, bold for
moderate correlations), CSV (separate r/p/n columns, no markup) and JSON
(full precision, stable key order).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Mapping

from .ingestion import format_rfc3339
from .metrics import compute_metrics
from .stats import (
    BinSpec,
    CorrelationCell,
    CorrelationMatrix,
    Histogram,
    SampleSummary,
    StudySample,
    TOP_THREE_QUARTILES,
    category_counts,
    correlation_matrix,
    histogram,
    quartile_filter,
    summarize,
)

BUNDLE_FORMAT = "engage-bundle/1"

METRIC_NAMES = ("CpkI", "VpkI", "DisP")
BASIC_NAMES = ("Views", "Comments", "Votes")
CORR_NAMES = ("CpkI", "VpkI", "DisP", "Views", "Votes+", "Votes-", "Comments", "Votes (sum)")

# Approximate historical bin layouts; exact edges are a display choice and
# fully configurable per report.
DEFAULT_BINS: dict[str, BinSpec] = {
    "CpkI": BinSpec(
        edges=(0.0, 0.2, 0.6, 1.0, 2.0, 4.0, 8.0, 16.0),
        labels=("0-.2", ".2-.6", ".6-1.0", "1.0-2.0", "2.0-4.0", "4.0-8.0", "8.0-16.0"),
    ),
    "VpkI": BinSpec(
        edges=(0.0, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0),
        labels=("0-1.0", "1.0-2.0", "2.0-4.0", "4.0-8.0", "8.0-16.0", "16.0-32.0", "32.0-64.0"),
    ),
    "DisP": BinSpec(
        edges=(0.0, 0.04, 0.08, 0.16, 0.32, 0.64, 1.0),
        labels=("≤ 4%", "4-8%", "8-16%", "16-32%", "32-64%", "64-100%"),
    ),
}

SIGNIFICANCE_STRONG = 0.001
SIGNIFICANCE_WEAK = 0.05
MODERATE_R = 0.4


@dataclass(frozen=True)
class ReportBundle:
    """Everything one report needs, computed once from a sample.

    ``rates`` keeps the per-video metric series (full precision, in sample
    order) so a saved bundle can be re-binned at render time without the
    original store.
    """

    provenance: dict
    summary_basic: dict[str, SampleSummary]
    summary_metrics: dict[str, SampleSummary]
    corr_full: CorrelationMatrix
    corr_upper_quartiles: CorrelationMatrix
    histograms: dict[str, Histogram]
    categories: list[tuple[str, int]]
    rates: dict[str, list[float | None]]


def build_report(sample: StudySample, bins: Mapping[str, BinSpec] | None = None) -> ReportBundle:
    """Compute per-video rates and every table of the report.

    ``bins`` overrides the default bin layout per rate name. Statistics
    that cannot be computed (too little data, constant or absent columns)
    become per-table annotations rather than failures.
    """
    if not sample.snapshots:
        raise ValueError("cannot build a report from an empty sample")
    metric_bins = {**DEFAULT_BINS, **(bins or {})}

    columns = _metric_columns(sample)
    upper = quartile_filter(sample, key=lambda s: s.views, keep=TOP_THREE_QUARTILES)
    upper_columns = _metric_columns(upper)

    summary_basic = {
        "Views": summarize(columns["Views"]),
        "Comments": summarize(columns["Comments"]),
        "Votes": summarize(columns["Votes (sum)"]),
    }
    summary_metrics = {
        name: summarize(columns[name], bins=metric_bins[name]) for name in METRIC_NAMES
    }
    corr_full = correlation_matrix({name: columns[name] for name in CORR_NAMES})
    corr_upper = correlation_matrix({name: upper_columns[name] for name in CORR_NAMES})
    histograms = {
        name: histogram(columns[name], metric_bins[name]) for name in METRIC_NAMES
    }

    times = sorted(s.fetched_at for s in sample.snapshots)
    provenance = {
        "sample_n": len(sample.snapshots),
        "selection_note": sample.selection_note,
        "fetched_from": format_rfc3339(times[0]),
        "fetched_to": format_rfc3339(times[-1]),
        "upper_quartile_n": len(upper.snapshots),
        "coverage_notes": _coverage_notes(sample, columns),
        "annotations": _annotations(summary_metrics, corr_full, corr_upper),
    }
    return ReportBundle(
        provenance=provenance,
        summary_basic=summary_basic,
        summary_metrics=summary_metrics,
        corr_full=corr_full,
        corr_upper_quartiles=corr_upper,
        histograms=histograms,
        categories=category_counts(sample),
        rates={name: list(columns[name]) for name in METRIC_NAMES},
    )


def load_binspec_file(path) -> dict[str, BinSpec]:
    """Read per-metric bin overrides from a JSON file.

    Shape: ``{"cpki": {"edges": [...], "labels": [...]}}`` with labels
    optional; keys match metric names case-insensitively. Raises
    ValueError on anything malformed.
    """
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if not isinstance(data, dict):
        raise ValueError("bins file must be a JSON object keyed by metric name")
    by_lower = {name.lower(): name for name in METRIC_NAMES}
    result: dict[str, BinSpec] = {}
    for key, spec in data.items():
        name = by_lower.get(str(key).lower())
        if name is None:
            raise ValueError(f"unknown metric {key!r} in bins file; expected {METRIC_NAMES}")
        if not isinstance(spec, dict) or "edges" not in spec:
            raise ValueError(f"bins for {key!r} must be an object with an 'edges' list")
        labels = spec.get("labels")
        result[name] = BinSpec(
            edges=tuple(float(e) for e in spec["edges"]),
            labels=tuple(str(x) for x in labels) if labels is not None else None,
        )
    return result


def rebin_bundle(bundle: ReportBundle, bins: Mapping[str, BinSpec]) -> ReportBundle:
    """New bundle with histograms and bin modes recomputed from the stored
    per-video rates; metrics not named in ``bins`` are left untouched."""
    histograms = dict(bundle.histograms)
    summaries = dict(bundle.summary_metrics)
    for name, spec in bins.items():
        if name not in bundle.rates:
            raise ValueError(f"bundle has no rate series for {name!r}")
        hist = histogram(bundle.rates[name], spec)
        histograms[name] = hist
        best = max(hist.rows, key=lambda row: row[1], default=None)
        mode = best[0] if best is not None and best[1] > 0 else None
        if name in summaries:
            summaries[name] = replace(summaries[name], bin_mode=mode)
    return replace(bundle, histograms=histograms, summary_metrics=summaries)


def _metric_columns(sample: StudySample) -> dict[str, list]:
    """Aligned per-video series for every summary and correlation column."""
    snaps = sample.snapshots
    per_video = [compute_metrics(s) for s in snaps]
    votes = [
        s.likes + s.dislikes if s.likes is not None and s.dislikes is not None else None
        for s in snaps
    ]
    return {
        "CpkI": [float(m.cpki) if m.cpki is not None else None for m in per_video],
        "VpkI": [float(m.vpki) if m.vpki is not None else None for m in per_video],
        "DisP": [float(m.disp) if m.disp is not None else None for m in per_video],
        "Views": [s.views for s in snaps],
        "Votes+": [s.likes for s in snaps],
        "Votes-": [s.dislikes for s in snaps],
        "Comments": [s.comments if s.comments_enabled else None for s in snaps],
        "Votes (sum)": votes,
    }


def _coverage_notes(sample: StudySample, columns: dict[str, list]) -> list[str]:
    n = len(sample.snapshots)
    notes = []
    for name, consequence in (
        ("Votes-", "VpkI and DisP are undefined there"),
        ("Votes+", "VpkI and DisP are undefined there"),
        ("Comments", "CpkI is undefined there"),
    ):
        missing = sum(1 for v in columns[name] if v is None)
        if missing:
            label = {"Votes-": "dislike", "Votes+": "like", "Comments": "comment"}[name]
            notes.append(f"{label} counts absent for {missing} of {n} snapshots; {consequence}")
    return notes


def _annotations(
    summary_metrics: dict[str, SampleSummary],
    corr_full: CorrelationMatrix,
    corr_upper: CorrelationMatrix,
) -> dict[str, str]:
    annotations: dict[str, str] = {}
    for name, summary in summary_metrics.items():
        if summary.n == 0:
            annotations[f"summary_{name}"] = f"{name} undefined for every snapshot"
    for key, matrix in (("corr_full", corr_full), ("corr_upper_quartiles", corr_upper)):
        off_diag = [
            matrix.cells[i][j]
            for i in range(len(matrix.names))
            for j in range(len(matrix.names))
            if i != j
        ]
        errors = [c for c in off_diag if c.error is not None]
        if off_diag and len(errors) == len(off_diag):
            annotations[key] = "insufficient n: no correlation is defined"
        elif errors:
            annotations[key] = f"{len(errors)} of {len(off_diag)} cells undefined"
    return annotations


# --- formatting helpers ----------------------------------------------------

def significance_stars(p_value: float | None) -> str:
    """Star annotation from the p-value alone: ** below .001, * below .05."""
    if p_value is None:
        return ""
    if p_value < SIGNIFICANCE_STRONG:
        return "**"
    if p_value < SIGNIFICANCE_WEAK:
        return "*"
    return ""


def is_moderate(r: float | None) -> bool:
    """Bold threshold: at least moderate correlation strength."""
    return r is not None and abs(r) > MODERATE_R


def format_r(r: float) -> str:
    if r == 1.0:
        return "1"
    if r == -1.0:
        return "-1"
    text = f"{r:.3f}"
    if text.startswith("0."):
        return text[1:]
    if text.startswith("-0."):
        return "-" + text[2:]
    return text


def _md_corr_cell(cell: CorrelationCell) -> str:
    if cell.r is None:
        return "n/a"
    stars = significance_stars(cell.p_value).replace("*", "\\*")
    text = format_r(cell.r) + stars
    if is_moderate(cell.r):
        text = f"**{text}**"
    return text


def _fmt_int(x: float | None) -> str:
    return "" if x is None else f"{round(x):,}"


def _fmt_mean(x: float | None) -> str:
    return "" if x is None else f"{x:,.1f}"


def _fmt_metric(x: float | None) -> str:
    return "" if x is None else f"{x:.3f}"


def _fmt_pct(x: float | None) -> str:
    return "" if x is None else f"{100 * x:.2f}%"


def _ordered_names(mapping: Mapping[str, object], preferred: tuple[str, ...]) -> list[str]:
    """Canonical presentation order, stable across JSON round-trips."""
    return [n for n in preferred if n in mapping] + [
        n for n in sorted(mapping) if n not in preferred
    ]


# --- markdown --------------------------------------------------------------

def _md_table(header: list[str], rows: list[list[str]]) -> list[str]:
    lines = ["| " + " | ".join(header) + " |"]
    lines.append("|" + "|".join(" --- " for _ in header) + "|")
    for row in rows:
        lines.append("| " + " | ".join(row) + " |")
    return lines


def _md_summary_basic(summaries: dict[str, SampleSummary]) -> list[str]:
    names = _ordered_names(summaries, BASIC_NAMES)
    rows = [
        ["N"] + [str(summaries[v].n) for v in names],
        ["Mean"] + [_fmt_mean(summaries[v].mean) for v in names],
        ["Std. dev."] + [_fmt_mean(summaries[v].std_dev) for v in names],
        ["Minimum"] + [_fmt_int(summaries[v].min) for v in names],
        ["Maximum"] + [_fmt_int(summaries[v].max) for v in names],
    ]
    return _md_table([""] + names, rows)


def _md_summary_metrics(summaries: dict[str, SampleSummary]) -> list[str]:
    names = _ordered_names(summaries, METRIC_NAMES)

    def fmt(name: str, value: float | None) -> str:
        return _fmt_pct(value) if name == "DisP" else _fmt_metric(value)

    rows = [
        ["N"] + [str(summaries[v].n) for v in names],
        ["Mean"] + [fmt(v, summaries[v].mean) for v in names],
        ["Std. dev."] + [fmt(v, summaries[v].std_dev) for v in names],
        ["Bin mode"] + [summaries[v].bin_mode or "" for v in names],
        ["Skewness"] + [_fmt_metric(summaries[v].skewness) for v in names],
        ["Kurtosis"] + [_fmt_metric(summaries[v].kurtosis) for v in names],
        ["Minimum"] + [fmt(v, summaries[v].min) for v in names],
        ["Maximum"] + [fmt(v, summaries[v].max) for v in names],
    ]
    return _md_table([""] + names, rows)


def _md_corr_table(matrix: CorrelationMatrix) -> list[str]:
    names = list(matrix.names)
    cols = names[:-1]
    def cell_text(i: int, j: int) -> str:
        if j > i:
            return ""
        cell = matrix.cells[i][j]
        # self-correlations stay a bare 1, star/bold markup is for the pairs
        if j == i and cell.error is None:
            return "1"
        return _md_corr_cell(cell)

    lines = _md_table(
        [""] + cols,
        [
            [names[i]] + [cell_text(i, j) for j in range(len(cols))]
            for i in range(1, len(names))
        ],
    )
    ns = sorted({c.n for row in matrix.cells for c in row})
    lines.append("")
    lines.append(
        f"Pairwise deletion; n per cell in {ns[0]}..{ns[-1]}. "
        "Stars mark significance (`*` p < .05, `**` p < .001); "
        "bold marks at least moderate strength (|r| > .4). "
        "Exact r, p and n per cell are in the CSV and JSON renders."
    )
    return lines


def _md_histogram(hist: Histogram) -> list[str]:
    rows = [[label, str(count)] for label, count in hist.rows]
    if hist.underflow:
        rows.append(["< min", str(hist.underflow)])
    if hist.overflow:
        rows.append(["> max", str(hist.overflow)])
    return _md_table(["Bin", "Count"], rows)


def _markdown_report(bundle: ReportBundle) -> str:
    p = bundle.provenance
    lines: list[str] = ["# Engagement report", ""]
    lines += [
        f"- Sample: {p['sample_n']} videos, fetched {p['fetched_from']} .. {p['fetched_to']}",
        f"- Selection: {p['selection_note']}",
    ]
    for note in p["coverage_notes"]:
        lines.append(f"- Coverage: {note}")
    for key in sorted(p["annotations"]):
        lines.append(f"- Note ({key}): {p['annotations'][key]}")
    lines.append("")

    lines += ["## Basic statistics", ""]
    lines += _md_summary_basic(bundle.summary_basic)
    lines += ["", "## Engagement rates", ""]
    lines += _md_summary_metrics(bundle.summary_metrics)
    lines += ["", f"## Correlations, full sample (N={p['sample_n']})", ""]
    lines += _md_corr_table(bundle.corr_full)
    lines += [
        "",
        f"## Correlations, top three quartiles by views (N={p['upper_quartile_n']})",
        "",
    ]
    lines += _md_corr_table(bundle.corr_upper_quartiles)

    lines += ["", "## Rate distributions", ""]
    for name in _ordered_names(bundle.histograms, METRIC_NAMES):
        lines += [f"### {name}", ""]
        lines += _md_histogram(bundle.histograms[name])
        lines.append("")

    lines += ["## Categories", ""]
    lines += _md_table(
        ["Category", "Frequency"],
        [[cat, str(count)] for cat, count in bundle.categories],
    )
    lines.append("")
    return "\n".join(lines)


# --- csv -------------------------------------------------------------------

def _csv_quote(value) -> str:
    text = "" if value is None else str(value)
    if any(ch in text for ch in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def _csv_rows(rows: list[list]) -> list[str]:
    return [",".join(_csv_quote(v) for v in row) for row in rows]


def _csv_summaries(title: str, summaries: dict[str, SampleSummary],
                   preferred: tuple[str, ...]) -> list[str]:
    rows: list[list] = [["variable", "n", "mean", "std_dev", "min", "max",
                         "skewness", "kurtosis", "bin_mode"]]
    for name in _ordered_names(summaries, preferred):
        s = summaries[name]
        rows.append([name, s.n, s.mean, s.std_dev, s.min, s.max,
                     s.skewness, s.kurtosis, s.bin_mode])
    return [f"# {title}"] + _csv_rows(rows)


def _csv_corr(title: str, matrix: CorrelationMatrix) -> list[str]:
    rows: list[list] = [["row", "col", "r", "p_value", "n", "error"]]
    for i in range(1, len(matrix.names)):
        for j in range(i + 1):
            cell = matrix.cells[i][j]
            rows.append([matrix.names[i], matrix.names[j],
                         cell.r, cell.p_value, cell.n, cell.error])
    return [f"# {title}"] + _csv_rows(rows)


def _csv_report(bundle: ReportBundle) -> str:
    p = bundle.provenance
    lines = ["# provenance"]
    lines += _csv_rows([["key", "value"]])
    for key in ("sample_n", "selection_note", "fetched_from", "fetched_to",
                "upper_quartile_n"):
        lines += _csv_rows([[key, p[key]]])
    for note in p["coverage_notes"]:
        lines += _csv_rows([["coverage_note", note]])
    for key in sorted(p["annotations"]):
        lines += _csv_rows([[f"annotation:{key}", p["annotations"][key]]])

    lines += _csv_summaries("summary_basic", bundle.summary_basic, BASIC_NAMES)
    lines += _csv_summaries("summary_metrics", bundle.summary_metrics, METRIC_NAMES)
    lines += _csv_corr("correlations_full", bundle.corr_full)
    lines += _csv_corr("correlations_upper_quartiles", bundle.corr_upper_quartiles)
    for name in _ordered_names(bundle.histograms, METRIC_NAMES):
        hist = bundle.histograms[name]
        lines.append(f"# histogram_{name.lower()}")
        rows: list[list] = [["bin", "count"]]
        rows += [[label, count] for label, count in hist.rows]
        rows.append(["underflow", hist.underflow])
        rows.append(["overflow", hist.overflow])
        lines += _csv_rows(rows)
    lines.append("# categories")
    lines += _csv_rows([["category", "count"]] + [list(kv) for kv in bundle.categories])
    return "\n".join(lines) + "\n"


# --- json ------------------------------------------------------------------

def _summary_to_json(s: SampleSummary) -> dict:
    return {
        "n": s.n, "mean": s.mean, "std_dev": s.std_dev, "min": s.min, "max": s.max,
        "skewness": s.skewness, "kurtosis": s.kurtosis, "bin_mode": s.bin_mode,
    }


def _summary_from_json(d: dict) -> SampleSummary:
    return SampleSummary(
        n=d["n"], mean=d["mean"], std_dev=d["std_dev"], min=d["min"], max=d["max"],
        skewness=d["skewness"], kurtosis=d["kurtosis"], bin_mode=d["bin_mode"],
    )


def _matrix_to_json(m: CorrelationMatrix) -> dict:
    return {
        "names": list(m.names),
        "cells": [
            [
                {"r": c.r, "p_value": c.p_value, "n": c.n, "error": c.error}
                for c in row
            ]
            for row in m.cells
        ],
    }


def _matrix_from_json(d: dict) -> CorrelationMatrix:
    return CorrelationMatrix(
        names=tuple(d["names"]),
        cells=tuple(
            tuple(
                CorrelationCell(r=c["r"], p_value=c["p_value"], n=c["n"], error=c["error"])
                for c in row
            )
            for row in d["cells"]
        ),
    )


def bundle_to_json(bundle: ReportBundle) -> dict:
    return {
        "format": BUNDLE_FORMAT,
        "provenance": bundle.provenance,
        "summary_basic": {k: _summary_to_json(v) for k, v in bundle.summary_basic.items()},
        "summary_metrics": {k: _summary_to_json(v) for k, v in bundle.summary_metrics.items()},
        "corr_full": _matrix_to_json(bundle.corr_full),
        "corr_upper_quartiles": _matrix_to_json(bundle.corr_upper_quartiles),
        "histograms": {
            name: {
                "rows": [[label, count] for label, count in hist.rows],
                "underflow": hist.underflow,
                "overflow": hist.overflow,
            }
            for name, hist in bundle.histograms.items()
        },
        "categories": [[cat, count] for cat, count in bundle.categories],
        "rates": {name: list(values) for name, values in bundle.rates.items()},
    }


def bundle_from_json(data: dict) -> ReportBundle:
    if data.get("format") != BUNDLE_FORMAT:
        raise ValueError(f"not a report bundle (format={data.get('format')!r})")
    return ReportBundle(
        provenance=data["provenance"],
        summary_basic={k: _summary_from_json(v) for k, v in data["summary_basic"].items()},
        summary_metrics={k: _summary_from_json(v) for k, v in data["summary_metrics"].items()},
        corr_full=_matrix_from_json(data["corr_full"]),
        corr_upper_quartiles=_matrix_from_json(data["corr_upper_quartiles"]),
        histograms={
            name: Histogram(
                rows=tuple((label, count) for label, count in h["rows"]),
                underflow=h["underflow"],
                overflow=h["overflow"],
            )
            for name, h in data["histograms"].items()
        },
        categories=[(cat, count) for cat, count in data["categories"]],
        rates={name: list(values) for name, values in data["rates"].items()},
    )


RENDER_FORMATS = ("md", "csv", "json")


def render(bundle: ReportBundle, format: str = "md") -> str:
    """Render the bundle in one format; identical bundles give identical text."""
    if format == "md":
        return _markdown_report(bundle)
    if format == "csv":
        return _csv_report(bundle)
    if format == "json":
        return json.dumps(bundle_to_json(bundle), sort_keys=True, indent=2,
                          ensure_ascii=False) + "\n"
    raise ValueError(f"unknown format {format!r}; expected one of {RENDER_FORMATS}")


# --- histogram plots -------------------------------------------------------

MAX_BAR_COLUMNS = 40


def render_histogram_plot(hist: Histogram, style: str = "text", title: str = "") -> str:
    """A bar chart of the histogram as fixed-width text or standalone SVG."""
    if style == "text":
        return _text_histogram(hist, title)
    if style == "svg":
        return _svg_histogram(hist, title)
    raise ValueError(f"unknown plot style {style!r}; expected 'text' or 'svg'")


def _plot_rows(hist: Histogram) -> list[tuple[str, int]]:
    rows = [("< min", hist.underflow)] if hist.underflow else []
    rows += list(hist.rows)
    if hist.overflow:
        rows.append(("> max", hist.overflow))
    return rows


def _text_histogram(hist: Histogram, title: str) -> str:
    rows = _plot_rows(hist)
    max_count = max((count for _, count in rows), default=0)
    scale = 1.0 if max_count <= MAX_BAR_COLUMNS else MAX_BAR_COLUMNS / max_count
    label_width = max((len(label) for label, _ in rows), default=0)
    count_width = max((len(str(count)) for _, count in rows), default=1)
    lines = [title] if title else []
    for label, count in rows:
        bar = "#" * round(count * scale)
        lines.append(f"{label:>{label_width}} | {count:>{count_width}} | {bar}")
    return "\n".join(lines) + "\n"


SVG_BAR_SPAN = 400
SVG_ROW_HEIGHT = 24
SVG_LEFT = 170
SVG_WIDTH = 640


def _svg_histogram(hist: Histogram, title: str) -> str:
    rows = _plot_rows(hist)
    max_count = max((count for _, count in rows), default=0)
    top = 34 if title else 10
    height = top + SVG_ROW_HEIGHT * len(rows) + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_WIDTH}" height="{height}" '
        f'font-family="monospace" font-size="13">',
    ]
    if title:
        parts.append(f'<text x="10" y="20" font-size="15">{_svg_escape(title)}</text>')
    for i, (label, count) in enumerate(rows):
        y = top + i * SVG_ROW_HEIGHT
        width = 0.0 if max_count == 0 else round(SVG_BAR_SPAN * count / max_count, 1)
        parts.append(
            f'<text x="{SVG_LEFT - 8}" y="{y + 16}" text-anchor="end">{_svg_escape(label)}</text>'
        )
        parts.append(
            f'<rect x="{SVG_LEFT}" y="{y + 4}" width="{width}" height="{SVG_ROW_HEIGHT - 8}" '
            f'fill="#4878a8"/>'
        )
        parts.append(f'<text x="{SVG_LEFT + width + 6}" y="{y + 16}">{count}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _svg_escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
