"""Aggregate trial results into report tables.

Three shapes: per-(model, technique, length) mean and standard deviation;
percent change of a technique over its baseline per length and averaged
across the lengths both series cover; and a depth-by-length matrix of mean
scores for heatmap rendering.

Unscored rows (those with an error instead of a score) are never read by
aggregation; they are surfaced separately via run_report().
"""
from __future__ import annotations

import logging
import statistics
from collections import defaultdict
from dataclasses import dataclass

log = logging.getLogger(__name__)

SCORE_MIN_COLOR = (0xd7, 0x30, 0x27)  # score 1, red
SCORE_MAX_COLOR = (0x1a, 0x98, 0x50)  # score 10, green


@dataclass(frozen=True)
class Summary:
    model: str
    technique: str
    context_tokens: int
    mean: float
    std: float
    n_trials: int


@dataclass(frozen=True)
class PercentChangeRow:
    model: str
    technique: str
    per_length: dict[int, float]
    averaged: float


def scored(rows) -> list[dict]:
    return [r for r in rows if r.get("score") is not None and not r.get("error")]


def run_report(rows) -> dict:
    ok = scored(rows)
    return {"rows": len(list(rows)), "scored": len(ok),
            "failed": len(list(rows)) - len(ok)}


def summarize(rows, mode: str = "per_trial_mean") -> list[Summary]:
    """One Summary per (model, technique, context_tokens) group.

    per_trial_mean (default): average scores across depths within each trial,
    then mean and sample std across the trial means. pooled: mean and sample
    std over every depth-by-trial score.
    """
    if mode not in ("per_trial_mean", "pooled"):
        raise ValueError(f"unknown mode {mode!r}")
    groups: dict[tuple, list[dict]] = defaultdict(list)
    all_groups: set[tuple] = set()
    for r in rows:
        key = (r["model"], r["technique"], r["context_tokens"])
        all_groups.add(key)
        if r.get("score") is not None and not r.get("error"):
            groups[key].append(r)
    for key in sorted(all_groups - set(groups)):
        log.warning("group %s has no scored rows; omitted", key)

    out: list[Summary] = []
    for key in sorted(groups):
        model, technique, length = key
        rows_g = groups[key]
        if mode == "per_trial_mean":
            by_trial: dict[int, list[float]] = defaultdict(list)
            for r in rows_g:
                by_trial[r["trial"]].append(float(r["score"]))
            values = [statistics.fmean(v) for _, v in sorted(by_trial.items())]
        else:
            values = [float(r["score"]) for r in rows_g]
        mean = statistics.fmean(values)
        std = statistics.stdev(values) if len(values) > 1 else 0.0
        out.append(Summary(model=model, technique=technique,
                           context_tokens=length, mean=mean, std=std,
                           n_trials=len(values)))
    return out


def percent_change(baseline: list[Summary],
                   technique: list[Summary]) -> PercentChangeRow:
    """Percent change of one technique series over its baseline series.

    Per-length value is 100 * (mean_tech - mean_base) / mean_base; the
    average uses only lengths present in both series.
    """
    if not baseline or not technique:
        raise ValueError("both series must be non-empty")
    model = technique[0].model
    tech_id = technique[0].technique
    base_by_len = {s.context_tokens: s.mean for s in baseline}
    tech_by_len = {s.context_tokens: s.mean for s in technique}
    common = sorted(set(base_by_len) & set(tech_by_len))
    if not common:
        raise ValueError("series share no context length")
    per_length: dict[int, float] = {}
    for length in common:
        base = base_by_len[length]
        if base == 0:
            raise ValueError(f"baseline mean is 0 at {length} tokens")
        per_length[length] = 100.0 * (tech_by_len[length] - base) / base
    averaged = statistics.fmean(per_length.values())
    return PercentChangeRow(model=model, technique=tech_id,
                            per_length=per_length, averaged=averaged)


def percent_change_table(summaries: list[Summary],
                         baseline_id: str = "baseline") -> list[PercentChangeRow]:
    """percent_change for every (model, technique != baseline) present."""
    by_model_tech: dict[tuple, list[Summary]] = defaultdict(list)
    for s in summaries:
        by_model_tech[(s.model, s.technique)].append(s)
    out: list[PercentChangeRow] = []
    for (model, tech_id) in sorted(by_model_tech):
        if tech_id == baseline_id:
            continue
        base = by_model_tech.get((model, baseline_id))
        if not base:
            log.warning("no baseline series for model %s; skipping %s",
                        model, tech_id)
            continue
        out.append(percent_change(base, by_model_tech[(model, tech_id)]))
    return out


def heatmap_data(rows, model: str, technique: str) -> list[tuple]:
    """(context_tokens, depth_pct, mean score | None) over all trials.

    Single-needle rows only. The grid is the cross product of the lengths
    and depths observed for the group; combinations with no scored rows get
    a None score.
    """
    cells: dict[tuple, list[float]] = defaultdict(list)
    lengths: set[int] = set()
    depths: set[float] = set()
    for r in rows:
        if r["model"] != model or r["technique"] != technique:
            continue
        if r.get("mode") != "single" or r.get("depth_pct") is None:
            continue
        lengths.add(r["context_tokens"])
        depths.add(float(r["depth_pct"]))
        if r.get("score") is not None and not r.get("error"):
            cells[(r["context_tokens"], float(r["depth_pct"]))].append(
                float(r["score"])
            )
    out = []
    for length in sorted(lengths):
        for depth in sorted(depths):
            values = cells.get((length, depth))
            mean = statistics.fmean(values) if values else None
            out.append((length, depth, mean))
    return out


def score_color(score: float) -> str:
    """Linear red-to-green hex color anchored at scores 1 and 10."""
    t = (min(max(score, 1.0), 10.0) - 1.0) / 9.0
    rgb = [
        round(a + (b - a) * t)
        for a, b in zip(SCORE_MIN_COLOR, SCORE_MAX_COLOR)
    ]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def render_heatmap(matrix, cell: int = 28, margin: int = 90) -> str:
    """Deterministic SVG heatmap: one square per matrix row, lengths on the
    x axis, depths on the y axis, missing scores in grey."""
    if not matrix:
        raise ValueError("matrix is empty")
    lengths = sorted({m[0] for m in matrix})
    depths = sorted({m[1] for m in matrix})
    width = margin + cell * len(lengths) + 10
    height = margin // 2 + cell * len(depths) + 30
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="monospace" font-size="10">'
    ]
    for length, depth, score in sorted(matrix):
        x = margin + cell * lengths.index(length)
        y = margin // 2 + cell * depths.index(depth)
        fill = "#eeeeee" if score is None else score_color(score)
        title = "" if score is None else f"{score:.2f}"
        parts.append(
            f'<rect class="cell" x="{x}" y="{y}" width="{cell - 2}" '
            f'height="{cell - 2}" fill="{fill}"><title>{title}</title></rect>'
        )
    for i, length in enumerate(lengths):
        x = margin + cell * i
        parts.append(
            f'<text x="{x}" y="{margin // 2 + cell * len(depths) + 14}" '
            f'transform="rotate(45 {x} {margin // 2 + cell * len(depths) + 14})"'
            f'>{length}</text>'
        )
    for j, depth in enumerate(depths):
        y = margin // 2 + cell * j + cell // 2
        parts.append(f'<text x="4" y="{y}">{depth:.1f}%</text>')
    parts.append("</svg>")
    return "\n".join(parts)
