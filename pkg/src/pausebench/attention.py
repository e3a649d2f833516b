"""Analyze attention dumps: normalization, spike metrics, and comparisons.

A dump holds one head-averaged attention vector per layer, taken over the
prompt positions at the step that produced the first answer token. This
module quantifies how much of each layer's attention lands on pause markers
(spike ratio against a windowed-median background), on the needle region,
and on the tail half of the context, and renders cross-technique reports.

Dumps whose prompt lengths differ (marker injection changes token counts)
are aligned by fractional position, never by raw index.
"""
from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

DEFAULT_WINDOW = 21


class DumpError(ValueError):
    pass


@dataclass(frozen=True)
class AttentionDump:
    model_name: str
    prompt_token_count: int
    layers: tuple[tuple[float, ...], ...]
    pause_positions: tuple[int, ...]
    needle_span: tuple[int, int]
    technique: str

    @property
    def n_layers(self) -> int:
        return len(self.layers)


@dataclass(frozen=True)
class LayerSpikes:
    layer: int
    pause_spike_ratios: tuple[float, ...]
    needle_region_mass: float
    tail_half_mass: float


@dataclass(frozen=True)
class SpikeReport:
    technique: str
    per_layer: tuple[LayerSpikes, ...]


def load_schema() -> dict:
    ref = resources.files("pausebench") / "schemas" / "attention_dump.schema.json"
    return json.loads(ref.read_text(encoding="utf-8"))


def load_dump(path) -> AttentionDump:
    """Read and validate a dump file (schema plus shape checks)."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return dump_from_dict(raw)


def dump_from_dict(raw: dict) -> AttentionDump:
    try:
        jsonschema.validate(raw, load_schema())
    except jsonschema.ValidationError as exc:
        raise DumpError(f"dump fails schema validation: {exc.message}") from exc
    n = raw["prompt_token_count"]
    for i, layer in enumerate(raw["layers"]):
        if len(layer) != n:
            raise DumpError(
                f"layer {i} has {len(layer)} weights, expected {n}"
            )
    for p in raw["pause_positions"]:
        if not 0 <= p < n:
            raise DumpError(f"pause position {p} out of range 0..{n - 1}")
    start, end = raw["needle_span"]
    if not (0 <= start <= end <= n):
        raise DumpError(f"needle span {raw['needle_span']} out of range")
    return AttentionDump(
        model_name=raw["model_name"],
        prompt_token_count=n,
        layers=tuple(tuple(float(w) for w in layer) for layer in raw["layers"]),
        pause_positions=tuple(raw["pause_positions"]),
        needle_span=(start, end),
        technique=raw["technique"],
    )


def normalize(dump: AttentionDump) -> list[list[float]]:
    """Scale each layer by its own maximum so the peak maps to 1.0.

    An all-zero layer stays all zeros. NaN or negative weights are rejected.
    """
    out: list[list[float]] = []
    for i, layer in enumerate(dump.layers):
        for w in layer:
            if math.isnan(w):
                raise DumpError(f"layer {i} contains NaN")
            if w < 0:
                raise DumpError(f"layer {i} contains negative weight {w}")
        peak = max(layer)
        if peak == 0:
            out.append([0.0] * len(layer))
        else:
            out.append([w / peak for w in layer])
    return out


def _window_median(layer, position: int, window: int) -> float:
    half = window // 2
    lo = max(0, position - half)
    hi = min(len(layer), position + half + 1)
    neighborhood = [layer[j] for j in range(lo, hi) if j != position]
    return statistics.median(neighborhood)


def _layer_metrics(dump: AttentionDump, layer_idx: int,
                   window: int) -> LayerSpikes:
    layer = dump.layers[layer_idx]
    total = sum(layer)
    ratios = []
    for p in dump.pause_positions:
        if not 0 <= p < len(layer):
            raise DumpError(f"pause position {p} out of range")
        background = _window_median(layer, p, window)
        if background == 0:
            ratios.append(math.inf)
        else:
            ratios.append(layer[p] / background)
    start, end = dump.needle_span
    needle_mass = sum(layer[start:end]) / total if total else 0.0
    midpoint = len(layer) // 2
    tail_mass = sum(layer[midpoint:]) / total if total else 0.0
    return LayerSpikes(layer=layer_idx, pause_spike_ratios=tuple(ratios),
                       needle_region_mass=needle_mass,
                       tail_half_mass=tail_mass)


def spike_report(dump: AttentionDump, window: int = DEFAULT_WINDOW) -> SpikeReport:
    """Per-layer pause spike ratios, needle-region mass, and tail-half mass.

    The spike background is the median weight over the surrounding +-window
    tokens excluding the pause position itself; a zero median reports the
    ratio as infinity.
    """
    if window < 3 or window % 2 == 0:
        raise DumpError(f"window must be odd and >= 3, got {window}")
    if not dump.pause_positions:
        raise DumpError("dump has no pause positions")
    return SpikeReport(
        technique=dump.technique,
        per_layer=tuple(
            _layer_metrics(dump, i, window) for i in range(dump.n_layers)
        ),
    )


def compare(dumps: list[tuple[str, AttentionDump]],
            window: int = DEFAULT_WINDOW) -> list[dict]:
    """Aligned per-layer metric rows across techniques (layers x techniques).

    Techniques without pause markers report no spike ratios but keep the
    mass metrics, so a baseline dump can sit next to injected ones.
    """
    if len(dumps) < 2:
        raise DumpError("compare needs at least two dumps")
    rows: list[dict] = []
    for technique, dump in dumps:
        for i in range(dump.n_layers):
            metrics = _layer_metrics(dump, i, window)
            finite = [r for r in metrics.pause_spike_ratios
                      if not math.isinf(r)]
            rows.append({
                "technique": technique,
                "layer": i,
                "prompt_token_count": dump.prompt_token_count,
                "needle_region_mass": metrics.needle_region_mass,
                "tail_half_mass": metrics.tail_half_mass,
                "pause_count": len(metrics.pause_spike_ratios),
                "mean_pause_spike_ratio": (statistics.fmean(finite)
                                           if finite else None),
                "max_pause_spike_ratio": (max(metrics.pause_spike_ratios)
                                          if metrics.pause_spike_ratios
                                          else None),
            })
    return rows


COMPARE_FIELDS = ("technique", "layer", "prompt_token_count",
                  "needle_region_mass", "tail_half_mass", "pause_count",
                  "mean_pause_spike_ratio", "max_pause_spike_ratio")


def compare_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COMPARE_FIELDS,
                            lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row.get(k)) for k in COMPARE_FIELDS})
    return buf.getvalue()


def spikes_csv(report: SpikeReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["technique", "layer", "pause_index", "position_ratio",
                     "needle_region_mass", "tail_half_mass"])
    for layer in report.per_layer:
        for k, ratio in enumerate(layer.pause_spike_ratios):
            writer.writerow([
                report.technique, layer.layer, k, _fmt(ratio),
                _fmt(layer.needle_region_mass), _fmt(layer.tail_half_mass),
            ])
    return buf.getvalue()


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isinf(value):
            return "inf"
        return f"{value:.6g}"
    return value


_PALETTE = ("#1b6ca8", "#d1495b", "#3e9651", "#8f6fbf", "#c98a2b", "#4f4f4f")


def compare_svg(dumps: list[tuple[str, AttentionDump]],
                width: int = 640, panel_height: int = 80) -> str:
    """Layered line plot: one panel per layer, one normalized curve per
    technique, x = fractional position through the prompt."""
    if len(dumps) < 2:
        raise DumpError("compare needs at least two dumps")
    n_layers = max(d.n_layers for _, d in dumps)
    pad = 48
    height = pad + n_layers * panel_height + 20
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" font-family="monospace" font-size="10">'
    ]
    for k, (technique, _) in enumerate(dumps):
        color = _PALETTE[k % len(_PALETTE)]
        parts.append(
            f'<text x="{8 + 150 * k}" y="14" fill="{color}">{technique}</text>'
        )
    for layer_idx in range(n_layers):
        top = pad + layer_idx * panel_height
        parts.append(
            f'<text x="4" y="{top + 12}">layer {layer_idx}</text>'
        )
        for k, (technique, dump) in enumerate(dumps):
            if layer_idx >= dump.n_layers:
                continue
            scaled = normalize(dump)[layer_idx]
            n = len(scaled)
            points = []
            for j, v in enumerate(scaled):
                x = pad + (width - pad - 10) * (j / max(n - 1, 1))
                y = top + (panel_height - 14) * (1 - v) + 10
                points.append(f"{x:.1f},{y:.1f}")
            color = _PALETTE[k % len(_PALETTE)]
            parts.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1" '
                f'points="{" ".join(points)}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts)
