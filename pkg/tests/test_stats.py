from __future__ import annotations

import json
import random
import statistics
from pathlib import Path

import pytest

from pausebench.stats import (
    PercentChangeRow,
    Summary,
    heatmap_data,
    percent_change,
    percent_change_table,
    render_heatmap,
    score_color,
    summarize,
)

FIXTURES = Path(__file__).parent / "fixtures"


def row(model="m", technique="baseline", length=1000, depth=0.0, trial=0,
        score=10, error=None, mode="single"):
    return {"model": model, "technique": technique, "context_tokens": length,
            "depth_pct": depth, "trial": trial, "score": score,
            "error": error, "mode": mode}


def full_group(score_fn, technique="baseline", length=1000, depths=15,
               trials=3):
    rows = []
    for d in range(depths):
        for t in range(trials):
            depth = 100.0 * d / (depths - 1)
            rows.append(row(technique=technique, length=length, depth=depth,
                            trial=t, score=score_fn(depth, t)))
    return rows


def summaries_from_fixture():
    data = json.loads((FIXTURES / "table1_means.json").read_text())
    out: dict[tuple[str, str], list[Summary]] = {}
    for technique, by_model in data.items():
        for model, by_len in by_model.items():
            out[(model, technique)] = [
                Summary(model=model, technique=technique,
                        context_tokens=int(length), mean=mean, std=0.0,
                        n_trials=3)
                for length, mean in sorted(by_len.items(),
                                           key=lambda kv: int(kv[0]))
            ]
    return out


class TestSummarize:
    def test_constant_tens(self):
        rows = full_group(lambda d, t: 10)
        (s,) = summarize(rows)
        assert s.mean == pytest.approx(10.0)
        assert s.std == pytest.approx(0.0)
        assert s.n_trials == 3

    def test_trial_means_hand_computed(self):
        # trial means 10, 9, 9 -> mean 9.33, sample std 0.58
        rows = full_group(lambda d, t: {0: 10, 1: 9, 2: 9}[t])
        (s,) = summarize(rows)
        assert s.mean == pytest.approx(9.3333, abs=1e-3)
        assert s.std == pytest.approx(statistics.stdev([10, 9, 9]), abs=1e-9)
        assert round(s.mean, 2) == 9.33
        assert round(s.std, 2) == 0.58

    def test_single_trial_std_zero(self):
        rows = full_group(lambda d, t: 7, trials=1)
        (s,) = summarize(rows)
        assert s.std == 0.0
        assert s.n_trials == 1

    def test_pooled_mode(self):
        rows = full_group(lambda d, t: 10 if d < 50 else 4)
        (s,) = summarize(rows, mode="pooled")
        scores = [r["score"] for r in rows]
        assert s.mean == pytest.approx(statistics.fmean(scores))
        assert s.std == pytest.approx(statistics.stdev(scores))
        assert s.n_trials == len(scores)

    def test_failed_rows_excluded(self):
        rows = full_group(lambda d, t: 10)
        rows.append(row(depth=0.0, trial=0, score=None, error="boom"))
        (s,) = summarize(rows)
        assert s.mean == 10.0

    def test_permutation_invariant(self):
        rows = full_group(lambda d, t: (int(d) % 7) + 2)
        shuffled = rows[:]
        random.Random(3).shuffle(shuffled)
        assert summarize(rows) == summarize(shuffled)

    def test_group_with_no_scores_omitted(self):
        rows = [row(score=None, error="x")]
        assert summarize(rows) == []


class TestPercentChange:
    def test_identity_is_zero(self):
        series = [Summary("m", "baseline", 1000, 9.0, 0.0, 3),
                  Summary("m", "baseline", 2000, 8.0, 0.0, 3)]
        pc = percent_change(series, series)
        assert all(v == 0.0 for v in pc.per_length.values())
        assert pc.averaged == 0.0

    def test_llama8b_t5_at_64k(self):
        fx = summaries_from_fixture()
        pc = percent_change(fx[("LLaMA 3.1 8B", "baseline")],
                            fx[("LLaMA 3.1 8B", "t5_pause_tuned")])
        assert pc.per_length[64000] == pytest.approx(16.10, abs=0.01)
        assert pc.averaged == pytest.approx(3.57, abs=0.05)

    def test_llama3b_t5_averaged(self):
        fx = summaries_from_fixture()
        pc = percent_change(fx[("LLaMA 3.2 3B", "baseline")],
                            fx[("LLaMA 3.2 3B", "t5_pause_tuned")])
        assert pc.per_length[32000] == pytest.approx(67.73, abs=0.01)
        assert pc.averaged == pytest.approx(10.61, abs=0.15)
        # published per-length row, sanity: 28.54 / 8 style arithmetic
        expected_row = {1000: 0.00, 2000: 0.61, 4000: -1.30, 8000: 1.75,
                        16000: 25.36, 32000: 67.73, 64000: 2.79,
                        128000: -11.46}
        for length, v in expected_row.items():
            assert pc.per_length[length] == pytest.approx(v, abs=0.01)

    def test_gpt35_uses_five_lengths(self):
        fx = summaries_from_fixture()
        pc = percent_change(fx[("GPT 3.5", "baseline")],
                            fx[("GPT 3.5", "t1_standard")])
        assert len(pc.per_length) == 5
        assert pc.averaged == pytest.approx(0.37, abs=0.02)

    def test_antisymmetric_sign_per_length(self):
        a = [Summary("m", "baseline", 1000, 8.0, 0.0, 3)]
        b = [Summary("m", "t1_standard", 1000, 10.0, 0.0, 3)]
        fwd = percent_change(a, b).per_length[1000]
        rev = percent_change(b, a).per_length[1000]
        assert fwd > 0 > rev

    def test_no_common_length(self):
        a = [Summary("m", "baseline", 1000, 8.0, 0.0, 3)]
        b = [Summary("m", "t1", 2000, 9.0, 0.0, 3)]
        with pytest.raises(ValueError):
            percent_change(a, b)

    def test_table_builder(self):
        fx = summaries_from_fixture()
        all_summaries = [s for series in fx.values() for s in series]
        table = percent_change_table(all_summaries)
        by_key = {(r.model, r.technique): r for r in table}
        assert by_key[("LLaMA 3.1 8B", "t4_finetuned_plain")].averaged == \
            pytest.approx(-42.88, abs=0.10)
        assert isinstance(table[0], PercentChangeRow)


class TestHeatmap:
    def test_full_grid_shape(self):
        rows = full_group(lambda d, t: 10)
        matrix = heatmap_data(rows, "m", "baseline")
        assert len(matrix) == 15
        assert all(m[2] == 10.0 for m in matrix)

    def test_missing_cell_emitted_empty(self):
        rows = [row(depth=0.0, score=8), row(depth=50.0, score=None, error="x"),
                row(depth=50.0, length=2000, score=6)]
        matrix = heatmap_data(rows, "m", "baseline")
        cells = {(m[0], m[1]): m[2] for m in matrix}
        assert len(matrix) == 4  # 2 lengths x 2 depths
        assert cells[(1000, 50.0)] is None
        assert cells[(2000, 0.0)] is None
        assert cells[(1000, 0.0)] == 8.0

    def test_matches_independent_recomputation(self):
        rng = random.Random(5)
        rows = full_group(lambda d, t: rng.randint(1, 10), length=1000)
        rows += full_group(lambda d, t: rng.randint(1, 10), length=2000)
        matrix = heatmap_data(rows, "m", "baseline")
        # ten-line oracle: group and average
        oracle = {}
        for r in rows:
            oracle.setdefault((r["context_tokens"], r["depth_pct"]), []).append(
                r["score"]
            )
        for length, depth, mean in matrix:
            expected = sum(oracle[(length, depth)]) / len(oracle[(length, depth)])
            assert mean == pytest.approx(expected)

    def test_render_single_cell_max_color(self):
        svg = render_heatmap([(1000, 0.0, 10.0)])
        assert svg.count('class="cell"') == 1
        assert score_color(10.0) in svg

    def test_render_deterministic(self):
        matrix = heatmap_data(full_group(lambda d, t: int(d) % 9 + 1), "m",
                              "baseline")
        assert render_heatmap(matrix) == render_heatmap(matrix)

    def test_render_cell_count_15x8(self):
        matrix = [(length, float(d) * 100 / 14, 5.0)
                  for length in range(1000, 8001, 1000)
                  for d in range(15)]
        svg = render_heatmap(matrix)
        assert svg.count('class="cell"') == 120

    def test_empty_matrix_rejected(self):
        with pytest.raises(ValueError):
            render_heatmap([])
