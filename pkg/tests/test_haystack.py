from __future__ import annotations

import json
import random

import pytest

from pausebench.corpus import split_sentences
from pausebench.haystack import (
    HaystackError,
    NeedleCollisionError,
    NeedleSpec,
    build_haystack,
    depth_grid,
    place_needle,
    place_needles,
)

from .oracles import oracle_count_tokens


@pytest.fixture(scope="module")
def needles(needles_path):
    raw = json.loads(needles_path.read_text())
    return [
        NeedleSpec(needle_text=r["needle"], question=r["question"],
                   reference_answer=r["reference_answer"])
        for r in raw
    ]


@pytest.fixture(scope="module")
def hay8k(corpus, tokenizer):
    return build_haystack(corpus, 8000, tokenizer, seed=7)


class TestDepthGrid:
    def test_two_points(self):
        assert depth_grid(2) == [0.0, 100.0]

    def test_fifteen_points(self):
        grid = depth_grid(15)
        assert len(grid) == 15
        assert grid[0] == 0.0 and grid[-1] == 100.0
        step = 100.0 / 14
        for i, v in enumerate(grid):
            assert v == pytest.approx(i * step)

    def test_n_below_two_is_error(self):
        with pytest.raises(HaystackError):
            depth_grid(1)


class TestBuildHaystack:
    def test_budget_respected(self, corpus, tokenizer):
        h = build_haystack(corpus, 1000, tokenizer, seed=1)
        recount = oracle_count_tokens(tokenizer.vocab, h.text)
        assert h.token_count == recount
        assert recount <= 1000
        max_para = max(
            tokenizer.count_tokens(p.text) for p in corpus.paragraphs()
        )
        assert recount >= 1000 - max_para

    def test_zero_target_is_error(self, corpus, tokenizer):
        with pytest.raises(HaystackError):
            build_haystack(corpus, 0, tokenizer, seed=1)

    def test_determinism(self, corpus, tokenizer):
        a = build_haystack(corpus, 2000, tokenizer, seed=42)
        b = build_haystack(corpus, 2000, tokenizer, seed=42)
        assert a.text == b.text
        c = build_haystack(corpus, 2000, tokenizer, seed=43)
        assert c.text != a.text

    def test_sentence_fallback(self, corpus, tokenizer):
        # budget far below any paragraph forces sentence accumulation
        h = build_haystack(corpus, 64, tokenizer, seed=3)
        assert h.token_count <= 64
        assert len(h.paragraphs) == 1

    def test_cycles_when_corpus_small(self, corpus, tokenizer):
        # corpus is ~10.5K tokens; ask for more than one pass provides
        h = build_haystack(corpus, 16000, tokenizer, seed=5)
        assert 16000 - 300 <= h.token_count <= 16000


class TestPlaceNeedle:
    def test_depth_zero_first_sentence(self, hay8k, needles, tokenizer):
        placed = place_needle(hay8k, needles[0], 0, tokenizer)
        assert placed.text.startswith(needles[0].needle_text + " ")
        first, _ = split_sentences(placed.text)[0]
        assert first.strip() == needles[0].needle_text
        assert placed.achieved_depths_pct[0] == 0.0

    def test_depth_hundred_last_sentence(self, hay8k, needles, tokenizer):
        placed = place_needle(hay8k, needles[0], 100, tokenizer)
        assert placed.text.endswith(" " + needles[0].needle_text)
        assert placed.achieved_depths_pct[0] == 100.0

    def test_mid_depth_accuracy(self, hay8k, needles, tokenizer):
        placed = place_needle(hay8k, needles[0], 50, tokenizer)
        achieved = placed.achieved_depths_pct[0]
        assert abs(achieved - 50) <= 1.5
        # oracle: tokenize the prefix of the placed text before the span
        off = placed.needle_spans[0][0]
        prefix = placed.text.encode("utf-8")[:off].decode("utf-8")
        # the placed prefix ends with the original prefix plus nothing else
        oracle_pct = 100.0 * oracle_count_tokens(
            tokenizer.vocab, prefix.rstrip(" ")
        ) / hay8k.token_count
        assert abs(oracle_pct - achieved) < 0.5

    def test_verbatim_and_removal(self, hay8k, needles, tokenizer):
        placed = place_needle(hay8k, needles[1], 37.5, tokenizer)
        assert placed.extract_needles() == [needles[1].needle_text]
        assert placed.text.count(needles[1].needle_text) == 1
        assert placed.without_needles() == hay8k.text

    def test_collision_rejected(self, hay8k, tokenizer):
        sentence = split_sentences(hay8k.text)[3][0].strip()
        spec = NeedleSpec(needle_text=sentence, question="q",
                          reference_answer="a")
        with pytest.raises(NeedleCollisionError):
            place_needle(hay8k, spec, 50, tokenizer)

    def test_out_of_range_depth(self, hay8k, needles, tokenizer):
        with pytest.raises(HaystackError):
            place_needle(hay8k, needles[0], 101, tokenizer)


class TestPlaceNeedles:
    def test_determinism(self, hay8k, needles, tokenizer):
        a = place_needles(hay8k, needles[:3], random.Random(42), tokenizer)
        b = place_needles(hay8k, needles[:3], random.Random(42), tokenizer)
        assert a.text == b.text
        assert a.target_depths_pct == b.target_depths_pct

    def test_depth_gaps_and_range(self, hay8k, needles, tokenizer):
        for seed in range(25):
            placed = place_needles(hay8k, needles[:3], random.Random(seed),
                                   tokenizer)
            ds = placed.target_depths_pct
            assert list(ds) == sorted(ds)
            assert all(5 <= d <= 95 for d in ds)
            assert all(b - a >= 10 for a, b in zip(ds, ds[1:]))

    def test_all_needles_verbatim_once(self, hay8k, needles, tokenizer):
        placed = place_needles(hay8k, needles[:3], random.Random(7), tokenizer)
        for spec in needles[:3]:
            assert placed.text.count(spec.needle_text) == 1
        assert placed.extract_needles() == [
            n.needle_text
            for n, _ in sorted(zip(needles[:3], placed.target_depths_pct),
                               key=lambda x: x[1])
        ]
        assert placed.without_needles() == hay8k.text

    def test_duplicate_needles_rejected(self, hay8k, needles, tokenizer):
        with pytest.raises(NeedleCollisionError):
            place_needles(hay8k, [needles[0]] * 3, random.Random(1), tokenizer)
