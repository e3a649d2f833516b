"""Build token-budgeted contexts from a corpus and embed needles at depths.

Depth is the needle's position as a percentage of the haystack's token
length. Needles are inserted at sentence boundaries, never mid-sentence and
never at a paragraph seam's blank line, so later pause injection (which
appends markers after paragraphs) cannot bisect a needle.

Byte bookkeeping: each needle occupies a span of exactly its own bytes in
the placed text; the placement separator (one space) is tracked separately
in block_spans so the original haystack bytes can be recovered exactly.
"""
from __future__ import annotations

import bisect
import random
from dataclasses import dataclass, field

from .corpus import Corpus, Paragraph, sentence_start_offsets, split_sentences
from .tokenizer import Tokenizer, cached_token_end_offsets

MULTI_DEPTH_LOW = 5.0
MULTI_DEPTH_HIGH = 95.0
MULTI_DEPTH_MIN_GAP = 10.0
_MAX_CORPUS_CYCLES = 1000


class HaystackError(ValueError):
    pass


class NeedleCollisionError(HaystackError):
    pass


@dataclass(frozen=True)
class Haystack:
    paragraphs: tuple[Paragraph, ...]
    token_count: int
    tokenizer_name: str

    @property
    def text(self) -> str:
        return "\n\n".join(p.text for p in self.paragraphs)


@dataclass(frozen=True)
class NeedleSpec:
    needle_text: str
    question: str
    reference_answer: str

    def __post_init__(self) -> None:
        if not self.needle_text.strip():
            raise HaystackError("needle_text must be non-empty")
        if "\n\n" in self.needle_text:
            raise HaystackError("needle_text must not contain blank lines")


@dataclass(frozen=True)
class PlacedContext:
    text: str
    needle_spans: tuple[tuple[int, int], ...]  # (byte offset, byte length)
    achieved_depths_pct: tuple[float, ...]
    target_depths_pct: tuple[float, ...]
    # full inserted blocks (needle plus its one separator byte), for removal
    block_spans: tuple[tuple[int, int], ...] = field(default=())

    def extract_needles(self) -> list[str]:
        data = self.text.encode("utf-8")
        return [data[o:o + ln].decode("utf-8") for o, ln in self.needle_spans]

    def without_needles(self) -> str:
        """The haystack text with every inserted block removed, byte-exact."""
        data = self.text.encode("utf-8")
        out = bytearray()
        pos = 0
        for o, ln in sorted(self.block_spans):
            out += data[pos:o]
            pos = o + ln
        out += data[pos:]
        return out.decode("utf-8")


def depth_grid(n: int) -> list[float]:
    """n evenly spaced depth percentages from 0 to 100 inclusive."""
    if n < 2:
        raise HaystackError(f"depth grid needs n >= 2, got {n}")
    step = 100.0 / (n - 1)
    return [i * step for i in range(n)]


def build_haystack(corpus: Corpus, target_tokens: int, tokenizer: Tokenizer,
                   seed: int, shuffle: bool = True) -> Haystack:
    """Append paragraphs (documents in seeded-shuffle order) until the next
    one would exceed the token budget.

    If the very first paragraph already exceeds the budget, falls back to
    accumulating sentences instead. The corpus is cycled if it is smaller
    than the budget.
    """
    if target_tokens < 64:
        raise HaystackError(f"target_tokens must be >= 64, got {target_tokens}")
    if not corpus.documents:
        raise HaystackError("corpus is empty")

    rng = random.Random(seed)
    chosen: list[Paragraph] = []
    total = 0
    sep_cost_cache: dict[str, int] = {}

    def para_cost(p: Paragraph, first: bool) -> int:
        if p.text not in sep_cost_cache:
            sep_cost_cache[p.text] = tokenizer.count_tokens("\n\n" + p.text)
        if first:
            return tokenizer.count_tokens(p.text)
        return sep_cost_cache[p.text]

    done = False
    for cycle in range(_MAX_CORPUS_CYCLES):
        docs = list(corpus.documents)
        if shuffle:
            rng.shuffle(docs)
        paragraphs = [
            Paragraph(text=p, doc_id=doc_id, index=i)
            for doc_id, text in docs
            for i, p in enumerate(_doc_paragraphs(text))
        ]
        for p in paragraphs:
            cost = para_cost(p, first=not chosen)
            if total + cost > target_tokens:
                if not chosen:
                    return _sentence_fallback(p, target_tokens, tokenizer)
                done = True
                break
            chosen.append(p)
            total += cost
        if done:
            break
    if not done and total < target_tokens and not chosen:
        raise HaystackError("corpus produced no usable paragraphs")

    text = "\n\n".join(p.text for p in chosen)
    token_count = tokenizer.count_tokens(text)
    while token_count > target_tokens and len(chosen) > 1:
        chosen.pop()
        text = "\n\n".join(p.text for p in chosen)
        token_count = tokenizer.count_tokens(text)
    if token_count > target_tokens:
        return _sentence_fallback(chosen[0], target_tokens, tokenizer)
    return Haystack(paragraphs=tuple(chosen), token_count=token_count,
                    tokenizer_name=tokenizer.name)


def _doc_paragraphs(text: str) -> list[str]:
    from .corpus import split_paragraphs
    return split_paragraphs(text)


def _sentence_fallback(paragraph: Paragraph, target_tokens: int,
                       tokenizer: Tokenizer) -> Haystack:
    parts: list[str] = []
    text = ""
    for sentence, _ in split_sentences(paragraph.text):
        candidate = text + sentence
        if tokenizer.count_tokens(candidate.strip()) > target_tokens:
            break
        parts.append(sentence)
        text = candidate
    if not parts:
        raise HaystackError(
            f"target of {target_tokens} tokens cannot fit one sentence"
        )
    final = text.strip()
    para = Paragraph(text=final, doc_id=paragraph.doc_id, index=paragraph.index)
    return Haystack(paragraphs=(para,),
                    token_count=tokenizer.count_tokens(final),
                    tokenizer_name=tokenizer.name)


def place_needle(haystack: Haystack, needle: NeedleSpec, depth_pct: float,
                 tokenizer: Tokenizer) -> PlacedContext:
    """Insert the needle as its own sentence at the sentence boundary whose
    preceding token count is nearest to depth_pct% of the haystack tokens."""
    if not 0 <= depth_pct <= 100:
        raise HaystackError(f"depth_pct out of range: {depth_pct}")
    return _place_many(haystack, [(needle, depth_pct)], tokenizer)


def place_needles(haystack: Haystack, needles, rng: random.Random,
                  tokenizer: Tokenizer) -> PlacedContext:
    """Place three distinct needles at random depths in [5, 95], pairwise at
    least 10 points apart, in ascending depth order."""
    needles = list(needles)
    if len(needles) != 3:
        raise HaystackError(f"multi-needle placement needs 3 needles, got {len(needles)}")
    texts = [n.needle_text for n in needles]
    if len(set(texts)) != 3:
        raise NeedleCollisionError("needle texts must be pairwise distinct")
    depths = _draw_depths(rng)
    pairs = sorted(zip(needles, depths), key=lambda x: x[1])
    return _place_many(haystack, pairs, tokenizer)


def _draw_depths(rng: random.Random) -> list[float]:
    while True:
        ds = sorted(rng.uniform(MULTI_DEPTH_LOW, MULTI_DEPTH_HIGH)
                    for _ in range(3))
        if all(b - a >= MULTI_DEPTH_MIN_GAP for a, b in zip(ds, ds[1:])):
            return ds


def _place_many(haystack: Haystack, pairs, tokenizer: Tokenizer) -> PlacedContext:
    """Place (needle, depth) pairs, given in ascending depth order."""
    original = haystack.text
    data = original.encode("utf-8")
    total = haystack.token_count
    for needle, _ in pairs:
        if needle.needle_text in original:
            raise NeedleCollisionError(
                f"needle already occurs in haystack: {needle.needle_text[:60]!r}"
            )

    token_ends = cached_token_end_offsets(tokenizer, original)
    boundaries = sorted(set(sentence_start_offsets(original)) | {len(data)})

    # approximate tokens before each boundary from the full-text tokenization
    approx = [bisect.bisect_right(token_ends, b) if b else 0 for b in boundaries]

    placements = []  # (byte offset, needle, achieved_pct, target_pct)
    for needle, depth in pairs:
        target = depth / 100.0 * total
        best = min(range(len(boundaries)), key=lambda i: (abs(approx[i] - target), i))
        offset = boundaries[best]
        prefix = data[:offset].decode("utf-8")
        achieved = 100.0 * tokenizer.count_tokens(prefix) / total
        placements.append((offset, needle, achieved, depth))

    # insert from the rightmost offset backwards so earlier offsets are stable
    text_bytes = bytearray(data)
    spans: list[tuple[int, int]] = []
    blocks: list[tuple[int, int]] = []
    order = sorted(range(len(placements)), key=lambda i: placements[i][0],
                   reverse=True)
    span_by_idx: dict[int, tuple[int, int]] = {}
    block_by_idx: dict[int, tuple[int, int]] = {}
    for i in order:
        offset, needle, _, _ = placements[i]
        nb = needle.needle_text.encode("utf-8")
        if offset == len(data) and offset > 0:
            block = b" " + nb
            span = (offset + 1, len(nb))
        else:
            block = nb + b" "
            span = (offset, len(nb))
        text_bytes[offset:offset] = block
        shift = len(block)
        for j, (o, ln) in span_by_idx.items():
            if o >= offset:
                span_by_idx[j] = (o + shift, ln)
        for j, (o, ln) in block_by_idx.items():
            if o >= offset:
                block_by_idx[j] = (o + shift, ln)
        span_by_idx[i] = span
        block_by_idx[i] = (offset, len(block))

    final = bytes(text_bytes).decode("utf-8")
    for i, (offset, needle, _, _) in enumerate(placements):
        if final.count(needle.needle_text) != 1:
            raise NeedleCollisionError(
                f"needle does not occur exactly once after placement: "
                f"{needle.needle_text[:60]!r}"
            )
        spans.append(span_by_idx[i])
        blocks.append(block_by_idx[i])

    return PlacedContext(
        text=final,
        needle_spans=tuple(spans),
        achieved_depths_pct=tuple(p[2] for p in placements),
        target_depths_pct=tuple(p[3] for p in placements),
        block_spans=tuple(blocks),
    )
