"""Byte-level BPE tokenizer loaded from a rank file.

All token budgeting in the toolkit (context lengths, depth placement,
pause overhead) goes through this module so that budgets are reproducible
and independent of any particular model's server-side tokenizer.

Rank file format: one token per line, ``<base64(token bytes)> <decimal rank>``,
LF line endings, UTF-8. Ranks must be unique and contiguous from 0, and every
single byte 0..255 must be present so that any input encodes.
"""
from __future__ import annotations

import base64
import heapq
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path


class VocabError(ValueError):
    """Raised when a rank file violates the vocabulary invariants."""


class UnknownTokenError(KeyError):
    """Raised when decode() meets an id the tokenizer does not know."""


@dataclass(eq=False)
class Tokenizer:
    """Immutable byte-level BPE vocabulary. Safe for concurrent reads."""

    vocab: dict[bytes, int]
    specials: dict[str, int] = field(default_factory=dict)
    name: str = "custom"

    def __post_init__(self) -> None:
        self._validate()
        self._id_to_bytes = {rank: tok for tok, rank in self.vocab.items()}
        self._id_to_special = {i: s for s, i in self.specials.items()}

    def _validate(self) -> None:
        ranks = sorted(self.vocab.values())
        if ranks != list(range(len(self.vocab))):
            raise VocabError("ranks must be unique and contiguous from 0")
        for b in range(256):
            if bytes([b]) not in self.vocab:
                raise VocabError(f"missing single-byte entry for byte {b}")
        base = set(self.vocab.values())
        for name, sid in self.specials.items():
            if sid in base:
                raise VocabError(
                    f"special token {name!r} id {sid} collides with a base rank"
                )

    # -- encoding ----------------------------------------------------------

    def encode(self, text: str) -> list[int]:
        """Encode text to token ids via greedy lowest-rank merging."""
        return [
            self.specials[p] if isinstance(p, str) else self.vocab[p]
            for p in self._parts(text)
        ]

    def count_tokens(self, text: str) -> int:
        return len(self._parts(text))

    def _parts(self, text: str) -> list:
        """Token pieces of *text*: bytes chunks, plus special-token strings."""
        if not text:
            return []
        if not self.specials:
            return _bpe_merge(self.vocab, text.encode("utf-8"))
        parts: list = []
        for is_special, segment in _split_specials(text, self.specials):
            if is_special:
                parts.append(segment)
            elif segment:
                parts.extend(_bpe_merge(self.vocab, segment.encode("utf-8")))
        return parts

    def token_byte_lengths(self, text: str) -> list[int]:
        """UTF-8 byte length of each token of text, in order."""
        return [
            len(p.encode("utf-8")) if isinstance(p, str) else len(p)
            for p in self._parts(text)
        ]

    # -- decoding ----------------------------------------------------------

    def decode(self, ids) -> str:
        chunks: list[bytes] = []
        for i in ids:
            if i in self._id_to_bytes:
                chunks.append(self._id_to_bytes[i])
            elif i in self._id_to_special:
                chunks.append(self._id_to_special[i].encode("utf-8"))
            else:
                raise UnknownTokenError(f"unknown token id {i}")
        return b"".join(chunks).decode("utf-8")


def load_vocab(path, specials: dict[str, int] | None = None,
               name: str | None = None) -> Tokenizer:
    """Load a Tokenizer from a rank file.

    Raises VocabError on malformed lines (with the line number), duplicate
    ranks (naming both lines), or a missing single-byte entry.
    """
    path = Path(path)
    vocab: dict[bytes, int] = {}
    rank_lines: dict[int, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line:
                continue
            fields = line.split(" ")
            if len(fields) != 2:
                raise VocabError(f"{path}:{lineno}: expected '<base64> <rank>'")
            b64, rank_s = fields
            try:
                tok = base64.b64decode(b64, validate=True)
            except Exception as exc:
                raise VocabError(f"{path}:{lineno}: bad base64: {exc}") from exc
            try:
                rank = int(rank_s)
            except ValueError:
                raise VocabError(f"{path}:{lineno}: bad rank {rank_s!r}") from None
            if rank < 0:
                raise VocabError(f"{path}:{lineno}: negative rank {rank}")
            if rank in rank_lines:
                raise VocabError(
                    f"{path}: duplicate rank {rank} on lines "
                    f"{rank_lines[rank]} and {lineno}"
                )
            if tok in vocab:
                raise VocabError(
                    f"{path}:{lineno}: duplicate token bytes {tok!r}"
                )
            rank_lines[rank] = lineno
            vocab[tok] = rank
    return Tokenizer(vocab=vocab, specials=dict(specials or {}),
                     name=name or path.stem)


def _split_specials(text: str, specials: dict[str, int]):
    """Yield (is_special, segment) pieces, matching longest specials first."""
    names = sorted(specials, key=len, reverse=True)
    pos = 0
    while pos < len(text):
        nxt = None
        for s in names:
            i = text.find(s, pos)
            if i != -1 and (nxt is None or i < nxt[0]):
                nxt = (i, s)
        if nxt is None:
            yield False, text[pos:]
            return
        i, s = nxt
        if i > pos:
            yield False, text[pos:i]
        yield True, s
        pos = i + len(s)


def _bpe_merge(vocab: dict[bytes, int], data: bytes) -> list[bytes]:
    """Greedy BPE: repeatedly merge the adjacent pair whose concatenation has
    the lowest rank (leftmost on ties) until no mergeable pair remains.

    Linked-list + heap with version stamps; O(n log n).
    """
    n = len(data)
    if n == 0:
        return []
    if n == 1:
        return [data]
    starts = list(range(n))
    ends = [i + 1 for i in range(n)]
    prev = [i - 1 for i in range(n)]
    nxt = [i + 1 for i in range(n)]
    nxt[-1] = -1
    alive = [True] * n
    version = [0] * n

    heap: list[tuple[int, int, int, int]] = []

    def push(left: int) -> None:
        right = nxt[left]
        if right == -1:
            return
        rank = vocab.get(data[starts[left]:ends[right]])
        if rank is not None:
            heapq.heappush(heap, (rank, left, version[left], version[right]))

    for i in range(n - 1):
        push(i)

    while heap:
        rank, left, vl, vr = heapq.heappop(heap)
        if not alive[left] or version[left] != vl:
            continue
        right = nxt[left]
        if right == -1 or version[right] != vr:
            continue
        # merge right into left
        ends[left] = ends[right]
        alive[right] = False
        nxt[left] = nxt[right]
        if nxt[right] != -1:
            prev[nxt[right]] = left
        version[left] += 1
        if prev[left] != -1:
            push(prev[left])
        push(left)

    parts = []
    i = 0
    while i != -1:
        parts.append(data[starts[i]:ends[i]])
        i = nxt[i]
    return parts


@lru_cache(maxsize=16)
def cached_token_end_offsets(tokenizer: Tokenizer, text: str) -> tuple[int, ...]:
    """Cumulative end byte offset of each token of *text* (cached per text)."""
    out = []
    total = 0
    for ln in tokenizer.token_byte_lengths(text):
        total += ln
        out.append(total)
    return tuple(out)
