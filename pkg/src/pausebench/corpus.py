"""Essay ingestion and text segmentation.

Paragraphs (blank-line-delimited blocks) are the insertion unit for pause
markers; sentences are the insertion unit for needles. Both segmentations
are lossless over the blank-normalized text so downstream byte bookkeeping
(needle spans, pause offsets) stays exact.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class Paragraph:
    text: str
    doc_id: str
    index: int


@dataclass(frozen=True)
class Corpus:
    documents: tuple[tuple[str, str], ...]  # (doc_id, text)
    source: str

    def paragraphs(self) -> list[Paragraph]:
        out: list[Paragraph] = []
        for doc_id, text in self.documents:
            for i, p in enumerate(split_paragraphs(text)):
                out.append(Paragraph(text=p, doc_id=doc_id, index=i))
        return out


def load_corpus(directory, glob: str = "*.txt") -> Corpus:
    """Load every file matching *glob*, ordered lexicographically by name.

    CRLF/CR are normalized to LF and a UTF-8 BOM is stripped. Files that are
    empty after whitespace normalization are skipped.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise CorpusError(f"not a directory: {directory}")
    paths = sorted(directory.glob(glob), key=lambda p: p.name)
    if not paths:
        raise CorpusError(f"no files match {glob!r} in {directory}")
    documents: list[tuple[str, str]] = []
    for path in paths:
        try:
            text = path.read_text(encoding="utf-8")
        except UnicodeDecodeError as exc:
            raise CorpusError(f"not valid UTF-8: {path.name}: {exc}") from exc
        if text.startswith("\ufeff"):
            text = text[1:]
        text = text.replace("\r\n", "\n").replace("\r", "\n")
        if not text.strip():
            continue
        documents.append((path.name, text))
    if not documents:
        raise CorpusError(f"all files matching {glob!r} in {directory} are empty")
    return Corpus(documents=tuple(documents), source=str(directory))


_BLANK = re.compile(r"^\s*$")


def normalize_blanks(text: str) -> str:
    """Canonical paragraph form: blank-line runs collapsed to one blank line,
    leading/trailing blank lines dropped, no trailing newline."""
    return "\n\n".join(split_paragraphs(text))


def split_paragraphs(text: str) -> list[str]:
    """Maximal runs of non-blank lines, separated by one or more blank lines.

    Joining the result with a double newline reproduces normalize_blanks(text).
    Whitespace-only input yields an empty list.
    """
    paragraphs: list[str] = []
    current: list[str] = []
    for line in text.split("\n"):
        if _BLANK.match(line):
            if current:
                paragraphs.append("\n".join(current))
                current = []
        else:
            current.append(line)
    if current:
        paragraphs.append("\n".join(current))
    return paragraphs


# Terminators that end a sentence, unless the preceding word is one of these.
_ABBREVIATIONS = ("Mr.", "Dr.", "e.g.", "i.e.", "vs.", "etc.")
_TERMINATORS = ".!?"


def split_sentences(text: str) -> list[tuple[str, tuple[int, int]]]:
    """Split into sentences with byte spans (start, length) that tile *text*.

    A boundary is a terminator (. ! ?) followed by whitespace and an uppercase
    letter, or by end of text. Trailing whitespace belongs to the preceding
    sentence, so each span after the first starts on a non-space byte.
    """
    if not text:
        return []
    data = text.encode("utf-8")
    breaks: list[int] = []  # byte index at which the NEXT sentence starts
    i = 0
    n = len(data)
    while i < n:
        ch = chr(data[i])
        if ch in _TERMINATORS and not _ends_with_abbreviation(data, i):
            j = i + 1
            while j < n and chr(data[j]).isspace():
                j += 1
            if j == n:
                break
            if j > i + 1 and _is_upper_start(data, j):
                breaks.append(j)
                i = j
                continue
        i += 1
    spans: list[tuple[int, int]] = []
    start = 0
    for b in breaks:
        spans.append((start, b - start))
        start = b
    spans.append((start, n - start))
    return [(data[s:s + ln].decode("utf-8"), (s, ln)) for s, ln in spans]


def sentence_start_offsets(text: str) -> list[int]:
    """Byte offsets where sentences begin (0 included for non-empty text)."""
    return [span[0] for _, span in split_sentences(text)]


def _ends_with_abbreviation(data: bytes, term_idx: int) -> bool:
    if chr(data[term_idx]) != ".":
        return False
    end = term_idx + 1
    start = term_idx
    while start > 0:
        ch = chr(data[start - 1])
        if ch.isalnum() or ch == ".":
            start -= 1
        else:
            break
    word = data[start:end].decode("utf-8", errors="ignore")
    return any(word == a or word.endswith("." + a.lower()) or word == a.lower()
               for a in _ABBREVIATIONS) or word in _ABBREVIATIONS


def _is_upper_start(data: bytes, idx: int) -> bool:
    # decode up to 4 bytes to cover multi-byte uppercase letters
    chunk = data[idx:idx + 4].decode("utf-8", errors="ignore")
    return bool(chunk) and chunk[0].isupper()
