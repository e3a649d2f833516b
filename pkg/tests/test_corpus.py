from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pausebench.corpus import (
    CorpusError,
    load_corpus,
    normalize_blanks,
    split_paragraphs,
    split_sentences,
)


class TestLoadCorpus:
    def test_lexicographic_order(self, tmp_path):
        (tmp_path / "b.txt").write_text("bee text\n")
        (tmp_path / "a.txt").write_text("ay text\n")
        c = load_corpus(tmp_path)
        assert [d[0] for d in c.documents] == ["a.txt", "b.txt"]

    def test_zero_matches_is_error(self, tmp_path):
        with pytest.raises(CorpusError, match="no files match"):
            load_corpus(tmp_path, "*.txt")

    def test_fixture_corpus(self, essays_dir, corpus):
        files = sorted(p.name for p in essays_dir.glob("*.txt"))
        assert [d[0] for d in corpus.documents] == files
        for doc_id, text in corpus.documents:
            raw = (essays_dir / doc_id).read_text(encoding="utf-8")
            assert text == raw.replace("\r\n", "\n").replace("\r", "\n")

    def test_crlf_and_bom_normalized(self, tmp_path):
        (tmp_path / "x.txt").write_bytes("\ufeffline one\r\nline two\r\n".encode("utf-8"))
        c = load_corpus(tmp_path)
        assert c.documents[0][1] == "line one\nline two\n"

    def test_non_utf8_names_file(self, tmp_path):
        (tmp_path / "bad.txt").write_bytes(b"\xff\xfe broken")
        with pytest.raises(CorpusError, match="bad.txt"):
            load_corpus(tmp_path)


class TestSplitParagraphs:
    def test_three_blocks(self):
        assert split_paragraphs("A\n\nB\n\nC") == ["A", "B", "C"]

    def test_no_blank_line(self):
        assert split_paragraphs("A\nB") == ["A\nB"]

    def test_whitespace_only(self):
        assert split_paragraphs("   \n\n  ") == []

    def test_whitespace_only_separator(self):
        assert split_paragraphs("A\n \t \nB") == ["A", "B"]

    def test_join_reproduces_normalized(self):
        text = "\n\nA\nB\n\n\n\nC  \n\nD\n"
        assert "\n\n".join(split_paragraphs(text)) == normalize_blanks(text)

    def test_idempotent_per_paragraph(self):
        for p in split_paragraphs("one para\n\ntwo\nlines\n\nthree"):
            assert split_paragraphs(p) == [p]


class TestSplitSentences:
    def test_two_sentences(self):
        got = [s for s, _ in split_sentences("Hi. Bye.")]
        assert got == ["Hi. ", "Bye."]

    def test_abbreviation_suppressed(self):
        assert len(split_sentences("Dr. Smith left.")) == 1
        assert len(split_sentences("See e.g. The example.")) == 1
        assert len(split_sentences("Mr. Jones vs. Mr. Smith.")) == 1

    def test_question_and_exclamation(self):
        got = [s for s, _ in split_sentences("Really? Yes! Fine.")]
        assert got == ["Really? ", "Yes! ", "Fine."]

    def test_lowercase_continuation_not_split(self):
        assert len(split_sentences("version 2. of the spec")) == 1

    def test_spans_reconstruct(self, corpus):
        for _, text in corpus.documents:
            for para in split_paragraphs(text):
                parts = split_sentences(para)
                assert "".join(s for s, _ in parts) == para
                data = para.encode("utf-8")
                pos = 0
                for s, (start, ln) in parts:
                    assert start == pos
                    assert data[start:start + ln].decode("utf-8") == s
                    pos = start + ln
                assert pos == len(data)


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=200))
def test_sentence_spans_always_tile(text):
    parts = split_sentences(text)
    assert "".join(s for s, _ in parts) == text


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=200))
def test_paragraph_join_is_normal_form(text):
    paras = split_paragraphs(text)
    joined = "\n\n".join(paras)
    assert joined == normalize_blanks(text)
    assert split_paragraphs(joined) == paras
