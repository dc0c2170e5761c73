import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from topictag.corpus import (
    CorpusVectorizer,
    Document,
    Vocabulary,
    build_tfidf,
    build_vocabulary,
    idf_value,
    ingest,
    tokenize,
)


def doc(doc_id, text, title="", keywords=()):
    return Document(id=doc_id, title=title, abstract=text, keywords=tuple(keywords))


THREE_DOCS = [doc("d1", "cat sat"), doc("d2", "cat ran"), doc("d3", "dog ran")]


class TestTokenize:
    def test_lowercases_and_splits(self):
        assert tokenize("Graph Neural Networks!") == ["graph", "neural", "networks"]

    def test_drops_short_and_stop_tokens(self):
        assert tokenize("a I x") == []

    def test_splits_on_hyphen(self):
        assert tokenize("TF-IDF matrix") == ["tf", "idf", "matrix"]

    def test_empty_input(self):
        assert tokenize("") == []

    @given(st.text(max_size=200))
    def test_idempotent_on_own_output(self, text):
        once = tokenize(text)
        assert tokenize(" ".join(once)) == once


class TestVocabulary:
    def test_hand_enumerated_document_frequencies(self):
        vocab = build_vocabulary(THREE_DOCS, min_df=1, max_df_fraction=1.0)
        assert list(vocab.tokens) == ["cat", "dog", "ran", "sat"]

    def test_min_df_two(self):
        vocab = build_vocabulary(THREE_DOCS, min_df=2, max_df_fraction=1.0)
        assert list(vocab.tokens) == ["cat", "ran"]

    def test_unreachable_min_df_errors(self):
        with pytest.raises(ValueError, match="empty"):
            build_vocabulary(THREE_DOCS, min_df=4, max_df_fraction=1.0)

    def test_bijection(self):
        vocab = build_vocabulary(THREE_DOCS, min_df=1, max_df_fraction=1.0)
        for i, token in enumerate(vocab.tokens):
            assert vocab.index[token] == i

    def test_duplicate_tokens_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            Vocabulary(tokens=("cat", "cat"))


class TestTfidf:
    def test_idf_matches_hand_value(self):
        # df(cat) = 2 over n = 3 documents
        assert idf_value(3, 2) == pytest.approx(math.log(4 / 3) + 1, abs=1e-9)
        assert idf_value(3, 2) == pytest.approx(1.28768, abs=1e-5)

    def test_entries_and_column_norms(self):
        vocab = build_vocabulary(THREE_DOCS, min_df=1, max_df_fraction=1.0)
        tfidf = build_tfidf(THREE_DOCS, vocab)
        dense = tfidf.toarray()
        assert dense.shape == (4, 3)
        assert np.all(dense >= 0)
        norms = np.linalg.norm(dense, axis=0)
        assert np.allclose(norms, 1.0, atol=1e-12)
        assert tfidf.zero_columns == ()

    def test_doc_without_vocab_tokens_flagged(self):
        docs = THREE_DOCS + [doc("d4", "zebra")]
        vocab = build_vocabulary(docs, min_df=2, max_df_fraction=1.0)
        tfidf = build_tfidf(docs, vocab)
        assert tfidf.zero_columns == (3,)
        assert np.allclose(tfidf.toarray()[:, 3], 0.0)

    def test_single_token_column_is_unit(self):
        docs = [doc("d1", "cat cat")]
        vocab = build_vocabulary(docs, min_df=1, max_df_fraction=1.0)
        tfidf = build_tfidf(docs, vocab)
        assert np.allclose(tfidf.toarray(), [[1.0]])

    @given(
        st.lists(
            st.lists(st.sampled_from(["cat", "dog", "ran", "sat", "bird"]), min_size=1, max_size=8),
            min_size=1,
            max_size=6,
        )
    )
    def test_entries_non_negative_on_random_corpora(self, word_lists):
        docs = [doc(f"d{i}", " ".join(words)) for i, words in enumerate(word_lists)]
        vocab = build_vocabulary(docs, min_df=1, max_df_fraction=1.0)
        tfidf = build_tfidf(docs, vocab)
        dense = tfidf.toarray()
        assert np.all(dense >= 0)
        norms = np.linalg.norm(dense, axis=0)
        ok = (np.abs(norms - 1.0) < 1e-12) | (norms == 0.0)
        assert ok.all()


class TestIngest:
    def _write(self, tmp_path, lines):
        path = tmp_path / "corpus.jsonl"
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    def test_three_records(self, tmp_path):
        lines = [
            json.dumps({"id": f"d{i}", "title": f"t{i}", "abstract": f"abstract {i}"})
            for i in range(3)
        ]
        bundle = ingest(self._write(tmp_path, lines))
        assert bundle.n == 3
        assert [d.id for d in bundle.documents] == ["d0", "d1", "d2"]

    def test_duplicate_id_named(self, tmp_path):
        lines = [
            json.dumps({"id": "d1", "title": "", "abstract": "one"}),
            json.dumps({"id": "d1", "title": "", "abstract": "two"}),
        ]
        with pytest.raises(ValueError, match="d1"):
            ingest(self._write(tmp_path, lines))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(ValueError, match="empty"):
            ingest(path)

    def test_malformed_record_reports_line(self, tmp_path):
        lines = [json.dumps({"id": "d1", "abstract": "fine"}), "{not json"]
        with pytest.raises(ValueError, match=":2"):
            ingest(self._write(tmp_path, lines))

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ingest(tmp_path / "nope.jsonl")

    def test_keywords_parsed(self, tmp_path):
        lines = [json.dumps({"id": "d1", "abstract": "one", "keywords": ["kg", "nlp"]})]
        bundle = ingest(self._write(tmp_path, lines))
        assert bundle.documents[0].keywords == ("kg", "nlp")


class TestCorpusVectorizer:
    def test_fit_transform_roundtrip(self):
        vec = CorpusVectorizer(min_df=1, max_df_fraction=1.0)
        tfidf = vec.fit_transform(THREE_DOCS)
        assert tfidf.m == 4 and tfidf.n == 3
        assert vec.get_params() == {"min_df": 1, "max_df_fraction": 1.0}

    def test_transform_before_fit(self):
        with pytest.raises(RuntimeError, match="not fitted"):
            CorpusVectorizer().transform(THREE_DOCS)
