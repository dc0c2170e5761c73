"""Corpus ingestion, tokenization, vocabulary, and TF-IDF matrix construction."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from sklearn.base import BaseEstimator, TransformerMixin

DEFAULT_MIN_DF = 2
DEFAULT_MAX_DF_FRACTION = 0.9

# Frozen English stop list; shipping our own keeps tokenization stable across
# library versions.
STOP_WORDS = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by can cannot could did do does doing down
during each few for from further had has have having he her here hers herself
him himself his how i if in into is it its itself just me more most my myself
no nor not now of off on once only or other our ours ourselves out over own
same she should so some such than that the their theirs them themselves then
there these they this those through to too under until up very was we were
what when where which while who whom why will with you your yours yourself
yourselves
""".split())

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on non-alphanumeric boundaries, drop short and stop tokens.

    Deterministic and idempotent on its own space-joined output.
    """
    tokens = _TOKEN_RE.findall(text.lower())
    return [t for t in tokens if len(t) >= 2 and t not in STOP_WORDS]


@dataclass(frozen=True)
class Document:
    """A single corpus record."""

    id: str
    title: str
    abstract: str
    keywords: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not self.abstract.strip():
            raise ValueError(f"document {self.id!r}: abstract is empty")
        if not isinstance(self.keywords, tuple):
            object.__setattr__(self, "keywords", tuple(self.keywords))

    @property
    def text(self) -> str:
        """Counting field for term frequencies: title and abstract concatenated."""
        return f"{self.title} {self.abstract}".strip()


@dataclass(frozen=True)
class CorpusBundle:
    """All documents of one corpus plus provenance."""

    documents: tuple[Document, ...]
    source: str = "<memory>"

    def __post_init__(self) -> None:
        if not isinstance(self.documents, tuple):
            object.__setattr__(self, "documents", tuple(self.documents))

    @property
    def n(self) -> int:
        return len(self.documents)

    def by_id(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


@dataclass(frozen=True)
class Vocabulary:
    """Ordered distinct tokens with a token -> row-position reverse index."""

    tokens: tuple[str, ...]
    index: dict[str, int] = field(compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("vocabulary contains duplicate tokens")
        if not self.tokens:
            raise ValueError("vocabulary is empty")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tokens)})

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index


@dataclass(frozen=True)
class TfidfMatrix:
    """Sparse non-negative token-by-document matrix with L2-normalized columns.

    All-zero columns (documents with no vocabulary tokens) are left as zero
    and listed in ``zero_columns``.
    """

    matrix: sp.csc_matrix
    vocabulary: Vocabulary
    doc_ids: tuple[str, ...]
    zero_columns: tuple[int, ...] = ()

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def toarray(self) -> np.ndarray:
        return np.asarray(self.matrix.todense(), dtype=np.float64)


def ingest(path: str | Path) -> CorpusBundle:
    """Read a line-delimited JSON corpus file into a CorpusBundle.

    Each line must be an object with keys ``id``, ``title``, ``abstract`` and
    an optional ``keywords`` array. Errors report the offending line number.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"corpus file not found: {path}")
    documents: list[Document] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: malformed JSON record: {exc}") from exc
            if not isinstance(record, dict):
                raise ValueError(f"{path}:{lineno}: record is not a JSON object")
            try:
                doc = Document(
                    id=str(record["id"]),
                    title=str(record.get("title", "")),
                    abstract=str(record["abstract"]),
                    keywords=tuple(str(k) for k in record.get("keywords", []) or []),
                )
            except KeyError as exc:
                raise ValueError(f"{path}:{lineno}: missing required key {exc}") from exc
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from exc
            if doc.id in seen:
                raise ValueError(f"{path}:{lineno}: duplicate document id {doc.id!r}")
            seen.add(doc.id)
            documents.append(doc)
    if not documents:
        raise ValueError(f"{path}: corpus is empty")
    return CorpusBundle(documents=tuple(documents), source=str(path))


def write_corpus(bundle: CorpusBundle, path: str | Path) -> None:
    """Write a CorpusBundle back out as line-delimited JSON."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for doc in bundle.documents:
            record = {
                "id": doc.id,
                "title": doc.title,
                "abstract": doc.abstract,
                "keywords": list(doc.keywords),
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def _document_frequencies(docs: Sequence[Document]) -> dict[str, int]:
    df: dict[str, int] = {}
    for doc in docs:
        for token in set(tokenize(doc.text)):
            df[token] = df.get(token, 0) + 1
    return df


def build_vocabulary(
    docs: Sequence[Document],
    min_df: int = DEFAULT_MIN_DF,
    max_df_fraction: float = DEFAULT_MAX_DF_FRACTION,
) -> Vocabulary:
    """Build the lexicographically sorted vocabulary under document-frequency limits.

    A token is kept iff ``min_df <= df(token) <= max_df_fraction * n``.
    """
    if min_df < 1:
        raise ValueError(f"min_df must be >= 1, got {min_df}")
    if not 0 < max_df_fraction <= 1:
        raise ValueError(f"max_df_fraction must be in (0, 1], got {max_df_fraction}")
    n = len(docs)
    df = _document_frequencies(docs)
    ceiling = max_df_fraction * n
    kept = sorted(t for t, f in df.items() if min_df <= f <= ceiling)
    if not kept:
        raise ValueError(
            f"vocabulary is empty after filtering (min_df={min_df}, "
            f"max_df_fraction={max_df_fraction}, n={n})"
        )
    return Vocabulary(tokens=tuple(kept))


def build_tfidf(docs: Sequence[Document], vocab: Vocabulary) -> TfidfMatrix:
    """Construct the m-by-n TF-IDF matrix X.

    tf is the raw count of a token in the document (title + abstract), idf is
    the smoothed ``ln((1+n)/(1+df)) + 1``, and every non-zero column is
    L2-normalized.
    """
    n = len(docs)
    m = len(vocab)
    df = np.zeros(m, dtype=np.int64)
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for j, doc in enumerate(docs):
        counts: dict[int, int] = {}
        for token in tokenize(doc.text):
            i = vocab.index.get(token)
            if i is not None:
                counts[i] = counts.get(i, 0) + 1
        for i, c in counts.items():
            df[i] += 1
            rows.append(i)
            cols.append(j)
            vals.append(float(c))
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    matrix = sp.csc_matrix((vals, (rows, cols)), shape=(m, n), dtype=np.float64)
    matrix = sp.csc_matrix(sp.diags(idf) @ matrix)
    norms = np.sqrt(np.asarray(matrix.multiply(matrix).sum(axis=0)).ravel())
    zero_cols = tuple(int(j) for j in np.where(norms == 0.0)[0])
    scale = np.where(norms > 0.0, 1.0 / np.where(norms > 0.0, norms, 1.0), 0.0)
    matrix = sp.csc_matrix(matrix @ sp.diags(scale))
    doc_ids = tuple(doc.id for doc in docs)
    return TfidfMatrix(matrix=matrix, vocabulary=vocab, doc_ids=doc_ids, zero_columns=zero_cols)


def idf_value(n: int, df: int) -> float:
    """Smoothed inverse document frequency for one token."""
    return math.log((1.0 + n) / (1.0 + df)) + 1.0


class CorpusVectorizer(BaseEstimator, TransformerMixin):
    """Sklearn-style facade over vocabulary building and TF-IDF construction.

    ``fit`` learns the vocabulary from documents, ``transform`` produces the
    TfidfMatrix. Accepts a CorpusBundle or any sequence of Document.
    """

    def __init__(
        self,
        min_df: int = DEFAULT_MIN_DF,
        max_df_fraction: float = DEFAULT_MAX_DF_FRACTION,
    ):
        self.min_df = min_df
        self.max_df_fraction = max_df_fraction

    @staticmethod
    def _as_documents(X) -> tuple[Document, ...]:
        if isinstance(X, CorpusBundle):
            return X.documents
        docs = tuple(X)
        for doc in docs:
            if not isinstance(doc, Document):
                raise TypeError(f"expected Document, got {type(doc).__name__}")
        return docs

    def fit(self, X, y=None):
        docs = self._as_documents(X)
        self.vocabulary_ = build_vocabulary(docs, self.min_df, self.max_df_fraction)
        return self

    def transform(self, X) -> TfidfMatrix:
        if not hasattr(self, "vocabulary_"):
            raise RuntimeError("CorpusVectorizer is not fitted; call fit first")
        return build_tfidf(self._as_documents(X), self.vocabulary_)
