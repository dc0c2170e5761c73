"""Per-topic feature bundles derived from a factorization: assignments, rankings, tokens, n-grams."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus import CorpusBundle, Document, Vocabulary, tokenize
from .factorization import Factorization


@dataclass(frozen=True)
class TopicAssignment:
    """Hard assignment of every document to its argmax topic."""

    topics: tuple[int, ...]
    winning_values: tuple[float, ...]
    doc_ids: tuple[str, ...]
    degenerate: tuple[int, ...] = ()  # column indices with all-zero coordinates

    def members_of(self, topic_id: int) -> list[int]:
        return [j for j, t in enumerate(self.topics) if t == topic_id]


@dataclass(frozen=True)
class ClusterLimits:
    top_tokens: int = 25
    top_ngrams: int = 10
    keywords: int = 10
    order_by_centroid: bool = True


@dataclass(frozen=True)
class TopicCluster:
    """Everything the prompt renderer needs to describe one topic."""

    topic_id: int
    members: tuple[Document, ...]
    top_tokens: tuple[tuple[str, float], ...]
    top_ngrams: tuple[tuple[str, int], ...]
    keywords: tuple[tuple[str, int], ...] = ()

    @property
    def member_ids(self) -> tuple[str, ...]:
        return tuple(doc.id for doc in self.members)

    @property
    def top_titles(self) -> tuple[str, ...]:
        return tuple(doc.title for doc in self.members)

    @property
    def top_abstracts(self) -> tuple[str, ...]:
        return tuple(doc.abstract for doc in self.members)

    def __len__(self) -> int:
        return len(self.members)


def assign_topics(H: np.ndarray, doc_ids: Sequence[str] | None = None) -> TopicAssignment:
    """Assign document j to argmax over rows of H[:, j]; ties break to the lowest topic.

    All-zero columns land on topic 0 and are flagged as degenerate.
    """
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2 or H.shape[0] < 1:
        raise ValueError("H must be a 2-D matrix with k >= 1 rows")
    n = H.shape[1]
    if doc_ids is None:
        doc_ids = tuple(str(j) for j in range(n))
    else:
        doc_ids = tuple(doc_ids)
        if len(doc_ids) != n:
            raise ValueError(f"got {len(doc_ids)} doc_ids for {n} columns")
    topics = np.argmax(H, axis=0)
    winning = H[topics, np.arange(n)]
    degenerate = tuple(int(j) for j in np.where(~np.any(H > 0, axis=0))[0])
    return TopicAssignment(
        topics=tuple(int(t) for t in topics),
        winning_values=tuple(float(v) for v in winning),
        doc_ids=doc_ids,
        degenerate=degenerate,
    )


def topic_word_distribution(
    W: np.ndarray, topic_id: int, vocabulary: Vocabulary
) -> list[tuple[str, float]]:
    """Conditional token probabilities for one topic, sorted descending.

    p(token i | topic) = W[i, topic] / sum_i W[i, topic]. Ties sort by token.
    """
    W = np.asarray(W, dtype=np.float64)
    if not 0 <= topic_id < W.shape[1]:
        raise ValueError(f"topic_id {topic_id} out of range for k={W.shape[1]}")
    column = W[:, topic_id]
    total = column.sum()
    if total <= 0:
        raise ValueError(f"topic {topic_id} has a zero W column")
    probs = column / total
    order = sorted(range(len(probs)), key=lambda i: (-probs[i], vocabulary.tokens[i]))
    return [(vocabulary.tokens[i], float(probs[i])) for i in order]


def _l1_normalized_columns(H: np.ndarray) -> np.ndarray:
    sums = H.sum(axis=0)
    safe = np.where(sums > 0.0, sums, 1.0)
    return H / safe


def centroid_ranking(
    H: np.ndarray, assignment: TopicAssignment, topic_id: int
) -> list[str]:
    """Order a topic's documents by distance of their L1-normalized coordinates
    to the topic centroid, closest first; ties break by document id."""
    H = np.asarray(H, dtype=np.float64)
    members = assignment.members_of(topic_id)
    if not members:
        return []
    coords = _l1_normalized_columns(H)[:, members]
    centroid = coords.mean(axis=1, keepdims=True)
    distances = np.linalg.norm(coords - centroid, axis=0)
    ranked = sorted(
        range(len(members)),
        key=lambda i: (distances[i], assignment.doc_ids[members[i]]),
    )
    return [assignment.doc_ids[members[i]] for i in ranked]


def extract_ngrams(
    documents: Sequence[Document],
    n_values: Sequence[int] = (2, 3),
    top_m: int = 10,
) -> list[tuple[str, int]]:
    """Count contiguous token n-grams over the members' tokenized abstracts.

    Returns the ``top_m`` by count; ties sort lexicographically.
    """
    if top_m < 1:
        raise ValueError(f"top_m must be >= 1, got {top_m}")
    counts: Counter[str] = Counter()
    for doc in documents:
        tokens = tokenize(doc.abstract)
        for n in n_values:
            for start in range(len(tokens) - n + 1):
                counts[" ".join(tokens[start : start + n])] += 1
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:top_m]


def pooled_keywords(documents: Sequence[Document], top_m: int = 10) -> list[tuple[str, int]]:
    """Member keywords pooled by frequency; ties sort lexicographically."""
    counts: Counter[str] = Counter()
    for doc in documents:
        counts.update(doc.keywords)
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:top_m]


def build_cluster(
    factorization: Factorization,
    corpus: CorpusBundle,
    vocabulary: Vocabulary,
    topic_id: int,
    limits: ClusterLimits = ClusterLimits(),
) -> TopicCluster:
    """Assemble the full feature bundle for one topic under the given limits."""
    if not 0 <= topic_id < factorization.k:
        raise ValueError(f"topic_id {topic_id} out of range for k={factorization.k}")
    doc_ids = tuple(doc.id for doc in corpus.documents)
    assignment = assign_topics(factorization.H, doc_ids)
    if limits.order_by_centroid:
        ordered_ids = centroid_ranking(factorization.H, assignment, topic_id)
    else:
        ordered_ids = [doc_ids[j] for j in assignment.members_of(topic_id)]
    by_id = {doc.id: doc for doc in corpus.documents}
    members = tuple(by_id[doc_id] for doc_id in ordered_ids)
    distribution = topic_word_distribution(factorization.W, topic_id, vocabulary)
    return TopicCluster(
        topic_id=topic_id,
        members=members,
        top_tokens=tuple(distribution[: limits.top_tokens]),
        top_ngrams=tuple(extract_ngrams(members, top_m=limits.top_ngrams)) if members else (),
        keywords=tuple(pooled_keywords(members, top_m=limits.keywords)),
    )


def build_all_clusters(
    factorization: Factorization,
    corpus: CorpusBundle,
    vocabulary: Vocabulary,
    limits: ClusterLimits = ClusterLimits(),
) -> list[TopicCluster]:
    return [
        build_cluster(factorization, corpus, vocabulary, topic_id, limits)
        for topic_id in range(factorization.k)
    ]


def default_topic_split(k: int) -> tuple[list[int], list[int]]:
    """First ceil(k/4) topic ids train, the rest test."""
    n_train = math.ceil(k / 4)
    return list(range(n_train)), list(range(n_train, k))


def cluster_to_dict(cluster: TopicCluster) -> dict:
    return {
        "topic_id": cluster.topic_id,
        "member_ids": list(cluster.member_ids),
        "top_tokens": [[t, p] for t, p in cluster.top_tokens],
        "top_ngrams": [[g, c] for g, c in cluster.top_ngrams],
        "keywords": [[w, c] for w, c in cluster.keywords],
    }


def save_cluster(cluster: TopicCluster, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cluster_to_dict(cluster), indent=2), encoding="utf-8")
