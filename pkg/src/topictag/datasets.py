"""Deterministic toy corpus with planted topics, used by the demo pipeline and tests."""

from __future__ import annotations

import random
from pathlib import Path

from .corpus import CorpusBundle, Document, write_corpus

# Disjoint content vocabularies keep the planted structure cleanly separable.
_TOPIC_POOLS = {
    "graph": {
        "words": [
            "graph", "embedding", "node", "edge", "vertex", "adjacency",
            "spectral", "walk", "neighborhood", "convolution", "attention",
            "link",
        ],
        "title": "graph embedding study",
        "keywords": ["graph", "embedding", "representation"],
    },
    "language": {
        "words": [
            "language", "parsing", "syntax", "grammar", "sentence", "corpus",
            "token", "translation", "semantics", "tagging", "morphology",
            "dialogue",
        ],
        "title": "language parsing study",
        "keywords": ["language", "parsing", "syntax"],
    },
    "ontology": {
        "words": [
            "ontology", "schema", "taxonomy", "reasoning", "axiom", "concept",
            "alignment", "curation", "hierarchy", "inference", "mapping",
            "merging",
        ],
        "title": "ontology construction study",
        "keywords": ["ontology", "schema", "reasoning"],
    },
}


def toy_corpus(n_docs: int = 60, seed: int = 7) -> CorpusBundle:
    """Generate ``n_docs`` documents round-robined over three planted topics.

    Topic word pools are disjoint, so the three blocks survive any rank-scan
    perturbation, while per-document count jitter plus a few words bled in
    from the other topics keep finer splits unstable. The jitter is around
    half the base counts; scan with noise_scale of the same order (~0.5) to
    recover exactly three topics.
    """
    rng = random.Random(seed)
    names = list(_TOPIC_POOLS)
    all_words = [w for name in names for w in _TOPIC_POOLS[name]["words"]]
    documents = []
    for i in range(n_docs):
        pool = _TOPIC_POOLS[names[i % len(names)]]
        words = pool["words"]
        counts = {word: 2 for word in words}
        for word in rng.sample(words, 3):
            counts[word] += 1
        for word in rng.sample([w for w in all_words if w not in words], 3):
            counts[word] = 1
        abstract_words = [w for word, c in sorted(counts.items()) for w in [word] * c]
        rng.shuffle(abstract_words)
        title_words = rng.sample(words, 3)
        documents.append(
            Document(
                id=f"d{i:03d}",
                title=" ".join(title_words) + " " + pool["title"],
                abstract="We study " + " ".join(abstract_words) + " in this work.",
                keywords=tuple(rng.sample(pool["keywords"], 2)),
            )
        )
    return CorpusBundle(documents=tuple(documents), source=f"<toy:{n_docs}:{seed}>")


def write_toy_corpus(path: str | Path, n_docs: int = 60, seed: int = 7) -> Path:
    path = Path(path)
    write_corpus(toy_corpus(n_docs=n_docs, seed=seed), path)
    return path
