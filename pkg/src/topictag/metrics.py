"""Label-quality metrics: BLEU, ROUGE-L, BERTScore, discrimination, kappa, and r-squared."""

from __future__ import annotations

import hashlib
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import NamedTuple, Protocol, Sequence

import numpy as np

SMOOTH_EPS = 1e-9

# Independent of the corpus tokenizer on purpose: no stop list, no minimum
# length, so metric scores never drop label words.
_METRIC_TOKEN_RE = re.compile(r"[a-z0-9]+")


def metric_tokenize(text: str) -> list[str]:
    return _METRIC_TOKEN_RE.findall(text.lower())


class PRF(NamedTuple):
    precision: float
    recall: float
    f: float


class TokenEmbedder(Protocol):
    """Maps text to one unit-norm vector per metric token, deterministically."""

    def embed(self, text: str) -> list[np.ndarray]: ...


def _require_tokens(text: str, side: str) -> list[str]:
    if not text:
        raise ValueError(f"{side} string is empty")
    tokens = metric_tokenize(text)
    if not tokens:
        raise ValueError(f"{side} has no tokens after metric tokenization: {text!r}")
    return tokens


def bleu(candidate: str, reference: str, max_n: int = 4) -> float:
    """Geometric mean of modified n-gram precisions with a brevity penalty.

    n runs from 1 to min(max_n, candidate length); an n with zero matches
    contributes the smoothing floor instead of zeroing the whole product.
    """
    cand = _require_tokens(candidate, "candidate")
    ref = _require_tokens(reference, "reference")
    effective_n = min(max_n, len(cand))
    log_sum = 0.0
    for n in range(1, effective_n + 1):
        cand_grams = Counter(tuple(cand[i : i + n]) for i in range(len(cand) - n + 1))
        ref_grams = Counter(tuple(ref[i : i + n]) for i in range(len(ref) - n + 1))
        clipped = sum(min(c, ref_grams[g]) for g, c in cand_grams.items())
        total = sum(cand_grams.values())
        p_n = clipped / total if clipped > 0 else SMOOTH_EPS
        log_sum += math.log(p_n)
    brevity = math.exp(min(0.0, 1.0 - len(ref) / len(cand)))
    return brevity * math.exp(log_sum / effective_n)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    prev = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        curr = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                curr[j] = prev[j - 1] + 1
            else:
                curr[j] = max(prev[j], curr[j - 1])
        prev = curr
    return prev[len(b)]


def rouge_l(candidate: str, reference: str, beta: float = 1.0) -> PRF:
    """Longest-common-subsequence precision/recall/F over metric tokens."""
    cand = _require_tokens(candidate, "candidate")
    ref = _require_tokens(reference, "reference")
    lcs = _lcs_length(cand, ref)
    p = lcs / len(cand)
    r = lcs / len(ref)
    denom = r + beta * beta * p
    f = (1.0 + beta * beta) * p * r / denom if denom > 0 else 0.0
    return PRF(p, r, f)


def bert_score(candidate: str, reference: str, embedder: TokenEmbedder) -> PRF:
    """Greedy cosine matching between candidate and reference token embeddings.

    No idf weighting and no baseline rescaling, so values stay in [-1, 1] and
    swapping the arguments swaps precision and recall but keeps F. The harmonic
    mean is only meaningful for positive p and r; otherwise F is 0 so the
    bound holds for adversarial embeddings.
    """
    _require_tokens(candidate, "candidate")
    _require_tokens(reference, "reference")
    cand_vecs = np.stack(embedder.embed(candidate))
    ref_vecs = np.stack(embedder.embed(reference))
    sim = cand_vecs @ ref_vecs.T
    p = float(np.mean(np.max(sim, axis=1)))
    r = float(np.mean(np.max(sim, axis=0)))
    f = 2.0 * p * r / (p + r) if p > 0.0 and r > 0.0 else 0.0
    return PRF(p, r, f)


def discrimination(labels: Sequence[str]) -> float:
    """One minus the mean pairwise Jaccard similarity of unigram sets.

    Higher means the label set is easier to tell apart.
    """
    if len(labels) < 2:
        raise ValueError(f"need at least 2 labels, got {len(labels)}")
    sets = [set(metric_tokenize(label)) for label in labels]
    sims = []
    for i in range(len(sets)):
        for j in range(i + 1, len(sets)):
            union = sets[i] | sets[j]
            sims.append(len(sets[i] & sets[j]) / len(union) if union else 1.0)
    return 1.0 - float(np.mean(sims))


def cohen_kappa(
    ratings_a: Sequence[int],
    ratings_b: Sequence[int],
    weighting: str = "none",
) -> float:
    """Chance-corrected agreement between two raters.

    ``weighting="linear"`` applies |i - j| / (C - 1) disagreement weights for
    ordinal scales.
    """
    if len(ratings_a) != len(ratings_b):
        raise ValueError(
            f"rating vectors differ in length: {len(ratings_a)} vs {len(ratings_b)}"
        )
    if not ratings_a:
        raise ValueError("rating vectors are empty")
    if weighting not in ("none", "linear"):
        raise ValueError(f"unknown weighting {weighting!r}")
    n = len(ratings_a)
    categories = sorted(set(ratings_a) | set(ratings_b))
    pos = {c: i for i, c in enumerate(categories)}
    c = len(categories)
    if c == 1:
        return 1.0  # both raters constant on the same category
    pa = np.zeros(c)
    pb = np.zeros(c)
    for a, b in zip(ratings_a, ratings_b):
        pa[pos[a]] += 1.0 / n
        pb[pos[b]] += 1.0 / n
    if weighting == "none":
        p_o = sum(a == b for a, b in zip(ratings_a, ratings_b)) / n
        p_e = float(pa @ pb)
        if p_e == 1.0:
            if p_o == 1.0:
                return 1.0
            raise ValueError("kappa undefined: chance agreement is 1 with imperfect agreement")
        return (p_o - p_e) / (1.0 - p_e)
    weights = np.abs(np.subtract.outer(np.arange(c), np.arange(c))) / (c - 1)
    d_o = sum(weights[pos[a], pos[b]] for a, b in zip(ratings_a, ratings_b)) / n
    d_e = float(pa @ weights @ pb)
    if d_e == 0.0:
        if d_o == 0.0:
            return 1.0
        raise ValueError("kappa undefined: expected disagreement is 0 with observed disagreement")
    return 1.0 - d_o / d_e


def pearson_r2(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Squared Pearson correlation coefficient."""
    if len(xs) != len(ys):
        raise ValueError(f"vectors differ in length: {len(xs)} vs {len(ys)}")
    if len(xs) < 2:
        raise ValueError("need at least 2 points")
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    dx = x - x.mean()
    dy = y - y.mean()
    var_x = float(dx @ dx)
    var_y = float(dy @ dy)
    if var_x == 0.0 or var_y == 0.0:
        raise ValueError("r-squared undefined for zero-variance input")
    r = float(dx @ dy) / math.sqrt(var_x * var_y)
    return r * r


@dataclass(frozen=True)
class ScoreReport:
    bleu: float
    rouge_l: PRF
    bertscore: PRF

    def to_dict(self) -> dict:
        return {
            "bleu": self.bleu,
            "rouge_l": {"precision": self.rouge_l.precision, "recall": self.rouge_l.recall, "f": self.rouge_l.f},
            "bertscore": {"precision": self.bertscore.precision, "recall": self.bertscore.recall, "f": self.bertscore.f},
        }


def score_label(
    candidate: str,
    reference: str,
    embedder: TokenEmbedder,
    max_n: int = 4,
    beta: float = 1.0,
) -> ScoreReport:
    """All three NLG metrics for one candidate/reference pair."""
    return ScoreReport(
        bleu=bleu(candidate, reference, max_n=max_n),
        rouge_l=rouge_l(candidate, reference, beta=beta),
        bertscore=bert_score(candidate, reference, embedder),
    )


class HashEmbedder:
    """Context-free stub embedder: each token maps to a fixed pseudo-random unit vector.

    Seeding from a token digest keeps vectors identical across processes, so
    offline BERTScore runs are reproducible with no model dependency.
    """

    def __init__(self, dim: int = 64):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def _vector(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.sha256(token.encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "big"))
            raw = rng.standard_normal(self.dim)
            vec = raw / np.linalg.norm(raw)
            self._cache[token] = vec
        return vec

    def embed(self, text: str) -> list[np.ndarray]:
        return [self._vector(t) for t in metric_tokenize(text)]


class RemoteEmbedder:
    """Embedding-endpoint client returning one unit-norm vector per metric token."""

    def __init__(self, gateway_post, model_id: str):
        # gateway_post: callable(path, payload) -> response dict; shares the
        # gateway's bounded in-flight contract.
        self._post = gateway_post
        self.model_id = model_id

    def embed(self, text: str) -> list[np.ndarray]:
        tokens = metric_tokenize(text)
        body = self._post("/embeddings", {"model": self.model_id, "input": tokens})
        vectors = []
        for item in body["data"]:
            raw = np.asarray(item["embedding"], dtype=np.float64)
            norm = np.linalg.norm(raw)
            if norm == 0.0:
                raise ValueError("embedding endpoint returned a zero vector")
            vectors.append(raw / norm)
        if len(vectors) != len(tokens):
            raise ValueError(
                f"embedding endpoint returned {len(vectors)} vectors for {len(tokens)} tokens"
            )
        return vectors


@dataclass(frozen=True)
class AgreementReport:
    """Pairwise rater agreement plus metric-to-human correlations."""

    raters: tuple[str, ...]
    kappa_matrix: tuple[tuple[float, ...], ...]
    group_mean_kappas: dict[str, float]
    metric_r2: dict[str, float]

    def __post_init__(self) -> None:
        size = len(self.raters)
        if len(self.kappa_matrix) != size or any(len(row) != size for row in self.kappa_matrix):
            raise ValueError("kappa matrix shape must match rater count")
        for i in range(size):
            if not math.isclose(self.kappa_matrix[i][i], 1.0):
                raise ValueError("kappa matrix diagonal must be 1")
            for j in range(size):
                value = self.kappa_matrix[i][j]
                if not math.isnan(value):
                    if not -1.0 <= value <= 1.0 + 1e-12:
                        raise ValueError(f"kappa out of [-1, 1]: {value}")
                    if not math.isclose(value, self.kappa_matrix[j][i], abs_tol=1e-12):
                        raise ValueError("kappa matrix must be symmetric")

    def to_dict(self) -> dict:
        return {
            "raters": list(self.raters),
            "kappa_matrix": [list(row) for row in self.kappa_matrix],
            "group_mean_kappas": dict(self.group_mean_kappas),
            "metric_r2": dict(self.metric_r2),
        }
