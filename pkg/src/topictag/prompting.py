"""Chain-of-thought prompt rendering from topic features, and answer extraction."""

from __future__ import annotations

import json
import random
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from .corpus import tokenize
from .topics import TopicCluster

FEATURE_HEADER = "Here is the Document Information:"

_MARKER_RE = re.compile(r"<<(.*?)>>", re.DOTALL)


@dataclass(frozen=True)
class PromptTemplate:
    """A zero-shot chain-of-thought template. The final answer must be wrapped in << >>."""

    id: str
    system_text: str
    step_texts: tuple[str, ...]
    require_keywords: bool = False

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("template id must be non-empty")
        if not self.system_text.strip():
            raise ValueError(f"template {self.id}: system text must be non-empty")
        marker_steps = [s for s in self.step_texts if "<<" in s and ">>" in s]
        if len(marker_steps) != 1:
            raise ValueError(
                f"template {self.id}: exactly one step must instruct the << >> format, "
                f"found {len(marker_steps)}"
            )
        if not isinstance(self.step_texts, tuple):
            object.__setattr__(self, "step_texts", tuple(self.step_texts))

    def full_text(self) -> str:
        """The instruction text as one block, ending at the feature header."""
        return "\n".join([self.system_text, *self.step_texts, FEATURE_HEADER])


@dataclass(frozen=True)
class FeatureSelection:
    """How many of which topic features get injected into the prompt."""

    n_titles: int = 4
    n_abstract_words: int = 3
    top_words_pool: int = 8
    top_words_sample: int = 5
    include_keywords: bool = False
    include_ngrams: bool = False
    include_token_weights: bool = False
    order_by_centroid: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_titles", "n_abstract_words", "top_words_pool", "top_words_sample"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.top_words_sample > self.top_words_pool:
            raise ValueError(
                f"top_words_sample ({self.top_words_sample}) exceeds "
                f"top_words_pool ({self.top_words_pool})"
            )


# Best-performing configuration shipped as the default: sample 3 words from the
# top abstract, the top 4 titles, and 5 of the top 8 words.
DEFAULT_SELECTION = FeatureSelection()


@dataclass(frozen=True)
class RenderedPrompt:
    system: str
    user: str
    manifest: dict

    def manifest_items(self, section: str) -> list[str]:
        return list(self.manifest.get(section, []))


ExtractionStatus = Literal["marker", "fallback_last_line", "failed"]


@dataclass(frozen=True)
class ExtractionResult:
    label: str
    status: ExtractionStatus

    def __post_init__(self) -> None:
        if self.status != "failed" and not self.label:
            raise ValueError("label must be non-empty unless extraction failed")


def builtin_templates() -> list[PromptTemplate]:
    """The four built-in chain-of-thought templates.

    T1 is the shipped default; T2 drops the intermediate guesses, T3 adds an
    explicit n-gram review step, T4 is T1 with the keywords section forced on.
    """
    t1 = PromptTemplate(
        id="T1",
        system_text=(
            "You are a document understander. Using your expertise, label this "
            "topic cluster by thinking step-by-step:"
        ),
        step_texts=(
            "Step 1: Review the document information and make four guesses on the topic label.",
            "Step 2: Review the top words and refine each response. ",
            "Step 3: Choose the best answer from your guesses and format it like so: <<[ANSWER]>>.",
        ),
    )
    t2 = PromptTemplate(
        id="T2",
        system_text=(
            "You are a document understander. Using your expertise, label this topic cluster:"
        ),
        step_texts=(
            "Step 1: Review the document information and decide on the single best topic label.",
            "Step 2: Format your answer like so: <<[ANSWER]>>.",
        ),
    )
    t3 = PromptTemplate(
        id="T3",
        system_text=(
            "You are a document understander. Using your expertise, label this "
            "topic cluster by thinking step-by-step:"
        ),
        step_texts=(
            "Step 1: Review the document information and make four guesses on the topic label.",
            "Step 2: Review the top n-grams and refine each response.",
            "Step 3: Review the top words and refine each response.",
            "Step 4: Choose the best answer from your guesses and format it like so: <<[ANSWER]>>.",
        ),
    )
    t4 = PromptTemplate(
        id="T4",
        system_text=t1.system_text,
        step_texts=t1.step_texts,
        require_keywords=True,
    )
    return [t1, t2, t3, t4]


def _dedupe(items: list[str]) -> list[str]:
    seen: set[str] = set()
    out: list[str] = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


def render_prompt(
    template: PromptTemplate,
    cluster: TopicCluster,
    selection: FeatureSelection,
) -> RenderedPrompt:
    """Render the chat messages for one topic under a feature selection.

    Deterministic given ``selection.seed``. Requests for more items than the
    cluster holds are clamped and recorded in the manifest, never an error.
    """
    if len(cluster) == 0:
        raise ValueError(f"topic {cluster.topic_id} has no members to render from")
    rng = random.Random(selection.seed)
    clamped: dict[str, dict[str, int]] = {}

    def clamp(section: str, requested: int, available: int) -> int:
        take = min(requested, available)
        if take < requested:
            clamped[section] = {"requested": requested, "available": available}
        return take

    title_pool = _dedupe([t for t in cluster.top_titles if t.strip()])
    n_titles = clamp("titles", selection.n_titles, len(title_pool))
    if selection.order_by_centroid:
        titles = title_pool[:n_titles]
    else:
        titles = rng.sample(title_pool, n_titles)

    abstract_tokens = sorted(set(tokenize(cluster.members[0].abstract)))
    n_abstract = clamp("abstract_words", selection.n_abstract_words, len(abstract_tokens))
    abstract_words = rng.sample(abstract_tokens, n_abstract)

    word_pool = [t for t, _ in cluster.top_tokens[: selection.top_words_pool]]
    n_words = clamp("top_words", selection.top_words_sample, len(word_pool))
    top_words = rng.sample(word_pool, n_words)
    weights = dict(cluster.top_tokens)

    include_keywords = selection.include_keywords or template.require_keywords
    keywords = [w for w, _ in cluster.keywords] if include_keywords else []
    ngrams = [g for g, _ in cluster.top_ngrams] if selection.include_ngrams else []

    sections: list[str] = []
    if titles:
        sections.append("Titles: " + " | ".join(titles))
    if abstract_words:
        sections.append("Abstract words: " + ", ".join(abstract_words))
    if top_words:
        if selection.include_token_weights:
            rendered_words = [f"{w} ({weights[w]:.4f})" for w in top_words]
        else:
            rendered_words = top_words
        sections.append("Top words: " + ", ".join(rendered_words))
    if keywords:
        sections.append("Keywords: " + ", ".join(keywords))
    if ngrams:
        sections.append("N-grams: " + "; ".join(ngrams))

    user_lines = [*template.step_texts, FEATURE_HEADER, *sections]
    manifest = {
        "template_id": template.id,
        "topic_id": cluster.topic_id,
        "seed": selection.seed,
        "titles": titles,
        "abstract_words": abstract_words,
        "top_words": top_words,
        "keywords": keywords,
        "ngrams": ngrams,
        "clamped": clamped,
    }
    return RenderedPrompt(
        system=template.system_text,
        user="\n".join(user_lines),
        manifest=manifest,
    )


def extract_answer(response_text: str) -> ExtractionResult:
    """Pull the final label out of an LLM response.

    The content of the last non-empty << >> pair wins; without a marker the
    last non-empty line is used with fallback status; empty input fails.
    """
    markers = [m.strip() for m in _MARKER_RE.findall(response_text)]
    markers = [m for m in markers if m]
    if markers:
        return ExtractionResult(label=markers[-1], status="marker")
    lines = [line.strip() for line in response_text.splitlines() if line.strip()]
    if lines:
        return ExtractionResult(label=lines[-1], status="fallback_last_line")
    return ExtractionResult(label="", status="failed")


def template_to_dict(template: PromptTemplate) -> dict:
    payload = {
        "id": template.id,
        "system_text": template.system_text,
        "step_texts": list(template.step_texts),
    }
    if template.require_keywords:
        payload["require_keywords"] = True
    return payload


def template_from_dict(payload: dict) -> PromptTemplate:
    return PromptTemplate(
        id=str(payload["id"]),
        system_text=str(payload["system_text"]),
        step_texts=tuple(str(s) for s in payload["step_texts"]),
        require_keywords=bool(payload.get("require_keywords", False)),
    )


def load_templates(directory: str | Path) -> list[PromptTemplate]:
    """Load user templates from a directory of JSON files, sorted by filename."""
    templates = []
    for path in sorted(Path(directory).glob("*.json")):
        templates.append(template_from_dict(json.loads(path.read_text(encoding="utf-8"))))
    ids = [t.id for t in templates]
    if len(set(ids)) != len(ids):
        raise ValueError(f"duplicate template ids in {directory}")
    return templates
