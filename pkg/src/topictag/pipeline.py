"""End-to-end stage orchestration shared by the CLI: ingest through report."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import corpus as corpus_mod
from .corpus import CorpusBundle, CorpusVectorizer, ingest
from .datasets import toy_corpus
from .factorization import (
    Factorization,
    RankSelectionReport,
    RankRow,
    load_factorization,
    nmf_multiplicative,
    nmfk_select,
)
from .gateway import ChatGateway, GenerationParams, MockGateway
from .metrics import HashEmbedder, bert_score, discrimination, score_label
from .optimizer import (
    CategoricalDim,
    FloatDim,
    IntDim,
    SearchSpace,
    TpeConfig,
    TrialRecord,
    default_search_space,
    load_study,
    run_study,
    trial_to_dict,
)
from .prompting import (
    DEFAULT_SELECTION,
    FeatureSelection,
    PromptTemplate,
    builtin_templates,
    extract_answer,
    load_templates,
    render_prompt,
)
from .rating import RatingItem
from .topics import ClusterLimits, TopicCluster, build_all_clusters, default_topic_split

DEFAULT_MODEL = "Meta-Llama-3-8B-Instruct"


class StageOrderError(RuntimeError):
    """A stage ran before the artifact it consumes was produced."""

    def __init__(self, missing: Path, producer: str):
        self.missing = missing
        self.producer = producer
        super().__init__(f"missing artifact {missing}; run `topictag {producer}` first")


@dataclass
class PipelineConfig:
    corpus: Optional[str] = None
    out_dir: str = "out"
    ground_truth: Optional[str] = None
    templates_dir: Optional[str] = None
    seed: int = 0
    # vocabulary
    min_df: int = 2
    max_df_fraction: float = 0.9
    # factorization
    k_min: int = 2
    k_max: int = 8
    n_resamples: int = 4
    noise_scale: float = 0.03
    max_iters: int = 300
    tol: float = 1e-9
    stability_threshold: float = 0.7
    # split
    train_topics: Optional[list[int]] = None
    # study
    n_trials: int = 20
    gamma: float = 0.25
    n_startup: int = 10
    n_candidates: int = 24
    # gateway
    base_url: Optional[str] = None
    model: str = DEFAULT_MODEL
    mock_llm: bool = False
    trace: bool = False
    timeout: float = 60.0
    max_tokens: int = 256
    # cluster limits
    top_tokens: int = 25
    top_ngrams: int = 10
    keywords: int = 10
    # search space overrides: name -> {"lo","hi"} or {"choices"}
    space_overrides: dict = field(default_factory=dict)

    @property
    def out(self) -> Path:
        return Path(self.out_dir)

    def limits(self) -> ClusterLimits:
        return ClusterLimits(
            top_tokens=self.top_tokens,
            top_ngrams=self.top_ngrams,
            keywords=self.keywords,
        )


_CONFIG_SECTIONS = {
    "vocabulary": ("min_df", "max_df_fraction"),
    "factorization": (
        "k_min", "k_max", "n_resamples", "noise_scale", "max_iters", "tol",
        "stability_threshold",
    ),
    "split": ("train_topics",),
    "study": ("n_trials", "gamma", "n_startup", "n_candidates"),
    "gateway": ("base_url", "model", "mock_llm", "trace", "timeout", "max_tokens"),
    "limits": ("top_tokens", "top_ngrams", "keywords"),
}


def load_config(path: str | Path) -> PipelineConfig:
    """Load a nested JSON config file and check that referenced files exist."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    cfg = PipelineConfig()
    for key in ("corpus", "out_dir", "ground_truth", "templates_dir", "seed"):
        if key in payload:
            setattr(cfg, key, payload[key])
    for section, keys in _CONFIG_SECTIONS.items():
        for key in keys:
            if key in payload.get(section, {}):
                setattr(cfg, key, payload[section][key])
    cfg.space_overrides = dict(payload.get("space", {}))
    for name in ("corpus", "ground_truth", "templates_dir"):
        value = getattr(cfg, name)
        if value and value != "toy" and not Path(value).exists():
            raise FileNotFoundError(f"config references missing {name}: {value}")
    return cfg


def stage_seed(root_seed: int, stage: str) -> int:
    digest = hashlib.sha256(f"{root_seed}:{stage}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big")


def _params_seed(root_seed: int, params: dict, topic_id: int, stage: str) -> int:
    fingerprint = hashlib.sha256(
        json.dumps(params, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()[:16]
    return stage_seed(root_seed, f"{stage}:{fingerprint}:{topic_id}")


def manifest_hash(manifest: dict) -> str:
    return hashlib.sha256(
        json.dumps(manifest, sort_keys=True, default=str).encode("utf-8")
    ).hexdigest()[:12]


# ---------------------------------------------------------------------------
# artifact paths

def corpus_path(cfg: PipelineConfig) -> Path:
    return cfg.out / "corpus.jsonl"


def factorization_path(cfg: PipelineConfig) -> Path:
    return cfg.out / "factorization.json"


def clusters_dir(cfg: PipelineConfig) -> Path:
    return cfg.out / "clusters"


def labels_path(cfg: PipelineConfig) -> Path:
    return cfg.out / "labels.json"


def study_path(cfg: PipelineConfig) -> Path:
    return cfg.out / "study.jsonl"


def best_config_path(cfg: PipelineConfig) -> Path:
    return cfg.out / "best_config.json"


def evaluation_path(cfg: PipelineConfig) -> Path:
    return cfg.out / "evaluation.json"


def scores_path(cfg: PipelineConfig) -> Path:
    return cfg.out / "scores.json"


def items_path(cfg: PipelineConfig) -> Path:
    return cfg.out / "items.jsonl"


def ratings_path(cfg: PipelineConfig) -> Path:
    return cfg.out / "ratings.jsonl"


def report_path(cfg: PipelineConfig) -> Path:
    return cfg.out / "report.json"


def _require(path: Path, producer: str) -> Path:
    if not path.exists():
        raise StageOrderError(path, producer)
    return path


# ---------------------------------------------------------------------------
# stages

def run_ingest(cfg: PipelineConfig) -> CorpusBundle:
    cfg.out.mkdir(parents=True, exist_ok=True)
    if cfg.corpus in (None, "toy"):
        bundle = toy_corpus()
    else:
        bundle = ingest(cfg.corpus)
    corpus_mod.write_corpus(bundle, corpus_path(cfg))
    return bundle


def _load_corpus(cfg: PipelineConfig) -> CorpusBundle:
    return ingest(_require(corpus_path(cfg), "ingest"))


def _vectorize(cfg: PipelineConfig, bundle: CorpusBundle):
    vectorizer = CorpusVectorizer(min_df=cfg.min_df, max_df_fraction=cfg.max_df_fraction)
    tfidf = vectorizer.fit_transform(bundle)
    return vectorizer.vocabulary_, tfidf


def run_factorize(cfg: PipelineConfig) -> tuple[Factorization, RankSelectionReport]:
    bundle = _load_corpus(cfg)
    _, tfidf = _vectorize(cfg, bundle)
    report = nmfk_select(
        tfidf,
        cfg.k_min,
        cfg.k_max,
        n_resamples=cfg.n_resamples,
        noise_scale=cfg.noise_scale,
        seed=stage_seed(cfg.seed, "nmfk"),
        stability_threshold=cfg.stability_threshold,
        tol=cfg.tol,
    )
    factorization = nmf_multiplicative(
        tfidf,
        report.chosen_k,
        max_iters=cfg.max_iters,
        tol=cfg.tol,
        seed=stage_seed(cfg.seed, "factorize"),
    )
    payload = {
        "W": factorization.W.tolist(),
        "H": factorization.H.tolist(),
        "k": factorization.k,
        "seed": factorization.seed,
        "relative_error": factorization.relative_error,
        "rank_selection": {
            "chosen_k": report.chosen_k,
            "rows": [
                {
                    "k": row.k,
                    "stability": row.stability,
                    "mean_relative_error": row.mean_relative_error,
                }
                for row in report.rows
            ],
            "trace": list(report.trace),
        },
    }
    factorization_path(cfg).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")
    return factorization, report


def load_rank_selection(cfg: PipelineConfig) -> RankSelectionReport:
    payload = json.loads(_require(factorization_path(cfg), "factorize").read_text())
    section = payload["rank_selection"]
    return RankSelectionReport(
        rows=tuple(
            RankRow(
                k=row["k"],
                stability=row["stability"],
                mean_relative_error=row["mean_relative_error"],
            )
            for row in section["rows"]
        ),
        chosen_k=section["chosen_k"],
        trace=tuple(section["trace"]),
    )


def load_pipeline_state(cfg: PipelineConfig) -> tuple[CorpusBundle, Factorization, list[TopicCluster]]:
    """Corpus + factorization + freshly assembled clusters for downstream stages."""
    bundle = _load_corpus(cfg)
    factorization = load_factorization(_require(factorization_path(cfg), "factorize"))
    vocabulary, tfidf = _vectorize(cfg, bundle)
    if len(vocabulary) != factorization.W.shape[0]:
        raise RuntimeError(
            f"vocabulary size {len(vocabulary)} does not match factorization rows "
            f"{factorization.W.shape[0]}; re-run factorize with the current corpus settings"
        )
    clusters = build_all_clusters(factorization, bundle, vocabulary, cfg.limits())
    return bundle, factorization, clusters


def run_clusters(cfg: PipelineConfig) -> list[TopicCluster]:
    from .topics import cluster_to_dict

    _, _, clusters = load_pipeline_state(cfg)
    out = clusters_dir(cfg)
    out.mkdir(parents=True, exist_ok=True)
    for cluster in clusters:
        path = out / f"topic_{cluster.topic_id:03d}.json"
        path.write_text(json.dumps(cluster_to_dict(cluster), indent=2), encoding="utf-8")
    return clusters


def available_templates(cfg: PipelineConfig) -> dict[str, PromptTemplate]:
    """Built-in templates plus any user templates from the configured directory."""
    templates = {t.id: t for t in builtin_templates()}
    if cfg.templates_dir:
        for template in load_templates(cfg.templates_dir):
            if template.id in templates:
                raise ValueError(f"custom template id {template.id!r} collides with a built-in")
            templates[template.id] = template
    return templates


def make_gateway(cfg: PipelineConfig):
    if cfg.mock_llm:
        return MockGateway(seed=stage_seed(cfg.seed, "mock-gateway"))
    if not cfg.base_url:
        raise ValueError("no base_url configured; pass --base-url or --mock-llm")
    return ChatGateway(
        base_url=cfg.base_url,
        timeout=cfg.timeout,
        trace_path=cfg.out / "trace.jsonl" if cfg.trace else None,
    )


def selection_from_params(params: dict, seed: int) -> FeatureSelection:
    """Build a FeatureSelection from search-space params, clamping sample <= pool."""
    pool = int(params.get("top_words_pool", DEFAULT_SELECTION.top_words_pool))
    sample = min(int(params.get("top_words_sample", DEFAULT_SELECTION.top_words_sample)), pool)
    return FeatureSelection(
        n_titles=int(params.get("n_titles", DEFAULT_SELECTION.n_titles)),
        n_abstract_words=int(
            params.get("n_abstract_words", DEFAULT_SELECTION.n_abstract_words)
        ),
        top_words_pool=pool,
        top_words_sample=sample,
        include_keywords=bool(params.get("include_keywords", False)),
        include_ngrams=bool(params.get("include_ngrams", False)),
        include_token_weights=bool(params.get("include_token_weights", False)),
        order_by_centroid=bool(params.get("order_by_centroid", True)),
        seed=seed,
    )


def generation_from_params(cfg: PipelineConfig, params: dict) -> GenerationParams:
    return GenerationParams(
        model_id=cfg.model,
        temperature=float(params.get("temperature", 0.7)),
        top_p=float(params.get("top_p", 0.95)),
        max_tokens=cfg.max_tokens,
    )


def _label_topic(gateway, template, cluster, selection, gen_params) -> dict:
    prompt = render_prompt(template, cluster, selection)
    completion = gateway.complete(prompt, gen_params)
    extraction = extract_answer(completion.text)
    return {
        "label": extraction.label,
        "status": extraction.status,
        "manifest": prompt.manifest,
        "manifest_hash": manifest_hash(prompt.manifest),
    }


def run_label(cfg: PipelineConfig) -> dict:
    """Label every topic once with the built-in default template and selection."""
    _, _, clusters = load_pipeline_state(cfg)
    gateway = make_gateway(cfg)
    template = available_templates(cfg)["T1"]
    gen_params = GenerationParams(model_id=cfg.model, max_tokens=cfg.max_tokens)
    labels = {}
    for cluster in clusters:
        selection = replace(
            DEFAULT_SELECTION, seed=stage_seed(cfg.seed, f"label:{cluster.topic_id}")
        )
        labels[str(cluster.topic_id)] = _label_topic(
            gateway, template, cluster, selection, gen_params
        )
    payload = {"model": cfg.model, "template": template.id, "labels": labels}
    labels_path(cfg).write_text(json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8")
    return payload


def load_ground_truth(cfg: PipelineConfig) -> dict[int, str]:
    if not cfg.ground_truth:
        raise ValueError("no ground-truth labels file configured; pass --ground-truth")
    path = Path(cfg.ground_truth)
    if not path.exists():
        raise FileNotFoundError(f"ground-truth labels file not found: {path}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    return {int(topic): str(label) for topic, label in raw.items()}


def split_topics(cfg: PipelineConfig, k: int) -> tuple[list[int], list[int]]:
    if cfg.train_topics is None:
        return default_topic_split(k)
    train = sorted(set(cfg.train_topics))
    out_of_range = [t for t in train if not 0 <= t < k]
    if out_of_range:
        raise ValueError(f"train topics {out_of_range} outside discovered range 0..{k - 1}")
    return train, [t for t in range(k) if t not in train]


def _score_candidate(label: str, reference: str, embedder) -> float:
    try:
        return bert_score(label, reference, embedder).f
    except ValueError:
        return -1.0


def make_objective(cfg, clusters, train_topics, ground_truth, gateway, embedder, stage: str):
    """Objective: mean BERTScore F over train topics; failed extraction scores -1."""
    by_topic = {cluster.topic_id: cluster for cluster in clusters}
    templates = available_templates(cfg)

    def objective(params: dict):
        template = templates[params.get("template", "T1")]
        gen_params = generation_from_params(cfg, params)
        per_topic = []
        scores = []
        for topic_id in train_topics:
            selection = selection_from_params(
                params, seed=_params_seed(cfg.seed, params, topic_id, stage)
            )
            outcome = _label_topic(gateway, template, by_topic[topic_id], selection, gen_params)
            if outcome["status"] == "failed":
                score = -1.0
            else:
                score = _score_candidate(outcome["label"], ground_truth[topic_id], embedder)
            scores.append(score)
            per_topic.append(
                {
                    "topic_id": topic_id,
                    "label": outcome["label"],
                    "status": outcome["status"],
                    "manifest_hash": outcome["manifest_hash"],
                    "score": score,
                }
            )
        return sum(scores) / len(scores), {"per_topic": per_topic}

    return objective


def build_search_space(cfg: PipelineConfig) -> SearchSpace:
    space = default_search_space(template_ids=tuple(available_templates(cfg)))
    if not cfg.space_overrides:
        return space
    dims = []
    overridden = set()
    for dim in space.dimensions:
        spec = cfg.space_overrides.get(dim.name)
        if spec is None:
            dims.append(dim)
            continue
        overridden.add(dim.name)
        dims.append(_dim_from_spec(dim.name, spec))
    for name, spec in cfg.space_overrides.items():
        if name not in overridden:
            dims.append(_dim_from_spec(name, spec))
    return SearchSpace(dimensions=tuple(dims))


def _dim_from_spec(name: str, spec: dict):
    if "choices" in spec:
        return CategoricalDim(name, tuple(spec["choices"]))
    lo, hi = spec["lo"], spec["hi"]
    if isinstance(lo, int) and isinstance(hi, int):
        return IntDim(name, lo, hi)
    return FloatDim(name, float(lo), float(hi))


def run_optimize(cfg: PipelineConfig) -> tuple[TrialRecord, list[TrialRecord]]:
    """Stage-1 coarse filtering: TPE over train topics maximizing mean BERTScore F."""
    _, factorization, clusters = load_pipeline_state(cfg)
    ground_truth = load_ground_truth(cfg)
    train_topics, _ = split_topics(cfg, factorization.k)
    missing = [t for t in train_topics if t not in ground_truth]
    if missing:
        raise ValueError(f"ground truth missing train topics {missing}")
    gateway = make_gateway(cfg)
    objective = make_objective(
        cfg, clusters, train_topics, ground_truth, gateway, HashEmbedder(), "optimize"
    )
    config = TpeConfig(
        gamma=cfg.gamma,
        n_startup=cfg.n_startup,
        n_candidates=cfg.n_candidates,
        seed=stage_seed(cfg.seed, "optimize"),
    )
    best, history = run_study(
        objective,
        build_search_space(cfg),
        cfg.n_trials,
        config,
        study_path=study_path(cfg),
    )
    best_config_path(cfg).write_text(
        json.dumps(trial_to_dict(best), sort_keys=True, indent=2), encoding="utf-8"
    )
    return best, history


def run_evaluate(cfg: PipelineConfig) -> dict:
    """Stage 2: apply the best searched config to held-out topics and score it."""
    _, factorization, clusters = load_pipeline_state(cfg)
    history = load_study(_require(study_path(cfg), "optimize"))
    complete = [t for t in history if t.status == "complete"]
    if not complete:
        raise RuntimeError(f"study at {study_path(cfg)} has no complete trials")
    best = max(complete, key=lambda t: t.objective)
    ground_truth = load_ground_truth(cfg)
    train_topics, test_topics = split_topics(cfg, factorization.k)
    # Split hygiene: test scoring must never see train-topic ground truth.
    test_truth = {t: ground_truth[t] for t in test_topics if t in ground_truth}
    assert not set(test_truth) & set(train_topics)

    gateway = make_gateway(cfg)
    embedder = HashEmbedder()
    template = available_templates(cfg)[best.params.get("template", "T1")]
    gen_params = generation_from_params(cfg, best.params)
    by_topic = {cluster.topic_id: cluster for cluster in clusters}

    per_topic = {}
    labels = []
    score_rows = []
    for topic_id in test_topics:
        selection = selection_from_params(
            best.params, seed=_params_seed(cfg.seed, best.params, topic_id, "evaluate")
        )
        outcome = _label_topic(gateway, template, by_topic[topic_id], selection, gen_params)
        entry = dict(outcome)
        if outcome["status"] != "failed" and topic_id in test_truth:
            try:
                scores = score_label(outcome["label"], test_truth[topic_id], embedder)
                entry["reference"] = test_truth[topic_id]
                entry["scores"] = scores.to_dict()
                score_rows.append(
                    {
                        "topic_id": topic_id,
                        "trial_id": best.trial_id,
                        "candidate": outcome["label"],
                        "reference": test_truth[topic_id],
                        **scores.to_dict(),
                    }
                )
            except ValueError:
                entry["scores"] = None
        per_topic[str(topic_id)] = entry
        if outcome["status"] != "failed":
            labels.append(outcome["label"])
    payload = {
        "model": cfg.model,
        "best_trial": trial_to_dict(best),
        "test_topics": test_topics,
        "per_topic": per_topic,
        "discrimination": discrimination(labels) if len(labels) >= 2 else None,
    }
    evaluation_path(cfg).write_text(
        json.dumps(payload, sort_keys=True, indent=2), encoding="utf-8"
    )
    scores_path(cfg).write_text(
        json.dumps(score_rows, sort_keys=True, indent=2), encoding="utf-8"
    )
    return payload


def build_rating_items(cfg: PipelineConfig) -> list[RatingItem]:
    """Queue rating items from evaluation output, falling back to the label run."""
    items: list[RatingItem] = []
    if evaluation_path(cfg).exists():
        payload = json.loads(evaluation_path(cfg).read_text(encoding="utf-8"))
        trial_id = payload["best_trial"]["trial_id"]
        for topic_id, entry in sorted(payload["per_topic"].items(), key=lambda kv: int(kv[0])):
            if entry["status"] == "failed":
                continue
            metrics = {}
            scores = entry.get("scores")
            if scores:
                metrics = {
                    "bleu": scores["bleu"],
                    "rouge_l_f": scores["rouge_l"]["f"],
                    "bertscore_f": scores["bertscore"]["f"],
                }
            items.append(
                RatingItem(
                    item_id=f"eval-{int(topic_id):03d}",
                    trial_id=trial_id,
                    topic_id=int(topic_id),
                    candidate_label=entry["label"],
                    feature_summary=_summary_from_manifest(entry.get("manifest", {})),
                    ground_truth=entry.get("reference"),
                    metrics=metrics,
                    model_id=payload.get("model", cfg.model),
                )
            )
        return items
    if labels_path(cfg).exists():
        payload = json.loads(labels_path(cfg).read_text(encoding="utf-8"))
        for topic_id, entry in sorted(payload["labels"].items(), key=lambda kv: int(kv[0])):
            if entry["status"] == "failed":
                continue
            items.append(
                RatingItem(
                    item_id=f"label-{int(topic_id):03d}",
                    trial_id=-1,
                    topic_id=int(topic_id),
                    candidate_label=entry["label"],
                    feature_summary=_summary_from_manifest(entry.get("manifest", {})),
                    model_id=payload.get("model", cfg.model),
                )
            )
        return items
    raise StageOrderError(evaluation_path(cfg), "evaluate (or label)")


def _summary_from_manifest(manifest: dict) -> dict:
    return {
        "top_words": list(manifest.get("top_words", [])),
        "titles": list(manifest.get("titles", [])),
    }


def run_report(cfg: PipelineConfig) -> dict:
    """Consolidate whatever artifacts exist into report.json and report.txt."""
    from .rating import RatingStore

    bundle = _load_corpus(cfg)
    fact_file = _require(factorization_path(cfg), "factorize")
    fact_payload = json.loads(fact_file.read_text(encoding="utf-8"))
    report: dict = {
        "corpus": {"n": bundle.n, "source": bundle.source},
        "factorization": {
            "k": fact_payload["k"],
            "relative_error": fact_payload["relative_error"],
            "rank_selection": fact_payload["rank_selection"],
        },
    }
    if labels_path(cfg).exists():
        labels_payload = json.loads(labels_path(cfg).read_text(encoding="utf-8"))
        label_values = [
            entry["label"]
            for entry in labels_payload["labels"].values()
            if entry["status"] != "failed"
        ]
        report["labels"] = {
            "model": labels_payload["model"],
            "per_topic": {
                topic: {"label": entry["label"], "status": entry["status"]}
                for topic, entry in labels_payload["labels"].items()
            },
            "discrimination": discrimination(label_values) if len(label_values) >= 2 else None,
        }
    if study_path(cfg).exists():
        history = load_study(study_path(cfg))
        complete = [t for t in history if t.status == "complete"]
        report["study"] = {
            "n_trials": len(history),
            "n_complete": len(complete),
            "best": trial_to_dict(max(complete, key=lambda t: t.objective)) if complete else None,
        }
    if evaluation_path(cfg).exists():
        report["evaluation"] = json.loads(evaluation_path(cfg).read_text(encoding="utf-8"))
    if items_path(cfg).exists() and ratings_path(cfg).exists():
        store = RatingStore(items_path(cfg), ratings_path(cfg))
        if store.ratings:
            by_model: dict[str, list[int]] = {}
            for rating in store.ratings.values():
                model = store.items[rating.item_id].model_id or "unknown"
                by_model.setdefault(model, []).append(rating.score)
            section: dict = {
                "per_model_mean_score": {
                    model: sum(scores) / len(scores) for model, scores in sorted(by_model.items())
                }
            }
            try:
                section["agreement"] = _nan_to_none(store.agreement_report().to_dict())
            except ValueError as exc:
                section["agreement"] = {"error": str(exc)}
            report["ratings"] = section
    report_path(cfg).write_text(json.dumps(report, sort_keys=True, indent=2), encoding="utf-8")
    (cfg.out / "report.txt").write_text(render_text_report(report), encoding="utf-8")
    return report


def _nan_to_none(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _nan_to_none(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_nan_to_none(v) for v in value]
    return value


def render_text_report(report: dict) -> str:
    lines = []
    lines.append("topictag report")
    lines.append("=" * 40)
    lines.append(f"documents: {report['corpus']['n']}")
    fact = report["factorization"]
    lines.append(f"topics (k): {fact['k']}  relative error: {fact['relative_error']:.6f}")
    lines.append("")
    lines.append("rank selection (k, stability, mean relative error):")
    for row in fact["rank_selection"]["rows"]:
        lines.append(
            f"  k={row['k']:>3}  stability={row['stability']:.4f}  "
            f"error={row['mean_relative_error']:.6f}"
        )
    if "labels" in report:
        lines.append("")
        lines.append(f"labels ({report['labels']['model']}):")
        for topic, entry in sorted(report["labels"]["per_topic"].items(), key=lambda kv: int(kv[0])):
            lines.append(f"  topic {topic}: {entry['label']!r} [{entry['status']}]")
        disc = report["labels"]["discrimination"]
        if disc is not None:
            lines.append(f"label discrimination: {disc:.4f}")
    if "study" in report and report["study"].get("best"):
        best = report["study"]["best"]
        lines.append("")
        lines.append(
            f"study: {report['study']['n_trials']} trials, best objective "
            f"{best['objective']:.4f} (trial {best['trial_id']})"
        )
    if "evaluation" in report and report["evaluation"].get("discrimination") is not None:
        lines.append(f"held-out discrimination: {report['evaluation']['discrimination']:.4f}")
    if "ratings" in report:
        lines.append("")
        lines.append("mean human score per model:")
        for model, mean in report["ratings"]["per_model_mean_score"].items():
            lines.append(f"  {model}: {mean:.2f}")
        agreement = report["ratings"].get("agreement") or {}
        if "metric_r2" in agreement:
            lines.append("metric vs mean human rating (r^2):")
            for name, value in agreement["metric_r2"].items():
                rendered = "n/a" if value is None else f"{value:.3f}"
                lines.append(f"  {name}: {rendered}")
    lines.append("")
    return "\n".join(lines)
