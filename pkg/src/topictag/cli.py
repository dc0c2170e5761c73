"""Command-line interface: one subcommand per pipeline stage."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .pipeline import PipelineConfig, StageOrderError, load_config


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="pipeline config JSON")
    common.add_argument("--out", metavar="DIR", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="root seed, fanned out per stage")
    common.add_argument("--mock-llm", action="store_true", help="use the deterministic mock backend")
    common.add_argument("--trace", action="store_true", help="log gateway traffic to trace.jsonl")
    common.add_argument("--base-url", metavar="URL", help="chat-completion endpoint base URL")
    common.add_argument("--model", metavar="ID", help="model id sent to the endpoint")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(
        prog="topictag",
        description="Cluster a corpus into topics via NMF with automatic rank "
        "selection, then label the topics with an LLM and tune the prompts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="read a corpus file into the run directory")
    p.add_argument("--corpus", metavar="PATH", help="line-delimited JSON corpus ('toy' for the bundled demo corpus)")

    p = sub.add_parser("factorize", parents=[common], help="select k and factorize the TF-IDF matrix")
    p.add_argument("--k-min", type=int, help="smallest candidate rank")
    p.add_argument("--k-max", type=int, help="largest candidate rank")
    p.add_argument("--resamples", type=int, help="perturbed copies per candidate rank")
    p.add_argument("--noise-scale", type=float, help="multiplicative perturbation amplitude")

    sub.add_parser("clusters", parents=[common], help="dump per-topic feature bundles")

    sub.add_parser("label", parents=[common], help="label every topic with the default prompt")

    p = sub.add_parser("optimize", parents=[common], help="stage-1 TPE search on the train topics")
    p.add_argument("--trials", type=int, help="study budget")
    p.add_argument("--ground-truth", metavar="PATH", help="JSON map topic_id -> label")

    p = sub.add_parser("evaluate", parents=[common], help="stage-2 scoring on the held-out topics")
    p.add_argument("--ground-truth", metavar="PATH", help="JSON map topic_id -> label")

    p = sub.add_parser("rate-serve", parents=[common], help="serve the human rating API and UI")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--scale", type=int, choices=(3, 5), default=3, help="rating scale")
    p.add_argument("--reveal", action="store_true", help="show ground-truth labels to raters")
    p.add_argument("--static-dir", metavar="DIR", help="built annotator UI assets")

    sub.add_parser("report", parents=[common], help="consolidate run artifacts into report.json")
    return parser


def _config_from_args(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else PipelineConfig()
    if args.out is not None:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.mock_llm:
        cfg.mock_llm = True
    if args.trace:
        cfg.trace = True
    if args.base_url is not None:
        cfg.base_url = args.base_url
    if args.model is not None:
        cfg.model = args.model
    if getattr(args, "corpus", None) is not None:
        cfg.corpus = args.corpus
    if getattr(args, "k_min", None) is not None:
        cfg.k_min = args.k_min
    if getattr(args, "k_max", None) is not None:
        cfg.k_max = args.k_max
    if getattr(args, "resamples", None) is not None:
        cfg.n_resamples = args.resamples
    if getattr(args, "noise_scale", None) is not None:
        cfg.noise_scale = args.noise_scale
    if getattr(args, "trials", None) is not None:
        cfg.n_trials = args.trials
    if getattr(args, "ground_truth", None) is not None:
        cfg.ground_truth = args.ground_truth
    return cfg


def _cmd_ingest(cfg: PipelineConfig, args) -> int:
    bundle = pipeline.run_ingest(cfg)
    print(f"wrote {pipeline.corpus_path(cfg)} ({bundle.n} documents)")
    return 0


def _cmd_factorize(cfg: PipelineConfig, args) -> int:
    factorization, report = pipeline.run_factorize(cfg)
    print(
        f"wrote {pipeline.factorization_path(cfg)} "
        f"(chosen k={report.chosen_k}, relative error={factorization.relative_error:.6f})"
    )
    for line in report.trace:
        print(f"  {line}")
    return 0


def _cmd_clusters(cfg: PipelineConfig, args) -> int:
    clusters = pipeline.run_clusters(cfg)
    print(f"wrote {len(clusters)} cluster dumps under {pipeline.clusters_dir(cfg)}")
    return 0


def _cmd_label(cfg: PipelineConfig, args) -> int:
    payload = pipeline.run_label(cfg)
    for topic, entry in sorted(payload["labels"].items(), key=lambda kv: int(kv[0])):
        print(f"topic {topic}: {entry['label']!r} [{entry['status']}]")
    print(f"wrote {pipeline.labels_path(cfg)}")
    return 0


def _cmd_optimize(cfg: PipelineConfig, args) -> int:
    best, history = pipeline.run_optimize(cfg)
    print(
        f"wrote {pipeline.study_path(cfg)} ({len(history)} trials); "
        f"best objective {best.objective:.4f} at trial {best.trial_id}"
    )
    print(f"best params: {json.dumps(best.params, sort_keys=True)}")
    return 0


def _cmd_evaluate(cfg: PipelineConfig, args) -> int:
    payload = pipeline.run_evaluate(cfg)
    disc = payload["discrimination"]
    rendered = f"{disc:.4f}" if disc is not None else "n/a"
    print(f"wrote {pipeline.evaluation_path(cfg)} (discrimination {rendered})")
    return 0


def _cmd_rate_serve(cfg: PipelineConfig, args) -> int:
    import uvicorn

    from .rating import RatingStore, create_app

    cfg.out.mkdir(parents=True, exist_ok=True)
    store = RatingStore(pipeline.items_path(cfg), pipeline.ratings_path(cfg), scale=args.scale)
    if not store.items:
        store.seed_items(pipeline.build_rating_items(cfg))
    static_dir = args.static_dir
    if static_dir is None and Path("frontend/dist").exists():
        static_dir = "frontend/dist"
    app = create_app(store, static_dir=static_dir, reveal_ground_truth=args.reveal)
    print(f"serving {len(store.items)} items on http://{args.host}:{args.port}")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def _cmd_report(cfg: PipelineConfig, args) -> int:
    pipeline.run_report(cfg)
    print(f"wrote {pipeline.report_path(cfg)}")
    print((cfg.out / "report.txt").read_text(encoding="utf-8"))
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "factorize": _cmd_factorize,
    "clusters": _cmd_clusters,
    "label": _cmd_label,
    "optimize": _cmd_optimize,
    "evaluate": _cmd_evaluate,
    "rate-serve": _cmd_rate_serve,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
        return _COMMANDS[args.command](cfg, args)
    except StageOrderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
