"""Human rating loop: durable append-only store, work distribution, agreement reports, HTTP API."""

from __future__ import annotations

import json
import math
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from .metrics import AgreementReport, cohen_kappa, pearson_r2
from .optimizer import TrialRecord, good_trial_commonality


@dataclass(frozen=True)
class RatingItem:
    """One candidate label queued for human judgment."""

    item_id: str
    trial_id: int
    topic_id: int
    candidate_label: str
    feature_summary: dict = field(default_factory=dict)
    ground_truth: Optional[str] = None
    metrics: dict = field(default_factory=dict)
    model_id: str = ""

    def __post_init__(self) -> None:
        if not self.item_id:
            raise ValueError("item_id must be non-empty")
        if not self.candidate_label:
            raise ValueError(f"item {self.item_id}: candidate_label must be non-empty")

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "trial_id": self.trial_id,
            "topic_id": self.topic_id,
            "candidate_label": self.candidate_label,
            "feature_summary": self.feature_summary,
            "ground_truth": self.ground_truth,
            "metrics": self.metrics,
            "model_id": self.model_id,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "RatingItem":
        return cls(
            item_id=str(payload["item_id"]),
            trial_id=int(payload["trial_id"]),
            topic_id=int(payload["topic_id"]),
            candidate_label=str(payload["candidate_label"]),
            feature_summary=dict(payload.get("feature_summary", {})),
            ground_truth=payload.get("ground_truth"),
            metrics=dict(payload.get("metrics", {})),
            model_id=str(payload.get("model_id", "")),
        )


@dataclass(frozen=True)
class Rating:
    rater_id: str
    item_id: str
    scale: int
    score: int
    timestamp: str = ""
    group: str = "default"

    def __post_init__(self) -> None:
        if self.scale not in (3, 5):
            raise ValueError(f"scale must be 3 or 5, got {self.scale}")
        if not 1 <= self.score <= self.scale:
            raise ValueError(f"score {self.score} out of range for {self.scale}-point scale")
        if not self.rater_id:
            raise ValueError("rater_id must be non-empty")
        if not self.timestamp:
            object.__setattr__(
                self, "timestamp", datetime.now(timezone.utc).isoformat()
            )

    def to_dict(self) -> dict:
        return {
            "rater_id": self.rater_id,
            "item_id": self.item_id,
            "scale": self.scale,
            "score": self.score,
            "timestamp": self.timestamp,
            "group": self.group,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Rating":
        return cls(
            rater_id=str(payload["rater_id"]),
            item_id=str(payload["item_id"]),
            scale=int(payload["scale"]),
            score=int(payload["score"]),
            timestamp=str(payload.get("timestamp", "")),
            group=str(payload.get("group", "default")),
        )


class RatingStore:
    """Append-only rating log over a fixed item set.

    Every acknowledged rating is flushed and fsynced before the ack, so an
    abrupt process death never loses acknowledged work. Resubmission by the
    same (rater, item) supersedes the earlier score on replay.
    """

    def __init__(self, items_path: str | Path, ratings_path: str | Path, scale: int = 3):
        if scale not in (3, 5):
            raise ValueError(f"scale must be 3 or 5, got {scale}")
        self.items_path = Path(items_path)
        self.ratings_path = Path(ratings_path)
        self.scale = scale
        self._lock = threading.Lock()
        self.items: dict[str, RatingItem] = {}
        self.ratings: dict[tuple[str, str], Rating] = {}
        if self.items_path.exists():
            self._load_items()
        if self.ratings_path.exists():
            self._replay_ratings()

    def _load_items(self) -> None:
        with self.items_path.open("r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    item = RatingItem.from_dict(json.loads(line))
                    if item.item_id in self.items:
                        raise ValueError(f"duplicate item_id {item.item_id!r}")
                    self.items[item.item_id] = item

    def _replay_ratings(self) -> None:
        with self.ratings_path.open("r", encoding="utf-8") as handle:
            for line in handle:
                if line.strip():
                    rating = Rating.from_dict(json.loads(line))
                    self.ratings[(rating.rater_id, rating.item_id)] = rating

    def seed_items(self, items: Sequence[RatingItem]) -> None:
        """Write the item set; refuses to clobber a non-empty existing set."""
        if self.items:
            raise RuntimeError("store already has items; refusing to reseed")
        ids = [item.item_id for item in items]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate item ids in seed set")
        with self.items_path.open("w", encoding="utf-8") as handle:
            for item in items:
                handle.write(json.dumps(item.to_dict(), ensure_ascii=False) + "\n")
        self.items = {item.item_id: item for item in items}

    def submit_rating(self, rating: Rating) -> Rating:
        """Durably append one rating; returns it as the acknowledgment."""
        if rating.item_id not in self.items:
            raise KeyError(f"unknown item {rating.item_id!r}")
        with self._lock:
            with self.ratings_path.open("a", encoding="utf-8") as handle:
                handle.write(json.dumps(rating.to_dict(), ensure_ascii=False) + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            self.ratings[(rating.rater_id, rating.item_id)] = rating
        return rating

    def _rating_counts(self) -> dict[str, int]:
        counts = {item_id: 0 for item_id in self.items}
        for (_, item_id) in self.ratings:
            counts[item_id] += 1
        return counts

    def next_item(self, rater_id: str) -> Optional[RatingItem]:
        """The unrated item with the fewest total ratings; ties go to the lowest id."""
        rated_by_rater = {item_id for (rater, item_id) in self.ratings if rater == rater_id}
        counts = self._rating_counts()
        candidates = [item_id for item_id in self.items if item_id not in rated_by_rater]
        if not candidates:
            return None
        best = min(candidates, key=lambda item_id: (counts[item_id], item_id))
        return self.items[best]

    def progress(self, rater_id: str) -> dict:
        rated = sum(1 for (rater, _) in self.ratings if rater == rater_id)
        return {"rated": rated, "remaining": len(self.items) - rated}

    def item_mean_scores(self) -> dict[str, float]:
        sums: dict[str, list[int]] = {}
        for rating in self.ratings.values():
            sums.setdefault(rating.item_id, []).append(rating.score)
        return {item_id: sum(scores) / len(scores) for item_id, scores in sums.items()}

    def agreement_report(self) -> AgreementReport:
        """Pairwise Cohen's kappa over co-rated items plus metric-vs-human r-squared."""
        by_rater: dict[str, dict[str, int]] = {}
        groups: dict[str, str] = {}
        for rating in self.ratings.values():
            by_rater.setdefault(rating.rater_id, {})[rating.item_id] = rating.score
            groups[rating.rater_id] = rating.group
        raters = sorted(by_rater)
        has_overlap = False
        size = len(raters)
        matrix = [[1.0] * size for _ in range(size)]
        for i in range(size):
            for j in range(i + 1, size):
                shared = sorted(set(by_rater[raters[i]]) & set(by_rater[raters[j]]))
                if shared:
                    has_overlap = True
                    a = [by_rater[raters[i]][s] for s in shared]
                    b = [by_rater[raters[j]][s] for s in shared]
                    try:
                        kappa = cohen_kappa(a, b)
                    except ValueError:
                        kappa = math.nan
                else:
                    kappa = math.nan
                matrix[i][j] = matrix[j][i] = kappa
        if size < 2 or not has_overlap:
            raise ValueError("agreement needs >= 2 raters with >= 1 co-rated item")

        group_mean: dict[str, float] = {}
        for group in sorted(set(groups.values())):
            members = [r for r in raters if groups[r] == group]
            pair_values = [
                matrix[raters.index(a)][raters.index(b)]
                for idx, a in enumerate(members)
                for b in members[idx + 1 :]
                if not math.isnan(matrix[raters.index(a)][raters.index(b)])
            ]
            if pair_values:
                group_mean[group] = sum(pair_values) / len(pair_values)

        mean_scores = self.item_mean_scores()
        metric_names = sorted({name for item in self.items.values() for name in item.metrics})
        metric_r2: dict[str, float] = {}
        for name in metric_names:
            xs, ys = [], []
            for item_id, mean_score in mean_scores.items():
                value = self.items[item_id].metrics.get(name)
                if value is not None:
                    xs.append(float(value))
                    ys.append(mean_score)
            try:
                metric_r2[name] = pearson_r2(xs, ys)
            except ValueError:
                metric_r2[name] = math.nan

        return AgreementReport(
            raters=tuple(raters),
            kappa_matrix=tuple(tuple(row) for row in matrix),
            group_mean_kappas=group_mean,
            metric_r2=metric_r2,
        )

    def trial_mean_ratings(self) -> dict[int, float]:
        by_trial: dict[int, list[int]] = {}
        for rating in self.ratings.values():
            trial_id = self.items[rating.item_id].trial_id
            by_trial.setdefault(trial_id, []).append(rating.score)
        return {t: sum(scores) / len(scores) for t, scores in by_trial.items()}

    def filter_good_trials(
        self,
        min_mean_score: float,
        study_history: Optional[Sequence[TrialRecord]] = None,
    ) -> tuple[list[int], Optional[dict]]:
        """Trials whose mean item rating clears the threshold, with a
        commonality summary when the study history is available."""
        means = self.trial_mean_ratings()
        good_ids = sorted(t for t, mean in means.items() if mean >= min_mean_score)
        summary = None
        if study_history is not None and good_ids:
            rated_trials = []
            for record in study_history:
                if record.trial_id in means:
                    rated_trials.append(
                        TrialRecord(
                            trial_id=record.trial_id,
                            params=record.params,
                            objective=record.objective,
                            detail=record.detail,
                            status=record.status,
                            rating=means[record.trial_id],
                        )
                    )
            if rated_trials:
                summary = good_trial_commonality(rated_trials, min_mean_score)
        return good_ids, summary

    def compact(self) -> None:
        """Rewrite the log keeping only the latest rating per (rater, item)."""
        with self._lock:
            tmp = self.ratings_path.with_suffix(".tmp")
            with tmp.open("w", encoding="utf-8") as handle:
                for rating in self.ratings.values():
                    handle.write(json.dumps(rating.to_dict(), ensure_ascii=False) + "\n")
                handle.flush()
                os.fsync(handle.fileno())
            tmp.replace(self.ratings_path)


def _sanitize(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    return value


def create_app(
    store: RatingStore,
    static_dir: str | Path | None = None,
    reveal_ground_truth: bool = False,
):
    """FastAPI app over a RatingStore; serves the annotator UI when built."""
    from fastapi import Body, FastAPI, HTTPException, Response
    from fastapi.responses import HTMLResponse, JSONResponse

    app = FastAPI(title="topictag rating service")

    def item_payload(item: RatingItem) -> dict:
        payload = item.to_dict()
        payload["scale"] = store.scale
        if not reveal_ground_truth:
            payload.pop("ground_truth", None)
        return payload

    @app.get("/api/items/next")
    def next_item(rater: str):
        item = store.next_item(rater)
        if item is None:
            return Response(status_code=204)
        return item_payload(item)

    @app.post("/api/ratings", status_code=201)
    def submit(payload: dict = Body(...)):
        missing = [key for key in ("rater_id", "item_id", "scale", "score") if key not in payload]
        if missing:
            raise HTTPException(400, f"missing fields: {', '.join(missing)}")
        try:
            scale = int(payload["scale"])
            score = int(payload["score"])
        except (TypeError, ValueError) as exc:
            raise HTTPException(400, f"scale and score must be integers: {exc}") from exc
        if scale != store.scale:
            raise HTTPException(400, f"session scale is {store.scale}, got {scale}")
        try:
            rating = Rating(
                rater_id=str(payload["rater_id"]),
                item_id=str(payload["item_id"]),
                scale=scale,
                score=score,
                group=str(payload.get("group", "default")),
            )
        except ValueError as exc:
            raise HTTPException(400, str(exc)) from exc
        try:
            store.submit_rating(rating)
        except KeyError as exc:
            raise HTTPException(404, str(exc)) from exc
        return {"status": "accepted", "rater_id": rating.rater_id, "item_id": rating.item_id}

    @app.get("/api/agreement")
    def agreement():
        try:
            report = store.agreement_report()
        except ValueError as exc:
            raise HTTPException(409, str(exc)) from exc
        return JSONResponse(_sanitize(report.to_dict()))

    @app.get("/api/progress")
    def progress(rater: str):
        return store.progress(rater)

    static_root = Path(static_dir) if static_dir else None
    index_file = static_root / "index.html" if static_root else None

    @app.get("/", response_class=HTMLResponse)
    def index():
        if index_file is not None and index_file.exists():
            return HTMLResponse(index_file.read_text(encoding="utf-8"))
        return HTMLResponse(
            "<!doctype html><title>topictag rating</title>"
            "<p>Annotator UI is not built. The JSON API is available under /api/.</p>"
        )

    if static_root is not None and static_root.exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/static", StaticFiles(directory=static_root), name="static")

    return app
