"""Tree-structured Parzen Estimator search over templates, features, and generation knobs."""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import ndtr, ndtri

BANDWIDTH_FACTOR = 1.06
BANDWIDTH_FLOOR = 1e-3


@dataclass(frozen=True)
class CategoricalDim:
    name: str
    choices: tuple

    def __post_init__(self) -> None:
        if not self.choices:
            raise ValueError(f"dimension {self.name}: choices must be non-empty")
        if not isinstance(self.choices, tuple):
            object.__setattr__(self, "choices", tuple(self.choices))


@dataclass(frozen=True)
class IntDim:
    name: str
    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo >= self.hi:
            raise ValueError(f"dimension {self.name}: lo must be < hi")


@dataclass(frozen=True)
class FloatDim:
    name: str
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if self.lo >= self.hi:
            raise ValueError(f"dimension {self.name}: lo must be < hi")


Dimension = Union[CategoricalDim, IntDim, FloatDim]


@dataclass(frozen=True)
class SearchSpace:
    dimensions: tuple[Dimension, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.dimensions, tuple):
            object.__setattr__(self, "dimensions", tuple(self.dimensions))
        names = [d.name for d in self.dimensions]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")
        if not names:
            raise ValueError("search space must have at least one dimension")


@dataclass
class TrialRecord:
    trial_id: int
    params: dict
    objective: Optional[float]
    detail: dict = field(default_factory=dict)
    status: str = "complete"
    rating: Optional[float] = None

    def __post_init__(self) -> None:
        if self.status not in ("complete", "failed"):
            raise ValueError(f"unknown trial status {self.status!r}")
        if self.status == "complete":
            if self.objective is None or not math.isfinite(self.objective):
                raise ValueError("complete trials must carry a finite objective")


@dataclass(frozen=True)
class TpeConfig:
    gamma: float = 0.25
    n_startup: int = 10
    n_candidates: int = 24
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must be in (0, 1), got {self.gamma}")
        if self.n_startup < 1 or self.n_candidates < 1:
            raise ValueError("n_startup and n_candidates must be >= 1")


class _NumericDensity:
    """Kernel mixture over [lo, hi]: one truncated Gaussian per observation
    plus a uniform prior kernel, all equally weighted.

    The bandwidth follows Silverman's rule on the observation spread, floored
    by range/(n+1) so the kernels neither collapse onto the incumbent early
    nor stay too diffuse to refine it late.
    """

    def __init__(self, observations: Sequence[float], lo: float, hi: float):
        self.lo = lo
        self.hi = hi
        self.range = hi - lo
        self.mus = np.asarray(observations, dtype=np.float64)
        n = len(self.mus)
        spread = float(self.mus.max() - self.mus.min()) if n else self.range
        self.bandwidth = max(
            spread * BANDWIDTH_FACTOR * n ** (-1.0 / 5.0) if n else self.range,
            self.range / min(100.0, n + 1.0),
            self.range * BANDWIDTH_FLOOR,
        )
        if n:
            alpha = (lo - self.mus) / self.bandwidth
            beta = (hi - self.mus) / self.bandwidth
            self._cdf_lo = ndtr(alpha)
            self._mass = ndtr(beta) - self._cdf_lo

    def pdf(self, x: float) -> float:
        total = 1.0 / self.range  # uniform prior kernel
        if len(self.mus):
            z = (x - self.mus) / self.bandwidth
            kernels = np.exp(-0.5 * z * z) / (self.bandwidth * math.sqrt(2.0 * math.pi))
            total += float(np.sum(kernels / np.maximum(self._mass, 1e-300)))
        return total / (len(self.mus) + 1)

    def sample(self, rng: np.random.Generator) -> float:
        idx = int(rng.integers(0, len(self.mus) + 1))
        if idx == len(self.mus):
            return float(rng.uniform(self.lo, self.hi))
        u = rng.uniform(self._cdf_lo[idx], self._cdf_lo[idx] + self._mass[idx])
        u = min(max(u, 1e-15), 1.0 - 1e-15)  # keep the probit finite
        return float(self.mus[idx] + self.bandwidth * ndtri(u))


class _CategoricalDensity:
    """Add-one smoothed frequency weights over the choices."""

    def __init__(self, observations: Sequence, choices: tuple):
        self.choices = choices
        counts = np.array([sum(1 for o in observations if o == c) for c in choices], dtype=np.float64)
        self.weights = (counts + 1.0) / (len(observations) + len(choices))

    def pdf(self, value) -> float:
        return float(self.weights[self.choices.index(value)])

    def sample(self, rng: np.random.Generator):
        idx = int(rng.choice(len(self.choices), p=self.weights))
        return self.choices[idx]


def _uniform_sample(dim: Dimension, rng: np.random.Generator):
    if isinstance(dim, CategoricalDim):
        return dim.choices[int(rng.integers(0, len(dim.choices)))]
    if isinstance(dim, IntDim):
        return int(rng.integers(dim.lo, dim.hi + 1))
    return float(rng.uniform(dim.lo, dim.hi))


def _density(dim: Dimension, observations: list):
    if isinstance(dim, CategoricalDim):
        return _CategoricalDensity(observations, dim.choices)
    return _NumericDensity([float(v) for v in observations], float(dim.lo), float(dim.hi))


def _draw(dim: Dimension, density, rng: np.random.Generator):
    value = density.sample(rng)
    if isinstance(dim, IntDim):
        return int(np.clip(round(value), dim.lo, dim.hi))
    if isinstance(dim, FloatDim):
        return float(np.clip(value, dim.lo, dim.hi))
    return value


def suggest(history: Sequence[TrialRecord], space: SearchSpace, config: TpeConfig) -> dict:
    """Propose the next parameter point.

    Before ``n_startup`` completed trials this is a uniform draw; afterwards
    completed trials split into good/bad by objective quantile and the
    candidate maximizing the density ratio l(x)/g(x) wins. Failed trials never
    influence the outcome.
    """
    complete = [t for t in history if t.status == "complete"]
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, len(complete)]))
    if len(complete) < config.n_startup:
        return {dim.name: _uniform_sample(dim, rng) for dim in space.dimensions}

    ranked = sorted(complete, key=lambda t: t.objective, reverse=True)
    n_good = math.ceil(config.gamma * len(ranked))
    good, bad = ranked[:n_good], ranked[n_good:]

    densities = []
    for dim in space.dimensions:
        l_density = _density(dim, [t.params[dim.name] for t in good])
        g_density = _density(dim, [t.params[dim.name] for t in bad])
        densities.append((dim, l_density, g_density))

    best_params: dict = {}
    best_score = -math.inf
    for _ in range(config.n_candidates):
        candidate = {}
        score = 0.0
        for dim, l_density, g_density in densities:
            value = _draw(dim, l_density, rng)
            candidate[dim.name] = value
            probe = float(value) if not isinstance(dim, CategoricalDim) else value
            score += math.log(max(l_density.pdf(probe), 1e-300))
            score -= math.log(max(g_density.pdf(probe), 1e-300))
        if score > best_score:
            best_score = score
            best_params = candidate
    return best_params


Objective = Callable[[dict], Union[float, tuple]]


def run_study(
    objective: Objective,
    space: SearchSpace,
    n_trials: int,
    config: TpeConfig = TpeConfig(),
    study_path: str | Path | None = None,
    history: Optional[list[TrialRecord]] = None,
) -> tuple[TrialRecord, list[TrialRecord]]:
    """Sequential suggest -> evaluate -> record loop, optionally persisted.

    The objective may return a float or a (float, detail-dict) pair; raising
    marks the trial failed and keeps it out of the density fit. An existing
    study file is replayed so interrupted studies resume where they stopped.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    if history is None:
        history = []
        if study_path is not None and Path(study_path).exists():
            history = load_study(study_path)
    for trial_id in range(len(history), n_trials):
        params = suggest(history, space, config)
        detail: dict = {}
        try:
            outcome = objective(params)
            if isinstance(outcome, tuple):
                value, detail = float(outcome[0]), dict(outcome[1])
            else:
                value = float(outcome)
            record = TrialRecord(trial_id=trial_id, params=params, objective=value, detail=detail)
        except Exception as exc:  # objective failures are data, not crashes
            record = TrialRecord(
                trial_id=trial_id,
                params=params,
                objective=None,
                detail={"error": f"{type(exc).__name__}: {exc}"},
                status="failed",
            )
        history.append(record)
        if study_path is not None:
            append_trial(study_path, record)
    complete = [t for t in history if t.status == "complete"]
    if not complete:
        raise RuntimeError(f"all {len(history)} trials failed")
    best = max(complete, key=lambda t: t.objective)
    return best, history


def good_trial_commonality(history: Sequence[TrialRecord], rating_threshold: float) -> dict:
    """Summarize what the well-rated trials have in common, per dimension.

    Categorical and integer dimensions report the mode (ties flagged),
    continuous dimensions the median.
    """
    qualifying = [t for t in history if t.rating is not None and t.rating >= rating_threshold]
    if not qualifying:
        raise ValueError(f"no trials with rating >= {rating_threshold}")
    names = sorted({name for t in qualifying for name in t.params})
    summary: dict = {"n_trials": len(qualifying), "dimensions": {}}
    for name in names:
        values = [t.params[name] for t in qualifying if name in t.params]
        if all(isinstance(v, float) and not isinstance(v, bool) for v in values):
            summary["dimensions"][name] = {
                "kind": "median",
                "value": float(statistics.median(values)),
                "count": len(values),
            }
            continue
        counts: dict = {}
        for v in values:
            counts[v] = counts.get(v, 0) + 1
        top = max(counts.values())
        modal = sorted([v for v, c in counts.items() if c == top], key=repr)
        summary["dimensions"][name] = {
            "kind": "mode",
            "values": modal,
            "count": top,
            "tie": len(modal) > 1,
        }
    return summary


def trial_to_dict(record: TrialRecord) -> dict:
    return {
        "trial_id": record.trial_id,
        "params": record.params,
        "objective": record.objective,
        "detail": record.detail,
        "status": record.status,
        "rating": record.rating,
    }


def trial_from_dict(payload: dict) -> TrialRecord:
    return TrialRecord(
        trial_id=int(payload["trial_id"]),
        params=dict(payload["params"]),
        objective=payload.get("objective"),
        detail=dict(payload.get("detail", {})),
        status=str(payload.get("status", "complete")),
        rating=payload.get("rating"),
    )


def append_trial(path: str | Path, record: TrialRecord) -> None:
    with Path(path).open("a", encoding="utf-8") as handle:
        handle.write(json.dumps(trial_to_dict(record), sort_keys=True) + "\n")


def load_study(path: str | Path) -> list[TrialRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                records.append(trial_from_dict(json.loads(line)))
    return records


def default_search_space(template_ids: Sequence[str] = ("T1", "T2", "T3", "T4")) -> SearchSpace:
    """The stock prompt-optimization space; sample <= pool is clamped downstream."""
    return SearchSpace(
        dimensions=(
            CategoricalDim("template", tuple(template_ids)),
            IntDim("n_titles", 0, 8),
            IntDim("n_abstract_words", 0, 10),
            IntDim("top_words_pool", 4, 20),
            IntDim("top_words_sample", 1, 20),
            CategoricalDim("include_keywords", (False, True)),
            CategoricalDim("include_ngrams", (False, True)),
            CategoricalDim("order_by_centroid", (False, True)),
            FloatDim("temperature", 0.0, 1.5),
            FloatDim("top_p", 0.1, 1.0),
        )
    )
