"""Non-negative matrix factorization with multiplicative updates and automatic rank selection."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.metrics import silhouette_samples

from .validation import as_dense_matrix, check_non_negative

EPS = 1e-12
DEFAULT_MAX_ITERS = 300
DEFAULT_TOL = 1e-9
DEFAULT_NOISE_SCALE = 0.03
DEFAULT_STABILITY_THRESHOLD = 0.7


@dataclass(frozen=True)
class Factorization:
    """One factorization X ~ W @ H with everything needed to reproduce it."""

    W: np.ndarray
    H: np.ndarray
    k: int
    relative_error: float
    seed: int
    error_trace: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if np.any(self.W < 0) or np.any(self.H < 0):
            raise ValueError("W and H must be non-negative")
        if self.W.shape[1] != self.k or self.H.shape[0] != self.k:
            raise ValueError("W/H dimensions inconsistent with k")
        if not np.isfinite(self.relative_error):
            raise ValueError("relative_error must be finite")


@dataclass(frozen=True)
class RankRow:
    k: int
    stability: float
    mean_relative_error: float


@dataclass(frozen=True)
class RankSelectionReport:
    """Stability and error per candidate rank, plus the selection rule trace."""

    rows: tuple[RankRow, ...]
    chosen_k: int
    trace: tuple[str, ...]

    def __post_init__(self) -> None:
        ks = [row.k for row in self.rows]
        if ks != sorted(ks):
            raise ValueError("rows must be sorted ascending by k")
        if self.chosen_k not in ks:
            raise ValueError("chosen_k must lie in the scanned range")


def relative_error(X, W: np.ndarray, H: np.ndarray) -> float:
    """Frobenius residual ||X - WH||_F / ||X||_F."""
    X = as_dense_matrix(X)
    if W.shape[0] != X.shape[0] or H.shape[1] != X.shape[1] or W.shape[1] != H.shape[0]:
        raise ValueError(
            f"dimension mismatch: X {X.shape}, W {W.shape}, H {H.shape}"
        )
    x_norm = np.linalg.norm(X)
    if x_norm == 0.0:
        raise ValueError("||X||_F is zero; relative error undefined")
    return float(np.linalg.norm(X - W @ H) / x_norm)


def _mu_iterate(
    X: np.ndarray,
    W: np.ndarray,
    H: np.ndarray,
    max_iters: int,
    tol: float,
    x_norm_sq: float,
) -> list[float]:
    """Run multiplicative updates in place; returns the per-iteration relative errors.

    The residual norm uses ||X - WH||^2 = ||X||^2 - 2<X, WH> + ||WH||^2 so no
    m-by-n residual is ever materialized.
    """
    trace: list[float] = []
    prev = np.inf
    for _ in range(max_iters):
        W *= (X @ H.T) / (W @ (H @ H.T) + EPS)
        WtX = W.T @ X
        WtW = W.T @ W
        H *= WtX / (WtW @ H + EPS)
        assert np.all(W >= 0) and np.all(H >= 0)
        cross = float(np.sum(WtX * H))
        product_sq = float(np.sum((W.T @ W) * (H @ H.T)))
        err = math.sqrt(max(x_norm_sq - 2.0 * cross + product_sq, 0.0) / x_norm_sq)
        trace.append(err)
        if prev - err < tol:
            break
        prev = err
    return trace


def _validated_input(X, k: int, max_iters: int) -> np.ndarray:
    X = check_non_negative(as_dense_matrix(X))
    m, n = X.shape
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k must be in [1, {min(m, n)}], got {k}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    if not np.any(X > 0):
        raise ValueError("X is all-zero; nothing to factorize")
    return X


def nmf_multiplicative(
    X,
    k: int,
    max_iters: int = DEFAULT_MAX_ITERS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> Factorization:
    """Factorize X into non-negative W (m x k) and H (k x n) by multiplicative updates.

    The updates minimize the Frobenius objective:
        W <- W * (X H^T) / (W H H^T + eps)
        H <- H * (W^T X) / (W^T W H + eps)
    Iteration stops at ``max_iters`` or once the relative-error improvement
    between consecutive iterations drops below ``tol``. Deterministic given
    ``seed``.
    """
    X = _validated_input(X, k, max_iters)
    rng = np.random.default_rng(seed)
    W = rng.random((X.shape[0], k))
    H = rng.random((k, X.shape[1]))
    trace = _mu_iterate(X, W, H, max_iters, tol, float(np.sum(X * X)))
    return Factorization(
        W=W, H=H, k=k, relative_error=trace[-1], seed=seed, error_trace=tuple(trace)
    )


def _nmf_restarted(
    X: np.ndarray,
    k: int,
    seed: int,
    n_restarts: int,
    probe_iters: int,
    refine_iters: int,
    tol: float,
) -> Factorization:
    """Best-of-restarts NMF: short probe runs pick the basin, one long run refines it.

    Local minima of the multiplicative updates vary enough across random
    initializations to wreck cross-resample factor matching, so rank scanning
    needs the restart insurance.
    """
    x_norm_sq = float(np.sum(X * X))
    best: tuple[float, np.ndarray, np.ndarray, list[float]] | None = None
    for restart in range(n_restarts):
        rng = np.random.default_rng(np.random.SeedSequence([seed, restart]))
        W = rng.random((X.shape[0], k))
        H = rng.random((k, X.shape[1]))
        trace = _mu_iterate(X, W, H, probe_iters, tol, x_norm_sq)
        if best is None or trace[-1] < best[0]:
            best = (trace[-1], W, H, trace)
    _, W, H, trace = best
    trace = trace + _mu_iterate(X, W, H, refine_iters, tol, x_norm_sq)
    return Factorization(
        W=W, H=H, k=k, relative_error=trace[-1], seed=seed, error_trace=tuple(trace)
    )


def _unit_columns(M: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(M, axis=0)
    safe = np.where(norms > 0.0, norms, 1.0)
    return M / safe


def _greedy_cosine_match(reference: np.ndarray, candidate: np.ndarray) -> np.ndarray:
    """Assign each candidate column to a distinct reference column, best cosine first."""
    k = reference.shape[1]
    sim = _unit_columns(reference).T @ _unit_columns(candidate)
    assignment = np.full(k, -1, dtype=np.int64)
    free_ref = np.ones(k, dtype=bool)
    free_cand = np.ones(k, dtype=bool)
    for _ in range(k):
        masked = np.where(np.outer(free_ref, free_cand), sim, -np.inf)
        i, j = np.unravel_index(int(np.argmax(masked)), masked.shape)
        assignment[j] = i
        free_ref[i] = False
        free_cand[j] = False
    return assignment


def _stability(pooled: np.ndarray, labels: np.ndarray, k: int) -> float:
    """Mean cosine silhouette over pooled W columns; k == 1 has no second cluster,
    so stability falls back to one minus the mean pairwise cosine distance."""
    points = pooled.T
    if k == 1:
        unit = _unit_columns(pooled)
        sims = unit.T @ unit
        idx = np.triu_indices(sims.shape[0], k=1)
        return float(1.0 - np.mean(1.0 - sims[idx]))
    return float(np.mean(silhouette_samples(points, labels, metric="cosine")))


def _sub_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1)[0])


def nmfk_select(
    X,
    k_min: int,
    k_max: int,
    n_resamples: int = 4,
    noise_scale: float = DEFAULT_NOISE_SCALE,
    seed: int = 0,
    stability_threshold: float = DEFAULT_STABILITY_THRESHOLD,
    max_iters: int = 1200,
    tol: float = DEFAULT_TOL,
    n_restarts: int = 8,
    probe_iters: int = 300,
) -> RankSelectionReport:
    """Scan ranks and pick the number of topics by factor stability under resampling.

    For each k, NMF runs on ``n_resamples`` copies of X perturbed by element-wise
    multiplicative uniform noise in [1 - noise_scale, 1 + noise_scale]. W columns
    are pooled across resamples, grouped by greedy cosine matching against the
    first resample, and scored by mean cosine silhouette. The chosen k is the
    largest one whose stability clears ``stability_threshold`` while improving
    on the error of k_min; if none qualifies, the most stable k wins.
    """
    X = check_non_negative(as_dense_matrix(X))
    m, n = X.shape
    if not 1 <= k_min <= k_max <= min(m, n):
        raise ValueError(
            f"rank range must satisfy 1 <= k_min <= k_max <= {min(m, n)}, "
            f"got [{k_min}, {k_max}]"
        )
    if n_resamples < 2:
        raise ValueError(f"n_resamples must be >= 2, got {n_resamples}")
    if np.linalg.norm(X) == 0.0:
        raise ValueError("X is all-zero; rank selection undefined")

    rows: list[RankRow] = []
    trace: list[str] = []
    for k in range(k_min, k_max + 1):
        factors: list[Factorization] = []
        for r in range(n_resamples):
            noise_rng = np.random.default_rng(np.random.SeedSequence([seed, k, r]))
            perturbed = X * noise_rng.uniform(1.0 - noise_scale, 1.0 + noise_scale, X.shape)
            factors.append(
                _nmf_restarted(
                    perturbed,
                    k,
                    seed=_sub_seed(seed, k, r),
                    n_restarts=n_restarts,
                    probe_iters=probe_iters,
                    refine_iters=max_iters,
                    tol=tol,
                )
            )
        reference = factors[0].W
        pooled_cols: list[np.ndarray] = []
        labels: list[np.ndarray] = []
        for f in factors:
            pooled_cols.append(f.W)
            labels.append(_greedy_cosine_match(reference, f.W))
        pooled = np.concatenate(pooled_cols, axis=1)
        label_arr = np.concatenate(labels)
        stability = _stability(pooled, label_arr, k)
        mean_err = float(np.mean([f.relative_error for f in factors]))
        rows.append(RankRow(k=k, stability=stability, mean_relative_error=mean_err))
        trace.append(f"k={k}: stability={stability:.4f}, mean_relative_error={mean_err:.6f}")

    baseline = rows[0].mean_relative_error
    qualifying = [
        row.k
        for row in rows
        if row.stability >= stability_threshold
        and (row.k == k_min or row.mean_relative_error < baseline)
    ]
    if qualifying:
        chosen = max(qualifying)
        trace.append(
            f"chosen_k={chosen}: largest k with stability >= {stability_threshold} "
            f"and error below k_min baseline {baseline:.6f}"
        )
    else:
        best = max(rows, key=lambda row: row.stability)
        chosen = best.k
        trace.append(
            f"chosen_k={chosen}: no k met stability >= {stability_threshold}; "
            "fell back to argmax stability"
        )
    return RankSelectionReport(rows=tuple(rows), chosen_k=chosen, trace=tuple(trace))


def save_factorization(factorization: Factorization, path: str | Path) -> None:
    """Checkpoint W and H as dense row-major JSON (desk-scale sizes only)."""
    payload = {
        "W": factorization.W.tolist(),
        "H": factorization.H.tolist(),
        "k": factorization.k,
        "seed": factorization.seed,
        "relative_error": factorization.relative_error,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_factorization(path: str | Path) -> Factorization:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return Factorization(
        W=np.asarray(payload["W"], dtype=np.float64),
        H=np.asarray(payload["H"], dtype=np.float64),
        k=int(payload["k"]),
        relative_error=float(payload["relative_error"]),
        seed=int(payload["seed"]),
    )


class MultiplicativeNmf(BaseEstimator, TransformerMixin):
    """Sklearn-style estimator around :func:`nmf_multiplicative`.

    ``fit`` learns W (token-to-topic weights); ``transform`` returns document
    coordinates H for a matrix with the same row space, re-solved with W held
    fixed; ``predict`` assigns each document to its argmax topic.
    """

    def __init__(
        self,
        n_topics: int = 2,
        max_iters: int = DEFAULT_MAX_ITERS,
        tol: float = DEFAULT_TOL,
        seed: int = 0,
    ):
        self.n_topics = n_topics
        self.max_iters = max_iters
        self.tol = tol
        self.seed = seed

    def fit(self, X, y=None):
        self.factorization_ = nmf_multiplicative(
            X, self.n_topics, max_iters=self.max_iters, tol=self.tol, seed=self.seed
        )
        self.W_ = self.factorization_.W
        self.H_ = self.factorization_.H
        self.relative_error_ = self.factorization_.relative_error
        return self

    def transform(self, X) -> np.ndarray:
        self._check_fitted()
        X = check_non_negative(as_dense_matrix(X))
        if X.shape[0] != self.W_.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows, expected {self.W_.shape[0]}")
        rng = np.random.default_rng(self.seed)
        H = rng.random((self.n_topics, X.shape[1]))
        WtW = self.W_.T @ self.W_
        WtX = self.W_.T @ X
        for _ in range(self.max_iters):
            H *= WtX / (WtW @ H + EPS)
        return H

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.transform(X), axis=0)

    def _check_fitted(self) -> None:
        if not hasattr(self, "factorization_"):
            raise RuntimeError("MultiplicativeNmf is not fitted; call fit first")


class RankSelector(BaseEstimator):
    """Sklearn-style wrapper around :func:`nmfk_select`; exposes chosen_k_ and report_."""

    def __init__(
        self,
        k_min: int = 2,
        k_max: int = 10,
        n_resamples: int = 4,
        noise_scale: float = DEFAULT_NOISE_SCALE,
        seed: int = 0,
        stability_threshold: float = DEFAULT_STABILITY_THRESHOLD,
        max_iters: int = DEFAULT_MAX_ITERS,
        tol: float = DEFAULT_TOL,
    ):
        self.k_min = k_min
        self.k_max = k_max
        self.n_resamples = n_resamples
        self.noise_scale = noise_scale
        self.seed = seed
        self.stability_threshold = stability_threshold
        self.max_iters = max_iters
        self.tol = tol

    def fit(self, X, y=None):
        self.report_ = nmfk_select(
            X,
            self.k_min,
            self.k_max,
            n_resamples=self.n_resamples,
            noise_scale=self.noise_scale,
            seed=self.seed,
            stability_threshold=self.stability_threshold,
            max_iters=self.max_iters,
            tol=self.tol,
        )
        self.chosen_k_ = self.report_.chosen_k
        return self
