import numpy as np
import pytest

from topictag.optimizer import (
    CategoricalDim,
    FloatDim,
    IntDim,
    SearchSpace,
    TpeConfig,
    TrialRecord,
    append_trial,
    default_search_space,
    good_trial_commonality,
    load_study,
    run_study,
    suggest,
    trial_from_dict,
    trial_to_dict,
)

MIXED_SPACE = SearchSpace(
    dimensions=(
        CategoricalDim("template", ("T1", "T2", "T3")),
        IntDim("n_titles", 0, 8),
        FloatDim("temperature", 0.0, 1.5),
    )
)


def in_bounds(params):
    return (
        params["template"] in ("T1", "T2", "T3")
        and 0 <= params["n_titles"] <= 8
        and 0.0 <= params["temperature"] <= 1.5
    )


class TestSearchSpace:
    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError, match="unique"):
            SearchSpace(dimensions=(IntDim("x", 0, 1), FloatDim("x", 0.0, 1.0)))

    def test_bad_bounds_rejected(self):
        with pytest.raises(ValueError):
            IntDim("x", 3, 3)
        with pytest.raises(ValueError):
            FloatDim("x", 1.0, 0.5)
        with pytest.raises(ValueError):
            CategoricalDim("x", ())

    def test_default_space_dimensions(self):
        names = [d.name for d in default_search_space().dimensions]
        assert names == [
            "template", "n_titles", "n_abstract_words", "top_words_pool",
            "top_words_sample", "include_keywords", "include_ngrams",
            "order_by_centroid", "temperature", "top_p",
        ]


class TestSuggest:
    def test_empty_history_respects_bounds(self):
        for seed in range(10):
            params = suggest([], MIXED_SPACE, TpeConfig(seed=seed))
            assert in_bounds(params)

    def test_deterministic_given_seed_and_history(self):
        history = [
            TrialRecord(trial_id=i, params={"template": "T1", "n_titles": i % 9, "temperature": 0.5}, objective=float(i))
            for i in range(15)
        ]
        config = TpeConfig(seed=3)
        assert suggest(history, MIXED_SPACE, config) == suggest(history, MIXED_SPACE, config)

    def test_good_categorical_dominates(self):
        # objective is 1 exactly when template == T1; after 20 mixed trials the
        # suggested template should be T1 most of the time
        rng = np.random.default_rng(0)
        history = []
        for i in range(20):
            template = ("T1", "T2", "T3")[i % 3]
            history.append(
                TrialRecord(
                    trial_id=i,
                    params={
                        "template": template,
                        "n_titles": int(rng.integers(0, 9)),
                        "temperature": float(rng.uniform(0, 1.5)),
                    },
                    objective=1.0 if template == "T1" else 0.0,
                )
            )
        hits = 0
        for seed in range(50):
            params = suggest(history, MIXED_SPACE, TpeConfig(seed=seed))
            assert in_bounds(params)
            hits += params["template"] == "T1"
        assert hits >= 40

    def test_failed_trials_never_change_suggestions(self):
        history = [
            TrialRecord(trial_id=i, params={"template": "T2", "n_titles": 4, "temperature": 0.7}, objective=float(i % 5))
            for i in range(12)
        ]
        config = TpeConfig(seed=11)
        baseline = suggest(history, MIXED_SPACE, config)
        with_failures = history + [
            TrialRecord(trial_id=99, params={"template": "T3", "n_titles": 8, "temperature": 1.4}, objective=None, status="failed")
        ]
        assert suggest(with_failures, MIXED_SPACE, config) == baseline

    def test_bounds_after_startup(self):
        rng = np.random.default_rng(1)
        history = [
            TrialRecord(
                trial_id=i,
                params={
                    "template": "T1",
                    "n_titles": int(rng.integers(0, 9)),
                    "temperature": float(rng.uniform(0, 1.5)),
                },
                objective=float(rng.uniform()),
            )
            for i in range(30)
        ]
        for seed in range(10):
            assert in_bounds(suggest(history, MIXED_SPACE, TpeConfig(seed=seed)))


def quadratic_best(n_trials, seed, uniform_only=False):
    space = SearchSpace(dimensions=(FloatDim("x", 0.0, 1.0),))
    config = TpeConfig(seed=seed, n_startup=10 if not uniform_only else n_trials + 1)
    best, _ = run_study(lambda p: -((p["x"] - 0.3) ** 2), space, n_trials, config)
    return best


class TestRunStudy:
    def test_quadratic_optimum_found(self):
        best = quadratic_best(100, seed=0)
        assert abs(best.params["x"] - 0.3) <= 0.05

    def test_tpe_beats_uniform_in_median(self):
        tpe = [quadratic_best(100, seed=s).objective for s in range(20)]
        uniform = [quadratic_best(100, seed=s, uniform_only=True).objective for s in range(20)]
        assert np.median(tpe) >= np.median(uniform)

    def test_mixed_space_conditional_optimum(self):
        space = SearchSpace(
            dimensions=(CategoricalDim("template", ("A", "B")), FloatDim("t", 0.0, 1.0))
        )

        def objective(params):
            return (params["template"] == "B") * (1.0 - abs(params["t"] - 0.5))

        best, history = run_study(objective, space, 100, TpeConfig(seed=5))
        assert best.params["template"] == "B"
        assert abs(best.params["t"] - 0.5) <= 0.1

    def test_single_trial_study(self):
        best, history = run_study(lambda p: 1.0, SearchSpace((FloatDim("x", 0, 1),)), 1, TpeConfig(seed=0))
        assert best.trial_id == 0
        assert len(history) == 1

    def test_failed_objectives_recorded_and_excluded(self):
        calls = {"n": 0}

        def objective(params):
            calls["n"] += 1
            if calls["n"] % 2:
                raise RuntimeError("boom")
            return float(calls["n"])

        best, history = run_study(objective, SearchSpace((FloatDim("x", 0, 1),)), 10, TpeConfig(seed=2))
        statuses = [t.status for t in history]
        assert statuses.count("failed") == 5
        assert best.status == "complete"

    def test_all_failed_raises(self):
        def objective(params):
            raise RuntimeError("always")

        with pytest.raises(RuntimeError, match="failed"):
            run_study(objective, SearchSpace((FloatDim("x", 0, 1),)), 3, TpeConfig(seed=0))

    def test_study_resumes_from_file(self, tmp_path):
        path = tmp_path / "study.jsonl"
        space = SearchSpace((FloatDim("x", 0.0, 1.0),))
        run_study(lambda p: p["x"], space, 5, TpeConfig(seed=0), study_path=path)
        first = load_study(path)
        assert len(first) == 5
        # resume to 8 trials: earlier records must be untouched
        run_study(lambda p: p["x"], space, 8, TpeConfig(seed=0), study_path=path)
        resumed = load_study(path)
        assert len(resumed) == 8
        assert [trial_to_dict(t) for t in resumed[:5]] == [trial_to_dict(t) for t in first]

    def test_trial_record_roundtrip(self, tmp_path):
        record = TrialRecord(trial_id=3, params={"x": 0.5}, objective=0.7, detail={"a": 1})
        path = tmp_path / "s.jsonl"
        append_trial(path, record)
        assert trial_to_dict(load_study(path)[0]) == trial_to_dict(record)
        assert trial_from_dict(trial_to_dict(record)).params == {"x": 0.5}


class TestCommonality:
    def make_history(self):
        rows = [
            ({"template": "T1", "n_titles": 3, "temperature": 0.3}, 2.8),
            ({"template": "T1", "n_titles": 3, "temperature": 0.7}, 2.9),
            ({"template": "T1", "n_titles": 5, "temperature": 0.9}, 2.6),
            ({"template": "T2", "n_titles": 2, "temperature": 1.2}, 1.0),
        ]
        return [
            TrialRecord(trial_id=i, params=params, objective=0.5, rating=rating)
            for i, (params, rating) in enumerate(rows)
        ]

    def test_mode_and_median(self):
        summary = good_trial_commonality(self.make_history(), rating_threshold=2.5)
        dims = summary["dimensions"]
        assert dims["template"] == {"kind": "mode", "values": ["T1"], "count": 3, "tie": False}
        assert dims["n_titles"]["values"] == [3]
        assert dims["temperature"] == {"kind": "median", "value": 0.7, "count": 3}

    def test_tie_flagged(self):
        history = [
            TrialRecord(trial_id=0, params={"template": "T1"}, objective=0.1, rating=3),
            TrialRecord(trial_id=1, params={"template": "T2"}, objective=0.1, rating=3),
        ]
        summary = good_trial_commonality(history, rating_threshold=2)
        assert summary["dimensions"]["template"]["tie"] is True
        assert summary["dimensions"]["template"]["values"] == ["T1", "T2"]

    def test_no_qualifying_trials(self):
        with pytest.raises(ValueError, match="no trials"):
            good_trial_commonality(self.make_history(), rating_threshold=5)
