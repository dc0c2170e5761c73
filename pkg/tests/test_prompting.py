import json

import pytest

from topictag.corpus import CorpusBundle, CorpusVectorizer, Document
from topictag.factorization import nmf_multiplicative
from topictag.gateway import GenerationParams, MockGateway
from topictag.prompting import (
    DEFAULT_SELECTION,
    FeatureSelection,
    PromptTemplate,
    builtin_templates,
    extract_answer,
    load_templates,
    render_prompt,
    template_from_dict,
    template_to_dict,
)
from topictag.topics import build_all_clusters

# The shipped default instruction block, frozen byte-for-byte.
T1_TEXT = (
    "You are a document understander. Using your expertise, label this topic "
    "cluster by thinking step-by-step:\n"
    "Step 1: Review the document information and make four guesses on the topic label.\n"
    "Step 2: Review the top words and refine each response. \n"
    "Step 3: Choose the best answer from your guesses and format it like so: <<[ANSWER]>>.\n"
    "Here is the Document Information:"
)


def big_cluster():
    pools = {
        0: ["graph", "embedding", "node", "edge", "walk", "vertex", "spectral", "link",
            "adjacency", "convolution"],
        1: ["ontology", "schema", "axiom", "reasoning", "concept", "mapping", "alignment",
            "hierarchy", "curation", "inference"],
    }
    docs = []
    for i in range(12):
        topic = i % 2
        words = pools[topic]
        abstract = " ".join(words[(i + j) % len(words)] for j in range(18))
        docs.append(
            Document(
                id=f"d{i:02d}",
                title=f"{words[i % len(words)]} {words[(i + 1) % len(words)]} study {i}",
                abstract=abstract,
                keywords=(words[0], words[1]),
            )
        )
    bundle = CorpusBundle(documents=tuple(docs))
    vectorizer = CorpusVectorizer(min_df=1, max_df_fraction=1.0)
    tfidf = vectorizer.fit_transform(bundle)
    factorization = nmf_multiplicative(tfidf, 2, max_iters=400, seed=3)
    clusters = build_all_clusters(factorization, bundle, vectorizer.vocabulary_)
    return max(clusters, key=len)


class TestBuiltinTemplates:
    def test_t1_byte_equal(self):
        t1 = builtin_templates()[0]
        assert t1.full_text() == T1_TEXT

    def test_every_template_instructs_marker(self):
        for template in builtin_templates():
            marker_steps = [s for s in template.step_texts if "<<" in s]
            assert len(marker_steps) == 1

    def test_ids_unique(self):
        ids = [t.id for t in builtin_templates()]
        assert len(set(ids)) == len(ids)

    def test_template_without_marker_rejected(self):
        with pytest.raises(ValueError, match="<<"):
            PromptTemplate(id="bad", system_text="sys", step_texts=("no marker here",))

    def test_serialization_roundtrip(self, tmp_path):
        for template in builtin_templates():
            clone = template_from_dict(template_to_dict(template))
            assert clone == template
        for template in builtin_templates():
            (tmp_path / f"{template.id}.json").write_text(
                json.dumps(template_to_dict(template))
            )
        loaded = load_templates(tmp_path)
        assert [t.id for t in loaded] == ["T1", "T2", "T3", "T4"]


class TestFeatureSelection:
    def test_sample_beyond_pool_rejected(self):
        with pytest.raises(ValueError, match="top_words_sample"):
            FeatureSelection(top_words_pool=4, top_words_sample=5)

    def test_negative_counts_rejected(self):
        with pytest.raises(ValueError, match="n_titles"):
            FeatureSelection(n_titles=-1)

    def test_shipped_defaults(self):
        assert DEFAULT_SELECTION.n_abstract_words == 3
        assert DEFAULT_SELECTION.n_titles == 4
        assert DEFAULT_SELECTION.top_words_pool == 8
        assert DEFAULT_SELECTION.top_words_sample == 5


class TestRenderPrompt:
    def test_zero_selection_yields_template_only(self):
        cluster = big_cluster()
        selection = FeatureSelection(
            n_titles=0, n_abstract_words=0, top_words_pool=0, top_words_sample=0
        )
        template = builtin_templates()[0]
        prompt = render_prompt(template, cluster, selection)
        assert prompt.user == "\n".join([*template.step_texts, "Here is the Document Information:"])
        assert prompt.manifest["titles"] == []
        assert prompt.manifest["top_words"] == []

    def test_default_selection_injects_3_4_5(self):
        cluster = big_cluster()
        prompt = render_prompt(builtin_templates()[0], cluster, DEFAULT_SELECTION)
        assert len(prompt.manifest["abstract_words"]) == 3
        assert len(prompt.manifest["titles"]) == 4
        assert len(prompt.manifest["top_words"]) == 5
        assert prompt.manifest["clamped"] == {}

    def test_deterministic_given_seed(self):
        cluster = big_cluster()
        selection = FeatureSelection(seed=99, order_by_centroid=False)
        a = render_prompt(builtin_templates()[0], cluster, selection)
        b = render_prompt(builtin_templates()[0], cluster, selection)
        assert a == b

    def test_clamping_recorded_without_duplicates(self):
        cluster = big_cluster()
        selection = FeatureSelection(
            n_titles=50, n_abstract_words=50, top_words_pool=500, top_words_sample=500
        )
        prompt = render_prompt(builtin_templates()[0], cluster, selection)
        assert "titles" in prompt.manifest["clamped"]
        for section in ("titles", "abstract_words", "top_words"):
            items = prompt.manifest[section]
            assert len(items) == len(set(items))

    def test_manifest_items_come_from_cluster(self):
        cluster = big_cluster()
        prompt = render_prompt(builtin_templates()[0], cluster, DEFAULT_SELECTION)
        titles = set(cluster.top_titles)
        tokens = {t for t, _ in cluster.top_tokens}
        assert set(prompt.manifest["titles"]) <= titles
        assert set(prompt.manifest["top_words"]) <= tokens

    def test_keywords_forced_by_template(self):
        cluster = big_cluster()
        selection = FeatureSelection(include_keywords=False)
        t4 = builtin_templates()[3]
        prompt = render_prompt(t4, cluster, selection)
        assert prompt.manifest["keywords"]
        assert "Keywords: " in prompt.user

    def test_token_weights_rendering(self):
        cluster = big_cluster()
        selection = FeatureSelection(include_token_weights=True)
        prompt = render_prompt(builtin_templates()[0], cluster, selection)
        assert "(" in prompt.user.split("Top words: ")[1]
        # manifest keeps the raw tokens
        assert all("(" not in w for w in prompt.manifest["top_words"])

    def test_empty_cluster_rejected(self):
        cluster = big_cluster()
        empty = cluster.__class__(
            topic_id=cluster.topic_id, members=(), top_tokens=(), top_ngrams=()
        )
        with pytest.raises(ValueError, match="no members"):
            render_prompt(builtin_templates()[0], empty, DEFAULT_SELECTION)


class TestExtractAnswer:
    def test_marker(self):
        result = extract_answer("Step 3: <<Graph Embeddings>>")
        assert (result.label, result.status) == ("Graph Embeddings", "marker")

    def test_last_marker_wins(self):
        text = "guess A <<X>> refining further... final <<Ontology Construction>>"
        result = extract_answer(text)
        assert (result.label, result.status) == ("Ontology Construction", "marker")

    def test_fallback_last_line(self):
        result = extract_answer("I think\nthe topic is NLP")
        assert (result.label, result.status) == ("the topic is NLP", "fallback_last_line")

    def test_empty_input_fails(self):
        result = extract_answer("   \n  ")
        assert result.status == "failed"

    def test_multiline_marker(self):
        result = extract_answer("<<Knowledge\nGraphs>> trailing")
        assert result.status == "marker"
        assert result.label == "Knowledge\nGraphs"


class TestRoundTrip:
    def test_render_extract_with_mock(self):
        cluster = big_cluster()
        prompt = render_prompt(builtin_templates()[0], cluster, DEFAULT_SELECTION)
        completion = MockGateway().complete(prompt, GenerationParams(model_id="m"))
        result = extract_answer(completion.text)
        assert result.status == "marker"
        assert result.label == " ".join(prompt.manifest["top_words"][:2])
