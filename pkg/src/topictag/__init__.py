"""Topic modeling via NMF with automatic rank selection, plus LLM topic labeling."""

from .corpus import (
    CorpusBundle,
    CorpusVectorizer,
    Document,
    TfidfMatrix,
    Vocabulary,
    build_tfidf,
    build_vocabulary,
    ingest,
    tokenize,
)
from .factorization import (
    Factorization,
    MultiplicativeNmf,
    RankSelectionReport,
    RankSelector,
    nmf_multiplicative,
    nmfk_select,
    relative_error,
)
from .gateway import ChatGateway, Completion, GenerationParams, MockGateway, mock_complete
from .metrics import (
    AgreementReport,
    HashEmbedder,
    ScoreReport,
    bert_score,
    bleu,
    cohen_kappa,
    discrimination,
    pearson_r2,
    rouge_l,
    score_label,
)
from .optimizer import (
    CategoricalDim,
    FloatDim,
    IntDim,
    SearchSpace,
    TpeConfig,
    TrialRecord,
    default_search_space,
    good_trial_commonality,
    run_study,
    suggest,
)
from .prompting import (
    DEFAULT_SELECTION,
    ExtractionResult,
    FeatureSelection,
    PromptTemplate,
    RenderedPrompt,
    builtin_templates,
    extract_answer,
    render_prompt,
)
from .rating import Rating, RatingItem, RatingStore
from .topics import (
    ClusterLimits,
    TopicAssignment,
    TopicCluster,
    assign_topics,
    build_cluster,
    centroid_ranking,
    extract_ngrams,
    topic_word_distribution,
)

__version__ = "0.1.0"
