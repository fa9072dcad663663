"""Sleep information extraction from clinical note text.

The package covers the full batch path: merging note lines into
documents, near-duplicate removal, keyword retrieval, rule-based concept
extraction with assertion handling, document-level labeling, TF-IDF
classifier baselines, and evaluation with agreement statistics. The
`sleepnotes` command exposes each stage and a chained pipeline.
"""

from .corpus import (
    ClinicalDocument,
    RawNoteLine,
    RemovedPair,
    cosine_similarity,
    deduplicate,
    merge_note_lines,
    term_vector,
    tokenize,
)
from .evaluation import (
    ConceptMetrics,
    ConfusionMatrix,
    GoldRecord,
    KappaResult,
    cohens_kappa,
    confusion,
    evaluate_systems,
    metrics,
    split_gold,
)
from .extract import (
    Assertion,
    DocumentLabels,
    Mention,
    aggregate,
    assert_mention,
    extract_mentions,
    label_document,
    segment_sentences,
)
from .models import (
    KnnModel,
    LogisticModel,
    LogregParams,
    TfidfVectorizer,
    TokenPipelineConfig,
    fit_vectorizer,
    knn_predict,
    knn_predict_batch,
    predict_logreg,
    preprocess,
    train_logreg,
    train_logreg_many,
    transform,
)
from .retrieval import DEFAULT_KEYWORDS, KeywordLexicon, RetrievalHit, is_relevant, retrieve, stem
from .rules import (
    BINARY_CONCEPTS,
    ConceptCategory,
    DurationClass,
    Rule,
    RuleSet,
    compile_rules,
    default_ruleset,
)
from .synth import SynthConfig, SynthBundle, generate

__version__ = "0.1.0"

__all__ = [
    "Assertion",
    "BINARY_CONCEPTS",
    "ClinicalDocument",
    "ConceptCategory",
    "ConceptMetrics",
    "ConfusionMatrix",
    "DEFAULT_KEYWORDS",
    "DocumentLabels",
    "DurationClass",
    "GoldRecord",
    "KappaResult",
    "KeywordLexicon",
    "KnnModel",
    "LogisticModel",
    "LogregParams",
    "Mention",
    "RawNoteLine",
    "RemovedPair",
    "RetrievalHit",
    "Rule",
    "RuleSet",
    "SynthBundle",
    "SynthConfig",
    "TfidfVectorizer",
    "TokenPipelineConfig",
    "aggregate",
    "assert_mention",
    "cohens_kappa",
    "compile_rules",
    "confusion",
    "cosine_similarity",
    "deduplicate",
    "default_ruleset",
    "evaluate_systems",
    "extract_mentions",
    "fit_vectorizer",
    "generate",
    "is_relevant",
    "knn_predict",
    "knn_predict_batch",
    "label_document",
    "merge_note_lines",
    "metrics",
    "predict_logreg",
    "preprocess",
    "retrieve",
    "segment_sentences",
    "split_gold",
    "stem",
    "term_vector",
    "tokenize",
    "train_logreg",
    "train_logreg_many",
    "transform",
    "__version__",
]
