"""Bag-of-words baselines: TF-IDF features, logistic regression, and KNN.

These exist to quantify how far plain document classification gets on
the same task the rules solve. Everything is deterministic: training
starts from zeros and uses full-batch gradient descent, and KNN breaks
ties by stored index. One independent binary model is trained per
concept.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import tokenize
from .retrieval import stem
from .rules import BINARY_CONCEPTS

logger = logging.getLogger(__name__)

ARTIFACT_FORMAT_VERSION = 1

# Small English function-word list; deliberately excludes negation words
# ("no", "not", "denies") because those carry signal for this task.
STOPWORDS_VERSION = "builtin-1"
DEFAULT_STOPWORDS = frozenset(
    """
    a about after again all also am an and any are as at be because been
    before being between both by during each for from further had has have
    having he her here hers him his how i in into is it its itself just me
    more most my of on once only or other our ours out over own s same she
    so some such t than that the their theirs them then there these they
    this those through to too under until up very was we were what when
    where which while who whom why will with you your yours
    """.split()
)


@dataclass(frozen=True)
class TokenPipelineConfig:
    """How raw text becomes feature tokens."""

    stopwords: frozenset[str] = DEFAULT_STOPWORDS
    stopwords_version: str = STOPWORDS_VERSION
    stemming: bool = True


def preprocess(text: str, config: TokenPipelineConfig | None = None) -> list[str]:
    """Lowercase, tokenize, drop stopwords, and stem.

    The tokenizer already restricts tokens to alphanumeric runs, so every
    surviving token contains a letter or digit by construction.
    """
    if config is None:
        config = TokenPipelineConfig()
    tokens = [token for token in tokenize(text) if token not in config.stopwords]
    if config.stemming:
        tokens = [stem(token) for token in tokens]
    return tokens


# Sparse feature vector: column index -> weight.
SparseVector = dict[int, float]


@dataclass(frozen=True)
class TfidfVectorizer:
    """Vocabulary, document frequencies, and corpus size frozen at fit time."""

    vocabulary: dict[str, int]
    doc_freq: dict[str, int]
    n_docs: int

    @property
    def dimension(self) -> int:
        return len(self.vocabulary)


def fit_vectorizer(token_docs: Sequence[Sequence[str]]) -> TfidfVectorizer:
    """Build a TF-IDF vectorizer from tokenized training documents.

    The vocabulary is every distinct term, indexed in lexicographic order
    so refitting on a permuted corpus yields the identical vectorizer.
    """
    if len(token_docs) == 0:
        raise ValueError("cannot fit a vectorizer on an empty corpus")
    doc_freq: dict[str, int] = {}
    # Sorted iteration keeps dict insertion order independent of the
    # process hash seed, so serialized artifacts are byte-stable.
    for tokens in token_docs:
        for term in sorted(set(tokens)):
            doc_freq[term] = doc_freq.get(term, 0) + 1
    vocabulary = {term: index for index, term in enumerate(sorted(doc_freq))}
    return TfidfVectorizer(vocabulary=vocabulary, doc_freq=doc_freq, n_docs=len(token_docs))


def transform(vectorizer: TfidfVectorizer, tokens: Iterable[str]) -> SparseVector:
    """Map tokens to a sparse TF-IDF vector.

    Weight is raw term frequency times ln(n_docs / doc_freq); terms not in
    the vocabulary are ignored, and terms present in every training
    document get weight zero (their component is simply absent).
    """
    counts: dict[str, int] = {}
    for token in tokens:
        if token in vectorizer.vocabulary:
            counts[token] = counts.get(token, 0) + 1
    vector: SparseVector = {}
    for term, tf in counts.items():
        idf = math.log(vectorizer.n_docs / vectorizer.doc_freq[term])
        weight = tf * idf
        if weight != 0.0:
            vector[vectorizer.vocabulary[term]] = weight
    return vector


def _densify(vectors: Sequence[SparseVector], dimension: int) -> np.ndarray:
    dense = np.zeros((len(vectors), dimension), dtype=np.float64)
    for row, vector in enumerate(vectors):
        for column, value in vector.items():
            dense[row, column] = value
    return dense


@dataclass(frozen=True)
class LogregParams:
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    threshold: float = 0.5


@dataclass(frozen=True)
class LogisticModel:
    weights: tuple[float, ...]
    bias: float
    params: LogregParams
    warnings: tuple[str, ...] = ()


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    positive = z >= 0
    out[positive] = 1.0 / (1.0 + np.exp(-z[positive]))
    expz = np.exp(z[~positive])
    out[~positive] = expz / (1.0 + expz)
    return out


def logistic_loss_gradient(
    features: np.ndarray, targets: np.ndarray, weights: np.ndarray, bias: float, l2: float
) -> tuple[float, np.ndarray, float]:
    """Mean cross-entropy loss with an L2 penalty on the weights.

    Returns (loss, weight gradient, bias gradient). The bias is not
    regularized. Loss uses the softplus form, stable for large |z|.
    """
    z = features @ weights + bias
    softplus = np.logaddexp(0.0, z)
    loss = float(np.mean(softplus - targets * z) + 0.5 * l2 * float(weights @ weights))
    residual = _sigmoid(z) - targets
    grad_w = features.T @ residual / len(targets) + l2 * weights
    grad_b = float(np.mean(residual))
    return loss, grad_w, grad_b


def _train_logreg_dense(
    features: np.ndarray, targets: Sequence[bool], params: LogregParams
) -> LogisticModel:
    warnings = []
    distinct = set(bool(t) for t in targets)
    if len(distinct) == 1:
        only = "positive" if True in distinct else "negative"
        warnings.append(f"training data contains only {only} examples")

    y = np.asarray([1.0 if t else 0.0 for t in targets], dtype=np.float64)
    weights = np.zeros(features.shape[1], dtype=np.float64)
    bias = 0.0
    previous_loss = math.inf
    diverged = False
    for _ in range(params.epochs):
        loss, grad_w, grad_b = logistic_loss_gradient(features, y, weights, bias, params.l2)
        if loss > previous_loss + 1e-9 and not diverged:
            diverged = True
            warnings.append("loss increased during training; learning rate may be too high")
            logger.warning("logistic regression loss increased (lr=%s)", params.learning_rate)
        previous_loss = loss
        weights -= params.learning_rate * grad_w
        bias -= params.learning_rate * grad_b
    return LogisticModel(tuple(float(w) for w in weights), float(bias), params, tuple(warnings))


def train_logreg(
    vectors: Sequence[SparseVector],
    targets: Sequence[bool],
    dimension: int,
    params: LogregParams | None = None,
) -> LogisticModel:
    """Full-batch gradient descent from zero-initialized parameters.

    Training is deterministic: same data and params give the same model.
    Single-class data still trains (the model converges toward the class
    prior) but a warning is attached. A non-decreasing loss step beyond
    tolerance indicates a divergent learning rate and is also reported.
    """
    if params is None:
        params = LogregParams()
    if len(vectors) != len(targets):
        raise ValueError("feature and target counts differ")
    if len(vectors) == 0:
        raise ValueError("cannot train on an empty dataset")
    return _train_logreg_dense(_densify(vectors, dimension), targets, params)


def train_logreg_many(
    vectors: Sequence[SparseVector],
    targets_by_name: Mapping[str, Sequence[bool]],
    dimension: int,
    params: LogregParams | None = None,
) -> dict[str, LogisticModel]:
    """Train one model per target set over a shared feature matrix.

    Identical to calling train_logreg once per name; the feature matrix
    is densified only once, which matters at corpus scale.
    """
    if params is None:
        params = LogregParams()
    if len(vectors) == 0:
        raise ValueError("cannot train on an empty dataset")
    for name, targets in targets_by_name.items():
        if len(targets) != len(vectors):
            raise ValueError(f"target count for {name!r} differs from feature count")
    features = _densify(vectors, dimension)
    return {
        name: _train_logreg_dense(features, targets, params)
        for name, targets in targets_by_name.items()
    }


def predict_logreg(model: LogisticModel, vector: SparseVector) -> tuple[float, bool]:
    """Return (probability, label); the label is probability >= threshold."""
    z = model.bias + sum(model.weights[column] * value for column, value in vector.items())
    if z >= 0:
        probability = 1.0 / (1.0 + math.exp(-z))
    else:
        expz = math.exp(z)
        probability = expz / (1.0 + expz)
    return probability, probability >= model.params.threshold


@dataclass(frozen=True)
class KnnModel:
    """Stored training vectors and labels for k-nearest-neighbor voting."""

    vectors: tuple[SparseVector, ...]
    labels: tuple[bool, ...]
    k: int = 5

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if len(self.vectors) != len(self.labels):
            raise ValueError("vector and label counts differ")
        if self.k > len(self.vectors):
            raise ValueError(f"k={self.k} exceeds training size {len(self.vectors)}")


def _sparse_cosine(vec_a: SparseVector, vec_b: SparseVector) -> float:
    if not vec_a or not vec_b:
        return 0.0
    if len(vec_b) < len(vec_a):
        vec_a, vec_b = vec_b, vec_a
    dot = sum(value * vec_b.get(column, 0.0) for column, value in vec_a.items())
    norm_a = math.sqrt(sum(value * value for value in vec_a.values()))
    norm_b = math.sqrt(sum(value * value for value in vec_b.values()))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return dot / (norm_a * norm_b)


def knn_predict(model: KnnModel, vector: SparseVector) -> bool:
    """Majority vote of the k nearest stored vectors by cosine distance.

    Distance ties are broken by lower stored index; a tied vote (possible
    for even k) resolves to negative.
    """
    scored = [
        (1.0 - _sparse_cosine(vector, stored), index)
        for index, stored in enumerate(model.vectors)
    ]
    scored.sort()
    positives = sum(1 for _, index in scored[: model.k] if model.labels[index])
    return positives * 2 > model.k


def _normalized_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    norms[norms == 0.0] = 1.0
    return matrix / norms[:, None]


def knn_predict_batch(
    models: Mapping[str, KnnModel], queries: Sequence[SparseVector]
) -> dict[str, list[bool]]:
    """Predict every query for several models sharing one training set.

    All models must store the same vectors and k (one per concept, labels
    differ); the neighbor ranking is then computed once with matrix math
    instead of per query. Semantics match knn_predict: cosine distance,
    ties by lower stored index, tied votes negative.
    """
    if not models:
        raise ValueError("no models given")
    items = list(models.items())
    first = items[0][1]
    for name, model in items[1:]:
        if model.k != first.k:
            raise ValueError(f"model {name!r} has a different k")
        if model.vectors is not first.vectors and model.vectors != first.vectors:
            raise ValueError(f"model {name!r} does not share the training vectors")

    columns = [column for vector in first.vectors for column in vector]
    columns.extend(column for vector in queries for column in vector)
    width = max(columns, default=-1) + 1
    train = _normalized_rows(_densify(first.vectors, width))
    query_matrix = _normalized_rows(_densify(queries, width))
    distances = 1.0 - query_matrix @ train.T
    # Stable sort keeps equal distances in index order, same as the
    # (distance, index) sort in knn_predict.
    neighbors = np.argsort(distances, axis=1, kind="stable")[:, : first.k]

    results: dict[str, list[bool]] = {}
    for name, model in items:
        labels = np.asarray(model.labels, dtype=bool)
        votes = labels[neighbors].sum(axis=1)
        results[name] = [bool(count * 2 > model.k) for count in votes]
    return results


# ---------------------------------------------------------------------------
# Model artifacts


def _encode_sparse(vector: SparseVector) -> dict[str, float]:
    return {str(column): value for column, value in vector.items()}


def _decode_sparse(record: Mapping[str, float]) -> SparseVector:
    return {int(column): float(value) for column, value in record.items()}


def save_artifact(
    path: str | Path,
    config: TokenPipelineConfig,
    vectorizer: TfidfVectorizer,
    models: Mapping[str, LogisticModel | KnnModel],
) -> None:
    """Write a self-describing model file: config, vocabulary, IDF inputs,
    and per-concept parameters, all under a format version."""
    terms = sorted(vectorizer.vocabulary, key=vectorizer.vocabulary.get)  # type: ignore[arg-type]
    encoded_models: dict[str, dict[str, object]] = {}
    for concept, model in models.items():
        if isinstance(model, LogisticModel):
            encoded_models[concept] = {
                "type": "logreg",
                "weights": list(model.weights),
                "bias": model.bias,
                "params": {
                    "learning_rate": model.params.learning_rate,
                    "epochs": model.params.epochs,
                    "l2": model.params.l2,
                    "threshold": model.params.threshold,
                },
                "warnings": list(model.warnings),
            }
        elif isinstance(model, KnnModel):
            encoded_models[concept] = {
                "type": "knn",
                "vectors": [_encode_sparse(vector) for vector in model.vectors],
                "labels": list(model.labels),
                "k": model.k,
            }
        else:
            raise TypeError(f"unsupported model type {type(model).__name__}")

    payload = {
        "format_version": ARTIFACT_FORMAT_VERSION,
        "pipeline": {
            "stopwords": sorted(config.stopwords),
            "stopwords_version": config.stopwords_version,
            "stemming": config.stemming,
        },
        "vectorizer": {
            "vocabulary": terms,
            "doc_freq": {term: vectorizer.doc_freq[term] for term in terms},
            "n_docs": vectorizer.n_docs,
        },
        "models": encoded_models,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, ensure_ascii=True)
        handle.write("\n")


def load_artifact(
    path: str | Path,
) -> tuple[TokenPipelineConfig, TfidfVectorizer, dict[str, LogisticModel | KnnModel]]:
    with open(path, "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    version = payload.get("format_version")
    if version != ARTIFACT_FORMAT_VERSION:
        raise ValueError(f"unsupported model artifact version {version!r}")

    pipeline = payload["pipeline"]
    config = TokenPipelineConfig(
        stopwords=frozenset(pipeline["stopwords"]),
        stopwords_version=pipeline["stopwords_version"],
        stemming=bool(pipeline["stemming"]),
    )
    vec = payload["vectorizer"]
    vocabulary = {term: index for index, term in enumerate(vec["vocabulary"])}
    vectorizer = TfidfVectorizer(
        vocabulary=vocabulary,
        doc_freq={term: int(count) for term, count in vec["doc_freq"].items()},
        n_docs=int(vec["n_docs"]),
    )

    models: dict[str, LogisticModel | KnnModel] = {}
    for concept, record in payload["models"].items():
        kind = record.get("type")
        if kind == "logreg":
            params = record["params"]
            models[concept] = LogisticModel(
                weights=tuple(float(w) for w in record["weights"]),
                bias=float(record["bias"]),
                params=LogregParams(
                    learning_rate=float(params["learning_rate"]),
                    epochs=int(params["epochs"]),
                    l2=float(params["l2"]),
                    threshold=float(params["threshold"]),
                ),
                warnings=tuple(record.get("warnings", ())),
            )
        elif kind == "knn":
            models[concept] = KnnModel(
                vectors=tuple(_decode_sparse(vector) for vector in record["vectors"]),
                labels=tuple(bool(label) for label in record["labels"]),
                k=int(record["k"]),
            )
        else:
            raise ValueError(f"unsupported model type {kind!r} in artifact")
    return config, vectorizer, models


def concept_names() -> list[str]:
    """The concepts baseline models are trained for."""
    return [concept.value for concept in BINARY_CONCEPTS]
