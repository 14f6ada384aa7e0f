"""
Sparse feature-template baseline: eleven templates per entity pair and a
one-vs-rest linear SVM trained with Pegasos-style stochastic subgradients.
"""
import hashlib
import json
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, TextIO, Tuple

import numpy as np
from scipy.sparse import csr_matrix, hstack

from relex.corpus import NUM_CLASSES, RelationInstance, Sentence, label_id

logger = logging.getLogger(__name__)

DEFAULT_COSTS = (0.01, 0.1, 1.0)
DEFAULT_SVM_EPOCHS = 20
DEFAULT_SVM_BATCH = 32
BOS = "<S>"
NONE = "<none>"
SUCCEEDING_WORDS = 3


@dataclass(frozen=True)
class SparseVector:
    ids: np.ndarray
    values: np.ndarray
    dim: int

    def __len__(self) -> int:
        return int(self.ids.size)


@dataclass
class FeatureSpace:
    """Namespaced feature name -> column id, built on training data."""
    index: Dict[str, int]

    def __len__(self) -> int:
        return len(self.index)

    @classmethod
    def build(cls, feature_maps: Iterable[Dict[str, float]]) -> "FeatureSpace":
        names = set()
        for features in feature_maps:
            names.update(features)
        return cls({name: i for i, name in enumerate(sorted(names))})

    def vectorize(self, features: Dict[str, float]) -> SparseVector:
        """Unseen feature names and zero values are dropped."""
        pairs = sorted(
            (self.index[name], value) for name, value in features.items() if name in self.index and value != 0
        )
        ids = np.array([i for i, _ in pairs], dtype=np.int64)
        values = np.array([v for _, v in pairs], dtype=np.float64)
        return SparseVector(ids, values, len(self.index))


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: np.ndarray
    C: float

    def scores(self, x: SparseVector) -> np.ndarray:
        return self.weights[:, x.ids] @ x.values + self.bias


def _is_punctuation(text: str) -> bool:
    return all(unicodedata.category(ch).startswith("P") for ch in text)


def template_features(sentence: Sentence, instance: RelationInstance) -> Dict[str, float]:
    """
    Named features of one entity pair.

    Bag templates (between words, between PoS tags, between bigrams) count
    repeated hits; every other template contributes a single value.
    """
    first = sentence.entities[instance.arg1]
    second = sentence.entities[instance.arg2]
    words = [token.text.lower() for token in sentence.tokens]
    between = list(range(first.end + 1, second.start))
    between_words = [words[i] for i in between]

    features = Counter()
    for i in between:
        features[f"bow={words[i]}"] += 1
        features[f"bop={sentence.tokens[i].pos_tag}"] += 1
    for left, right in zip(between_words, between_words[1:]):
        features[f"bigram={left}_{right}"] += 1

    features[f"prev1={words[first.start - 1] if first.start > 0 else BOS}"] = 1
    features[f"prev2={words[second.start - 1] if second.start > 0 else BOS}"] = 1
    for arg, span in (("1", first), ("2", second)):
        for offset in range(1, SUCCEEDING_WORDS + 1):
            position = span.end + offset
            if position < len(words):
                features[f"succ{arg}_{offset}={words[position]}"] = 1

    chunks = "|".join(sentence.tokens[i].chunk_tag for i in between)
    features[f"chunkseq={chunks or NONE}"] = 1
    features[f"between={' '.join(between_words) or NONE}"] = 1
    features[f"arg1={first.etype.value}"] = 1
    features[f"arg2={second.etype.value}"] = 1
    features[f"order={first.etype.value}-{second.etype.value}"] = 1
    features["distance"] = float(len(between))
    features["punct_only"] = 1.0 if between and all(_is_punctuation(w) for w in between_words) else 0.0
    return {name: float(value) for name, value in features.items()}


def extract_sparse_features(sentence: Sentence, instance: RelationInstance, space: FeatureSpace) -> SparseVector:
    return space.vectorize(template_features(sentence, instance))


def to_csr(vectors: Sequence[SparseVector], dim: int) -> csr_matrix:
    indptr = np.cumsum([0] + [len(v) for v in vectors])
    ids = np.concatenate([v.ids for v in vectors]) if vectors else np.zeros(0, dtype=np.int64)
    values = np.concatenate([v.values for v in vectors]) if vectors else np.zeros(0)
    return csr_matrix((values, ids, indptr), shape=(len(vectors), dim))


def _pegasos(X: csr_matrix, y: np.ndarray, lam: float, schedule: Sequence[np.ndarray], batch_size: int) -> np.ndarray:
    w = np.zeros(X.shape[1])
    radius = 1.0 / np.sqrt(lam)
    t = 0
    for order in schedule:
        for start in range(0, order.size, batch_size):
            batch = order[start: start + batch_size]
            t += 1
            eta = 1.0 / (lam * t)
            margins = y[batch] * (X[batch] @ w)
            violators = batch[margins < 1.0]
            w *= 1.0 - eta * lam
            if violators.size:
                w += (eta / batch.size) * (X[violators].T @ y[violators])
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
    return w


def train_svm(
    vectors: Sequence[SparseVector],
    labels: Sequence[int],
    C: float,
    seed: int,
    epochs: int = DEFAULT_SVM_EPOCHS,
    batch_size: int = DEFAULT_SVM_BATCH,
) -> LinearSvmModel:
    """
    One-vs-rest linear SVMs minimizing (1/2)|w|^2 + C * sum(hinge).

    Each binary problem is solved by mini-batch Pegasos with
    lambda = 1 / (C * n), projection onto the 1/sqrt(lambda) ball and a
    fixed epoch budget. The bias is the weight of a constant feature and
    is regularized with the rest. All classes share one seeded schedule.
    """
    if not C > 0:
        raise ValueError(f"cost C must be positive, got {C}")
    if not vectors:
        raise ValueError("cannot train on an empty training set")

    dim = vectors[0].dim
    n = len(vectors)
    X = hstack([to_csr(vectors, dim), csr_matrix(np.ones((n, 1)))], format="csr")
    labels = np.asarray(labels, dtype=np.int64)
    lam = 1.0 / (C * n)
    rng = np.random.default_rng(seed)
    schedule = [rng.permutation(n) for _ in range(epochs)]

    W = np.zeros((NUM_CLASSES, dim + 1))
    for c in range(NUM_CLASSES):
        y = np.where(labels == c, 1.0, -1.0)
        W[c] = _pegasos(X, y, lam, schedule, batch_size)
    logger.info(f"Trained one-vs-rest SVM (C={C}) on {n} instances, {dim} features")
    return LinearSvmModel(W[:, :-1], W[:, -1], C)


def svm_fingerprint(
    C: float, seed: int, epochs: int = DEFAULT_SVM_EPOCHS, batch_size: int = DEFAULT_SVM_BATCH
) -> str:
    """Short hash of the SVM settings, recorded on its reports."""
    settings = {"model": "svm", "C": C, "seed": seed, "epochs": epochs, "batch_size": batch_size}
    payload = json.dumps(settings, sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


def predict_svm(model: LinearSvmModel, x: SparseVector) -> int:
    """Highest-scoring class; ties go to the lower class id."""
    return int(np.argmax(model.scores(x)))


def fit_predict_svm(
    train_pairs: Sequence[Tuple[Sentence, RelationInstance]],
    test_pairs: Sequence[Tuple[Sentence, RelationInstance]],
    C: float,
    seed: int,
) -> List[int]:
    """Build the feature space on the training pairs, train, and label the test pairs."""
    train_features = [template_features(s, i) for s, i in train_pairs]
    space = FeatureSpace.build(train_features)
    model = train_svm(
        [space.vectorize(f) for f in train_features],
        [label_id(i.label) for _, i in train_pairs],
        C,
        seed,
    )
    return [predict_svm(model, extract_sparse_features(s, i, space)) for s, i in test_pairs]


def dump_sparse(
    stream: TextIO,
    vectors: Sequence[SparseVector],
    labels: Sequence[int],
    instance_ids: Sequence[str],
) -> None:
    """`label qid:instance_id fid:value ...` lines with 1-based feature ids."""
    for vector, label, instance_id in zip(vectors, labels, instance_ids):
        pairs = " ".join(f"{i + 1}:{v:g}" for i, v in zip(vector.ids.tolist(), vector.values.tolist()))
        stream.write(f"{label} qid:{instance_id}" + (f" {pairs}" if pairs else "") + "\n")
