"""
Minibatch training loop and batch prediction for the convolutional classifier.
"""
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from relex.corpus import LABELS, RelationLabel
from relex.embeddings import FEATURE_DIM, WORD_DIM, build_embedding_set
from relex.features import (
    DEFAULT_POSITION_CLIP, FEATURE_ORDER, EncodedInstance, FeatureKind,
    VocabularyMismatchError, VocabularySet,
)
from relex.metrics import compute_metrics
from relex.network import Gradients, ModelParams, backward, forward, init_params
from relex.optimizer import (
    DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPS, DEFAULT_LR, AdamState, adam_init,
    adam_step, validate_hyperparameters,
)

logger = logging.getLogger(__name__)

ALWAYS_ON_FEATURES = (FeatureKind.WORD, FeatureKind.TYPE)
NO_RELATION_ID = LABELS.index(RelationLabel.NoRelation)


class ConfigError(ValueError):
    """Raised for an invalid training or run configuration."""


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        super().__init__(f"non-finite loss {loss} at epoch {epoch}, batch {batch}")


@dataclass
class TrainConfig:
    filter_lengths: Tuple[int, ...] = (4, 6)
    filters_per_length: int = 100
    dropout_keep: float = 0.5
    batch_size: int = 50
    epochs: int = 20
    seed: int = 0
    lr: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    eps: float = DEFAULT_EPS
    patience: Optional[int] = None
    features: Tuple[str, ...] = tuple(kind.value for kind in FEATURE_ORDER)
    word_dim: int = WORD_DIM
    feature_dim: int = FEATURE_DIM
    position_clip: int = DEFAULT_POSITION_CLIP
    norel_ratio: Optional[float] = None

    def __post_init__(self):
        self.filter_lengths = tuple(int(c) for c in self.filter_lengths)
        self.features = tuple(self.features)

    def validate(self) -> "TrainConfig":
        if not self.filter_lengths:
            raise ConfigError("filter_lengths must not be empty")
        if len(set(self.filter_lengths)) != len(self.filter_lengths):
            raise ConfigError(f"filter_lengths must be distinct, got {list(self.filter_lengths)}")
        if min(self.filter_lengths) < 1:
            raise ConfigError("filter lengths must be >= 1")
        if self.filters_per_length < 1:
            raise ConfigError("filters_per_length must be >= 1")
        if not 0.0 < self.dropout_keep <= 1.0:
            raise ConfigError(f"dropout keep probability must be in (0, 1], got {self.dropout_keep}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.patience is not None and self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.norel_ratio is not None and not 0.0 < self.norel_ratio <= 1.0:
            raise ConfigError(f"norel_ratio must be in (0, 1], got {self.norel_ratio}")
        if self.word_dim < 1 or self.feature_dim < 1 or self.position_clip < 1:
            raise ConfigError("embedding dimensions and position clip must be >= 1")
        try:
            validate_hyperparameters(self.lr, self.beta1, self.beta2, self.eps)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        known = {kind.value for kind in FEATURE_ORDER}
        unknown = set(self.features) - known
        if unknown:
            raise ConfigError(f"unknown features {sorted(unknown)}; choose from {sorted(known)}")
        return self

    def feature_kinds(self) -> Tuple[FeatureKind, ...]:
        active = set(self.features) | {kind.value for kind in ALWAYS_ON_FEATURES}
        return tuple(kind for kind in FEATURE_ORDER if kind.value in active)

    def fingerprint(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:12]


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    train_acc: float
    dev_macro_f1: Optional[float] = None

    def to_tsv(self) -> str:
        dev = "-" if self.dev_macro_f1 is None else f"{self.dev_macro_f1:.2f}"
        return f"{self.epoch}\t{self.mean_loss:.6f}\t{self.train_acc:.2f}\t{dev}"


@dataclass
class TrainHistory:
    """
    Per-epoch log. train_acc is measured on the training forwards, i.e.
    with dropout active.
    """
    records: List[EpochRecord] = field(default_factory=list)
    steps: int = 0
    best_epoch: Optional[int] = None

    def to_tsv(self) -> str:
        return "".join(record.to_tsv() + "\n" for record in self.records)


def render_lengths(lengths: Sequence[int]) -> str:
    return "[" + ",".join(str(c) for c in lengths) + "]"


def subsample_no_relation(
    instances: Sequence[EncodedInstance], ratio: float, rng: np.random.Generator
) -> List[EncodedInstance]:
    """Keep round(ratio * n) NoRelation instances chosen by the generator; order is preserved."""
    negatives = [i for i, inst in enumerate(instances) if inst.label_id == NO_RELATION_ID]
    keep_count = int(round(ratio * len(negatives)))
    kept = set(rng.choice(negatives, size=keep_count, replace=False).tolist()) if negatives else set()
    return [inst for i, inst in enumerate(instances) if inst.label_id != NO_RELATION_ID or i in kept]


def _check_fingerprints(model: ModelParams, instances: Sequence[EncodedInstance]) -> None:
    for inst in instances:
        if model.vocab_fingerprint and inst.vocab_fingerprint and inst.vocab_fingerprint != model.vocab_fingerprint:
            raise VocabularyMismatchError(
                f"instance {inst.instance_id} was encoded against a different vocabulary set"
            )


def predict_batch(model: ModelParams, instances: Sequence[EncodedInstance]) -> List[Tuple[int, np.ndarray]]:
    """Eval-mode predictions; argmax ties go to the lower class id."""
    _check_fingerprints(model, instances)
    results = []
    for inst in instances:
        try:
            probs = forward(inst, model, train=False).probs
        except IndexError as e:
            raise VocabularyMismatchError(f"instance {inst.instance_id}: {e}") from None
        results.append((int(np.argmax(probs)), probs))
    return results


def predict_labels(model: ModelParams, instances: Sequence[EncodedInstance]) -> List[int]:
    return [label for label, _ in predict_batch(model, instances)]


def dev_macro_f1(model: ModelParams, dev_set: Sequence[EncodedInstance]) -> float:
    predicted = predict_labels(model, dev_set)
    return compute_metrics([inst.label_id for inst in dev_set], predicted).macro.f1


class Trainer:
    """Holds the model, optimizer state and history of one training run."""

    def __init__(self, config: TrainConfig, vocabs: VocabularySet, word_vectors: Optional[str] = None):
        self.config = config.validate()
        self.vocabs = vocabs
        init_seq, shuffle_seq, dropout_seq, sample_seq = np.random.SeedSequence(config.seed).spawn(4)
        embed_seed, param_seed = (int(s) for s in init_seq.generate_state(2))

        embeddings = build_embedding_set(
            vocabs, embed_seed, config.feature_kinds(), word_vectors, config.word_dim, config.feature_dim,
        )
        self.params = init_params(
            embeddings, config.filter_lengths, config.filters_per_length, config.dropout_keep,
            param_seed, vocabs.fingerprint,
        )
        self.params.config_fingerprint = config.fingerprint()
        self.state: AdamState = adam_init(self.params, config.lr, config.beta1, config.beta2, config.eps)
        self.history = TrainHistory()
        self._shuffle_rng = np.random.default_rng(shuffle_seq)
        self._dropout_rng = np.random.default_rng(dropout_seq)
        self._sample_rng = np.random.default_rng(sample_seq)

    def train_batch(self, batch: Sequence[EncodedInstance], epoch: int = 0, batch_no: int = 0) -> Tuple[float, int]:
        """One Adam step on the mean batch loss; returns (summed loss, correct predictions)."""
        grads, loss, correct = [], 0.0, 0
        for inst in batch:
            cache = forward(inst, self.params, train=True, rng=self._dropout_rng)
            grads.append(backward(cache, inst.label_id, self.params))
            loss += cache.loss
            correct += int(np.argmax(cache.probs) == inst.label_id)
        if not math.isfinite(loss):
            raise TrainingDivergedError(epoch, batch_no, loss)
        adam_step(self.state, Gradients.sum(grads).scaled(1.0 / len(batch)), self.params)
        self.history.steps += 1
        return loss, correct

    def fit(
        self, train_set: Sequence[EncodedInstance], dev_set: Optional[Sequence[EncodedInstance]] = None
    ) -> Tuple[ModelParams, TrainHistory]:
        if not train_set:
            raise ValueError("cannot train on an empty training set")
        fingerprints = {inst.vocab_fingerprint for inst in train_set}
        if len(fingerprints) > 1 or (fingerprints - {None, self.vocabs.fingerprint}):
            raise VocabularyMismatchError("training instances were encoded against different vocabularies")

        config = self.config
        instances = list(train_set)
        if config.norel_ratio is not None:
            instances = subsample_no_relation(instances, config.norel_ratio, self._sample_rng)
            logger.info(f"Subsampled NoRelation instances: {len(train_set)} -> {len(instances)}")

        n = len(instances)
        best_params, best_f1, stale = None, -math.inf, 0
        for epoch in range(1, config.epochs + 1):
            order = self._shuffle_rng.permutation(n)
            total_loss, correct = 0.0, 0
            for start in range(0, n, config.batch_size):
                batch = [instances[i] for i in order[start: start + config.batch_size]]
                loss, hits = self.train_batch(batch, epoch, start // config.batch_size + 1)
                total_loss += loss
                correct += hits

            dev_f1 = dev_macro_f1(self.params, dev_set) if dev_set else None
            record = EpochRecord(epoch, total_loss / n, 100.0 * correct / n, dev_f1)
            self.history.records.append(record)
            logger.info(
                f"Epoch {epoch}/{config.epochs}: loss={record.mean_loss:.4f} "
                f"train_acc={record.train_acc:.2f}"
                + ("" if dev_f1 is None else f" dev_macro_f1={dev_f1:.2f}")
            )

            if dev_f1 is not None and config.patience is not None:
                if dev_f1 > best_f1:
                    best_params, best_f1, stale = self.params.copy(), dev_f1, 0
                    self.history.best_epoch = epoch
                else:
                    stale += 1
                    if stale >= config.patience:
                        logger.info(f"Early stopping after epoch {epoch}; best epoch {self.history.best_epoch}")
                        break

        if best_params is not None:
            self.params = best_params
        return self.params, self.history


def train(
    config: TrainConfig,
    train_set: Sequence[EncodedInstance],
    dev_set: Optional[Sequence[EncodedInstance]] = None,
    *,
    vocabs: VocabularySet,
    word_vectors: Optional[str] = None,
) -> Tuple[ModelParams, TrainHistory]:
    """Train a fresh model; deterministic for a fixed config seed and instance order."""
    return Trainer(config, vocabs, word_vectors).fit(train_set, dev_set)
