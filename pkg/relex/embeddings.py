"""
Feature embedding matrices, pretrained word vectors and per-token lookup.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from relex.features import FEATURE_ORDER, PAD_ID, EncodedInstance, FeatureKind, Vocabulary, VocabularySet

logger = logging.getLogger(__name__)

WORD_DIM = 50
FEATURE_DIM = 5
INIT_RANGE = 0.25


class VectorFileError(ValueError):
    """Raised for an unreadable word-vector file."""


class EmbeddingDimensionError(VectorFileError):
    pass


class MalformedVectorLineError(VectorFileError):
    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


@dataclass
class EmbeddingMatrix:
    """One row per dictionary id; the PAD row is zero and never updated."""
    values: np.ndarray
    trainable: bool = True
    pad_id: int = PAD_ID

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def rows(self) -> int:
        return self.values.shape[0]


@dataclass
class EmbeddingSet:
    matrices: Dict[FeatureKind, EmbeddingMatrix]

    @property
    def kinds(self) -> Tuple[FeatureKind, ...]:
        return tuple(kind for kind in FEATURE_ORDER if kind in self.matrices)

    @property
    def dim(self) -> int:
        return sum(matrix.dim for matrix in self.matrices.values())

    def __getitem__(self, kind: FeatureKind) -> EmbeddingMatrix:
        return self.matrices[kind]

    def offsets(self) -> Dict[FeatureKind, Tuple[int, int]]:
        """Column range of each feature inside a concatenated token vector."""
        ranges, start = {}, 0
        for kind in self.kinds:
            ranges[kind] = (start, start + self.matrices[kind].dim)
            start += self.matrices[kind].dim
        return ranges


def init_random(n: int, N: int, seed: int, pad_id: int = PAD_ID) -> EmbeddingMatrix:
    if n < 1 or N < 1:
        raise ValueError(f"embedding shape must be positive, got dim={n}, rows={N}")
    rng = np.random.default_rng(seed)
    values = rng.uniform(-INIT_RANGE, INIT_RANGE, size=(N, n))
    values[pad_id] = 0.0
    return EmbeddingMatrix(values)


def _read_vectors(path: str, dim: int) -> Iterable[Tuple[int, str, np.ndarray]]:
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            fields = line.rstrip("\n").rstrip("\r").split(" ")
            if line_no == 1 and len(fields) == 2:
                try:
                    declared = int(fields[1])
                    int(fields[0])
                except ValueError:
                    pass
                else:
                    if declared != dim:
                        raise EmbeddingDimensionError(f"{path} declares dimension {declared}, expected {dim}")
                    continue
            if not line.strip():
                continue
            if len(fields) != dim + 1:
                if line_no == 1:
                    raise EmbeddingDimensionError(f"{path} holds {len(fields) - 1}-dimensional vectors, expected {dim}")
                raise MalformedVectorLineError(line_no, f"expected {dim + 1} fields, found {len(fields)}")
            try:
                vector = np.array([float(x) for x in fields[1:]], dtype=np.float64)
            except ValueError:
                raise MalformedVectorLineError(line_no, "non-numeric vector component") from None
            if not np.all(np.isfinite(vector)):
                raise MalformedVectorLineError(line_no, "non-finite vector component")
            yield line_no, fields[0], vector


def load_pretrained(path: str, vocab: Vocabulary, seed: int, dim: int = WORD_DIM, lowercase: bool = True) -> EmbeddingMatrix:
    """
    Load word2vec text-format vectors for the words of a vocabulary.

    Words found in the file get their vectors copied verbatim; every other
    row is drawn from U(-0.25, 0.25) under the seed. The PAD row is zero.
    The optional "count dim" header is checked against the expected dimension.
    """
    matrix = init_random(dim, len(vocab), seed, vocab.pad_id)
    filled = set()
    for _, token, vector in _read_vectors(path, dim):
        key = token.lower() if lowercase else token
        row = vocab.entries.get(key)
        if row is None or row in (vocab.pad_id, vocab.unk_id) or row in filled:
            continue
        matrix.values[row] = vector
        filled.add(row)
    matrix.values[vocab.pad_id] = 0.0

    coverage = len(filled) / max(1, len(vocab) - 2)
    logger.info(f"Loaded {len(filled)} pretrained vectors from {path} ({coverage:.1%} of vocabulary)")
    return matrix


def build_embedding_set(
    vocabs: VocabularySet,
    seed: int,
    features: Iterable[FeatureKind] = FEATURE_ORDER,
    word_vectors: Optional[str] = None,
    word_dim: int = WORD_DIM,
    feature_dim: int = FEATURE_DIM,
) -> EmbeddingSet:
    """Initialize one matrix per active feature; word vectors optionally from a file."""
    active = set(features)
    seeds = np.random.SeedSequence(seed).spawn(len(FEATURE_ORDER))
    matrices = {}
    for kind, child in zip(FEATURE_ORDER, seeds):
        if kind not in active:
            continue
        child_seed = int(child.generate_state(1)[0])
        vocab = vocabs[kind]
        if kind is FeatureKind.WORD:
            if word_vectors:
                matrices[kind] = load_pretrained(word_vectors, vocab, child_seed, word_dim, vocabs.lowercase)
            else:
                matrices[kind] = init_random(word_dim, len(vocab), child_seed, vocab.pad_id)
        else:
            matrices[kind] = init_random(feature_dim, len(vocab), child_seed, vocab.pad_id)
    return EmbeddingSet(matrices)


def embed_instance(inst: EncodedInstance, embeddings: EmbeddingSet) -> np.ndarray:
    """Concatenated token vectors, shape (m, d), in FEATURE_ORDER."""
    return embed_ids(inst.ids, embeddings)


def embed_ids(ids: np.ndarray, embeddings: EmbeddingSet) -> np.ndarray:
    parts = []
    for kind in embeddings.kinds:
        column = ids[:, FEATURE_ORDER.index(kind)]
        matrix = embeddings[kind]
        if column.size and (column.min() < 0 or column.max() >= matrix.rows):
            raise IndexError(f"{kind.value} id out of range [0, {matrix.rows})")
        parts.append(matrix.values[column])
    return np.concatenate(parts, axis=1)
