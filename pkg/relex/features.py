"""
Token-level feature extraction and the per-feature dictionaries.

Every token of an instance is described by six discrete features: the
word, its signed distance to each argument, its PoS tag, its chunk tag and
its BIO entity-type tag.
"""
import hashlib
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from relex.corpus import EntitySpan, EntityType, RelationInstance, Sentence, label_id

logger = logging.getLogger(__name__)

PAD = "<PAD>"
UNK = "<UNK>"
PAD_ID = 0
DEFAULT_POSITION_CLIP = 50


class FeatureKind(str, Enum):
    WORD = "word"
    POS1 = "p1"
    POS2 = "p2"
    POS_TAG = "pos"
    CHUNK = "chunk"
    TYPE = "type"


# Concatenation order of the embedded features; columns of EncodedInstance.ids.
FEATURE_ORDER: Tuple[FeatureKind, ...] = tuple(FeatureKind)

TYPE_PREFIX = {
    EntityType.PROBLEM: "Prob",
    EntityType.TREATMENT: "Treat",
    EntityType.TEST: "Test",
}
OTHER_TAG = "Other"
TYPE_TAGS = (
    "B-Prob", "I-Prob", "B-Treat", "I-Treat", "B-Test", "I-Test", OTHER_TAG,
)


class VocabularyMismatchError(ValueError):
    """Raised when instances were encoded against a different vocabulary set."""


@dataclass
class Vocabulary:
    """
    Dense value -> id dictionary for one feature.

    Open vocabularies (word, PoS, chunk) carry an UNK entry. Closed ones
    (positions, type) have unk_id None; looking up a value outside them is
    a programming error and raises KeyError.
    """
    feature_kind: FeatureKind
    entries: Dict[str, int]
    unk_id: Optional[int]
    pad_id: int = PAD_ID

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, value) -> bool:
        return str(value) in self.entries

    def lookup(self, value) -> int:
        key = str(value)
        if key in self.entries:
            return self.entries[key]
        if self.unk_id is None:
            raise KeyError(f"value {value!r} not in closed {self.feature_kind.value} vocabulary")
        return self.unk_id

    def to_dict(self) -> dict:
        return {"entries": self.entries, "unk_id": self.unk_id, "pad_id": self.pad_id}

    @classmethod
    def from_dict(cls, kind: FeatureKind, data: dict) -> "Vocabulary":
        return cls(kind, {str(k): int(v) for k, v in data["entries"].items()}, data["unk_id"], data["pad_id"])


@dataclass
class VocabularySet:
    vocabularies: Dict[FeatureKind, Vocabulary]
    position_clip: int = DEFAULT_POSITION_CLIP
    lowercase: bool = True
    _fingerprint: Optional[str] = field(default=None, init=False, repr=False, compare=False)

    def __getitem__(self, kind: FeatureKind) -> Vocabulary:
        return self.vocabularies[kind]

    def sizes(self) -> Dict[FeatureKind, int]:
        return {kind: len(self.vocabularies[kind]) for kind in FEATURE_ORDER}

    def to_dict(self) -> dict:
        return {
            "position_clip": self.position_clip,
            "lowercase": self.lowercase,
            "features": {kind.value: self.vocabularies[kind].to_dict() for kind in FEATURE_ORDER},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VocabularySet":
        vocabularies = {
            kind: Vocabulary.from_dict(kind, data["features"][kind.value]) for kind in FEATURE_ORDER
        }
        return cls(vocabularies, int(data["position_clip"]), bool(data["lowercase"]))

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    @property
    def fingerprint(self) -> str:
        if self._fingerprint is None:
            self._fingerprint = hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()
        return self._fingerprint

    def dump(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, ensure_ascii=False, indent=2, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path: str) -> "VocabularySet":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))


class TokenFeatures(NamedTuple):
    w: int
    p1: int
    p2: int
    pos: int
    chunk: int
    t: int


@dataclass(frozen=True)
class EncodedInstance:
    """
    Dictionary ids of one instance, shape (m, 6) in FEATURE_ORDER columns.

    distances keeps the clipped signed distances (p1, p2) alongside the ids.
    """
    ids: np.ndarray
    distances: np.ndarray
    label_id: int
    instance_id: str
    vocab_fingerprint: Optional[str] = None

    @property
    def length(self) -> int:
        """Number of real tokens; trailing PAD rows are not counted."""
        real = np.flatnonzero(self.ids[:, 0] != PAD_ID)
        return int(real[-1]) + 1 if real.size else 0

    @property
    def features(self) -> List[TokenFeatures]:
        rows = []
        for row, (p1, p2) in zip(self.ids[: self.length], self.distances):
            rows.append(TokenFeatures(int(row[0]), int(p1), int(p2), int(row[3]), int(row[4]), int(row[5])))
        return rows

    def with_padding(self, count: int) -> "EncodedInstance":
        """The same instance followed by `count` PAD tokens."""
        pad_rows = np.full((count, self.ids.shape[1]), PAD_ID, dtype=self.ids.dtype)
        return EncodedInstance(
            np.vstack([self.ids, pad_rows]), self.distances, self.label_id,
            self.instance_id, self.vocab_fingerprint,
        )


def _normalize_word(text: str, lowercase: bool) -> str:
    return text.lower() if lowercase else text


def _open_vocabulary(kind: FeatureKind, values: Iterable[str]) -> Vocabulary:
    entries = {PAD: PAD_ID, UNK: 1}
    for value in sorted(set(values)):
        if value not in entries:
            entries[value] = len(entries)
    return Vocabulary(kind, entries, unk_id=1)


def _closed_vocabulary(kind: FeatureKind, values: Sequence) -> Vocabulary:
    entries = {PAD: PAD_ID}
    for value in values:
        entries[str(value)] = len(entries)
    return Vocabulary(kind, entries, unk_id=None)


def build_vocabularies(
    train: Sequence[Tuple[Sentence, RelationInstance]],
    position_clip: int = DEFAULT_POSITION_CLIP,
    lowercase: bool = True,
) -> VocabularySet:
    """
    Build the six feature dictionaries from training instances only.

    Ids are assigned in sorted value order so that the result does not
    depend on instance order.
    """
    if not train:
        raise ValueError("cannot build vocabularies from an empty training set")

    sentences = {sentence.id: sentence for sentence, _ in train}
    words, pos_tags, chunk_tags = set(), set(), set()
    for sentence in sentences.values():
        for token in sentence.tokens:
            words.add(_normalize_word(token.text, lowercase))
            pos_tags.add(token.pos_tag)
            chunk_tags.add(token.chunk_tag)

    positions = list(range(-position_clip, position_clip + 1))
    vocabularies = {
        FeatureKind.WORD: _open_vocabulary(FeatureKind.WORD, words),
        FeatureKind.POS1: _closed_vocabulary(FeatureKind.POS1, positions),
        FeatureKind.POS2: _closed_vocabulary(FeatureKind.POS2, positions),
        FeatureKind.POS_TAG: _open_vocabulary(FeatureKind.POS_TAG, pos_tags),
        FeatureKind.CHUNK: _open_vocabulary(FeatureKind.CHUNK, chunk_tags),
        FeatureKind.TYPE: _closed_vocabulary(FeatureKind.TYPE, TYPE_TAGS),
    }
    vocabs = VocabularySet(vocabularies, position_clip, lowercase)
    logger.info(
        f"Built vocabularies from {len(sentences)} sentences: "
        + ", ".join(f"{kind.value}={size}" for kind, size in vocabs.sizes().items())
    )
    return vocabs


def relative_position(token_idx: int, span: EntitySpan, clip: int = DEFAULT_POSITION_CLIP) -> int:
    """Signed token distance to a span: zero inside it, negative before, positive after."""
    if token_idx < span.start:
        distance = token_idx - span.start
    elif token_idx > span.end:
        distance = token_idx - span.end
    else:
        distance = 0
    return max(-clip, min(clip, distance))


def bio_tag(token_idx: int, entities: Sequence[EntitySpan]) -> str:
    for entity in entities:
        if entity.covers(token_idx):
            prefix = "B" if token_idx == entity.start else "I"
            return f"{prefix}-{TYPE_PREFIX[entity.etype]}"
    return OTHER_TAG


def encode_instance(sentence: Sentence, instance: RelationInstance, vocabs: VocabularySet) -> EncodedInstance:
    if instance.sentence_id != sentence.id:
        raise ValueError(f"instance {instance.instance_id} does not belong to sentence '{sentence.id}'")

    clip = vocabs.position_clip
    arg1 = sentence.entities[instance.arg1]
    arg2 = sentence.entities[instance.arg2]

    ids = np.empty((len(sentence.tokens), len(FEATURE_ORDER)), dtype=np.int64)
    distances = np.empty((len(sentence.tokens), 2), dtype=np.int64)
    for i, token in enumerate(sentence.tokens):
        p1 = relative_position(i, arg1, clip)
        p2 = relative_position(i, arg2, clip)
        distances[i] = (p1, p2)
        ids[i] = (
            vocabs[FeatureKind.WORD].lookup(_normalize_word(token.text, vocabs.lowercase)),
            vocabs[FeatureKind.POS1].lookup(p1),
            vocabs[FeatureKind.POS2].lookup(p2),
            vocabs[FeatureKind.POS_TAG].lookup(token.pos_tag),
            vocabs[FeatureKind.CHUNK].lookup(token.chunk_tag),
            vocabs[FeatureKind.TYPE].lookup(bio_tag(i, sentence.entities)),
        )
    return EncodedInstance(ids, distances, label_id(instance.label), instance.instance_id, vocabs.fingerprint)


def encode_all(pairs: Sequence[Tuple[Sentence, RelationInstance]], vocabs: VocabularySet) -> List[EncodedInstance]:
    return [encode_instance(sentence, instance, vocabs) for sentence, instance in pairs]
