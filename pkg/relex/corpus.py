"""
Corpus handling: entity-annotated sentences, relation instances and folds.
"""
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from sklearn.model_selection import StratifiedKFold

logger = logging.getLogger(__name__)


class EntityType(str, Enum):
    PROBLEM = "problem"
    TREATMENT = "treatment"
    TEST = "test"


class RelationLabel(str, Enum):
    """The six classes the classifiers predict, in class-id order."""
    TeCP = "TeCP"
    TrCP = "TrCP"
    PIP = "PIP"
    TrAP = "TrAP"
    TeRP = "TeRP"
    NoRelation = "NoRelation"


LABELS: Tuple[RelationLabel, ...] = tuple(RelationLabel)
RELATION_CLASSES: Tuple[RelationLabel, ...] = LABELS[:5]
NUM_CLASSES = len(LABELS)

# Annotated in the source data but removed together with their instances.
DROPPED_LABELS = frozenset({"TrWP", "TrIP", "TrNAP"})
GOLD_LABELS = frozenset(label.value for label in RELATION_CLASSES) | DROPPED_LABELS


def label_id(label: str) -> int:
    return LABELS.index(RelationLabel(label))


class CorpusParseError(ValueError):
    """Raised when a corpus file contains an invalid record."""

    def __init__(self, line_no: int, message: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {message}")


class MalformedRecordError(CorpusParseError):
    pass


class SpanOutOfRangeError(CorpusParseError):
    pass


class EntityOrderError(CorpusParseError):
    pass


class OverlappingEntitiesError(CorpusParseError):
    pass


class DuplicateSentenceError(CorpusParseError):
    pass


class UnknownEntityTypeError(CorpusParseError):
    pass


class UnknownRelationLabelError(CorpusParseError):
    pass


class InvalidRelationError(ValueError):
    """Raised when a gold relation references entities the sentence does not have."""


@dataclass(frozen=True)
class Token:
    text: str
    pos_tag: str
    chunk_tag: str


@dataclass(frozen=True)
class EntitySpan:
    start: int
    end: int
    etype: EntityType

    def covers(self, token_idx: int) -> bool:
        return self.start <= token_idx <= self.end


@dataclass(frozen=True)
class GoldRelation:
    arg1: int
    arg2: int
    label: str


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: Tuple[Token, ...]
    entities: Tuple[EntitySpan, ...]
    relations: Tuple[GoldRelation, ...] = ()

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class RelationInstance:
    sentence_id: str
    arg1: int
    arg2: int
    label: str

    @property
    def instance_id(self) -> str:
        return f"{self.sentence_id}:{self.arg1}:{self.arg2}"


@dataclass
class Corpus:
    sentences: List[Sentence] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


@dataclass(frozen=True)
class FoldSplit:
    k: int
    assignments: Dict[str, int]

    def fold_of(self, instance_id: str) -> int:
        return self.assignments[instance_id]

    def partition(self, pairs: Sequence[Tuple[Sentence, RelationInstance]], fold: int):
        """Split (sentence, instance) pairs into (train, test) for one fold, keeping order."""
        train, test = [], []
        for pair in pairs:
            (test if self.assignments[pair[1].instance_id] == fold else train).append(pair)
        return train, test


def _parse_record(record: dict, line_no: int, seen_ids: set) -> Sentence:
    try:
        sentence_id = record["id"]
        raw_tokens = record["tokens"]
        raw_entities = record["entities"]
        raw_relations = record.get("relations", [])
    except (KeyError, TypeError) as e:
        raise MalformedRecordError(line_no, f"missing field {e}") from None

    if not isinstance(sentence_id, str) or not sentence_id:
        raise MalformedRecordError(line_no, "sentence id must be a non-empty string")
    if sentence_id in seen_ids:
        raise DuplicateSentenceError(line_no, f"duplicate sentence id '{sentence_id}'")

    try:
        tokens = tuple(Token(t["text"], t["pos"], t["chunk"]) for t in raw_tokens)
    except (KeyError, TypeError) as e:
        raise MalformedRecordError(line_no, f"bad token {e}") from None
    if any(not isinstance(t.text, str) or not t.text for t in tokens):
        raise MalformedRecordError(line_no, "token text must be a non-empty string")

    entities = []
    for raw in raw_entities:
        try:
            start, end, etype = raw["start"], raw["end"], raw["type"]
        except (KeyError, TypeError) as e:
            raise MalformedRecordError(line_no, f"bad entity {e}") from None
        if not isinstance(start, int) or not isinstance(end, int):
            raise MalformedRecordError(line_no, "entity offsets must be integers")
        if not 0 <= start <= end < len(tokens):
            raise SpanOutOfRangeError(
                line_no, f"span [{start}, {end}] outside sentence of {len(tokens)} tokens"
            )
        try:
            entity_type = EntityType(etype)
        except ValueError:
            raise UnknownEntityTypeError(line_no, f"unknown entity type '{etype}'") from None
        if entities:
            previous = entities[-1]
            if start <= previous.start:
                raise EntityOrderError(line_no, "entities must be ordered by start index")
            if start <= previous.end:
                raise OverlappingEntitiesError(
                    line_no, f"span [{start}, {end}] overlaps [{previous.start}, {previous.end}]"
                )
        entities.append(EntitySpan(start, end, entity_type))

    relations = []
    for raw in raw_relations:
        try:
            relation = GoldRelation(int(raw["arg1"]), int(raw["arg2"]), raw["label"])
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedRecordError(line_no, f"bad relation {e}") from None
        if relation.label not in GOLD_LABELS:
            raise UnknownRelationLabelError(line_no, f"unknown relation label '{relation.label}'")
        relations.append(relation)

    return Sentence(sentence_id, tokens, tuple(entities), tuple(relations))


def _numbered_lines(source: Union[TextIO, BinaryIO]) -> Iterator[Tuple[int, str]]:
    """Lines with 1-based numbers; byte lines are decoded as UTF-8 one at a time."""
    lines = iter(source)
    line_no = 0
    while True:
        line_no += 1
        try:
            line = next(lines)
        except StopIteration:
            return
        except UnicodeDecodeError as e:
            raise MalformedRecordError(line_no, f"invalid UTF-8 ({e.reason})") from None
        if isinstance(line, bytes):
            try:
                line = line.decode("utf-8")
            except UnicodeDecodeError as e:
                raise MalformedRecordError(line_no, f"invalid UTF-8 at byte {e.start} ({e.reason})") from None
        yield line_no, line


def parse_corpus(source: Union[TextIO, BinaryIO]) -> Corpus:
    """
    Parse a JSONL corpus stream, one sentence per line.

    The whole file is rejected on the first invalid record; the raised
    CorpusParseError names the line. Blank lines are skipped. Binary
    streams are decoded line by line so that bad bytes are reported with
    their line number.
    """
    sentences = []
    seen_ids = set()
    for line_no, line in _numbered_lines(source):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as e:
            raise MalformedRecordError(line_no, f"invalid JSON: {e.msg}") from None
        if not isinstance(record, dict):
            raise MalformedRecordError(line_no, "record must be a JSON object")
        sentence = _parse_record(record, line_no, seen_ids)
        seen_ids.add(sentence.id)
        sentences.append(sentence)

    logger.info(f"Parsed {len(sentences)} sentences")
    return Corpus(sentences)


def sentence_to_record(sentence: Sentence) -> dict:
    return {
        "id": sentence.id,
        "tokens": [{"text": t.text, "pos": t.pos_tag, "chunk": t.chunk_tag} for t in sentence.tokens],
        "entities": [{"start": e.start, "end": e.end, "type": e.etype.value} for e in sentence.entities],
        "relations": [{"arg1": r.arg1, "arg2": r.arg2, "label": r.label} for r in sentence.relations],
    }


def serialize_corpus(corpus: Corpus, stream: TextIO) -> None:
    """Write the canonical JSONL form: fixed key order, compact separators, one record per line."""
    for sentence in corpus.sentences:
        stream.write(json.dumps(sentence_to_record(sentence), ensure_ascii=False, separators=(",", ":")))
        stream.write("\n")


def generate_instances(sentence: Sentence, gold: Optional[Iterable[GoldRelation]] = None) -> List[RelationInstance]:
    """
    Create one instance per unordered entity pair of the sentence.

    Arguments are ordered by sentence position. Pairs without a gold
    relation are labeled NoRelation; pairs whose gold label is one of the
    removed classes are dropped.
    """
    if gold is None:
        gold = sentence.relations
    n_entities = len(sentence.entities)

    gold_by_pair = {}
    for relation in gold:
        if not (0 <= relation.arg1 < n_entities and 0 <= relation.arg2 < n_entities):
            raise InvalidRelationError(
                f"sentence '{sentence.id}': relation ({relation.arg1}, {relation.arg2}) "
                f"references a missing entity (sentence has {n_entities})"
            )
        if relation.arg1 == relation.arg2:
            raise InvalidRelationError(
                f"sentence '{sentence.id}': relation links entity {relation.arg1} to itself"
            )
        pair = tuple(sorted((relation.arg1, relation.arg2)))
        if gold_by_pair.get(pair, relation.label) != relation.label:
            raise InvalidRelationError(
                f"sentence '{sentence.id}': entities {pair[0]} and {pair[1]} carry two labels, "
                f"'{gold_by_pair[pair]}' and '{relation.label}'"
            )
        gold_by_pair[pair] = relation.label

    instances = []
    for i in range(n_entities):
        for j in range(i + 1, n_entities):
            label = gold_by_pair.get((i, j), RelationLabel.NoRelation.value)
            if label in DROPPED_LABELS:
                continue
            instances.append(RelationInstance(sentence.id, i, j, label))
    return instances


def filter_classes(instances: Iterable[RelationInstance]) -> List[RelationInstance]:
    """Keep only instances whose label is one of the six classifier labels."""
    allowed = {label.value for label in LABELS}
    return [instance for instance in instances if instance.label in allowed]


def build_instances(corpus: Corpus) -> List[Tuple[Sentence, RelationInstance]]:
    """All (sentence, instance) pairs of a corpus, in corpus order."""
    pairs = []
    for sentence in corpus.sentences:
        if len(sentence.entities) < 2:
            continue
        for instance in filter_classes(generate_instances(sentence)):
            pairs.append((sentence, instance))
    logger.info(f"Generated {len(pairs)} relation instances from {len(corpus)} sentences")
    return pairs


def corpus_statistics(instances: Iterable[RelationInstance]) -> Dict[str, int]:
    """Instance count per label, in class-id order."""
    counts = Counter(instance.label for instance in instances)
    return {label.value: counts.get(label.value, 0) for label in LABELS}


def split_folds(instances: Sequence[RelationInstance], k: int, seed: int) -> FoldSplit:
    """
    Assign every instance to one of k folds, stratified by label.

    Per-label fold counts differ by at most one; the seed fixes the shuffle.
    """
    if k < 2:
        raise ValueError(f"k must be at least 2, got {k}")
    if k > len(instances):
        raise ValueError(f"k={k} exceeds the number of instances ({len(instances)})")

    ids = [instance.instance_id for instance in instances]
    if len(set(ids)) != len(ids):
        raise ValueError("instance ids are not unique")
    labels = [instance.label for instance in instances]

    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    assignments = {}
    for fold, (_, test_index) in enumerate(splitter.split(np.zeros(len(labels)), labels)):
        for index in test_index:
            assignments[ids[index]] = fold
    return FoldSplit(k, assignments)
