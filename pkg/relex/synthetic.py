"""
Synthetic clinical-style corpora with a known labeling rule.

The relation between two consecutive entities is fixed by the trigger word
between them together with the entity types; NoRelation links use neutral
connectives. With three entities per sentence the outer pair is always
NoRelation, so which trigger belongs to which pair is only recoverable from
token positions.
"""
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from relex.corpus import (
    LABELS, Corpus, EntitySpan, EntityType, GoldRelation, RelationLabel, Sentence, Token,
)

logger = logging.getLogger(__name__)

TRIGGERS: Dict[RelationLabel, Tuple[str, ...]] = {
    RelationLabel.TeCP: ("evaluate", "investigate", "assess"),
    RelationLabel.TrCP: ("caused", "induced", "worsened"),
    RelationLabel.PIP: ("with", "accompanying", "complicating"),
    RelationLabel.TrAP: ("treats", "controls", "relieves"),
    RelationLabel.TeRP: ("revealed", "showed", "demonstrated"),
    RelationLabel.NoRelation: ("and", "then", "also"),
}

# The non-problem argument type of each relation class.
PARTNER_TYPE = {
    RelationLabel.TeCP: EntityType.TEST,
    RelationLabel.TrCP: EntityType.TREATMENT,
    RelationLabel.PIP: EntityType.PROBLEM,
    RelationLabel.TrAP: EntityType.TREATMENT,
    RelationLabel.TeRP: EntityType.TEST,
}

ENTITY_PHRASES = {
    EntityType.PROBLEM: (
        ("chest", "pain"), ("fever",), ("congestive", "heart", "failure"), ("anemia",),
        ("edema",), ("hypertension",), ("pneumonia",), ("elevated",),
    ),
    EntityType.TREATMENT: (
        ("lasix",), ("aspirin",), ("her", "g-csf"), ("heparin",), ("insulin",), ("iv", "antibiotics"),
    ),
    EntityType.TEST: (
        ("her", "white", "count"), ("ct", "scan"), ("chest", "x-ray"), ("ekg",), ("blood", "culture"),
    ),
}

FILLERS = (
    ("the", "DT"), ("patient", "NN"), ("was", "VBD"), ("noted", "VBN"), ("on", "IN"),
    ("admission", "NN"), ("today", "NN"), ("of", "IN"), ("a", "DT"), ("history", "NN"),
    ("he", "PRP"), ("she", "PRP"), ("given", "VBN"), ("remained", "VBD"),
)


def _trigger_tag(word: str) -> str:
    return {"with": "IN", "and": "CC", "then": "RB", "also": "RB"}.get(word, "VBD")


class _SentenceBuilder:
    def __init__(self):
        self.tokens: List[Token] = []
        self.entities: List[EntitySpan] = []

    def filler(self, rng: np.random.Generator, low: int, high: int) -> None:
        for _ in range(int(rng.integers(low, high + 1))):
            word, tag = FILLERS[int(rng.integers(len(FILLERS)))]
            self.tokens.append(Token(word, tag, "O"))

    def word(self, text: str, pos: str, chunk: str = "O") -> None:
        self.tokens.append(Token(text, pos, chunk))

    def entity(self, rng: np.random.Generator, etype: EntityType) -> None:
        phrases = ENTITY_PHRASES[etype]
        phrase = phrases[int(rng.integers(len(phrases)))]
        start = len(self.tokens)
        for i, text in enumerate(phrase):
            self.tokens.append(Token(text, "NN", "B-NP" if i == 0 else "I-NP"))
        self.entities.append(EntitySpan(start, len(self.tokens) - 1, etype))


def _pick(rng: np.random.Generator, options: Sequence):
    return options[int(rng.integers(len(options)))]


def _pair_types(rng: np.random.Generator, label: RelationLabel) -> Tuple[EntityType, EntityType]:
    if label is RelationLabel.NoRelation:
        return _pick(rng, tuple(EntityType)), _pick(rng, tuple(EntityType))
    partner = PARTNER_TYPE[label]
    return (partner, EntityType.PROBLEM) if rng.random() < 0.5 else (EntityType.PROBLEM, partner)


def _distractor(rng: np.random.Generator, label: RelationLabel) -> str:
    others = [other for other in LABELS if other is not label]
    return _pick(rng, TRIGGERS[_pick(rng, others)])


def _balanced_labels(rng: np.random.Generator, count: int) -> List[RelationLabel]:
    labels = [LABELS[i % len(LABELS)] for i in range(count)]
    return [labels[i] for i in rng.permutation(count)]


def generate_trigger_corpus(
    n_instances: int = 2500,
    seed: int = 0,
    entities_per_sentence: int = 2,
    distractors: bool = True,
) -> Corpus:
    """
    Generate a corpus whose instance labels follow the trigger-word rule.

    With two entities per sentence there is one instance per sentence and
    the six labels are balanced. With three, every sentence yields three
    instances (two trigger links and one outer NoRelation pair), so the
    instance count is rounded up to a multiple of three. Distractors put a
    trigger of another class outside the argument spans.
    """
    if entities_per_sentence not in (2, 3):
        raise ValueError("entities_per_sentence must be 2 or 3")
    rng = np.random.default_rng(seed)

    sentences = []
    if entities_per_sentence == 2:
        for index, label in enumerate(_balanced_labels(rng, n_instances)):
            first, second = _pair_types(rng, label)
            builder = _SentenceBuilder()
            builder.filler(rng, 0, 3)
            if distractors and rng.random() < 0.5:
                word = _distractor(rng, label)
                builder.word(word, _trigger_tag(word))
                builder.filler(rng, 0, 1)
            builder.entity(rng, first)
            builder.filler(rng, 0, 1)
            trigger = _pick(rng, TRIGGERS[label])
            builder.word(trigger, _trigger_tag(trigger), "B-VP")
            builder.filler(rng, 0, 1)
            builder.entity(rng, second)
            builder.filler(rng, 0, 2)
            if distractors and rng.random() < 0.5:
                word = _distractor(rng, label)
                builder.word(word, _trigger_tag(word))
            builder.word(".", ".")
            relations = () if label is RelationLabel.NoRelation else (GoldRelation(0, 1, label.value),)
            sentences.append(
                Sentence(f"syn{index:05d}", tuple(builder.tokens), tuple(builder.entities), relations)
            )
    else:
        n_sentences = -(-n_instances // 3)
        links = _balanced_labels(rng, 2 * n_sentences)
        for index in range(n_sentences):
            left, right = links[2 * index], links[2 * index + 1]
            types = [
                _pair_types(rng, left)[0] if left is RelationLabel.NoRelation else PARTNER_TYPE[left],
                EntityType.PROBLEM,
                _pair_types(rng, right)[1] if right is RelationLabel.NoRelation else PARTNER_TYPE[right],
            ]
            builder = _SentenceBuilder()
            builder.filler(rng, 0, 2)
            builder.entity(rng, types[0])
            for label, etype in ((left, types[1]), (right, types[2])):
                builder.filler(rng, 0, 1)
                trigger = _pick(rng, TRIGGERS[label])
                builder.word(trigger, _trigger_tag(trigger), "B-VP")
                builder.filler(rng, 0, 1)
                builder.entity(rng, etype)
            builder.filler(rng, 0, 2)
            builder.word(".", ".")
            relations = tuple(
                GoldRelation(i, i + 1, label.value)
                for i, label in enumerate((left, right))
                if label is not RelationLabel.NoRelation
            )
            sentences.append(
                Sentence(f"syn{index:05d}", tuple(builder.tokens), tuple(builder.entities), relations)
            )

    logger.info(f"Generated synthetic corpus: {len(sentences)} sentences, {entities_per_sentence} entities each")
    return Corpus(sentences)


def vocabulary_words() -> List[str]:
    words = set(word for word, _ in FILLERS) | {"."}
    for triggers in TRIGGERS.values():
        words.update(triggers)
    for phrases in ENTITY_PHRASES.values():
        for phrase in phrases:
            words.update(phrase)
    return sorted(words)


def write_word_vectors(path: str, dim: int = 50, seed: int = 0, words: Optional[Sequence[str]] = None) -> None:
    """
    Write word2vec text vectors for the synthetic vocabulary. Triggers of
    one class share a centroid so that pretrained vectors carry signal.
    """
    rng = np.random.default_rng(seed)
    words = list(words) if words is not None else vocabulary_words()
    centroids = {label: rng.normal(0.0, 0.2, dim) for label in LABELS}
    trigger_class = {word: label for label, triggers in TRIGGERS.items() for word in triggers}
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{len(words)} {dim}\n")
        for word in words:
            base = centroids[trigger_class[word]] if word in trigger_class else np.zeros(dim)
            vector = base + rng.normal(0.0, 0.05, dim)
            f.write(word + " " + " ".join(f"{v:.6f}" for v in vector) + "\n")
