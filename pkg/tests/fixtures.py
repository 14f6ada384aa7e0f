"""Shared sentences and small corpora for the test modules."""
import io
import json

from relex.corpus import Corpus, EntitySpan, EntityType, GoldRelation, Sentence, Token, parse_corpus

S1_TEXT = "He was given Lexix to prevent him from congestive heart failure ."
S1_POS = ["PRP", "VBD", "VBN", "NNP", "TO", "VB", "PRP", "IN", "JJ", "NN", "NN", "."]
S1_CHUNK = ["B-NP", "B-VP", "I-VP", "B-NP", "B-VP", "I-VP", "B-NP", "B-PP", "B-NP", "I-NP", "I-NP", "O"]

S2_TEXT = "Her white count remained elevated despite discontinuing her G-CSF ."
S2_POS = ["PRP$", "JJ", "NN", "VBD", "JJ", "IN", "VBG", "PRP$", "NN", "."]
S2_CHUNK = ["B-NP", "I-NP", "I-NP", "B-VP", "B-ADJP", "B-PP", "B-VP", "B-NP", "I-NP", "O"]


def _tokens(text, pos, chunk):
    return tuple(Token(w, p, c) for w, p, c in zip(text.split(), pos, chunk))


def sentence_s1() -> Sentence:
    """Lexix (treatment, token 3) prevents congestive heart failure (problem, tokens 8-10)."""
    return Sentence(
        "s1",
        _tokens(S1_TEXT, S1_POS, S1_CHUNK),
        (EntitySpan(3, 3, EntityType.TREATMENT), EntitySpan(8, 10, EntityType.PROBLEM)),
        (GoldRelation(0, 1, "TrAP"),),
    )


def sentence_s2() -> Sentence:
    """Her white count (test 0-2), elevated (problem 4), her G-CSF (treatment 7-8)."""
    return Sentence(
        "s2",
        _tokens(S2_TEXT, S2_POS, S2_CHUNK),
        (
            EntitySpan(0, 2, EntityType.TEST),
            EntitySpan(4, 4, EntityType.PROBLEM),
            EntitySpan(7, 8, EntityType.TREATMENT),
        ),
        (GoldRelation(0, 1, "TeRP"), GoldRelation(1, 2, "TrNAP")),
    )


def s2_record() -> dict:
    return {
        "id": "s2",
        "tokens": [{"text": w, "pos": p, "chunk": c} for w, p, c in zip(S2_TEXT.split(), S2_POS, S2_CHUNK)],
        "entities": [
            {"start": 0, "end": 2, "type": "test"},
            {"start": 4, "end": 4, "type": "problem"},
            {"start": 7, "end": 8, "type": "treatment"},
        ],
        "relations": [{"arg1": 0, "arg2": 1, "label": "TeRP"}, {"arg1": 1, "arg2": 2, "label": "TrNAP"}],
    }


def parse_records(records) -> Corpus:
    return parse_corpus(io.StringIO("".join(json.dumps(r) + "\n" for r in records)))
