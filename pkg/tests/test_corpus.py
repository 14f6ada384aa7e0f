import io
import json
import os
import sys
import unittest
from collections import Counter

# Add parent directory to path to import relex modules
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from relex.corpus import (
    EntityOrderError, GoldRelation, InvalidRelationError, MalformedRecordError, OverlappingEntitiesError,
    DuplicateSentenceError, RelationInstance, Sentence, SpanOutOfRangeError, UnknownEntityTypeError,
    UnknownRelationLabelError, build_instances, corpus_statistics, generate_instances, label_id,
    parse_corpus, serialize_corpus, split_folds,
)
from tests.fixtures import parse_records, s2_record, sentence_s1, sentence_s2


class TestParseCorpus(unittest.TestCase):
    """Tests for reading the JSONL corpus format"""

    def test_parse_s2(self):
        """A one-sentence file yields one sentence with three entities"""
        corpus = parse_records([s2_record()])
        self.assertEqual(len(corpus), 1)
        self.assertEqual(len(corpus.sentences[0].entities), 3)
        self.assertEqual(corpus.sentences[0].tokens[8].text, "G-CSF")

    def test_empty_file(self):
        """An empty stream yields an empty corpus"""
        self.assertEqual(len(parse_corpus(io.StringIO(""))), 0)

    def test_blank_lines_skipped(self):
        """Blank lines between records are ignored"""
        corpus = parse_corpus(io.StringIO("\n" + json.dumps(s2_record()) + "\n\n"))
        self.assertEqual(len(corpus), 1)

    def test_span_out_of_range(self):
        """An entity ending past the last token is rejected with its line number"""
        bad = s2_record()
        bad["entities"][2]["end"] = 10
        with self.assertRaises(SpanOutOfRangeError) as ctx:
            parse_records([sentence_record("ok"), bad])
        self.assertEqual(ctx.exception.line_no, 2)

    def test_overlapping_entities(self):
        """Overlapping spans are rejected"""
        bad = s2_record()
        bad["entities"][1] = {"start": 2, "end": 4, "type": "problem"}
        with self.assertRaises(OverlappingEntitiesError):
            parse_records([bad])

    def test_unordered_entities(self):
        """Entities must be listed by start position"""
        bad = s2_record()
        bad["entities"] = [bad["entities"][1], bad["entities"][0]]
        with self.assertRaises(EntityOrderError):
            parse_records([bad])

    def test_unknown_entity_type(self):
        """Entity types outside problem/treatment/test are rejected"""
        bad = s2_record()
        bad["entities"][0]["type"] = "drug"
        with self.assertRaises(UnknownEntityTypeError):
            parse_records([bad])

    def test_unknown_relation_label(self):
        """Relation labels outside the annotation scheme are rejected"""
        bad = s2_record()
        bad["relations"][0]["label"] = "Causes"
        with self.assertRaises(UnknownRelationLabelError):
            parse_records([bad])

    def test_duplicate_id(self):
        """Two records with the same id are rejected"""
        with self.assertRaises(DuplicateSentenceError):
            parse_records([s2_record(), s2_record()])

    def test_invalid_json(self):
        """A line that is not JSON is reported as malformed"""
        with self.assertRaises(MalformedRecordError) as ctx:
            parse_corpus(io.StringIO("{not json\n"))
        self.assertEqual(ctx.exception.line_no, 1)

    def test_invalid_utf8_names_line(self):
        """Undecodable bytes are a malformed record on their own line"""
        good = json.dumps(s2_record()).encode("utf-8")
        with self.assertRaises(MalformedRecordError) as ctx:
            parse_corpus(io.BytesIO(good + b"\n" + b"{\"id\": \"\xff\xfe\"}\n"))
        self.assertEqual(ctx.exception.line_no, 2)

    def test_bytes_stream(self):
        """A binary stream parses like the equivalent text"""
        corpus = parse_corpus(io.BytesIO((json.dumps(s2_record()) + "\n").encode("utf-8")))
        self.assertEqual(corpus.sentences[0].tokens[8].text, "G-CSF")

    def test_serialize_is_canonical(self):
        """Serializing a parsed canonical file reproduces it byte for byte"""
        out = io.StringIO()
        serialize_corpus(parse_records([s2_record()]), out)
        again = io.StringIO()
        serialize_corpus(parse_corpus(io.StringIO(out.getvalue())), again)
        self.assertEqual(out.getvalue(), again.getvalue())
        self.assertTrue(out.getvalue().startswith('{"id":"s2","tokens":'))


def sentence_record(sentence_id):
    record = s2_record()
    record["id"] = sentence_id
    return record


class TestGenerateInstances(unittest.TestCase):
    """Tests for pairing entities into relation instances"""

    def test_s2_labels(self):
        """Gold pairs keep their label, others are NoRelation, removed classes are dropped"""
        instances = generate_instances(sentence_s2())
        labels = {(i.arg1, i.arg2): i.label for i in instances}
        self.assertEqual(labels, {(0, 1): "TeRP", (0, 2): "NoRelation"})

    def test_pair_count_without_gold(self):
        """n entities give n(n-1)/2 instances when nothing is dropped"""
        instances = generate_instances(sentence_s2(), gold=[])
        self.assertEqual(len(instances), 3)
        self.assertTrue(all(i.label == "NoRelation" for i in instances))

    def test_arguments_ordered(self):
        """arg1 always precedes arg2 even when the gold relation is reversed"""
        instances = generate_instances(sentence_s2(), gold=[GoldRelation(1, 0, "TeRP")])
        self.assertIn(RelationInstance("s2", 0, 1, "TeRP"), instances)

    def test_single_entity(self):
        """A sentence with one entity has no instances"""
        s1 = sentence_s1()
        lone = Sentence(s1.id, s1.tokens, s1.entities[:1], ())
        self.assertEqual(generate_instances(lone), [])

    def test_missing_entity(self):
        """A relation that points past the entity list is invalid"""
        with self.assertRaises(InvalidRelationError):
            generate_instances(sentence_s1(), gold=[GoldRelation(0, 5, "TrAP")])

    def test_conflicting_labels(self):
        """One entity pair cannot carry two different gold labels"""
        with self.assertRaises(InvalidRelationError):
            generate_instances(sentence_s2(), gold=[GoldRelation(0, 1, "TeRP"), GoldRelation(1, 0, "TeCP")])

    def test_repeated_label_accepted(self):
        """The same relation listed twice is still one instance"""
        instances = generate_instances(sentence_s2(), gold=[GoldRelation(0, 1, "TeRP"), GoldRelation(0, 1, "TeRP")])
        self.assertEqual(len(instances), 3)

    def test_build_instances_and_statistics(self):
        """Corpus-level assembly keeps corpus order and counts labels in class order"""
        pairs = build_instances(parse_records([s2_record()]))
        self.assertEqual([i.instance_id for _, i in pairs], ["s2:0:1", "s2:0:2"])
        stats = corpus_statistics(i for _, i in pairs)
        self.assertEqual(list(stats), ["TeCP", "TrCP", "PIP", "TrAP", "TeRP", "NoRelation"])
        self.assertEqual(stats["TeRP"], 1)
        self.assertEqual(stats["NoRelation"], 1)

    def test_label_ids(self):
        """Label ids follow the fixed class order"""
        self.assertEqual(label_id("TeCP"), 0)
        self.assertEqual(label_id("NoRelation"), 5)


class TestSplitFolds(unittest.TestCase):
    """Tests for stratified fold assignment"""

    def setUp(self):
        labels = ["TeRP"] * 23 + ["TrAP"] * 17 + ["NoRelation"] * 60
        self.instances = [RelationInstance(f"s{i}", 0, 1, label) for i, label in enumerate(labels)]

    def test_partition(self):
        """Every instance lands in exactly one test fold"""
        split = split_folds(self.instances, 5, seed=3)
        seen = Counter(split.assignments.values())
        self.assertEqual(sum(seen.values()), 100)
        self.assertEqual(set(seen), set(range(5)))

    def test_stratified(self):
        """Per-class fold counts differ by at most one"""
        split = split_folds(self.instances, 5, seed=3)
        for label in ("TeRP", "TrAP", "NoRelation"):
            counts = Counter(split.fold_of(i.instance_id) for i in self.instances if i.label == label)
            self.assertLessEqual(max(counts.values()) - min(counts.values()), 1)

    def test_deterministic(self):
        """Same seed, same assignment"""
        self.assertEqual(split_folds(self.instances, 5, 11).assignments, split_folds(self.instances, 5, 11).assignments)

    def test_seed_changes_assignment(self):
        """Different seeds shuffle the strata differently"""
        self.assertNotEqual(split_folds(self.instances, 5, 1).assignments, split_folds(self.instances, 5, 2).assignments)

    def test_too_many_folds(self):
        """k larger than the instance count is rejected"""
        with self.assertRaises(ValueError):
            split_folds(self.instances[:3], 5, 0)


if __name__ == '__main__':
    unittest.main()
