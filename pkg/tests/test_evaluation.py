import os
import sys
import unittest
from collections import Counter

import pytest

# Add parent directory to path to import relex modules
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from relex.corpus import build_instances, label_id
from relex.evaluation import ablate_features, compare_baseline, cross_validate, run_folds, sweep_filters
from relex.svm_baseline import svm_fingerprint
from relex.synthetic import generate_trigger_corpus
from relex.trainer import TrainConfig

SMALL_CNN = TrainConfig(
    filter_lengths=(2, 3), filters_per_length=20, batch_size=20, epochs=10, lr=5e-3, word_dim=20, seed=1,
)


class TestRunFolds(unittest.TestCase):
    """Tests for the fold bookkeeping shared by all classifiers"""

    def setUp(self):
        self.pairs = build_instances(generate_trigger_corpus(100, seed=5))
        self.tested = Counter()

    def oracle(self, train_pairs, test_pairs, fold):
        self.tested.update(i.instance_id for _, i in test_pairs)
        return [label_id(i.label) for _, i in test_pairs]

    def test_every_instance_tested_once(self):
        """Five folds cover each instance exactly once"""
        result = run_folds(self.pairs, 5, seed=0, fit_predict=self.oracle)
        self.assertEqual(len(self.tested), len(self.pairs))
        self.assertEqual(set(self.tested.values()), {1})
        self.assertEqual([r.fold for r in result.folds], [0, 1, 2, 3, 4])

    def test_perfect_predictions(self):
        """Gold predictions average to 100 and the mean row is labeled"""
        result = run_folds(self.pairs, 5, seed=0, fit_predict=self.oracle, name="oracle")
        self.assertAlmostEqual(result.average.macro.f1, 100.0)
        self.assertEqual(result.average.fold_name, "mean")
        self.assertEqual(len(result.reports()), 6)

    def test_parallel_matches_serial(self):
        """Running folds on threads gives the same reports"""
        serial = run_folds(self.pairs, 5, seed=4, fit_predict=self.oracle)
        parallel = run_folds(self.pairs, 5, seed=4, fit_predict=self.oracle, jobs=3)
        self.assertEqual(serial.folds, parallel.folds)


class TestCrossValidation(unittest.TestCase):
    """End-to-end runs on synthetic trigger-word corpora"""

    def test_cnn_learns_trigger_rule(self):
        """The CNN recovers the trigger rule under cross-validation"""
        pairs = build_instances(generate_trigger_corpus(600, seed=0, distractors=False))
        result = cross_validate(pairs, SMALL_CNN, k=5)
        self.assertGreaterEqual(result.average.macro.f1, 95.0)
        self.assertEqual(sorted(result.histories), [0, 1, 2, 3, 4])
        self.assertEqual(result.average.config, "[2,3]")
        self.assertEqual({r.fingerprint for r in result.reports()}, {SMALL_CNN.fingerprint()})

    def test_deterministic_under_jobs(self):
        """Fold-level parallelism does not change the reports"""
        pairs = build_instances(generate_trigger_corpus(60, seed=3))
        config = TrainConfig(filter_lengths=(2,), filters_per_length=4, epochs=1, batch_size=10, word_dim=8)
        serial = cross_validate(pairs, config, k=3, seed=2)
        parallel = cross_validate(pairs, config, k=3, seed=2, jobs=3)
        self.assertEqual(serial.folds, parallel.folds)

    def test_sweep_keys(self):
        """Each filter set becomes one keyed row"""
        pairs = build_instances(generate_trigger_corpus(60, seed=3))
        config = TrainConfig(filters_per_length=4, epochs=1, batch_size=10, word_dim=8)
        rows = sweep_filters(pairs, config, [(3,), (4, 6)], k=3)
        self.assertEqual([key for key, _ in rows], ["[3]", "[4,6]"])

    def test_position_features_help(self):
        """Adding positions lifts macro-F1 well above word and type alone"""
        pairs = build_instances(generate_trigger_corpus(450, seed=7, entities_per_sentence=3))
        rows = dict(ablate_features(pairs, SMALL_CNN, k=3))
        self.assertEqual(list(rows), ["RV + T", "RV +(P1+P2)", "RV +(PoS+Chunk)"])
        gain = rows["RV +(P1+P2)"].average.macro.f1 - rows["RV + T"].average.macro.f1
        self.assertGreaterEqual(gain, 5.0)

    def test_svm_baseline(self):
        """The template SVM reaches 85 macro-F1 on the trigger corpus"""
        pairs = build_instances(generate_trigger_corpus(600, seed=4))
        rows = compare_baseline(pairs, SMALL_CNN, costs=(1.0,), k=3)
        self.assertEqual(rows[0][0], "SVM (Linear, C=1)")
        self.assertEqual(rows[0][1].average.fingerprint, svm_fingerprint(1.0, SMALL_CNN.seed))
        self.assertGreaterEqual(rows[0][1].average.macro.f1, 85.0)


@pytest.mark.slow
class TestPublishedSetting(unittest.TestCase):
    """The full-size synthetic run with the published CNN settings"""

    @classmethod
    def setUpClass(cls):
        cls.pairs = build_instances(generate_trigger_corpus(2500, seed=0))
        cls.config = TrainConfig(filter_lengths=(4, 6), filters_per_length=100, dropout_keep=0.5, seed=0)

    def test_cnn_and_svm_on_2500_instances(self):
        """Five-fold CV: the CNN reaches 95 macro-F1 and the SVM 85 on the same folds"""
        self.assertEqual(len(self.pairs), 2500)
        rows = dict(compare_baseline(self.pairs, self.config, costs=(1.0,), k=5, with_cnn=True, jobs=5))
        cnn = rows["CNN (FL=[4,6])"]
        svm = rows["SVM (Linear, C=1)"]
        self.assertEqual(cnn.split.assignments, svm.split.assignments)
        self.assertGreaterEqual(cnn.average.macro.f1, 95.0)
        self.assertGreaterEqual(svm.average.macro.f1, 85.0)


if __name__ == '__main__':
    unittest.main()
