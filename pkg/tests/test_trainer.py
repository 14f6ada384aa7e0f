import math
import os
import sys
import unittest
from dataclasses import replace

import numpy as np

# Add parent directory to path to import relex modules
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from relex.corpus import build_instances
from relex.features import FEATURE_ORDER, VocabularyMismatchError, build_vocabularies, encode_all
from relex.network import instance_loss
from relex.synthetic import generate_trigger_corpus
from relex.trainer import (
    NO_RELATION_ID, ConfigError, TrainConfig, Trainer, predict_labels, render_lengths, subsample_no_relation, train,
)


def synthetic_set(n, seed=0):
    pairs = build_instances(generate_trigger_corpus(n, seed=seed))
    vocabs = build_vocabularies(pairs)
    return encode_all(pairs, vocabs), vocabs


class TestTrainConfig(unittest.TestCase):
    """Tests for configuration validation"""

    def test_defaults_are_valid(self):
        """The published settings pass validation"""
        config = TrainConfig().validate()
        self.assertEqual(config.filter_lengths, (4, 6))
        self.assertEqual(config.filters_per_length, 100)
        self.assertEqual(config.dropout_keep, 0.5)

    def test_invalid_settings(self):
        """Each broken setting is a ConfigError"""
        for broken in (
            TrainConfig(filter_lengths=()),
            TrainConfig(filter_lengths=(3, 3)),
            TrainConfig(batch_size=0),
            TrainConfig(dropout_keep=0.0),
            TrainConfig(lr=-1.0),
            TrainConfig(features=("word", "lemma")),
            TrainConfig(norel_ratio=1.5),
        ):
            with self.assertRaises(ConfigError):
                broken.validate()

    def test_word_and_type_always_on(self):
        """Disabling word or type has no effect"""
        kinds = TrainConfig(features=("pos",)).feature_kinds()
        self.assertEqual([k.value for k in kinds], ["word", "pos", "type"])

    def test_render_lengths(self):
        """Filter sets print like [4,6]"""
        self.assertEqual(render_lengths((4, 6)), "[4,6]")


class TestTrainer(unittest.TestCase):
    """Tests for the minibatch training loop"""

    def setUp(self):
        self.instances, self.vocabs = synthetic_set(23)
        self.config = TrainConfig(
            filter_lengths=(2, 3), filters_per_length=8, batch_size=5, epochs=2, seed=3, word_dim=10, feature_dim=3,
        )

    def test_step_count(self):
        """An epoch over N instances takes ceil(N/B) steps"""
        _, history = train(self.config, self.instances, vocabs=self.vocabs)
        self.assertEqual(history.steps, 2 * math.ceil(23 / 5))
        self.assertEqual(len(history.records), 2)

    def test_deterministic(self):
        """The same seed gives bit-identical parameters and logs"""
        first, history_a = train(self.config, self.instances, vocabs=self.vocabs)
        second, history_b = train(self.config, self.instances, vocabs=self.vocabs)
        for name, array in first.named_arrays().items():
            np.testing.assert_array_equal(array, second.named_arrays()[name])
        self.assertEqual(history_a.to_tsv(), history_b.to_tsv())

    def test_loss_decreases_after_one_step(self):
        """A small Adam step lowers the loss of the batch it was computed on"""
        config = TrainConfig(
            filter_lengths=(2, 3), filters_per_length=8, dropout_keep=1.0, lr=1e-4, seed=5, word_dim=10, feature_dim=3,
        )
        trainer = Trainer(config, self.vocabs)
        batch = self.instances[:8]
        before = sum(instance_loss(i, trainer.params) for i in batch)
        trainer.train_batch(batch)
        after = sum(instance_loss(i, trainer.params) for i in batch)
        self.assertLess(after, before)

    def test_every_embedding_matrix_updated(self):
        """One step with nonzero loss moves all six embedding matrices"""
        config = replace(self.config, dropout_keep=1.0)
        trainer = Trainer(config, self.vocabs)
        before = {kind: trainer.params.embeddings[kind].values.copy() for kind in FEATURE_ORDER}
        loss, _ = trainer.train_batch(self.instances[:10])
        self.assertGreater(loss, 0.0)
        for kind in FEATURE_ORDER:
            self.assertFalse(np.array_equal(before[kind], trainer.params.embeddings[kind].values), kind.value)

    def test_overfit_small_set(self):
        """Twenty separable instances are fit perfectly within 200 epochs"""
        instances, vocabs = synthetic_set(20, seed=1)
        config = TrainConfig(
            filter_lengths=(2, 3), filters_per_length=20, dropout_keep=1.0, batch_size=5, epochs=200, seed=0,
        )
        params, _ = train(config, instances, vocabs=vocabs)
        self.assertEqual(predict_labels(params, instances), [i.label_id for i in instances])

    def test_dev_scores_and_early_stopping(self):
        """With a dev set every epoch is scored and patience stops training"""
        config = TrainConfig(
            filter_lengths=(2,), filters_per_length=4, batch_size=5, epochs=30, patience=1, seed=2,
            word_dim=10, feature_dim=3, lr=1e-6,
        )
        _, history = train(config, self.instances, self.instances[:10], vocabs=self.vocabs)
        self.assertTrue(all(r.dev_macro_f1 is not None for r in history.records))
        self.assertLess(len(history.records), 30)
        self.assertIsNotNone(history.best_epoch)

    def test_foreign_vocabulary(self):
        """Predicting instances from another vocabulary set is refused"""
        params, _ = train(self.config, self.instances, vocabs=self.vocabs)
        others = [replace(i, vocab_fingerprint="0" * 64) for i in self.instances[:3]]
        with self.assertRaises(VocabularyMismatchError):
            predict_labels(params, others)

    def test_empty_training_set(self):
        """Training needs at least one instance"""
        with self.assertRaises(ValueError):
            train(self.config, [], vocabs=self.vocabs)

    def test_subsample_no_relation(self):
        """Subsampling keeps every relation instance and the requested share of NoRelation"""
        kept = subsample_no_relation(self.instances, 0.5, np.random.default_rng(0))
        negatives = [i for i in self.instances if i.label_id == NO_RELATION_ID]
        self.assertEqual(
            len([i for i in kept if i.label_id == NO_RELATION_ID]), int(round(0.5 * len(negatives)))
        )
        self.assertEqual(
            [i.instance_id for i in kept if i.label_id != NO_RELATION_ID],
            [i.instance_id for i in self.instances if i.label_id != NO_RELATION_ID],
        )


if __name__ == '__main__':
    unittest.main()
