import json
import os
import sys
import tempfile
import unittest
from contextlib import redirect_stderr, redirect_stdout
from io import StringIO
from unittest.mock import patch

# Add parent directory to path to import relex modules
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from relex.cli import (
    EXIT_CONFIG, EXIT_INVALID_DATA, EXIT_MISSING_FILE, EXIT_OK, EXIT_USAGE, run,
)
from relex.config import resolve_config
from relex.corpus import serialize_corpus
from relex.synthetic import generate_trigger_corpus

FAST = ["--filters", "2", "--num-filters", "4", "--epochs", "1", "--batch-size", "10", "--folds", "3"]


class TestCli(unittest.TestCase):
    """Tests for the command-line entry point"""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.corpus = os.path.join(self.tmp.name, "corpus.jsonl")
        with open(self.corpus, "w", encoding="utf-8") as f:
            serialize_corpus(generate_trigger_corpus(60, seed=2), f)

    def tearDown(self):
        self.tmp.cleanup()

    def out(self, name):
        return os.path.join(self.tmp.name, name)

    def read(self, *parts):
        with open(os.path.join(self.tmp.name, *parts), encoding="utf-8") as f:
            return f.read()

    def test_help(self):
        """--help prints usage and exits cleanly"""
        with redirect_stdout(StringIO()) as stdout:
            self.assertEqual(run(["--help"]), EXIT_OK)
        self.assertIn("usage", stdout.getvalue())

    def test_unknown_flag(self):
        """Unknown flags are usage errors"""
        with redirect_stderr(StringIO()):
            self.assertEqual(run(["cv", "--corpus", self.corpus, "--bogus"]), EXIT_USAGE)

    def test_missing_corpus(self):
        """A missing corpus path is reported by name"""
        missing = self.out("nope.jsonl")
        with self.assertLogs("relex.cli", level="ERROR") as logs:
            status = run(["cv", "--corpus", missing, "--out", self.out("run")])
        self.assertEqual(status, EXIT_MISSING_FILE)
        self.assertIn(missing, logs.output[0])

    def test_invalid_config(self):
        """Out-of-range settings are configuration errors"""
        with self.assertLogs("relex.cli", level="ERROR"):
            status = run(["cv", "--corpus", self.corpus, "--dropout", "1.5", "--out", self.out("run")])
        self.assertEqual(status, EXIT_CONFIG)

    def test_unknown_config_key(self):
        """Config files may only use known setting names"""
        config = self.out("config.json")
        with open(config, "w", encoding="utf-8") as f:
            json.dump({"filters": "4,6", "learning_rate": 0.1}, f)
        with self.assertLogs("relex.cli", level="ERROR"):
            status = run(["cv", "--corpus", self.corpus, "--config", config, "--out", self.out("run")])
        self.assertEqual(status, EXIT_CONFIG)

    def test_invalid_corpus(self):
        """A broken corpus record is an input-data error"""
        broken = self.out("broken.jsonl")
        with open(broken, "w", encoding="utf-8") as f:
            f.write('{"id": "x", "tokens": []}\n')
        with self.assertLogs("relex.cli", level="ERROR"):
            status = run(["prepare", "--corpus", broken, "--out", self.out("run")])
        self.assertEqual(status, EXIT_INVALID_DATA)

    def test_undecodable_corpus(self):
        """Invalid UTF-8 in the corpus is an input-data error naming the line"""
        broken = self.out("latin1.jsonl")
        with open(self.corpus, "rb") as src, open(broken, "wb") as dst:
            dst.write(src.readline())
            dst.write(b'{"id": "\xff\xfe"}\n')
        with self.assertLogs("relex.cli", level="ERROR") as logs:
            status = run(["prepare", "--corpus", broken, "--out", self.out("run")])
        self.assertEqual(status, EXIT_INVALID_DATA)
        self.assertIn("line 2", logs.output[0])

    def test_prepare(self):
        """prepare writes vocabularies, encoded instances and statistics"""
        self.assertEqual(run(["prepare", "--corpus", self.corpus, "--out", self.out("prep")]), EXIT_OK)
        self.assertEqual(len(self.read("prep", "instances.jsonl").splitlines()), 60)
        self.assertTrue(self.read("prep", "statistics.tsv").startswith("label\tinstances\n"))
        self.assertIn('"features"', self.read("prep", "vocab.json"))

    def test_cv_reproducible_from_run_json(self):
        """Re-running from run.json reproduces the report bit for bit"""
        first = ["cv", "--corpus", self.corpus, "--seed", "7", "--out", self.out("a")] + FAST
        self.assertEqual(run(first), EXIT_OK)
        run_json = os.path.join(self.tmp.name, "a", "run.json")
        self.assertEqual(json.loads(self.read("a", "run.json"))["seed"], 7)
        self.assertEqual(run(["cv", "--config", run_json, "--out", self.out("b")]), EXIT_OK)
        self.assertEqual(self.read("a", "cv_report.tsv"), self.read("b", "cv_report.tsv"))
        self.assertIn("TeCP", self.read("a", "class_wise.txt"))
        self.assertTrue(os.path.exists(self.out(os.path.join("a", "fold3_train_log.tsv"))))

    def test_train_then_eval(self):
        """A trained checkpoint can be evaluated on a corpus"""
        self.assertEqual(run(["train", "--corpus", self.corpus, "--out", self.out("model")] + FAST), EXIT_OK)
        self.assertTrue(self.read("model", "train_log.tsv").startswith("epoch\t"))
        model = os.path.join(self.tmp.name, "model", "model.npz")
        self.assertEqual(run(["eval", "--corpus", self.corpus, "--model", model, "--out", self.out("eval")]), EXIT_OK)
        report = json.loads(self.read("eval", "report.json"))
        self.assertEqual(report[0]["config"], "model.npz")
        trained = resolve_config("train", {}, os.path.join(self.tmp.name, "model", "run.json"))
        self.assertEqual(report[0]["fingerprint"], trained.train_config().fingerprint())
        self.assertIn(report[0]["fingerprint"], self.read("eval", "report.tsv"))

    def test_eval_requires_model(self):
        """eval without --model is a configuration error"""
        with self.assertLogs("relex.cli", level="ERROR"):
            status = run(["eval", "--corpus", self.corpus, "--out", self.out("eval")])
        self.assertEqual(status, EXIT_CONFIG)

    @patch("relex.cli.sweep_filters", return_value=[])
    def test_sweep_length_sets(self, mock_sweep):
        """--length-sets reaches the sweep as integer tuples"""
        status = run(["sweep", "--corpus", self.corpus, "--length-sets", "3;4,6", "--out", self.out("sweep")])
        self.assertEqual(status, EXIT_OK)
        self.assertEqual(mock_sweep.call_args[0][2], ((3,), (4, 6)))
        self.assertTrue(os.path.exists(self.out(os.path.join("sweep", "sweep.txt"))))

    def test_baseline_dump_sparse(self):
        """The baseline writes its table and, on request, the sparse vectors"""
        status = run([
            "baseline", "--corpus", self.corpus, "--costs", "0.1", "--dump-sparse", "--out", self.out("svm"),
        ] + FAST)
        self.assertEqual(status, EXIT_OK)
        self.assertIn("SVM (Linear, C=0.1)", self.read("svm", "baseline.txt"))
        self.assertEqual(len(self.read("svm", "features.svm").splitlines()), 60)


if __name__ == '__main__':
    unittest.main()
