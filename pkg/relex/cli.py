"""
Command-line interface: prepare, train, eval, cv, sweep, ablate, baseline.

Every command writes its outputs under --out together with run.json, the
fully resolved configuration. Passing that file back through --config
reproduces the run.
"""
import argparse
import json
import logging
import os
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import pandas as pd

from relex.checkpoint import CheckpointMismatchError, load_checkpoint, save_checkpoint
from relex.config import MissingFileError, RunConfig, resolve_config
from relex.corpus import (
    Corpus, CorpusParseError, InvalidRelationError, RelationInstance, Sentence,
    build_instances, corpus_statistics, label_id, parse_corpus,
)
from relex.embeddings import VectorFileError
from relex.evaluation import CrossValidationResult, ablate_features, compare_baseline, cross_validate, sweep_filters
from relex.features import VocabularyMismatchError, VocabularySet, build_vocabularies, encode_all
from relex.metrics import (
    class_wise_table, compute_metrics, render_table, write_reports_json, write_reports_tsv,
)
from relex.svm_baseline import FeatureSpace, dump_sparse, template_features
from relex.trainer import ConfigError, Trainer, TrainingDivergedError, predict_labels

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_CONFIG = 4
EXIT_INVALID_DATA = 5

TRAIN_LOG_HEADER = "epoch\tmean_loss\ttrain_acc\tdev_macro_f1\n"

DATA_ERRORS = (
    CorpusParseError, InvalidRelationError, VectorFileError, CheckpointMismatchError,
    VocabularyMismatchError, TrainingDivergedError,
)

Pair = Tuple[Sentence, RelationInstance]


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file mirroring flag names; flags given here win over it")
    common.add_argument("--corpus", help="Annotated corpus (JSON lines)")
    common.add_argument("--embeddings", help="Pretrained word vectors (word2vec text format)")
    common.add_argument("--filters", help="Comma-separated filter widths (default: 4,6)")
    common.add_argument("--num-filters", help="Filters per width (default: 100)")
    common.add_argument("--dropout", help="Dropout keep probability during training (default: 0.5)")
    common.add_argument("--batch-size", help="Minibatch size (default: 50)")
    common.add_argument("--epochs", help="Training epochs (default: 20)")
    common.add_argument("--lr", help="Adam learning rate (default: 0.001)")
    common.add_argument("--seed", help="Seed for folds, initialization, shuffling and dropout (default: 0)")
    common.add_argument("--out", help="Output directory (default: runs)")
    common.add_argument("--jobs", help="Folds evaluated in parallel (default: 1)")
    common.add_argument("--folds", help="Number of cross-validation folds (default: 5)")
    common.add_argument("--patience", help="Early-stopping patience in epochs on dev macro-F1")
    common.add_argument("--norel-ratio", help="Fraction of NoRelation training instances to keep")
    common.add_argument("--features", help="Comma-separated active features (word and type are always on)")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relex",
        description="Convolutional relation extraction for clinical text: train, evaluate and compare",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python main.py prepare --corpus train.jsonl --out runs/prep
  python main.py cv --corpus train.jsonl --filters 4,6 --seed 7 --out runs/cv
  python main.py sweep --corpus train.jsonl --length-sets "3;4;4,6" --jobs 5
  python main.py ablate --corpus train.jsonl --embeddings vectors.txt
  python main.py baseline --corpus train.jsonl --costs 0.01,0.1,1 --with-cnn
  python main.py train --corpus train.jsonl --out runs/model
  python main.py eval --corpus test.jsonl --model runs/model/model.npz
        """,
    )
    common = _common_flags()
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True

    commands.add_parser("prepare", parents=[common], help="Encode a corpus and write vocabularies")
    train = commands.add_parser("train", parents=[common], help="Train one model and save a checkpoint")
    train.add_argument("--dev-corpus", default=argparse.SUPPRESS, help="Held-out corpus scored every epoch")
    evaluate = commands.add_parser("eval", parents=[common], help="Score a checkpoint on a corpus")
    evaluate.add_argument("--model", default=argparse.SUPPRESS, help="Checkpoint written by train")
    evaluate.add_argument("--vocab", default=argparse.SUPPRESS, help="Vocabulary file (default: next to the model)")
    commands.add_parser("cv", parents=[common], help="Stratified k-fold cross-validation")
    sweep = commands.add_parser("sweep", parents=[common], help="Cross-validate every filter-length set")
    sweep.add_argument("--length-sets", default=argparse.SUPPRESS, help='Semicolon-separated sets, e.g. "3;4;4,6"')
    commands.add_parser("ablate", parents=[common], help="Cumulative feature ablation")
    baseline = commands.add_parser("baseline", parents=[common], help="Linear SVM baseline on the same folds")
    baseline.add_argument("--costs", default=argparse.SUPPRESS, help="Comma-separated SVM costs (default: 0.01,0.1,1)")
    baseline.add_argument("--with-cnn", action="store_true", default=argparse.SUPPRESS,
                          help="Also cross-validate the CNN on the same folds")
    baseline.add_argument("--dump-sparse", action="store_true", default=argparse.SUPPRESS,
                          help="Write the sparse feature vectors to features.svm")
    return parser


def load_corpus(path: str) -> Corpus:
    with open(path, "rb") as f:
        corpus = parse_corpus(f)
    logger.info(f"Loaded {len(corpus)} sentences from {path}")
    return corpus


def load_pairs(path: str) -> List[Pair]:
    return build_instances(load_corpus(path))


def _out(cfg: RunConfig, name: str) -> str:
    return os.path.join(cfg.out, name)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _write_rows(cfg: RunConfig, stem: str, key_header: str, rows: Sequence[Tuple[str, CrossValidationResult]]) -> None:
    with open(_out(cfg, f"{stem}.tsv"), "w", encoding="utf-8", newline="\n") as f:
        write_reports_tsv([report for _, result in rows for report in result.reports()], f)
    _write_text(_out(cfg, f"{stem}.txt"), render_table([(key, result.average) for key, result in rows], key_header))


def cmd_prepare(cfg: RunConfig) -> None:
    pairs = load_pairs(cfg.corpus)
    vocabs = build_vocabularies(pairs, cfg.train_config().position_clip)
    vocabs.dump(_out(cfg, "vocab.json"))
    with open(_out(cfg, "instances.jsonl"), "w", encoding="utf-8", newline="\n") as f:
        for inst in encode_all(pairs, vocabs):
            record = {
                "id": inst.instance_id,
                "label_id": inst.label_id,
                "ids": inst.ids.tolist(),
                "distances": inst.distances.tolist(),
            }
            f.write(json.dumps(record, separators=(",", ":")) + "\n")
    statistics = corpus_statistics(instance for _, instance in pairs)
    frame = pd.DataFrame({"label": list(statistics), "instances": list(statistics.values())})
    frame.to_csv(_out(cfg, "statistics.tsv"), sep="\t", index=False, lineterminator="\n")


def cmd_train(cfg: RunConfig) -> None:
    config = cfg.train_config()
    pairs = load_pairs(cfg.corpus)
    vocabs = build_vocabularies(pairs, config.position_clip)
    dev_set = encode_all(load_pairs(cfg.dev_corpus), vocabs) if cfg.dev_corpus else None
    trainer = Trainer(config, vocabs, cfg.embeddings)
    params, history = trainer.fit(encode_all(pairs, vocabs), dev_set)
    save_checkpoint(_out(cfg, "model.npz"), params, vocabs, trainer.state)
    vocabs.dump(_out(cfg, "vocab.json"))
    _write_text(_out(cfg, "train_log.tsv"), TRAIN_LOG_HEADER + history.to_tsv())


def cmd_eval(cfg: RunConfig) -> None:
    vocab_path = cfg.vocab or os.path.join(os.path.dirname(cfg.model), "vocab.json")
    if not os.path.exists(vocab_path):
        raise MissingFileError(f"vocabulary file not found: {vocab_path}")
    vocabs = VocabularySet.load(vocab_path)
    params, _ = load_checkpoint(cfg.model, vocabs)
    instances = encode_all(load_pairs(cfg.corpus), vocabs)
    report = compute_metrics(
        [inst.label_id for inst in instances],
        predict_labels(params, instances),
        config=os.path.basename(cfg.model),
        fingerprint=params.config_fingerprint or "",
    )
    with open(_out(cfg, "report.tsv"), "w", encoding="utf-8", newline="\n") as f:
        write_reports_tsv([report], f)
    with open(_out(cfg, "report.json"), "w", encoding="utf-8", newline="\n") as f:
        write_reports_json([report], f)
    logger.info(f"Macro P={report.macro.precision:.2f} R={report.macro.recall:.2f} F={report.macro.f1:.2f}")


def cmd_cv(cfg: RunConfig) -> None:
    result = cross_validate(load_pairs(cfg.corpus), cfg.train_config(), cfg.folds, cfg.seed, cfg.embeddings, cfg.jobs)
    with open(_out(cfg, "cv_report.tsv"), "w", encoding="utf-8", newline="\n") as f:
        write_reports_tsv(result.reports(), f)
    with open(_out(cfg, "cv_report.json"), "w", encoding="utf-8", newline="\n") as f:
        write_reports_json(result.reports(), f)
    _write_text(_out(cfg, "class_wise.txt"), class_wise_table(result.average))
    for fold, history in result.histories.items():
        _write_text(_out(cfg, f"fold{fold + 1}_train_log.tsv"), TRAIN_LOG_HEADER + history.to_tsv())
    average = result.average.macro
    logger.info(f"Mean macro P={average.precision:.2f} R={average.recall:.2f} F={average.f1:.2f}")


def cmd_sweep(cfg: RunConfig) -> None:
    rows = sweep_filters(
        load_pairs(cfg.corpus), cfg.train_config(), cfg.length_sets, cfg.folds, cfg.seed, cfg.embeddings, cfg.jobs,
    )
    _write_rows(cfg, "sweep", "Filter lengths", rows)


def cmd_ablate(cfg: RunConfig) -> None:
    rows = ablate_features(load_pairs(cfg.corpus), cfg.train_config(), cfg.embeddings, cfg.folds, cfg.seed, cfg.jobs)
    _write_rows(cfg, "ablation", "Features", rows)


def cmd_baseline(cfg: RunConfig) -> None:
    pairs = load_pairs(cfg.corpus)
    rows = compare_baseline(
        pairs, cfg.train_config(), cfg.costs, cfg.folds, cfg.seed, cfg.embeddings, cfg.with_cnn, cfg.jobs,
    )
    _write_rows(cfg, "baseline", "Name", rows)
    if cfg.dump_sparse:
        feature_maps = [template_features(s, i) for s, i in pairs]
        space = FeatureSpace.build(feature_maps)
        with open(_out(cfg, "features.svm"), "w", encoding="utf-8", newline="\n") as f:
            dump_sparse(
                f,
                [space.vectorize(features) for features in feature_maps],
                [label_id(i.label) for _, i in pairs],
                [i.instance_id for _, i in pairs],
            )


COMMANDS: Dict[str, Tuple[Callable[[RunConfig], None], Tuple[str, ...]]] = {
    "prepare": (cmd_prepare, ("corpus",)),
    "train": (cmd_train, ("corpus",)),
    "eval": (cmd_eval, ("corpus", "model")),
    "cv": (cmd_cv, ("corpus",)),
    "sweep": (cmd_sweep, ("corpus",)),
    "ablate": (cmd_ablate, ("corpus",)),
    "baseline": (cmd_baseline, ("corpus",)),
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Execute one command; returns the process exit status."""
    try:
        args = vars(build_parser().parse_args(argv))
    except SystemExit as e:
        return EXIT_OK if e.code in (None, 0) else EXIT_USAGE

    command = args.pop("command")
    config_path = args.pop("config", None)
    try:
        cfg = resolve_config(command, args, config_path)
        logging.getLogger().setLevel(cfg.log_level)
        handler, required = COMMANDS[command]
        cfg.check_paths(required)
        cfg.dump(_out(cfg, "run.json"))
        logger.info(f"🔄 Running {command} (seed {cfg.seed}, output {cfg.out})")
        handler(cfg)
        logger.info(f"✅ {command} finished; outputs in {cfg.out}")
        return EXIT_OK
    except MissingFileError as e:
        logger.error(f"❌ {e}")
        return EXIT_MISSING_FILE
    except ConfigError as e:
        logger.error(f"❌ Invalid configuration: {e}")
        return EXIT_CONFIG
    except DATA_ERRORS as e:
        logger.error(f"❌ Invalid input data: {e}")
        return EXIT_INVALID_DATA
    except KeyboardInterrupt:
        logger.warning("⚠️  Interrupted by user")
        return EXIT_FAILURE
    except Exception as e:
        logger.error(f"❌ Unexpected error in {command}: {e}")
        logger.debug("Traceback", exc_info=True)
        return EXIT_FAILURE
