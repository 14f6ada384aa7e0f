"""
Cross-validation and the experiment harnesses built on it: filter-length
sweep, feature ablation, class-wise report and the SVM comparison.
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from relex.corpus import FoldSplit, RelationInstance, Sentence, label_id, split_folds
from relex.features import FeatureKind, build_vocabularies, encode_all
from relex.metrics import MetricsReport, average_reports, compute_metrics
from relex.svm_baseline import DEFAULT_COSTS, fit_predict_svm, svm_fingerprint
from relex.trainer import TrainConfig, TrainHistory, predict_labels, render_lengths, train

logger = logging.getLogger(__name__)

DEFAULT_FOLDS = 5

Pair = Tuple[Sentence, RelationInstance]
FitPredict = Callable[[Sequence[Pair], Sequence[Pair], int], List[int]]

ABLATION_STEPS = (
    ("T", (FeatureKind.WORD, FeatureKind.TYPE)),
    ("+(P1+P2)", (FeatureKind.WORD, FeatureKind.POS1, FeatureKind.POS2, FeatureKind.TYPE)),
    ("+(PoS+Chunk)", tuple(FeatureKind)),
)


@dataclass
class CrossValidationResult:
    folds: List[MetricsReport]
    average: MetricsReport
    split: FoldSplit
    histories: Dict[int, TrainHistory] = field(default_factory=dict)

    def reports(self) -> List[MetricsReport]:
        return self.folds + [self.average]


def run_folds(
    pairs: Sequence[Pair],
    k: int,
    seed: int,
    fit_predict: FitPredict,
    jobs: int = 1,
    name: str = "",
    fingerprint: str = "",
) -> CrossValidationResult:
    """
    Evaluate a classifier on stratified folds; every report carries
    the name and configuration fingerprint.

    Folds may run on a thread pool; reports are merged by fold index, so
    the result does not depend on completion order.
    """
    split = split_folds([instance for _, instance in pairs], k, seed)

    def run_fold(fold: int) -> MetricsReport:
        train_pairs, test_pairs = split.partition(pairs, fold)
        predicted = fit_predict(train_pairs, test_pairs, fold)
        gold = [label_id(instance.label) for _, instance in test_pairs]
        report = compute_metrics(gold, predicted, fold=fold, config=name, fingerprint=fingerprint)
        logger.info(
            f"{name or 'run'} fold {fold + 1}/{k}: macro P={report.macro.precision:.2f} "
            f"R={report.macro.recall:.2f} F={report.macro.f1:.2f}"
        )
        return report

    reports: Dict[int, MetricsReport] = {}
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            futures = {executor.submit(run_fold, fold): fold for fold in range(k)}
            for future in as_completed(futures):
                reports[futures[future]] = future.result()
    else:
        for fold in range(k):
            reports[fold] = run_fold(fold)

    folds = [reports[fold] for fold in range(k)]
    return CrossValidationResult(folds, average_reports(folds, name), split)


def cnn_fit_predict(
    config: TrainConfig,
    word_vectors: Optional[str] = None,
    histories: Optional[Dict[int, TrainHistory]] = None,
) -> FitPredict:
    """Per fold: vocabularies from the training portion only, training seed = config.seed + fold."""
    def fit_predict(train_pairs: Sequence[Pair], test_pairs: Sequence[Pair], fold: int) -> List[int]:
        vocabs = build_vocabularies(train_pairs, config.position_clip)
        fold_config = replace(config, seed=config.seed + fold)
        params, history = train(
            fold_config, encode_all(train_pairs, vocabs), vocabs=vocabs, word_vectors=word_vectors,
        )
        if histories is not None:
            histories[fold] = history
        return predict_labels(params, encode_all(test_pairs, vocabs))
    return fit_predict


def cross_validate(
    pairs: Sequence[Pair],
    config: TrainConfig,
    k: int = DEFAULT_FOLDS,
    seed: Optional[int] = None,
    word_vectors: Optional[str] = None,
    jobs: int = 1,
    name: Optional[str] = None,
) -> CrossValidationResult:
    config.validate()
    histories: Dict[int, TrainHistory] = {}
    result = run_folds(
        pairs,
        k,
        config.seed if seed is None else seed,
        cnn_fit_predict(config, word_vectors, histories),
        jobs,
        name or render_lengths(config.filter_lengths),
        config.fingerprint(),
    )
    result.histories = dict(sorted(histories.items()))
    return result


def sweep_filters(
    pairs: Sequence[Pair],
    base_config: TrainConfig,
    length_sets: Sequence[Sequence[int]],
    k: int = DEFAULT_FOLDS,
    seed: Optional[int] = None,
    word_vectors: Optional[str] = None,
    jobs: int = 1,
) -> List[Tuple[str, CrossValidationResult]]:
    """One cross-validation per filter-length set, keyed like "[4,6]"."""
    rows = []
    for lengths in length_sets:
        if not lengths:
            raise ValueError("filter length sets must not be empty")
        key = render_lengths(lengths)
        logger.info(f"Sweeping filter lengths {key}")
        config = replace(base_config, filter_lengths=tuple(lengths))
        rows.append((key, cross_validate(pairs, config, k, seed, word_vectors, jobs, key)))
    return rows


def ablate_features(
    pairs: Sequence[Pair],
    config: TrainConfig,
    word_vectors: Optional[str] = None,
    k: int = DEFAULT_FOLDS,
    seed: Optional[int] = None,
    jobs: int = 1,
) -> List[Tuple[str, CrossValidationResult]]:
    """
    Cumulative feature additions on top of word + type, first with random
    word vectors (RV), then with pretrained ones (WV). Without a vector
    file only the RV rows are produced.
    """
    variants = [("RV", None)]
    if word_vectors:
        variants.append(("WV", word_vectors))
    else:
        logger.warning("No pretrained word vectors given; ablation runs the random-vector rows only")

    rows = []
    for prefix, vectors in variants:
        for step, kinds in ABLATION_STEPS:
            key = f"{prefix} + T" if step == "T" else f"{prefix} {step}"
            ablated = replace(config, features=tuple(kind.value for kind in kinds))
            rows.append((key, cross_validate(pairs, ablated, k, seed, vectors, jobs, key)))
    return rows


def compare_baseline(
    pairs: Sequence[Pair],
    config: TrainConfig,
    costs: Sequence[float] = DEFAULT_COSTS,
    k: int = DEFAULT_FOLDS,
    seed: Optional[int] = None,
    word_vectors: Optional[str] = None,
    with_cnn: bool = False,
    jobs: int = 1,
) -> List[Tuple[str, CrossValidationResult]]:
    """SVM rows for every cost C on the CNN's folds, optionally preceded by the CNN row."""
    seed = config.seed if seed is None else seed
    rows = []
    if with_cnn:
        key = f"CNN (FL={render_lengths(config.filter_lengths)})"
        rows.append((key, cross_validate(pairs, config, k, seed, word_vectors, jobs, key)))
    for cost in costs:
        key = f"SVM (Linear, C={cost:g})"

        def fit_predict(train_pairs, test_pairs, fold, cost=cost):
            return fit_predict_svm(train_pairs, test_pairs, cost, seed + fold)

        rows.append((key, run_folds(pairs, k, seed, fit_predict, jobs, key, svm_fingerprint(cost, seed))))
    return rows
