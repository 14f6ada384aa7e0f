"""
Model checkpoints.

A checkpoint is one numpy .npz archive. The entry "__meta__" holds a JSON
document with the architecture (filter widths, filter count, feature
dimensions, keep probability), one SHA-256 hash per feature vocabulary and
optionally the Adam hyperparameters and step. Every other entry is an
array named like ModelParams.named_arrays(): "embedding.<feature>",
"conv<width>.weight", "conv<width>.bias", "dense.weight", "dense.bias";
Adam moments are stored as "adam.m.<name>" and "adam.v.<name>".
"""
import hashlib
import json
import logging
from typing import Dict, Optional, Tuple

import numpy as np

from relex.embeddings import EmbeddingMatrix, EmbeddingSet
from relex.features import FeatureKind, VocabularySet
from relex.network import ConvFilterBank, DenseLayer, ModelParams
from relex.optimizer import AdamState

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
META_KEY = "__meta__"


class CheckpointMismatchError(ValueError):
    """Raised when a checkpoint does not belong to the supplied vocabularies."""


def vocabulary_hashes(vocabs: VocabularySet) -> Dict[str, str]:
    hashes = {}
    for kind, vocab in vocabs.vocabularies.items():
        payload = json.dumps(vocab.to_dict(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
        hashes[kind.value] = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    return hashes


def save_checkpoint(path: str, params: ModelParams, vocabs: VocabularySet, state: Optional[AdamState] = None) -> None:
    arrays = dict(params.named_arrays())
    meta = {
        "format": FORMAT_VERSION,
        "filter_lengths": [bank.width for bank in params.banks],
        "num_filters": params.banks[0].num_filters,
        "keep_prob": params.keep_prob,
        "features": [kind.value for kind in params.embeddings.kinds],
        "dims": {kind.value: params.embeddings[kind].dim for kind in params.embeddings.kinds},
        "vocab_hashes": vocabulary_hashes(vocabs),
        "vocab_fingerprint": vocabs.fingerprint,
        "config_fingerprint": params.config_fingerprint,
        "adam": None,
    }
    if state is not None:
        meta["adam"] = {"t": state.t, "lr": state.lr, "beta1": state.beta1, "beta2": state.beta2, "eps": state.eps}
        for name in state.m:
            arrays[f"adam.m.{name}"] = state.m[name]
            arrays[f"adam.v.{name}"] = state.v[name]
    arrays[META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as f:
        np.savez_compressed(f, **arrays)
    logger.info(f"Saved checkpoint to {path}")


def load_checkpoint(path: str, vocabs: VocabularySet) -> Tuple[ModelParams, Optional[AdamState]]:
    """Restore a model (and optimizer state when present); rejects foreign vocabularies."""
    with np.load(path, allow_pickle=False) as archive:
        arrays = {name: archive[name] for name in archive.files}
    if META_KEY not in arrays:
        raise CheckpointMismatchError(f"{path} is not a checkpoint (no metadata)")
    meta = json.loads(str(arrays.pop(META_KEY)))
    if meta.get("format") != FORMAT_VERSION:
        raise CheckpointMismatchError(f"{path}: unsupported checkpoint format {meta.get('format')}")

    expected = vocabulary_hashes(vocabs)
    mismatched = sorted(k for k, h in meta["vocab_hashes"].items() if expected.get(k) != h)
    if mismatched:
        raise CheckpointMismatchError(f"{path}: vocabulary hash mismatch for {', '.join(mismatched)}")

    matrices = {}
    for name in meta["features"]:
        kind = FeatureKind(name)
        values = arrays[f"embedding.{name}"].astype(np.float64)
        if values.shape[0] != len(vocabs[kind]):
            raise CheckpointMismatchError(f"{path}: {name} embedding has {values.shape[0]} rows")
        matrices[kind] = EmbeddingMatrix(values)
    banks = [
        ConvFilterBank(width, arrays[f"conv{width}.weight"], arrays[f"conv{width}.bias"])
        for width in meta["filter_lengths"]
    ]
    dense = DenseLayer(arrays["dense.weight"], arrays["dense.bias"])
    params = ModelParams(
        EmbeddingSet(matrices), banks, dense, meta["keep_prob"], vocabs.fingerprint, meta.get("config_fingerprint"),
    )

    state = None
    if meta["adam"] is not None:
        adam = meta["adam"]
        names = params.named_arrays()
        state = AdamState(
            adam["lr"], adam["beta1"], adam["beta2"], adam["eps"], adam["t"],
            {name: arrays[f"adam.m.{name}"] for name in names},
            {name: arrays[f"adam.v.{name}"] for name in names},
        )
    logger.info(f"Loaded checkpoint {path} (filters {meta['filter_lengths']})")
    return params, state
