"""
Convolutional relation classifier with hand-derived gradients.

Pipeline per instance: embedding lookup -> right padding -> one
convolution bank per filter width (ReLU) -> masked max-over-time pooling
-> concatenation -> dropout -> dense layer -> softmax cross-entropy.
All arithmetic is float64.
"""
import copy
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from relex.corpus import NUM_CLASSES
from relex.embeddings import EmbeddingSet, embed_ids
from relex.features import FEATURE_ORDER, PAD_ID, EncodedInstance

logger = logging.getLogger(__name__)

DEFAULT_NUM_FILTERS = 100
DEFAULT_KEEP_PROB = 0.5


@dataclass
class ConvFilterBank:
    """Filters of one width; weights has shape (num_filters, width * d)."""
    width: int
    weights: np.ndarray
    bias: np.ndarray

    @property
    def num_filters(self) -> int:
        return self.weights.shape[0]


@dataclass
class DenseLayer:
    weights: np.ndarray
    bias: np.ndarray


@dataclass
class ModelParams:
    embeddings: EmbeddingSet
    banks: List[ConvFilterBank]
    dense: DenseLayer
    keep_prob: float = DEFAULT_KEEP_PROB
    vocab_fingerprint: Optional[str] = None
    config_fingerprint: Optional[str] = None

    def __post_init__(self):
        widths = [bank.width for bank in self.banks]
        if not widths or len(set(widths)) != len(widths):
            raise ValueError(f"filter widths must be non-empty and distinct, got {widths}")
        if not 0.0 < self.keep_prob <= 1.0:
            raise ValueError(f"keep probability must be in (0, 1], got {self.keep_prob}")
        pooled = sum(bank.num_filters for bank in self.banks)
        if self.dense.weights.shape != (NUM_CLASSES, pooled):
            raise ValueError(
                f"dense layer shape {self.dense.weights.shape} does not match {pooled} pooled features"
            )

    @property
    def max_width(self) -> int:
        return max(bank.width for bank in self.banks)

    def named_arrays(self) -> Dict[str, np.ndarray]:
        """Every trainable array by name; embedding matrices are prefixed 'embedding.'."""
        arrays = {}
        for kind in self.embeddings.kinds:
            if self.embeddings[kind].trainable:
                arrays[f"embedding.{kind.value}"] = self.embeddings[kind].values
        for bank in self.banks:
            arrays[f"conv{bank.width}.weight"] = bank.weights
            arrays[f"conv{bank.width}.bias"] = bank.bias
        arrays["dense.weight"] = self.dense.weights
        arrays["dense.bias"] = self.dense.bias
        return arrays

    def copy(self) -> "ModelParams":
        return copy.deepcopy(self)


@dataclass
class SparseRows:
    """Row-sparse gradient of an embedding matrix: unique sorted ids and their rows."""
    ids: np.ndarray
    values: np.ndarray

    @classmethod
    def from_rows(cls, ids: np.ndarray, rows: np.ndarray) -> "SparseRows":
        unique, inverse = np.unique(ids, return_inverse=True)
        summed = np.zeros((unique.size, rows.shape[1]))
        np.add.at(summed, inverse.reshape(-1), rows)
        return cls(unique, summed)

    def to_dense(self, shape: Tuple[int, int]) -> np.ndarray:
        dense = np.zeros(shape)
        dense[self.ids] = self.values
        return dense


@dataclass
class Gradients:
    dense: Dict[str, np.ndarray] = field(default_factory=dict)
    sparse: Dict[str, SparseRows] = field(default_factory=dict)

    @classmethod
    def sum(cls, items: Sequence["Gradients"]) -> "Gradients":
        """Sum gradients in the given order."""
        total = cls()
        for item in items:
            for name, grad in item.dense.items():
                total.dense[name] = total.dense[name] + grad if name in total.dense else grad.copy()
        sparse_names = []
        for item in items:
            for name in item.sparse:
                if name not in sparse_names:
                    sparse_names.append(name)
        for name in sparse_names:
            parts = [item.sparse[name] for item in items if name in item.sparse]
            total.sparse[name] = SparseRows.from_rows(
                np.concatenate([p.ids for p in parts]), np.concatenate([p.values for p in parts])
            )
        return total

    def scaled(self, factor: float) -> "Gradients":
        return Gradients(
            {name: grad * factor for name, grad in self.dense.items()},
            {name: SparseRows(rows.ids, rows.values * factor) for name, rows in self.sparse.items()},
        )


@dataclass
class BankCache:
    windows: np.ndarray
    pre_activation: np.ndarray
    valid: np.ndarray
    argmax: np.ndarray


@dataclass
class ForwardCache:
    ids: np.ndarray
    x: np.ndarray
    length: int
    banks: List[BankCache]
    pooled: np.ndarray
    dropout_mask: np.ndarray
    dropped: np.ndarray
    logits: np.ndarray
    probs: np.ndarray
    loss: Optional[float] = None


def _uniform_init(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(
    embeddings: EmbeddingSet,
    filter_lengths: Sequence[int],
    num_filters: int = DEFAULT_NUM_FILTERS,
    keep_prob: float = DEFAULT_KEEP_PROB,
    seed: int = 0,
    vocab_fingerprint: Optional[str] = None,
) -> ModelParams:
    """Glorot-uniform filters and dense weights, zero biases."""
    rng = np.random.default_rng(seed)
    d = embeddings.dim
    banks = []
    for width in filter_lengths:
        if width < 1:
            raise ValueError(f"filter width must be >= 1, got {width}")
        weights = _uniform_init(rng, width * d, num_filters, (num_filters, width * d))
        banks.append(ConvFilterBank(int(width), weights, np.zeros(num_filters)))
    pooled = num_filters * len(banks)
    dense = DenseLayer(_uniform_init(rng, pooled, NUM_CLASSES, (NUM_CLASSES, pooled)), np.zeros(NUM_CLASSES))
    return ModelParams(embeddings, banks, dense, keep_prob, vocab_fingerprint)


def _windows(x: np.ndarray, width: int) -> np.ndarray:
    """Rows are the concatenations x[i:i+width] for every start position i."""
    n_windows = x.shape[0] - width + 1
    return sliding_window_view(x, (width, x.shape[1]))[:, 0].reshape(n_windows, width * x.shape[1])


def conv_forward(x: np.ndarray, bank: ConvFilterBank) -> np.ndarray:
    """ReLU(w_k . x[i:i+c] + b_k) for every window i and filter k; shape (m - c + 1, filters)."""
    return np.maximum(_windows(x, bank.width) @ bank.weights.T + bank.bias, 0.0)


def max_pool(h: np.ndarray, valid_mask: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-filter maximum over valid windows.

    Returns the pooled vector and the source window of every maximum;
    ties go to the lowest window index.
    """
    valid_mask = np.asarray(valid_mask, dtype=bool)
    if not valid_mask.any():
        raise ValueError("max pooling needs at least one valid window")
    masked = np.where(valid_mask[:, None], h, -np.inf)
    argmax = masked.argmax(axis=0)
    return masked[argmax, np.arange(h.shape[1])], argmax


def dense_forward(z: np.ndarray, layer: DenseLayer) -> np.ndarray:
    if z.shape != (layer.weights.shape[1],):
        raise ValueError(f"expected {layer.weights.shape[1]} pooled features, got {z.shape}")
    return layer.weights @ z + layer.bias


def softmax_loss(o: np.ndarray, y: int) -> Tuple[float, np.ndarray]:
    """Cross-entropy of class y and the softmax probabilities, computed on shifted logits."""
    shifted = o - o.max()
    exps = np.exp(shifted)
    total = exps.sum()
    probs = exps / total
    return float(np.log(total) - shifted[y]), probs


def apply_dropout(
    z: np.ndarray, keep: float, train: bool, rng: Optional[np.random.Generator] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Inverted dropout: at train time survivors are scaled by 1/keep, so
    evaluation is the identity.
    """
    if not 0.0 < keep <= 1.0:
        raise ValueError(f"keep probability must be in (0, 1], got {keep}")
    if not train or keep == 1.0:
        return z, np.ones_like(z)
    if rng is None:
        raise ValueError("train-mode dropout needs a random generator")
    mask = (rng.random(z.shape) < keep) / keep
    return z * mask, mask


def valid_windows(length: int, n_windows: int) -> np.ndarray:
    """Windows that start on a real token; windows made only of PAD are masked."""
    return np.arange(n_windows) < length


def forward(
    inst: EncodedInstance,
    params: ModelParams,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> ForwardCache:
    m = inst.length
    if m < 1:
        raise ValueError(f"instance {inst.instance_id} has no tokens")

    padded_length = max(m, params.max_width)
    ids = np.full((padded_length, len(FEATURE_ORDER)), PAD_ID, dtype=np.int64)
    ids[:m] = inst.ids[:m]
    x = embed_ids(ids, params.embeddings)

    bank_caches, pooled_parts = [], []
    for bank in params.banks:
        windows = _windows(x, bank.width)
        pre = windows @ bank.weights.T + bank.bias
        valid = valid_windows(m, windows.shape[0])
        pooled, argmax = max_pool(np.maximum(pre, 0.0), valid)
        bank_caches.append(BankCache(windows, pre, valid, argmax))
        pooled_parts.append(pooled)

    z = np.concatenate(pooled_parts)
    dropped, mask = apply_dropout(z, params.keep_prob, train, rng)
    logits = dense_forward(dropped, params.dense)
    loss, probs = softmax_loss(logits, inst.label_id)
    return ForwardCache(ids, x, m, bank_caches, z, mask, dropped, logits, probs, loss)


def backward(cache: ForwardCache, y: int, params: ModelParams) -> Gradients:
    """
    Exact gradients of the cross-entropy with respect to every parameter.

    ReLU has derivative 0 at 0; each pooled value routes its gradient to
    its recorded argmax window only; the dropout mask is replayed.
    Embedding gradients cover only looked-up, non-PAD rows.
    """
    grads = Gradients()

    d_logits = cache.probs.copy()
    d_logits[y] -= 1.0
    grads.dense["dense.weight"] = np.outer(d_logits, cache.dropped)
    grads.dense["dense.bias"] = d_logits

    d_pooled = (params.dense.weights.T @ d_logits) * cache.dropout_mask

    d = cache.x.shape[1]
    dx = np.zeros_like(cache.x)
    offset = 0
    for bank, bank_cache in zip(params.banks, cache.banks):
        k = bank.num_filters
        d_bank = d_pooled[offset: offset + k]
        offset += k

        filters = np.arange(k)
        d_pre = np.zeros_like(bank_cache.pre_activation)
        active = bank_cache.pre_activation[bank_cache.argmax, filters] > 0.0
        d_pre[bank_cache.argmax[active], filters[active]] = d_bank[active]

        grads.dense[f"conv{bank.width}.weight"] = d_pre.T @ bank_cache.windows
        grads.dense[f"conv{bank.width}.bias"] = d_pre.sum(axis=0)

        n_windows = d_pre.shape[0]
        d_windows = (d_pre @ bank.weights).reshape(n_windows, bank.width, d)
        for j in range(bank.width):
            dx[j: j + n_windows] += d_windows[:, j, :]

    for kind, (start, end) in params.embeddings.offsets().items():
        matrix = params.embeddings[kind]
        if not matrix.trainable:
            continue
        column = cache.ids[:, FEATURE_ORDER.index(kind)]
        looked_up = column != matrix.pad_id
        grads.sparse[f"embedding.{kind.value}"] = SparseRows.from_rows(column[looked_up], dx[looked_up, start:end])
    return grads


def instance_loss(inst: EncodedInstance, params: ModelParams) -> float:
    """Eval-mode loss of a single instance."""
    return forward(inst, params, train=False).loss
