"""Dense binary classifiers over retrieval distances, with hand-written backprop.

Two variants share one stack of dense layers::

    model1:  x = scaled distances           -> [Dense -> ReLU] x H -> Dense -> sigmoid
    model2:  e -> softmax(W_a e) * e         (attention gate, query and neighbours)
               -> [squared distances to the k selected neighbours, gated query]
               -> scaler
               -> [Dense -> BatchNorm -> ReLU -> Dropout] x H -> Dense -> sigmoid

The gated query block of model2 can be switched off (``embed_features``),
leaving the k gated distances as the only input.

Neighbour *identity* for model2 is chosen by exact search in the gated space
and held constant while gradients flow; the distances themselves are
recomputed from the gated vectors so ``W_a`` receives a gradient.  Neighbours
and the distance scaler are refreshed at the start of every epoch.
"""

from __future__ import annotations

import io
import json
import os
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    CheckpointError,
    EmptyTrainingSet,
    LengthMismatch,
    WidthMismatch,
)
from .preprocess import ScalerParams, fit_scaler
from .vector_index import FlatIndex, batch_search

MODEL_I = "model1"
MODEL_II = "model2"
VARIANTS = (MODEL_I, MODEL_II)

# Hidden-layer presets: the wider stack is the default.
ARCHITECTURES = {"128-64": (128, 64), "64-32": (64, 32)}

BCE_EPS = 1e-7
CHECKPOINT_MAGIC = b"NXCKPT"
CHECKPOINT_VERSION = 1


# ---------------------------------------------------------------------------
# parameters


@dataclass
class AttentionParams:
    W_a: np.ndarray  # (d, d)


@dataclass
class DenseParams:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)


@dataclass
class BatchNormParams:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5


@dataclass
class ClassifierModel:
    variant: str
    layers: list[DenseParams]
    batchnorm: list[BatchNormParams] | None = None
    dropout_p: float = 0.0
    attention: AttentionParams | None = None
    input_scaler: ScalerParams | None = None  # model2 only; refit each epoch
    embed_features: bool = False  # model2: feed the gated query next to the distances

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ValueError(f"dropout_p must lie in [0, 1), got {self.dropout_p}")
        if (self.variant == MODEL_II) != (self.attention is not None):
            raise ValueError("model2 requires attention parameters and model1 forbids them")
        if self.embed_features and self.attention is None:
            raise ValueError("embed_features needs attention parameters")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.W.shape[1] != prev.W.shape[0]:
                raise WidthMismatch("dense layer widths do not chain")
        if self.layers[-1].W.shape[0] != 1:
            raise WidthMismatch("output layer must have width 1")
        if self.batchnorm is not None and len(self.batchnorm) != len(self.layers) - 1:
            raise WidthMismatch("need one batch-norm block per hidden layer")

    @property
    def input_width(self) -> int:
        return self.layers[0].W.shape[1]

    @property
    def k(self) -> int:
        """Width of the retrieval feature block (k distances, plus k cosines if used)."""
        return self.input_width - (self.embed_dim if self.embed_features else 0)

    @property
    def hidden(self) -> tuple[int, ...]:
        return tuple(layer.W.shape[0] for layer in self.layers[:-1])

    @property
    def embed_dim(self) -> int | None:
        return None if self.attention is None else self.attention.W_a.shape[0]

    @property
    def dtype(self):
        return self.layers[0].W.dtype

    def parameters(self) -> dict[str, np.ndarray]:
        """Trainable tensors by name, in checkpoint order.  Values are live views."""
        params: dict[str, np.ndarray] = {}
        if self.attention is not None:
            params["W_a"] = self.attention.W_a
        for i, layer in enumerate(self.layers, 1):
            params[f"W{i}"] = layer.W
            params[f"b{i}"] = layer.b
        for i, bn in enumerate(self.batchnorm or (), 1):
            params[f"gamma{i}"] = bn.gamma
            params[f"beta{i}"] = bn.beta
        return params

    def buffers(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {}
        for i, bn in enumerate(self.batchnorm or (), 1):
            out[f"running_mean{i}"] = bn.running_mean
            out[f"running_var{i}"] = bn.running_var
        return out

    def copy(self) -> "ClassifierModel":
        return self.astype(self.dtype)

    def astype(self, dtype) -> "ClassifierModel":
        def cast(a):
            return np.array(a, dtype=dtype, copy=True)

        return replace(
            self,
            layers=[DenseParams(cast(l.W), cast(l.b)) for l in self.layers],
            batchnorm=None if self.batchnorm is None else [
                replace(bn, gamma=cast(bn.gamma), beta=cast(bn.beta),
                        running_mean=cast(bn.running_mean), running_var=cast(bn.running_var))
                for bn in self.batchnorm
            ],
            attention=None if self.attention is None else AttentionParams(cast(self.attention.W_a)),
        )


def init_model(
    variant: str,
    k: int,
    embed_dim: int | None = None,
    hidden: Sequence[int] = ARCHITECTURES["128-64"],
    dropout_p: float | None = None,
    batchnorm: bool | None = None,
    seed: int | np.random.Generator = 0,
    dtype=np.float32,
    embed_features: bool | None = None,
) -> ClassifierModel:
    """Fresh model with He-scaled Gaussian weights and zero biases.

    model2 defaults to batch-norm, dropout 0.5 and gated-embedding inputs,
    and starts with ``W_a = 0`` so the attention gate is initially uniform.
    model1 defaults to none of these.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    is_two = variant == MODEL_II
    if dropout_p is None:
        dropout_p = 0.5 if is_two else 0.0
    if batchnorm is None:
        batchnorm = is_two
    if is_two and not embed_dim:
        raise ValueError("model2 needs embed_dim for its attention matrix")
    if embed_features is None:
        embed_features = is_two

    widths = [k + (embed_dim if embed_features else 0), *hidden, 1]
    layers = []
    for fan_in, fan_out in zip(widths, widths[1:]):
        W = rng.standard_normal((fan_out, fan_in)) * np.sqrt(2.0 / fan_in)
        layers.append(DenseParams(W.astype(dtype), np.zeros(fan_out, dtype=dtype)))
    bns = None
    if batchnorm:
        bns = [
            BatchNormParams(
                np.ones(w, dtype=dtype), np.zeros(w, dtype=dtype),
                np.zeros(w, dtype=dtype), np.ones(w, dtype=dtype),
            )
            for w in hidden
        ]
    attention = AttentionParams(np.zeros((embed_dim, embed_dim), dtype=dtype)) if is_two else None
    return ClassifierModel(
        variant, layers, bns, float(dropout_p), attention, embed_features=bool(embed_features)
    )


# ---------------------------------------------------------------------------
# inputs


@dataclass(frozen=True)
class NeighborBatch:
    """model2 input: raw query embeddings and their selected neighbours."""

    queries: np.ndarray    # (n, d)
    neighbors: np.ndarray  # (n, k, d)

    def __len__(self) -> int:
        return self.queries.shape[0]

    def take(self, idx) -> "NeighborBatch":
        return NeighborBatch(self.queries[idx], self.neighbors[idx])


class AttentionRetrieval:
    """Selects each query's k nearest bank entries in attention-gated space.

    The bank is normally the real-news training embeddings.  A query whose
    id is in the bank never retrieves itself.
    """

    def __init__(self, bank_ids, bank_vectors, query_ids, query_vectors, k: int):
        self.bank_ids = [str(i) for i in bank_ids]
        self.bank_vectors = np.asarray(bank_vectors, dtype=np.float64)
        self.query_ids = [str(i) for i in query_ids]
        self.query_vectors = np.asarray(query_vectors, dtype=np.float64)
        self.k = k
        self._position = {id_: i for i, id_ in enumerate(self.bank_ids)}
        if len(self.query_ids) != len(self.query_vectors):
            raise LengthMismatch("query ids and vectors differ in length")

    def __len__(self) -> int:
        return len(self.query_ids)

    def gated_index(self, attention: AttentionParams) -> FlatIndex:
        gated, _ = gate(attention.W_a.astype(np.float64), self.bank_vectors)
        return FlatIndex(self.bank_ids, gated)

    def select(self, attention: AttentionParams) -> NeighborBatch:
        index = self.gated_index(attention)
        gated_q, _ = gate(attention.W_a.astype(np.float64), self.query_vectors)
        hits = batch_search(index, gated_q, self.k, exclusions=self.query_ids)
        positions = np.array([[self._position[i] for i in h.ids] for h in hits], dtype=np.int64)
        return NeighborBatch(self.query_vectors, self.bank_vectors[positions.reshape(len(hits), self.k)])

    def subset(self, idx) -> "AttentionRetrieval":
        idx = np.asarray(idx)
        return AttentionRetrieval(
            self.bank_ids, self.bank_vectors,
            [self.query_ids[i] for i in idx], self.query_vectors[idx], self.k,
        )


# ---------------------------------------------------------------------------
# building blocks


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def gate(W_a: np.ndarray, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(softmax(W_a e) * e, softmax(W_a e))`` row-wise."""
    a = softmax(e @ W_a.T)
    return a * e, a


def attention_apply(params: AttentionParams, e) -> np.ndarray:
    e = np.asarray(e, dtype=params.W_a.dtype)
    if e.shape[-1] != params.W_a.shape[1]:
        raise WidthMismatch(f"embedding dim {e.shape[-1]} vs attention dim {params.W_a.shape[1]}")
    gated, _ = gate(params.W_a, e)
    return gated


def dropout_mask(shape, p: float, rng: np.random.Generator, dtype) -> np.ndarray:
    """Inverted-dropout mask: zeros with probability p, else 1/(1-p)."""
    keep = rng.random(shape) >= p
    dtype = np.dtype(dtype)
    return keep.astype(dtype) / dtype.type(1.0 - p)


def bce_loss(predictions, labels, eps: float = BCE_EPS) -> float:
    """Mean binary cross-entropy with predictions clamped to [eps, 1-eps]."""
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if p.shape != y.shape:
        raise LengthMismatch(f"{p.size} predictions for {y.size} labels")
    if p.size == 0:
        raise LengthMismatch("empty batch")
    p = np.clip(p, eps, 1.0 - eps)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


# ---------------------------------------------------------------------------
# forward / backward


def _check_input(model: ClassifierModel, features):
    if isinstance(features, AttentionRetrieval):
        if model.attention is None:
            raise WidthMismatch("model1 takes a distance matrix, not a retrieval set")
        features = features.select(model.attention)
    if model.variant == MODEL_II:
        if not isinstance(features, NeighborBatch):
            raise WidthMismatch("model2 takes a NeighborBatch or AttentionRetrieval")
        q = np.asarray(features.queries, dtype=model.dtype)
        nb = np.asarray(features.neighbors, dtype=model.dtype)
        if nb.ndim != 3 or nb.shape[1] != model.k or nb.shape[2] != model.embed_dim:
            raise WidthMismatch(f"expected neighbours of shape (n, {model.k}, {model.embed_dim}), got {nb.shape}")
        if q.shape != (nb.shape[0], model.embed_dim):
            raise WidthMismatch(f"query block has shape {q.shape}")
        return NeighborBatch(q, nb)
    x = np.asarray(features, dtype=model.dtype)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_width:
        raise WidthMismatch(f"expected feature width {model.input_width}, got shape {x.shape}")
    return x


def _gated_inputs(model: ClassifierModel, batch: NeighborBatch, cache: dict | None):
    """Unscaled model2 input rows: gated distances, then (optionally) the gated query."""
    W_a = model.attention.W_a
    n, k, d = batch.neighbors.shape
    gq, aq = gate(W_a, batch.queries)
    flat_nb = batch.neighbors.reshape(n * k, d)
    gn, an = gate(W_a, flat_nb)
    diff = gq[:, None, :] - gn.reshape(n, k, d)
    dist = np.square(diff).sum(axis=-1)
    if cache is not None:
        cache.update(aq=aq, an=an, flat_nb=flat_nb, diff=diff)
    if model.embed_features:
        return np.concatenate([dist, gq], axis=1)
    return dist


def _scale(model: ClassifierModel) -> tuple[np.ndarray, np.ndarray] | None:
    sc = model.input_scaler
    if sc is None:
        return None
    dt = model.dtype
    return sc.mean.astype(dt), np.maximum(sc.std, sc.epsilon).astype(dt)


def _forward(
    model: ClassifierModel,
    x,
    train: bool,
    rng: np.random.Generator | None,
    dropout: bool = True,
    update_running: bool = False,
):
    cache: dict = {"train": train}
    if model.variant == MODEL_II:
        h = _gated_inputs(model, x, cache)
        scale = _scale(model)
        if scale is not None:
            h = (h - scale[0]) / scale[1]
        cache["scale"] = scale
    else:
        h = x
    use_dropout = train and dropout and model.dropout_p > 0.0
    if use_dropout and rng is None:
        raise ValueError("train-mode forward with dropout needs an rng")

    hidden_caches = []
    for i, layer in enumerate(model.layers[:-1]):
        c = {"h_in": h}
        z = h @ layer.W.T + layer.b
        if model.batchnorm is not None:
            bn = model.batchnorm[i]
            if train:
                mu = z.mean(axis=0)
                var = z.var(axis=0)
                if update_running:
                    m = z.shape[0]
                    unbiased = var * (m / (m - 1)) if m > 1 else var
                    bn.running_mean *= 1.0 - bn.momentum
                    bn.running_mean += bn.momentum * mu
                    bn.running_var *= 1.0 - bn.momentum
                    bn.running_var += bn.momentum * unbiased
            else:
                mu, var = bn.running_mean, bn.running_var
            inv_std = 1.0 / np.sqrt(var + z.dtype.type(bn.eps))
            xhat = (z - mu) * inv_std
            c.update(xhat=xhat, inv_std=inv_std)
            z = bn.gamma * xhat + bn.beta
            c["bn_out"] = z
        a = np.maximum(z, 0)
        c["relu_on"] = z > 0
        if use_dropout:
            mask = dropout_mask(a.shape, model.dropout_p, rng, a.dtype)
            a = a * mask
            c["mask"] = mask
        hidden_caches.append(c)
        h = a
    out = model.layers[-1]
    logit = (h @ out.W.T + out.b)[:, 0]
    cache.update(hidden=hidden_caches, h_last=h)
    return sigmoid(logit), cache


def forward(model: ClassifierModel, features, mode: str = "eval", rng=None, dropout: bool = True):
    """Predicted probabilities, one per row.

    ``mode="train"`` uses batch statistics and (if ``dropout``) fresh
    dropout masks from ``rng``; ``mode="eval"`` is deterministic.
    """
    x = _check_input(model, features)
    yhat, _ = _forward(model, x, mode == "train", rng, dropout)
    return yhat


def backward(
    model: ClassifierModel,
    batch_features,
    batch_labels,
    mode: str = "train",
    rng=None,
    dropout: bool = True,
    update_running: bool = False,
) -> tuple[float, dict[str, np.ndarray]]:
    """Loss and exact gradients of ``bce_loss(forward(...), labels)``.

    Returns ``(loss, grads)`` with ``grads`` keyed like ``model.parameters()``.
    The forward pass inside this call draws the dropout masks that the
    backward pass reuses.
    """
    x = _check_input(model, batch_features)
    y = np.asarray(batch_labels, dtype=model.dtype).reshape(-1)
    n = len(x)
    if y.shape[0] != n:
        raise LengthMismatch(f"{n} rows but {y.shape[0]} labels")
    train = mode == "train"
    yhat, cache = _forward(model, x, train, rng, dropout, update_running)
    loss = bce_loss(yhat, y)

    grads: dict[str, np.ndarray] = {}
    # d loss / d logit; zero where the clamp is active.
    inside = (yhat >= BCE_EPS) & (yhat <= 1.0 - BCE_EPS)
    dlogit = ((yhat - y) / n * inside)[:, None]

    L = len(model.layers)
    out = model.layers[-1]
    grads[f"W{L}"] = dlogit.T @ cache["h_last"]
    grads[f"b{L}"] = dlogit.sum(axis=0)
    dh = dlogit @ out.W

    for i in range(L - 2, -1, -1):
        c = cache["hidden"][i]
        layer = model.layers[i]
        if "mask" in c:
            dh = dh * c["mask"]
        dz = dh * c["relu_on"]
        if model.batchnorm is not None:
            bn = model.batchnorm[i]
            xhat = c["xhat"]
            grads[f"gamma{i + 1}"] = (dz * xhat).sum(axis=0)
            grads[f"beta{i + 1}"] = dz.sum(axis=0)
            dxhat = dz * bn.gamma
            if train:
                m = dxhat.shape[0]
                dz = c["inv_std"] / m * (
                    m * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
                )
            else:
                dz = dxhat * c["inv_std"]
        grads[f"W{i + 1}"] = dz.T @ c["h_in"]
        grads[f"b{i + 1}"] = dz.sum(axis=0)
        dh = dz @ layer.W

    if model.variant == MODEL_II:
        scale = cache["scale"]
        dinput = dh if scale is None else dh / scale[1]
        k = model.k
        ddist = dinput[:, :k]
        diff = cache["diff"]
        d_gq = 2.0 * (diff * ddist[:, :, None]).sum(axis=1)
        if model.embed_features:
            d_gq = d_gq + dinput[:, k:]
        d_gn = (-2.0 * diff * ddist[:, :, None]).reshape(-1, diff.shape[2])
        W_a_grad = _gate_backward(cache["aq"], x.queries, d_gq)
        W_a_grad += _gate_backward(cache["an"], cache["flat_nb"], d_gn)
        grads["W_a"] = W_a_grad

    return loss, {name: grads[name] for name in model.parameters()}


def _gate_backward(a: np.ndarray, e: np.ndarray, d_gated: np.ndarray) -> np.ndarray:
    da = d_gated * e
    dz = a * (da - (a * da).sum(axis=-1, keepdims=True))
    return dz.T @ e


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 50
    batch_size: int = 32
    seed: int = 0
    k: int = 5

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    train_accuracy: float


def _batches(n: int, batch_size: int, rng: np.random.Generator, merge_singleton: bool):
    order = rng.permutation(n)
    bounds = list(range(0, n, batch_size)) + [n]
    if merge_singleton and len(bounds) > 2 and bounds[-1] - bounds[-2] == 1:
        # Batch statistics of a single row are degenerate.
        del bounds[-2]
    return [order[a:b] for a, b in zip(bounds, bounds[1:])]


def _input_scaler(model: ClassifierModel, batch: NeighborBatch) -> ScalerParams:
    rows = _gated_inputs(model, _check_input(model, batch), None)
    return fit_scaler(rows.astype(np.float64))


def train(
    model: ClassifierModel,
    train_features,
    train_labels,
    config: TrainConfig,
    scale_inputs: bool = True,
) -> tuple[ClassifierModel, list[EpochRecord]]:
    """Mini-batch gradient descent; returns a trained copy and per-epoch history.

    ``train_features`` is a scaled distance matrix for model1 and an
    :class:`AttentionRetrieval` over the training queries for model2.
    """
    model = model.copy()
    labels = np.asarray(train_labels).reshape(-1)
    n = len(labels)
    if n == 0:
        raise EmptyTrainingSet("no training rows")
    if len(train_features) != n:
        raise LengthMismatch(f"{len(train_features)} feature rows for {n} labels")
    if model.variant == MODEL_II and not isinstance(train_features, AttentionRetrieval):
        raise WidthMismatch("model2 trains on an AttentionRetrieval")

    rng = np.random.default_rng(config.seed)
    lr = model.dtype.type(config.learning_rate)
    params = model.parameters()
    history: list[EpochRecord] = []
    features = train_features

    for epoch in range(1, config.epochs + 1):
        if model.variant == MODEL_II:
            features = train_features.select(model.attention)
            model.input_scaler = _input_scaler(model, features) if scale_inputs else None
        x = _check_input(model, features)
        for idx in _batches(n, config.batch_size, rng, model.batchnorm is not None):
            batch = x.take(idx) if isinstance(x, NeighborBatch) else x[idx]
            _, grads = backward(model, batch, labels[idx], "train", rng, update_running=True)
            for name, g in grads.items():
                params[name] -= lr * g
        yhat = forward(model, x, "eval")
        history.append(EpochRecord(
            epoch,
            bce_loss(yhat, labels),
            float(np.mean((yhat >= 0.5).astype(int) == labels)),
        ))
    return model, history


def predict(model: ClassifierModel, features) -> tuple[np.ndarray, np.ndarray]:
    """``(labels, scores)``; a score of exactly 0.5 maps to label 1."""
    scores = forward(model, features, "eval")
    return (scores >= 0.5).astype(np.int64), scores


# ---------------------------------------------------------------------------
# persistence


def _tensor_layout(model: ClassifierModel) -> list[tuple[str, np.ndarray]]:
    return list(model.parameters().items()) + list(model.buffers().items())


def save_checkpoint(model: ClassifierModel, destination: str | os.PathLike) -> None:
    """Versioned header (JSON) followed by little-endian float32 tensors."""
    tensors = _tensor_layout(model)
    header = {
        "variant": model.variant,
        "k": model.k,
        "hidden": list(model.hidden),
        "embed_dim": model.embed_dim,
        "dropout_p": model.dropout_p,
        "batchnorm": None if model.batchnorm is None else [
            {"momentum": bn.momentum, "eps": bn.eps} for bn in model.batchnorm
        ],
        "input_scaler": None if model.input_scaler is None else model.input_scaler.to_json(),
        "embed_features": model.embed_features,
        "tensors": [[name, list(arr.shape)] for name, arr in tensors],
    }
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<II", CHECKPOINT_VERSION, len(raw)))
    buf.write(raw)
    for _, arr in tensors:
        buf.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    Path(destination).write_bytes(buf.getvalue())


def load_checkpoint(source: str | os.PathLike) -> ClassifierModel:
    data = Path(source).read_bytes()
    if data[:6] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{source}: not a checkpoint file")
    if len(data) < 14:
        raise CheckpointError(f"{source}: truncated header")
    version, hlen = struct.unpack("<II", data[6:14])
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{source}: unsupported checkpoint version {version}")
    try:
        header = json.loads(data[14:14 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{source}: corrupt header ({exc})") from None

    offset = 14 + hlen
    arrays: dict[str, np.ndarray] = {}
    for name, shape in header["tensors"]:
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(data):
            raise CheckpointError(f"{source}: truncated tensor {name}")
        arrays[name] = np.frombuffer(data[offset:end], dtype="<f4").astype(np.float32).reshape(shape)
        offset = end
    if offset != len(data):
        raise CheckpointError(f"{source}: {len(data) - offset} trailing bytes")

    n_layers = len(header["hidden"]) + 1
    layers = [DenseParams(arrays[f"W{i}"], arrays[f"b{i}"]) for i in range(1, n_layers + 1)]
    bns = None
    if header["batchnorm"] is not None:
        bns = [
            BatchNormParams(
                arrays[f"gamma{i}"], arrays[f"beta{i}"],
                arrays[f"running_mean{i}"], arrays[f"running_var{i}"],
                cfg["momentum"], cfg["eps"],
            )
            for i, cfg in enumerate(header["batchnorm"], 1)
        ]
    attention = AttentionParams(arrays["W_a"]) if "W_a" in arrays else None
    scaler = header["input_scaler"]
    return ClassifierModel(
        header["variant"], layers, bns, header["dropout_p"], attention,
        None if scaler is None else ScalerParams.from_json(scaler),
        header["embed_features"],
    )


def models_equal(a: ClassifierModel, b: ClassifierModel) -> bool:
    """Bitwise comparison of structure, parameters and buffers."""
    if (a.variant, a.hidden, a.k, a.dropout_p, a.embed_features) != (
        b.variant, b.hidden, b.k, b.dropout_p, b.embed_features
    ):
        return False
    sa, sb = a.input_scaler, b.input_scaler
    if (sa is None) != (sb is None):
        return False
    if sa is not None and sa.to_json() != sb.to_json():
        return False
    ta, tb = _tensor_layout(a), _tensor_layout(b)
    if [n for n, _ in ta] != [n for n, _ in tb]:
        return False
    return all(
        x.dtype == y.dtype and x.shape == y.shape and x.tobytes() == y.tobytes()
        for (_, x), (_, y) in zip(ta, tb)
    )


def write_history_csv(history: Sequence[EpochRecord], destination: str | os.PathLike) -> None:
    lines = ["epoch,loss,train_accuracy"]
    lines += [f"{h.epoch},{h.loss!r},{h.train_accuracy!r}" for h in history]
    Path(destination).write_text("\n".join(lines) + "\n", encoding="utf-8")
