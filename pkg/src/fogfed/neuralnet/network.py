"""Architecture definition, SGD training loop, evaluation, and gradient checking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import Dataset
from ..validation import check_positive_int
from . import layers as L
from .weights import WeightSet

LAYER_KINDS = ("conv1d", "relu", "maxpool1d", "dense", "softmax")


class TrainingDivergedError(RuntimeError):
    """Raised when a NaN/Inf shows up in the loss or the weights during training."""


@dataclass(frozen=True)
class LayerSpec:
    """One layer with its shape parameters resolved against the input geometry.

    in_shape/out_shape are (channels, length) for sequence layers and
    (features,) once flattened by a dense layer.
    """

    kind: str
    filters: int = 0
    kernel: int = 0
    stride: int = 1
    pool: int = 0
    units: int = 0
    in_shape: tuple[int, ...] = ()
    out_shape: tuple[int, ...] = ()


def make_arch(d: int, recipe: list[tuple]) -> list[LayerSpec]:
    """Resolve a layer recipe against input length d (1 channel).

    Recipe entries: ("conv1d", filters, kernel[, stride]), ("relu",),
    ("maxpool1d", pool), ("dense", units), ("softmax",).
    """
    check_positive_int(d, "d")
    shape: tuple[int, ...] = (1, d)
    arch: list[LayerSpec] = []
    for entry in recipe:
        kind = entry[0]
        params = dict(filters=0, kernel=0, stride=1, pool=0, units=0)
        if kind == "conv1d":
            if len(shape) != 2:
                raise ValueError("conv1d requires an unflattened (channels, length) input")
            params["filters"], params["kernel"] = entry[1], entry[2]
            params["stride"] = entry[3] if len(entry) > 3 else 1
            if params["kernel"] > shape[1]:
                raise ValueError(
                    f"conv1d kernel {params['kernel']} cannot slide over input of length {shape[1]}"
                )
            out = (params["filters"], (shape[1] - params["kernel"]) // params["stride"] + 1)
        elif kind == "maxpool1d":
            if len(shape) != 2:
                raise ValueError("maxpool1d requires an unflattened (channels, length) input")
            params["pool"] = entry[1]
            if params["pool"] > shape[1]:
                raise ValueError(f"maxpool1d width {params['pool']} exceeds input length {shape[1]}")
            out = (shape[0], (shape[1] - params["pool"]) // params["pool"] + 1)
        elif kind == "relu":
            out = shape
        elif kind == "dense":
            params["units"] = entry[1]
            out = (params["units"],)
        elif kind == "softmax":
            if len(shape) != 1:
                raise ValueError("softmax requires a flattened input")
            out = shape
        else:
            raise ValueError(f"unknown layer kind {kind!r}")
        arch.append(LayerSpec(kind=kind, in_shape=shape, out_shape=out, **params))
        shape = out
    return arch


def make_cnn_arch(
    d: int,
    c: int,
    conv_filters=(32, 16),
    conv_kernels=(7, 5),
    pool: int = 2,
    dense_units=(64,),
) -> list[LayerSpec]:
    """Conv/relu/pool stack followed by dense/relu blocks and a softmax head."""
    check_positive_int(c, "c", minimum=2)
    if len(conv_filters) != len(conv_kernels):
        raise ValueError("conv_filters and conv_kernels must align")
    recipe: list[tuple] = []
    for filters, kernel in zip(conv_filters, conv_kernels):
        recipe += [("conv1d", filters, kernel), ("relu",), ("maxpool1d", pool)]
    for units in dense_units:
        recipe += [("dense", units), ("relu",)]
    recipe += [("dense", c), ("softmax",)]
    return make_arch(d, recipe)


def default_arch(d: int, c: int) -> list[LayerSpec]:
    """The reference classifier: conv(32,k7) pool2 conv(16,k5) pool2 dense64 dense(c)."""
    if d < 8:
        raise ValueError(f"input length {d} too small for the default architecture")
    return make_cnn_arch(d, c)


def arch_input_dim(arch: list[LayerSpec]) -> int:
    return arch[0].in_shape[1] if len(arch[0].in_shape) == 2 else arch[0].in_shape[0]


def arch_class_count(arch: list[LayerSpec]) -> int:
    return arch[-1].out_shape[0]


def init_weights(arch: list[LayerSpec], seed: int) -> WeightSet:
    """He-uniform kernels (bound sqrt(6/fan_in)), zero biases, deterministic in seed."""
    rng = np.random.default_rng(seed)
    tensors: list[np.ndarray] = []
    layer_of: list[int] = []
    for i, spec in enumerate(arch):
        if spec.kind == "conv1d":
            c_in = spec.in_shape[0]
            fan_in = c_in * spec.kernel
            bound = np.sqrt(6.0 / fan_in)
            kernel = rng.uniform(-bound, bound, size=(spec.filters, c_in, spec.kernel))
            tensors += [kernel.astype(np.float32), np.zeros(spec.filters, dtype=np.float32)]
            layer_of += [i, i]
        elif spec.kind == "dense":
            fan_in = int(np.prod(spec.in_shape))
            bound = np.sqrt(6.0 / fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, spec.units))
            tensors += [w.astype(np.float32), np.zeros(spec.units, dtype=np.float32)]
            layer_of += [i, i]
    return WeightSet(tensors, tuple(layer_of))


def _check_weights_match(arch: list[LayerSpec], weights: WeightSet) -> None:
    expected = sum(2 for s in arch if s.kind in ("conv1d", "dense"))
    if len(weights.tensors) != expected:
        raise ValueError(
            f"architecture needs {expected} tensors, WeightSet has {len(weights.tensors)}"
        )


def _forward_batch(arch, tensors, x, want_caches=False):
    """x: (B, d) -> logits (B, c). Softmax is applied by the caller as needed."""
    act = x.reshape(x.shape[0], 1, x.shape[1])
    caches = []
    t = 0
    for spec in arch:
        if spec.kind == "conv1d":
            act, cache = L.conv1d_forward(act, tensors[t], tensors[t + 1], spec.stride)
            t += 2
        elif spec.kind == "relu":
            act, cache = L.relu_forward(act)
        elif spec.kind == "maxpool1d":
            act, cache = L.maxpool1d_forward(act, spec.pool)
        elif spec.kind == "dense":
            act, cache = L.dense_forward(act, tensors[t], tensors[t + 1])
            t += 2
        else:  # softmax head: training/eval work on logits, probs are computed on top
            cache = None
        if want_caches:
            caches.append(cache)
    return act, caches


def forward(arch: list[LayerSpec], weights: WeightSet, x) -> np.ndarray:
    """Run one instance through the network; returns the class probability vector."""
    _check_weights_match(arch, weights)
    x = np.asarray(x, dtype=weights.tensors[0].dtype).reshape(1, -1)
    d = arch_input_dim(arch)
    if x.shape[1] != d:
        raise ValueError(f"input has {x.shape[1]} features, architecture expects {d}")
    logits, _ = _forward_batch(arch, weights.tensors, x)
    return L.softmax_forward(logits)[0]


def _loss_and_grads(arch, tensors, x, y):
    """Mean cross-entropy over the batch, plus correct-count and per-tensor grads."""
    logits, caches = _forward_batch(arch, tensors, x, want_caches=True)
    logp = L.log_softmax(logits)
    n = x.shape[0]
    loss = -logp[np.arange(n), y].mean()
    correct = int((logits.argmax(axis=1) == y).sum())

    probs = np.exp(logp)
    dact = probs
    dact[np.arange(n), y] -= 1.0
    dact /= n
    dact = dact.astype(logits.dtype)

    grads = [None] * len(tensors)
    t = len(tensors)
    for spec, cache in zip(reversed(arch), reversed(caches)):
        if spec.kind == "dense":
            dact, dw, db = L.dense_backward(dact, cache)
            grads[t - 2], grads[t - 1] = dw, db
            t -= 2
        elif spec.kind == "conv1d":
            dact, dw, db = L.conv1d_backward(dact, cache)
            grads[t - 2], grads[t - 1] = dw, db
            t -= 2
        elif spec.kind == "relu":
            dact = L.relu_backward(dact, cache)
        elif spec.kind == "maxpool1d":
            dact = L.maxpool1d_backward(dact, cache)
        # softmax: folded into the cross-entropy gradient above
    return loss, correct, grads


def _batched_eval(arch, tensors, x, y, chunk=512):
    """Loss/accuracy over a full split without building one giant window matrix."""
    total_loss = 0.0
    correct = 0
    for start in range(0, x.shape[0], chunk):
        xs = x[start : start + chunk]
        ys = y[start : start + chunk]
        logits, _ = _forward_batch(arch, tensors, xs)
        logp = L.log_softmax(logits)
        total_loss += float(-logp[np.arange(xs.shape[0]), ys].sum())
        correct += int((logits.argmax(axis=1) == ys).sum())
    n = x.shape[0]
    return total_loss / n, correct / n


@dataclass(frozen=True)
class EpochRecord:
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


@dataclass(frozen=True)
class TrainHistory:
    records: tuple[EpochRecord, ...]

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,train_acc,val_loss,val_acc"]
        for i, r in enumerate(self.records, start=1):
            lines.append(
                f"{i},{r.train_loss!r},{r.train_accuracy!r},{r.val_loss!r},{r.val_accuracy!r}"
            )
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: np.ndarray  # (c, c) int64, rows = true class, cols = predicted

    def __post_init__(self):
        total = int(self.confusion.sum())
        if total == 0:
            raise ValueError("confusion matrix is empty")
        trace_acc = float(np.trace(self.confusion)) / total
        if abs(trace_acc - self.accuracy) > 1e-12:
            raise ValueError("accuracy does not match trace(confusion)/sum(confusion)")


def train_local(
    arch: list[LayerSpec],
    weights: WeightSet,
    shard: Dataset,
    val: Dataset,
    epochs: int,
    batch: int,
    lr: float,
    momentum: float,
    seed: int,
) -> tuple[WeightSet, TrainHistory]:
    """Mini-batch SGD with momentum on cross-entropy, deterministic in (inputs, seed).

    Batch order reshuffles every epoch from a PRNG seeded with `seed`; the last
    incomplete batch is used. Epoch train metrics are running averages over the
    batches as seen during the epoch; validation metrics are computed on the
    full val split after each epoch.
    """
    check_positive_int(epochs, "epochs")
    check_positive_int(batch, "batch")
    _check_weights_match(arch, weights)
    n = shard.n_rows
    if batch > n:
        raise ValueError(f"batch size {batch} exceeds shard size {n}")
    d = arch_input_dim(arch)
    if shard.n_features != d or val.n_features != d:
        raise ValueError(
            f"architecture expects {d} features, got shard={shard.n_features} val={val.n_features}"
        )

    tensors = [t.astype(np.float32, copy=True) for t in weights.tensors]
    velocity = [np.zeros_like(t) for t in tensors]
    rng = np.random.default_rng(seed)
    x_train = shard.features
    y_train = shard.labels
    records = []

    for epoch in range(epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        for b_start in range(0, n, batch):
            rows = order[b_start : b_start + batch]
            loss, batch_correct, grads = _loss_and_grads(arch, tensors, x_train[rows], y_train[rows])
            if not np.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch + 1}, batch {b_start // batch + 1}"
                )
            loss_sum += float(loss) * len(rows)
            correct += batch_correct
            for i, g in enumerate(grads):
                velocity[i] = momentum * velocity[i] + g
                tensors[i] = tensors[i] - lr * velocity[i]
        for i, t in enumerate(tensors):
            if not np.all(np.isfinite(t)):
                raise TrainingDivergedError(
                    f"non-finite value in weight tensor {i} after epoch {epoch + 1}"
                )
        val_loss, val_acc = _batched_eval(arch, tensors, val.features, val.labels)
        records.append(
            EpochRecord(
                train_loss=loss_sum / n,
                train_accuracy=correct / n,
                val_loss=val_loss,
                val_accuracy=val_acc,
            )
        )

    return WeightSet(tensors, weights.layer_of), TrainHistory(tuple(records))


def evaluate(arch: list[LayerSpec], weights: WeightSet, test: Dataset) -> EvalReport:
    """Argmax predictions (ties break to the lowest class index) and a confusion matrix."""
    _check_weights_match(arch, weights)
    if test.n_rows == 0:
        raise ValueError("empty test set")
    d = arch_input_dim(arch)
    if test.n_features != d:
        raise ValueError(f"architecture expects {d} features, got {test.n_features}")
    c = arch_class_count(arch)
    if test.labels.max() >= c:
        raise ValueError(f"label {test.labels.max()} out of range for {c} classes")

    confusion = np.zeros((c, c), dtype=np.int64)
    for start in range(0, test.n_rows, 512):
        xs = test.features[start : start + 512]
        ys = test.labels[start : start + 512]
        logits, _ = _forward_batch(arch, weights.tensors, xs)
        preds = logits.argmax(axis=1)
        np.add.at(confusion, (ys, preds), 1)
    accuracy = float(np.trace(confusion)) / test.n_rows
    return EvalReport(accuracy=accuracy, confusion=confusion)


def gradient_check(arch: list[LayerSpec], weights: WeightSet, x, y, step: float = 1e-5) -> float:
    """Max relative error between backprop and central finite differences.

    Runs in float64. Parameters where both gradients are within 1e-7 of each
    other fall back to an absolute comparison and contribute zero error.
    """
    if weights.n_params > 2000:
        raise ValueError(f"gradient_check is for small nets (<= 2000 params), got {weights.n_params}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    tensors = [t.astype(np.float64) for t in weights.tensors]
    _, _, grads = _loss_and_grads(arch, tensors, x, y)

    def loss_at() -> float:
        logits, _ = _forward_batch(arch, tensors, x)
        logp = L.log_softmax(logits)
        return float(-logp[np.arange(x.shape[0]), y].mean())

    max_err = 0.0
    for t_idx, tensor in enumerate(tensors):
        flat = tensor.reshape(-1)
        gflat = grads[t_idx].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = loss_at()
            flat[i] = orig - step
            down = loss_at()
            flat[i] = orig
            fd = (up - down) / (2.0 * step)
            bp = float(gflat[i])
            diff = abs(fd - bp)
            if diff <= 1e-7:
                continue
            max_err = max(max_err, diff / max(abs(fd), abs(bp)))
    return max_err
