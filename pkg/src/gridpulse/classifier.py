"""One-hidden-layer ReLU/softmax network trained on cluster tiers with plain
minibatch gradient descent."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import TextIO

import numpy as np

LOG_CLAMP = 1e-12
MODEL_MAGIC = "gridpulse-mlp"
MODEL_VERSION = "v1"


class DegenerateSplitError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """Weights for ``softmax(W2 @ relu(W1 @ x + b1) + b2)``.

    ``W1`` is ``h x d`` and ``W2`` is ``k x h``.
    """

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    seed: int = 0

    @property
    def layer_dims(self) -> tuple[int, int, int]:
        h, d = self.W1.shape
        return d, h, self.W2.shape[0]

    def params(self) -> tuple[np.ndarray, ...]:
        return self.W1, self.b1, self.W2, self.b2


def init_model(d: int, h: int, k: int, seed: int = 0) -> ClassifierModel:
    """Glorot-uniform weights from ``default_rng(seed)``, zero biases."""
    if min(d, h, k) < 1:
        raise ValueError("layer sizes must be positive")
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (d + h))
    lim2 = np.sqrt(6.0 / (h + k))
    W1 = rng.uniform(-lim1, lim1, size=(h, d))
    W2 = rng.uniform(-lim2, lim2, size=(k, h))
    return ClassifierModel(W1, np.zeros(h), W2, np.zeros(k), seed)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _check_input(model: ClassifierModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    d = model.layer_dims[0]
    if x.shape[-1] != d:
        raise ValueError(f"expected {d} features, got {x.shape[-1]}")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    return x


def forward(model: ClassifierModel, x) -> np.ndarray:
    """Class probabilities for one feature vector or a batch of rows."""
    x = _check_input(model, x)
    hidden = np.maximum(x @ model.W1.T + model.b1, 0.0)
    return softmax(hidden @ model.W2.T + model.b2)


def loss(probs, label: int) -> float:
    """Categorical cross-entropy ``-ln p[label]`` with ``p`` clamped at 1e-12."""
    probs = np.asarray(probs, dtype=float)
    if not 0 <= label < len(probs):
        raise ValueError(f"label {label} out of range for {len(probs)} classes")
    return float(-np.log(max(probs[label], LOG_CLAMP)))


def _mean_loss(probs: np.ndarray, y: np.ndarray) -> float:
    p = probs[np.arange(len(y)), y]
    return float(-np.log(np.maximum(p, LOG_CLAMP)).mean())


def gradients(model: ClassifierModel, X, y) -> tuple[float, tuple[np.ndarray, ...]]:
    """Mean cross-entropy over the batch and its gradient for each parameter.

    The clamp in the loss is ignored in the gradient (it only binds at
    probabilities below 1e-12).
    """
    X = _check_input(model, X)
    y = np.asarray(y, dtype=int)
    n = len(y)
    pre = X @ model.W1.T + model.b1
    hidden = np.maximum(pre, 0.0)
    probs = softmax(hidden @ model.W2.T + model.b2)
    delta2 = probs.copy()
    delta2[np.arange(n), y] -= 1.0
    delta2 /= n
    gW2 = delta2.T @ hidden
    gb2 = delta2.sum(axis=0)
    delta1 = (delta2 @ model.W2) * (pre > 0)
    gW1 = delta1.T @ X
    gb1 = delta1.sum(axis=0)
    return _mean_loss(probs, y), (gW1, gb1, gW2, gb2)


def sgd_step(model: ClassifierModel, X, y, lr: float) -> ClassifierModel:
    _, grads = gradients(model, X, y)
    new = [p - lr * g for p, g in zip(model.params(), grads)]
    return ClassifierModel(*new, seed=model.seed)


def evaluate(model: ClassifierModel, X, y) -> tuple[float, float]:
    """Mean cross-entropy and argmax accuracy (lowest class wins ties)."""
    y = np.asarray(y, dtype=int)
    if len(y) == 0:
        raise ValueError("empty evaluation set")
    probs = forward(model, X)
    return _mean_loss(probs, y), float((probs.argmax(axis=1) == y).mean())


def predict(model: ClassifierModel, X) -> np.ndarray:
    return forward(model, X).argmax(axis=-1)


def stratified_split(y: np.ndarray, train_fraction: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split keeping ``round(train_fraction * n_class)`` of
    each class for training."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("split_fraction must lie in (0, 1)")
    train, test = [], []
    for cls in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == cls))
        cut = int(round(train_fraction * len(idx)))
        train.append(idx[:cut])
        test.append(idx[cut:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    test_loss: float
    train_acc: float
    test_acc: float


@dataclass(eq=False)
class TrainingReport:
    epochs: list[EpochMetrics]
    split_seed: int
    hyperparameters: dict
    train_index: np.ndarray = field(repr=False, default=None)
    test_index: np.ndarray = field(repr=False, default=None)

    @property
    def final(self) -> EpochMetrics:
        return self.epochs[-1]

    def to_csv(self, fh: TextIO) -> None:
        fh.write("epoch,train_loss,test_loss,train_acc,test_acc\n")
        for e in self.epochs:
            fh.write(f"{e.epoch},{e.train_loss!r},{e.test_loss!r},{e.train_acc!r},{e.test_acc!r}\n")


def train(
    model: ClassifierModel,
    features,
    labels,
    epochs: int = 50,
    lr: float = 0.05,
    batch_size: int = 32,
    split_fraction: float = 0.8,
    seed: int = 0,
) -> tuple[ClassifierModel, TrainingReport]:
    """Fit ``model`` on a stratified train split and track both splits per epoch.

    ``features`` is a :class:`~gridpulse.clustering.FeatureMatrix` or a plain
    array; ``labels`` are class indices in ``[0, k)``. One generator seeded
    with ``seed`` drives the split and the per-epoch shuffles.
    """
    X = np.asarray(getattr(features, "values", features), dtype=float)
    y = np.asarray(labels, dtype=int)
    k = model.layer_dims[2]
    if len(X) != len(y):
        raise ValueError("features and labels differ in length")
    if y.min() < 0 or y.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    if epochs < 1 or batch_size < 1:
        raise ValueError("epochs and batch_size must be positive")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = stratified_split(y, split_fraction, rng)
    present = set(np.unique(y[train_idx]).tolist())
    absent = sorted(set(range(k)) - present)
    if absent:
        raise DegenerateSplitError(f"degenerate split: classes {absent} missing from the training split")
    if len(test_idx) == 0:
        raise DegenerateSplitError("degenerate split: empty test split")

    Xtr, ytr, Xte, yte = X[train_idx], y[train_idx], X[test_idx], y[test_idx]
    W1, b1, W2, b2 = (p.copy() for p in model.params())
    current = model
    history = []
    for epoch in range(1, epochs + 1):
        order = rng.permutation(len(ytr))
        for start in range(0, len(order), batch_size):
            batch = order[start : start + batch_size]
            _, (gW1, gb1, gW2, gb2) = gradients(current, Xtr[batch], ytr[batch])
            W1 -= lr * gW1
            b1 -= lr * gb1
            W2 -= lr * gW2
            b2 -= lr * gb2
            current = ClassifierModel(W1, b1, W2, b2, model.seed)
        tr_loss, tr_acc = evaluate(current, Xtr, ytr)
        te_loss, te_acc = evaluate(current, Xte, yte)
        history.append(EpochMetrics(epoch, tr_loss, te_loss, tr_acc, te_acc))

    final = ClassifierModel(W1.copy(), b1.copy(), W2.copy(), b2.copy(), model.seed)
    hyper = dict(epochs=epochs, lr=lr, batch_size=batch_size, split_fraction=split_fraction,
                 layer_dims=model.layer_dims)
    return final, TrainingReport(history, seed, hyper, train_idx, test_idx)


def save_model(model: ClassifierModel, dest: str | Path | TextIO) -> None:
    """Plain-text model: a header line then one parameter per line
    (W1, b1, W2, b2, row-major) at 17 significant digits."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            save_model(model, fh)
        return
    d, h, k = model.layer_dims
    dest.write(f"{MODEL_MAGIC} {MODEL_VERSION} {d} {h} {k} {model.seed}\n")
    for p in model.params():
        for v in p.ravel():
            dest.write(f"{v:.17g}\n")


def load_model(src: str | Path | TextIO) -> ClassifierModel:
    if isinstance(src, (str, Path)):
        with open(src, encoding="utf-8") as fh:
            return load_model(fh)
    header = src.readline().split()
    if len(header) != 6 or header[0] != MODEL_MAGIC:
        raise ValueError("not a gridpulse model file")
    if header[1] != MODEL_VERSION:
        raise ValueError(f"unsupported model version {header[1]}")
    d, h, k, seed = (int(v) for v in header[2:])
    values = np.array([float(line) for line in src if line.strip()])
    shapes = [(h, d), (h,), (k, h), (k,)]
    expected = sum(int(np.prod(s)) for s in shapes)
    if len(values) != expected:
        raise ValueError(f"model file holds {len(values)} values, expected {expected}")
    params, pos = [], 0
    for s in shapes:
        size = int(np.prod(s))
        params.append(values[pos : pos + size].reshape(s))
        pos += size
    return ClassifierModel(*params, seed=seed)
