"""
Synthetic data, the two model families and the worker-side coded task.

Models keep a single flat parameter vector laid out as in
:mod:`lwpd.assignment`: per layer a row-major (fan_out, fan_in + 1) matrix
with the bias in the last column. All losses are means over the slice.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .assignment import GradientBlockLayout, layer_offsets, scatter_plan
from .codebook import Codebook

FAMILIES = ("logistic", "mlp", "linear")
HEADER_FLOATS = 2  # worker id + round id travel with every message


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_train: int

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels differ in length")
        if not 0 < self.n_train <= len(self.labels):
            raise ValueError(f"bad train split {self.n_train} for {len(self.labels)} records")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1

    @property
    def train(self) -> tuple[np.ndarray, np.ndarray]:
        return self.features[: self.n_train], self.labels[: self.n_train]

    @property
    def test(self) -> tuple[np.ndarray, np.ndarray]:
        return self.features[self.n_train:], self.labels[self.n_train:]


def gen_mixture(num_classes, num_components, dim, n_records, seed, spread=3.0, sigma=1.0,
                train_fraction=0.8) -> Dataset:
    """Gaussian mixture classification data.

    Component c belongs to class ``c % num_classes``. Each record draws a
    class uniformly, then one of that class's components uniformly, then a
    point from N(mean_c, sigma^2 I). Component means are N(0, spread^2 I).
    """
    if num_classes < 2 or num_components < num_classes or dim < 1 or n_records < 10:
        raise ValueError(
            f"invalid mixture sizes v={num_classes}, g={num_components}, u={dim}, N={n_records}"
        )
    rng = np.random.default_rng(seed)
    means = rng.normal(0.0, spread, size=(num_components, dim))
    labels = rng.integers(0, num_classes, size=n_records)
    per_class = [np.arange(c, num_components, num_classes) for c in range(num_classes)]
    counts = np.array([len(p) for p in per_class])
    pick = np.floor(rng.random(n_records) * counts[labels]).astype(int)
    comp = np.array([per_class[c][i] for c, i in zip(labels, pick)])
    features = means[comp] + sigma * rng.normal(size=(n_records, dim))
    return Dataset(features, labels.astype(np.int64), int(train_fraction * n_records))


def mixture_means(num_classes, num_components, dim, seed, spread=3.0) -> np.ndarray:
    """The component means :func:`gen_mixture` draws for the same arguments."""
    rng = np.random.default_rng(seed)
    return rng.normal(0.0, spread, size=(num_components, dim))


def save_csv(ds: Dataset, path) -> None:
    """Write header ``x0..x{u-1},label``; the first ``n_train`` rows are the train split."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(ds.dim)] + ["label"])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def load_csv(path, train_fraction=0.8) -> Dataset:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if not header or header[-1] != "label" or header[:-1] != [f"x{i}" for i in range(len(header) - 1)]:
        raise ValueError(f"unexpected CSV header {header!r}")
    if not body:
        raise ValueError("CSV has no records")
    features = np.array([[float(v) for v in r[:-1]] for r in body])
    labels = np.array([int(r[-1]) for r in body], dtype=np.int64)
    return Dataset(features, labels, int(train_fraction * len(body)))


# ---------------------------------------------------------------------------
# models


@dataclass
class Model:
    family: str
    layer_sizes: tuple[int, ...]
    w: np.ndarray

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown model family {self.family!r}")
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if self.family in ("logistic", "linear") and len(self.layer_sizes) != 2:
            raise ValueError(f"{self.family} models have no hidden layers")
        self.w = np.asarray(self.w, dtype=float)
        if self.w.shape != (layer_offsets(self.layer_sizes)[-1],):
            raise ValueError("parameter vector does not match the layer sizes")

    @property
    def loss_kind(self) -> str:
        return "mse" if self.family == "linear" else "ce"

    def copy(self, w=None) -> "Model":
        return Model(self.family, self.layer_sizes, self.w.copy() if w is None else w)

    def layers(self, w=None):
        w = self.w if w is None else w
        offs = layer_offsets(self.layer_sizes)
        out = []
        for i, (fi, fo) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            m = w[offs[i]:offs[i + 1]].reshape(fo, fi + 1)
            out.append((m[:, :-1], m[:, -1]))
        return out


def init_model(family, layer_sizes, seed=0) -> Model:
    """Weights uniform in [-0.5, 0.5] / sqrt(fan_in)."""
    sizes = tuple(int(s) for s in layer_sizes)
    rng = np.random.default_rng(seed)
    parts = []
    for fi, fo in zip(sizes[:-1], sizes[1:]):
        parts.append((rng.random((fo, fi + 1)) - 0.5).ravel() / np.sqrt(fi))
    return Model(family, sizes, np.concatenate(parts))


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _targets(model: Model, y, rows: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim == 2:
        return y.astype(float)
    onehot = np.zeros((rows, model.layer_sizes[-1]))
    onehot[np.arange(rows), y] = 1.0
    return onehot


def _forward(model: Model, X, w=None):
    acts = [X]
    layers = model.layers(w)
    for i, (W, b) in enumerate(layers):
        z = acts[-1] @ W.T + b
        last = i == len(layers) - 1
        if not last:
            acts.append(np.maximum(z, 0.0))
        elif model.loss_kind == "ce":
            acts.append(_softmax(z))
        else:
            acts.append(z)
    return acts


def predict(model: Model, X) -> np.ndarray:
    return _forward(model, np.asarray(X, dtype=float))[-1]


def full_gradient(model: Model, X, y, w=None) -> np.ndarray:
    """Gradient of the mean loss over (X, y) w.r.t. the flat parameters."""
    X = np.asarray(X, dtype=float)
    m = len(X)
    if m == 0:
        raise ValueError("empty data slice")
    acts = _forward(model, X, w)
    Y = _targets(model, y, m)
    # softmax+CE and identity+MSE share the same output delta
    delta = (acts[-1] - Y) / m
    layers = model.layers(w)
    grads = []
    for i in range(len(layers) - 1, -1, -1):
        a = acts[i]
        gW = delta.T @ a
        gb = delta.sum(axis=0)
        grads.append(np.hstack([gW, gb[:, None]]).ravel())
        if i:
            delta = (delta @ layers[i][0]) * (a > 0)
    return np.concatenate(grads[::-1])


def eval_loss(model: Model, X, y) -> float:
    """Mean cross-entropy (or mean 0.5*||f - y||^2 for the linear family)."""
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise ValueError("empty data slice")
    out = predict(model, X)
    Y = _targets(model, y, len(X))
    if model.loss_kind == "mse":
        return float(0.5 * np.mean(np.sum((out - Y) ** 2, axis=1)))
    p = np.clip(np.sum(out * Y, axis=1), 1e-300, None)
    return float(-np.mean(np.log(p)))


def eval_accuracy(model: Model, X, y) -> float:
    X = np.asarray(X, dtype=float)
    if len(X) == 0:
        raise ValueError("empty data slice")
    out = predict(model, X)
    y = np.asarray(y)
    truth = y.argmax(axis=1) if y.ndim == 2 else y
    return float(np.mean(out.argmax(axis=1) == truth))


# ---------------------------------------------------------------------------
# block gradients and coded tasks


def block_gradient(model: Model, layout: GradientBlockLayout, block_id: int, X, y) -> np.ndarray:
    """Gradient on (X, y) restricted to block ``block_id``'s coordinates, padded to B."""
    return layout.gather(block_id, full_gradient(model, X, y))


@dataclass(frozen=True)
class CodedTaskResult:
    worker: int
    round: int
    v: np.ndarray
    floats_communicated: int


def coded_task(model: Model, cb: Codebook, layout: GradientBlockLayout, worker: int, round: int,
               local_data: dict) -> CodedTaskResult:
    """Signed sum of the block gradients in the worker's plan.

    ``local_data`` maps each held data partition to its (X, y) slice. In
    ``"data"`` mode block j is evaluated on partition j. In ``"2d"`` mode
    every block is evaluated on the union of the held partitions, which is
    exact for systematic rows and a lossy stand-in for parity rows. The
    1/sqrt(t) scale is left to the master's learning rate.
    """
    plan = scatter_plan(cb, layout, worker, round)
    needed = sorted({j for j, _ in plan.entries})
    if sorted(local_data) != needed:
        raise RuntimeError(
            f"worker {worker} round {round}: holds partitions {sorted(local_data)}, plan needs {needed}"
        )
    v = np.zeros(layout.block_dim)
    if layout.mode == "data":
        cache = {}
        for j, sign in plan.entries:
            if j not in cache:
                cache[j] = block_gradient(model, layout, j, *local_data[j])
            v += sign * cache[j]
    else:
        X = np.concatenate([local_data[p][0] for p in needed])
        y = np.concatenate([local_data[p][1] for p in needed])
        g = full_gradient(model, X, y)
        for j, sign in plan.entries:
            v += sign * layout.gather(j, g)
    if not np.all(np.isfinite(v)):
        raise RuntimeError(f"non-finite coded result from worker {worker}")
    return CodedTaskResult(worker, round, v, layout.block_dim + HEADER_FLOATS)
