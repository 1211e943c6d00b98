"""Independent reference computations used by several test modules."""

import math

import numpy as np

from lwpd.learner import Model, eval_loss, init_model


def fd_block_gradient(model, layout, j, X, y, h=1e-6):
    """Central differences of the mean loss over block j's coordinates."""
    idx = layout.indices(j)
    out = np.zeros(layout.block_dim)
    for pos, c in enumerate(idx):
        wp = model.w.copy()
        wm = model.w.copy()
        wp[c] += h
        wm[c] -= h
        out[pos] = (eval_loss(model.copy(wp), X, y) - eval_loss(model.copy(wm), X, y)) / (2 * h)
    return out


def rel_error(a, b):
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return 0.0 if scale == 0 else float(np.linalg.norm(a - b) / scale)


def scalar_loss(model: Model, X, y):
    """Mean loss with plain Python loops, one record and one neuron at a time."""
    layers = model.layers()
    total = 0.0
    for x, label in zip(X.tolist(), np.asarray(y).tolist()):
        act = x
        for li, (W, b) in enumerate(layers):
            z = []
            for r in range(W.shape[0]):
                s = float(b[r])
                for c in range(W.shape[1]):
                    s += float(W[r, c]) * act[c]
                z.append(s)
            act = z if li == len(layers) - 1 else [max(v, 0.0) for v in z]
        if model.loss_kind == "mse":
            total += 0.5 * sum((a - b) ** 2 for a, b in zip(act, label))
        else:
            top = max(act)
            log_norm = top + math.log(sum(math.exp(a - top) for a in act))
            total += log_norm - act[label]
    return total / len(X)


def random_problem(rng, family, sizes, records):
    """A small model with random weights and a matching random dataset."""
    model = init_model(family, sizes, seed=int(rng.integers(2 ** 31)))
    model = model.copy(rng.normal(scale=0.7, size=len(model.w)))
    X = rng.normal(size=(records, sizes[0]))
    y = rng.integers(0, sizes[-1], size=records)
    return model, X, y
