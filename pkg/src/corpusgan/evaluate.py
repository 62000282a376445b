"""Clustering, finetuned classification, significance testing and 2-D projections."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy import stats

from .neural import Layer, MlpParams, classifier_nll, forward_cache, glorot_uniform, sgd_step


@dataclass
class ClusteringResult:
    assignments: np.ndarray
    inertia: float
    iterations_used: int
    inertia_trace: list[float] = field(default_factory=list)


def _sq_dists(X, C):
    d = (X * X).sum(1)[:, None] - 2 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans(vectors, M: int, seed: int = 0, max_iters: int = 300) -> ClusteringResult:
    """Lloyd's algorithm with k-means++ seeding.

    An emptied cluster is reseeded at the point farthest from its centre.
    Stops when assignments no longer change or after ``max_iters`` rounds.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if len(np.unique(X, axis=0)) < M:
        raise ValueError(f"need at least {M} distinct vectors")
    rng = np.random.default_rng(seed)
    n = len(X)
    centres = [X[rng.integers(n)]]
    for _ in range(1, M):
        d = _sq_dists(X, np.array(centres)).min(axis=1)
        centres.append(X[rng.choice(n, p=d / d.sum())])
    C = np.array(centres)
    rows = np.arange(n)
    assign = _sq_dists(X, C).argmin(axis=1)
    trace = [float(_sq_dists(X, C)[rows, assign].sum())]
    it = 0
    for it in range(1, max_iters + 1):
        for k in range(M):
            members = assign == k
            if members.any():
                C[k] = X[members].mean(axis=0)
            else:
                far = int(_sq_dists(X, C)[rows, assign].argmax())
                C[k] = X[far]
                assign[far] = k
        dist = _sq_dists(X, C)
        new = dist.argmin(axis=1)
        trace.append(float(dist[rows, new].sum()))
        if np.array_equal(new, assign):
            break
        assign = new
    inertia = trace[-1]
    return ClusteringResult(assign, inertia, it, trace)


def rand_index(labels_a, labels_b) -> float:
    """Share of document pairs on which two labellings agree."""
    a, b = np.asarray(labels_a), np.asarray(labels_b)
    if a.shape != b.shape:
        raise ValueError("labelings differ in length")
    n = len(a)
    if n < 2:
        raise ValueError("need at least two items")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)

    def pairs(x):
        return int((x * (x - 1) // 2).sum())

    total = n * (n - 1) // 2
    same_both = pairs(table)
    agree = total + 2 * same_both - pairs(table.sum(1)) - pairs(table.sum(0))
    return agree / total


# ---------------------------------------------------------------------------
# finetuned classification


@dataclass
class AccuracyReport:
    best_epoch: int
    test_accuracy: float
    val_accuracy: float
    val_trace: list[float]
    test_trace: list[float]
    train_loss: list[float]


def ffnn_from_embeddings(E, n_labels: int, hidden: int, seed: int, head: MlpParams | None = None) -> MlpParams:
    """Frozen ``tanh(t @ E)`` input layer followed by a tanh hidden layer and softmax.

    ``head`` (two layers, e.g. a trained weGAN classifier) replaces the randomly
    initialised hidden and output layers.
    """
    E = np.asarray(getattr(E, "data", E))
    first = Layer(E.copy(), None, "tanh", trainable=False)
    if head is not None:
        rest = head.copy().layers
    else:
        rng = np.random.default_rng([seed, 3])
        d = E.shape[1]
        rest = [
            Layer(glorot_uniform(d, hidden, rng), np.zeros(hidden), "tanh"),
            Layer(glorot_uniform(hidden, n_labels, rng), np.zeros(n_labels), "softmax"),
        ]
    return MlpParams([first] + rest)


def ffnn_from_discriminator(D: MlpParams, n_labels: int, seed: int) -> MlpParams:
    """First two discriminator layers (input layer frozen) plus a fresh softmax head."""
    rng = np.random.default_rng([seed, 3])
    l0, l1 = D.layers[0], D.layers[1]
    h = l1.W.shape[1]
    return MlpParams([
        Layer(l0.W.copy(), None if l0.b is None else l0.b.copy(), l0.activation, trainable=False),
        Layer(l1.W.copy(), None if l1.b is None else l1.b.copy(), l1.activation),
        Layer(glorot_uniform(h, n_labels, rng), np.zeros(n_labels), "softmax"),
    ])


def _freeze_prefix(model: MlpParams):
    """Precompute activations through leading frozen layers."""
    k = 0
    while k < len(model.layers) and not model.layers[k].trainable:
        k += 1
    return MlpParams(model.layers[:k]) if k else None, MlpParams(model.layers[k:])


def finetune_classifier(
    model: MlpParams,
    splits: dict,
    epochs: int = 500,
    lr: float = 0.1,
    batch_size: int = 50,
    seed: int = 0,
) -> AccuracyReport:
    """SGD on the training split, selecting the epoch with best validation accuracy.

    ``splits`` maps ``train``/``validation``/``test`` to ``(X, labels)``.
    Ties in validation accuracy go to the earliest epoch.  The model is
    updated in place.
    """
    for name in ("train", "validation", "test"):
        if name not in splits or splits[name][0].shape[0] == 0:
            raise ValueError(f"empty {name} split")
    prefix, trainable = _freeze_prefix(model)

    def features(X):
        return forward_cache(prefix, X)[-1] if prefix is not None else (X.toarray() if sp.issparse(X) else np.asarray(X))

    Xtr, ytr = features(splits["train"][0]), np.asarray(splits["train"][1])
    Xva, yva = features(splits["validation"][0]), np.asarray(splits["validation"][1])
    Xte, yte = features(splits["test"][0]), np.asarray(splits["test"][1])

    def accuracy(X, y):
        return float(np.mean(forward_cache(trainable, X)[-1].argmax(axis=1) == y))

    val_trace, test_trace, losses = [], [], []
    n = len(ytr)
    for epoch in range(epochs):
        rng = np.random.default_rng([seed, 4, epoch])
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grads = classifier_nll(trainable, Xtr[idx], ytr[idx])
            total += loss
            sgd_step(trainable, grads, lr / len(idx))
        losses.append(total / n)
        val_trace.append(accuracy(Xva, yva))
        test_trace.append(accuracy(Xte, yte))
    if not val_trace:
        return AccuracyReport(0, accuracy(Xte, yte), accuracy(Xva, yva), [], [], [])
    best = int(np.argmax(val_trace))
    return AccuracyReport(best + 1, test_trace[best], val_trace[best], val_trace, test_trace, losses)


# ---------------------------------------------------------------------------
# significance


@dataclass
class RunStats:
    treatment: list[float]
    baseline: list[float]
    mean: float
    sd: float
    baseline_mean: float
    baseline_sd: float
    welch_t: float
    df: float
    p_value: float
    zero_variance: bool = False


def compare_runs(treatment: Sequence[float], baseline: Sequence[float]) -> RunStats:
    """Welch's unequal-variance t-test with Welch-Satterthwaite degrees of freedom."""
    a = np.asarray(treatment, dtype=np.float64)
    b = np.asarray(baseline, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError("need at least two observations per arm")
    va, vb = a.var(ddof=1), b.var(ddof=1)
    se2 = va / len(a) + vb / len(b)
    base = dict(treatment=a.tolist(), baseline=b.tolist(), mean=float(a.mean()), sd=float(math.sqrt(va)),
                baseline_mean=float(b.mean()), baseline_sd=float(math.sqrt(vb)))
    if se2 == 0:
        same = a.mean() == b.mean()
        return RunStats(**base, welch_t=0.0 if same else math.copysign(math.inf, a.mean() - b.mean()),
                        df=float(len(a) + len(b) - 2), p_value=1.0 if same else 0.0, zero_variance=True)
    t = (a.mean() - b.mean()) / math.sqrt(se2)
    df = se2 ** 2 / ((va / len(a)) ** 2 / (len(a) - 1) + (vb / len(b)) ** 2 / (len(b) - 1))
    p = float(min(1.0, 2 * stats.t.sf(abs(t), df)))
    return RunStats(**base, welch_t=float(t), df=float(df), p_value=p)


# ---------------------------------------------------------------------------
# projection


def pca_2d(X) -> np.ndarray:
    """Project centred rows onto the top two principal axes (sign-normalised)."""
    X = np.asarray(X, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    if not np.any(Xc):
        return np.zeros((len(X), 2))
    _, _, Vt = np.linalg.svd(Xc, full_matrices=False)
    axes = Vt[:2]
    for i in range(len(axes)):
        j = np.argmax(np.abs(axes[i]))
        if axes[i, j] < 0:
            axes[i] = -axes[i]
    Y = Xc @ axes.T
    if Y.shape[1] < 2:
        Y = np.hstack([Y, np.zeros((len(Y), 2 - Y.shape[1]))])
    return Y


def export_projection(vectors, labels, path=None, raw_path=None, n_samples_per_group: int = 100,
                      seed: int = 0) -> list[tuple[str, float, float]]:
    """Sample up to ``n`` vectors per group, PCA to 2-D, optionally write TSVs.

    ``path`` receives ``group, x, y`` rows; ``raw_path`` the sampled vectors
    themselves so an external t-SNE run can reproduce the scatter plots.
    """
    X = np.asarray(vectors.toarray() if sp.issparse(vectors) else vectors, dtype=np.float64)
    labels = np.asarray([str(x) for x in labels])
    if len(X) == 0:
        raise ValueError("no vectors to project")
    rng = np.random.default_rng(seed)
    chosen = []
    for g in sorted(set(labels.tolist())):
        idx = np.flatnonzero(labels == g)
        if len(idx) > n_samples_per_group:
            idx = np.sort(rng.choice(idx, size=n_samples_per_group, replace=False))
        chosen.append(idx)
    sel = np.concatenate(chosen)
    Y = pca_2d(X[sel])
    rows = [(labels[i], float(y[0]), float(y[1])) for i, y in zip(sel, Y)]
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("group\tx\ty\n")
            for g, x, y in rows:
                fh.write(f"{g}\t{x!r}\t{y!r}\n")
    if raw_path is not None:
        with open(raw_path, "w", encoding="utf-8") as fh:
            for i in sel:
                fh.write(labels[i] + "\t" + "\t".join(repr(float(v)) for v in X[i]) + "\n")
    return rows


def format_percent(x: float) -> str:
    return f"{100 * x:.2f}%"


TABLE_COLUMNS = ("w2v-RI", "weGAN-RI", "w2v-accuracy", "weGAN-accuracy", "deGAN-accuracy")


def format_table(columns: dict[str, Sequence[float] | None]) -> str:
    """Mean/sd rows over seeds, two-decimal percentages; absent columns print as '-'."""
    names = [c for c in TABLE_COLUMNS if c in columns] + [c for c in columns if c not in TABLE_COLUMNS]
    width = max(len(n) for n in names) + 2
    lines = ["".ljust(6) + "".join(n.rjust(width) for n in names)]
    for stat in ("mean", "sd."):
        cells = []
        for n in names:
            vals = columns[n]
            if not vals:
                cells.append("-")
                continue
            arr = np.asarray(vals, dtype=np.float64)
            v = arr.mean() if stat == "mean" else (arr.std(ddof=1) if len(arr) > 1 else 0.0)
            cells.append(format_percent(v))
        lines.append(stat.ljust(6) + "".join(c.rjust(width) for c in cells))
    return "\n".join(lines) + "\n"
