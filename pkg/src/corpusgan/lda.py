"""Collapsed Gibbs LDA used only to initialise generator output layers."""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
import scipy.sparse as sp


@dataclass
class TopicWordMatrix:
    phi: np.ndarray  # (T, V), rows sum to one

    @property
    def topics(self) -> int:
        return self.phi.shape[0]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("topic\tterm_index\tprobability\n")
            for k, row in enumerate(self.phi):
                for j, p in enumerate(row):
                    fh.write(f"{k}\t{j}\t{float(p)!r}\n")

    @classmethod
    def load(cls, path) -> "TopicWordMatrix":
        rows = np.loadtxt(path, delimiter="\t", skiprows=1, ndmin=2)
        T, V = int(rows[:, 0].max()) + 1, int(rows[:, 1].max()) + 1
        phi = np.zeros((T, V))
        phi[rows[:, 0].astype(int), rows[:, 1].astype(int)] = rows[:, 2]
        return cls(phi)


@numba.njit(cache=True)
def _gibbs_sweep(words, docs, z, n_dk, n_kw, n_k, alpha, beta, v_beta, uniforms):
    T = n_k.shape[0]
    p = np.empty(T)
    for i in range(words.shape[0]):
        w, d, k = words[i], docs[i], z[i]
        n_dk[d, k] -= 1
        n_kw[k, w] -= 1
        n_k[k] -= 1
        total = 0.0
        for t in range(T):
            total += (n_dk[d, t] + alpha) * (n_kw[t, w] + beta) / (n_k[t] + v_beta)
            p[t] = total
        u = uniforms[i] * total
        k = 0
        while k < T - 1 and p[k] <= u:
            k += 1
        z[i] = k
        n_dk[d, k] += 1
        n_kw[k, w] += 1
        n_k[k] += 1


def fit_lda(
    counts,
    T: int,
    alpha: float | None = None,
    beta: float = 0.01,
    iters: int = 1000,
    seed: int = 0,
) -> TopicWordMatrix:
    """Fit LDA on a (docs, V) count matrix and return smoothed topic-word rows.

    ``alpha`` defaults to ``50 / T``.  ``phi[k, w] = (n_kw + beta) / (n_k + V beta)``
    from the final sweep's counts.
    """
    if T < 1 or iters < 1:
        raise ValueError("T and iters must be >= 1")
    alpha = 50.0 / T if alpha is None else alpha
    counts = sp.csr_matrix(counts)
    n_docs, V = counts.shape
    if counts.sum() == 0:
        raise ValueError("LDA needs at least one non-empty document")
    coo = counts.tocoo()
    reps = coo.data.astype(np.int64)
    words = np.repeat(coo.col.astype(np.int64), reps)
    docs = np.repeat(coo.row.astype(np.int64), reps)
    order = np.lexsort((words, docs))
    words, docs = words[order], docs[order]

    rng = np.random.default_rng(seed)
    z = rng.integers(0, T, size=len(words)).astype(np.int64)
    n_dk = np.zeros((n_docs, T), dtype=np.int64)
    n_kw = np.zeros((T, V), dtype=np.int64)
    np.add.at(n_dk, (docs, z), 1)
    np.add.at(n_kw, (z, words), 1)
    n_k = n_kw.sum(axis=1)
    for _ in range(iters):
        _gibbs_sweep(words, docs, z, n_dk, n_kw, n_k, float(alpha), float(beta), float(V * beta),
                     rng.random(len(words)))
    phi = (n_kw + beta) / (n_k[:, None] + V * beta)
    return TopicWordMatrix(phi)


def log_init(phi, floor: float = 1e-8) -> np.ndarray:
    """Elementwise ``ln(max(phi, floor))`` of the (T, V) topic-word matrix."""
    if floor <= 0:
        raise ValueError("floor must be positive")
    phi = phi.phi if isinstance(phi, TopicWordMatrix) else np.asarray(phi)
    return np.log(np.maximum(phi, floor))


def topic_summaries(tw: TopicWordMatrix, terms, k: int = 10) -> str:
    lines = []
    for t, row in enumerate(tw.phi):
        top = np.lexsort((np.arange(len(row)), -row))[:k]
        lines.append(f"topic {t}: " + " ".join(terms[j] for j in top))
    return "\n".join(lines) + "\n"
