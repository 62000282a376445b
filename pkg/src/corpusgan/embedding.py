"""Word embeddings: skip-gram training, word2vec text IO, document mapping and synonyms."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .text import TfIdfDoc, Vocabulary

logger = logging.getLogger(__name__)


@dataclass
class EmbeddingMatrix:
    data: np.ndarray
    provenance: str = "trained-all"

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("embedding matrix must be 2-D")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("embedding matrix has non-finite entries")

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    def copy(self) -> "EmbeddingMatrix":
        return EmbeddingMatrix(self.data.copy(), self.provenance)


def _array(E) -> np.ndarray:
    return E.data if isinstance(E, EmbeddingMatrix) else np.asarray(E, dtype=np.float64)


@dataclass
class SkipGramConfig:
    dim: int = 300
    window: int = 5
    negative_samples: int = 5
    epochs: int = 5
    learning_rate: float = 0.025
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1 or self.window < 1 or self.negative_samples < 1:
            raise ValueError("dim, window and negative_samples must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def init_embeddings(n_rows: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-0.5 / dim, 0.5 / dim, size=(n_rows, dim))


def _skipgram_pairs(docs: Sequence[Sequence[int]], window: int) -> tuple[np.ndarray, np.ndarray]:
    centers, contexts = [], []
    for ids in docs:
        a = np.asarray(ids, dtype=np.int64)
        for off in range(1, min(window, len(a) - 1) + 1):
            centers += [a[:-off], a[off:]]
            contexts += [a[off:], a[:-off]]
    if not centers:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(centers), np.concatenate(contexts)


@numba.njit(cache=True)
def _sgns_epoch(w_in, w_out, centers, contexts, order, negatives, lr0, lr_floor, done, total):
    """One pass of per-pair SGD, in the order and with the negatives given."""
    dim = w_in.shape[1]
    k = negatives.shape[1]
    grad_in = np.empty(dim)
    for t in range(order.shape[0]):
        lr = lr0 * max(lr_floor, 1.0 - (done + t) / total)
        i = order[t]
        c = centers[i]
        grad_in[:] = 0.0
        for s in range(k + 1):
            if s == 0:
                o = contexts[i]
                label = 1.0
            else:
                o = negatives[t, s - 1]
                label = 0.0
            z = 0.0
            for j in range(dim):
                z += w_in[c, j] * w_out[o, j]
            g = (label - 0.5 * (1.0 + np.tanh(0.5 * z))) * lr
            for j in range(dim):
                grad_in[j] += g * w_out[o, j]
                w_out[o, j] += g * w_in[c, j]
        for j in range(dim):
            w_in[c, j] += grad_in[j]


def train_skipgram(
    docs: Sequence[Sequence[int]],
    n_terms: int,
    cfg: SkipGramConfig,
    provenance: str = "trained-all",
) -> EmbeddingMatrix:
    """Skip-gram with negative sampling over documents of vocabulary indices.

    Pairs are visited one at a time in a seeded shuffled order, as in the
    reference word2vec trainer.  Negatives are drawn from the unigram
    distribution raised to 3/4.  The learning rate decays linearly to 1e-4 of
    its start value.  Training is single-threaded and fully determined by
    ``cfg.seed``.
    """
    rng = np.random.default_rng(cfg.seed)
    w_in = init_embeddings(n_terms, cfg.dim, rng)
    if cfg.epochs == 0:
        return EmbeddingMatrix(w_in, provenance)
    centers, contexts = _skipgram_pairs(docs, cfg.window)
    if len(centers) == 0:
        raise ValueError("no trainable skip-gram pair: need a document with >= 2 in-vocabulary tokens")
    w_out = np.zeros((n_terms, cfg.dim))
    counts = np.bincount(np.concatenate([np.asarray(d, np.int64) for d in docs]), minlength=n_terms)
    noise = counts.astype(np.float64) ** 0.75
    cdf = np.cumsum(noise / noise.sum())
    cdf[-1] = 1.0

    n_pairs = len(centers)
    total = float(cfg.epochs * n_pairs)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_pairs)
        negatives = np.searchsorted(cdf, rng.random((n_pairs, cfg.negative_samples)), side="right")
        _sgns_epoch(w_in, w_out, centers, contexts, order, negatives, cfg.learning_rate, 1e-4,
                    float(epoch * n_pairs), total)
        logger.debug("skip-gram epoch %d/%d done", epoch + 1, cfg.epochs)
    return EmbeddingMatrix(w_in, provenance)


# ---------------------------------------------------------------------------
# word2vec text format


def save_word2vec(path, E, terms: Sequence[str]) -> None:
    data = _array(E)
    if data.shape[0] != len(terms):
        raise ValueError("row count does not match term count")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{data.shape[0]} {data.shape[1]}\n")
        for t, row in zip(terms, data):
            fh.write(t + " " + " ".join(repr(float(x)) for x in row) + "\n")


@dataclass
class CoverageReport:
    found: int
    total: int
    missing: list[str]

    @property
    def coverage(self) -> float:
        return self.found / self.total if self.total else 1.0


def load_embeddings(
    path,
    vocab: Vocabulary,
    dim: int | None = None,
    seed: int = 0,
    provenance: str = "trained-all",
) -> tuple[EmbeddingMatrix, CoverageReport]:
    """Read a word2vec text file and align its rows to ``vocab``.

    Vocabulary terms absent from the file get seeded uniform(-0.5/d, 0.5/d)
    rows and are listed in the coverage report.  Terms in the file but not in
    the vocabulary are ignored.
    """
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2 or not all(h.isdigit() for h in header):
            raise ValueError(f"{path}:1: malformed header, expected 'V d'")
        n_rows, d = int(header[0]), int(header[1])
        if dim is not None and d != dim:
            raise ValueError(f"{path}: dimension {d} does not match configured {dim}")
        rng = np.random.default_rng(seed)
        data = init_embeddings(len(vocab), d, rng)
        seen = np.zeros(len(vocab), dtype=bool)
        n_read = 0
        for lineno, line in enumerate(fh, 2):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if parts == [""]:
                continue
            if len(parts) != d + 1:
                raise ValueError(f"{path}:{lineno}: expected {d} values, got {len(parts) - 1}")
            try:
                row = np.array([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            n_read += 1
            j = vocab.index.get(parts[0])
            if j is not None:
                data[j] = row
                seen[j] = True
        if n_read != n_rows:
            raise ValueError(f"{path}: header declares {n_rows} rows, found {n_read}")
    missing = [vocab.terms[j] for j in np.flatnonzero(~seen)]
    return EmbeddingMatrix(data, provenance), CoverageReport(int(seen.sum()), len(vocab), missing)


# ---------------------------------------------------------------------------
# document embeddings and synonyms

SQUASHES = {"tanh": np.tanh, "identity": lambda x: x}


def doc_embed(doc: TfIdfDoc | dict, E, squash: str = "tanh") -> np.ndarray:
    """``squash(sum_j t_j * E[j])`` for one sparse tf-idf document."""
    data = _array(E)
    weights = doc.weights if isinstance(doc, TfIdfDoc) else doc
    out = np.zeros(data.shape[1])
    if weights:
        idx = np.fromiter(weights.keys(), dtype=np.int64, count=len(weights))
        w = np.fromiter(weights.values(), dtype=np.float64, count=len(weights))
        if idx.max() >= data.shape[0]:
            raise IndexError("document term index exceeds embedding rows")
        out = w @ data[idx]
    return SQUASHES[squash](out)


def doc_embed_matrix(T, E, squash: str = "tanh") -> np.ndarray:
    """Batch form of :func:`doc_embed` for an (n, V) tf-idf matrix."""
    return SQUASHES[squash](np.asarray(T @ _array(E)))


def _unit_rows(data: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.linalg.norm(data, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    return data / safe[:, None], norms


def _ranked(sims: np.ndarray, exclude: int, k: int) -> list[int]:
    sims = sims.copy()
    sims[exclude] = -np.inf
    order = np.lexsort((np.arange(len(sims)), -sims))
    return [int(j) for j in order[:k]]


def top_k_synonyms(E, term, k: int, vocab: Vocabulary | None = None) -> list:
    """Top-``k`` cosine neighbours of ``term``, ties broken by lower index.

    ``term`` is a vocabulary string (with ``vocab``) or a row index; the result
    uses the same kind.  Zero-norm rows never rank above a defined similarity.
    """
    data = _array(E)
    if vocab is not None:
        if term not in vocab:
            raise KeyError(f"unknown term {term!r}")
        q = vocab.index[term]
    else:
        q = int(term)
        if not 0 <= q < data.shape[0]:
            raise KeyError(f"unknown term index {term}")
    if k >= data.shape[0]:
        raise ValueError("k must be smaller than the vocabulary size")
    unit, norms = _unit_rows(data)
    if norms[q] == 0:
        raise ValueError(f"cosine similarity undefined for zero-norm row {term!r}")
    sims = unit @ unit[q]
    sims[norms == 0] = -np.inf
    ranked = _ranked(sims, q, k)
    return [vocab.terms[j] for j in ranked] if vocab is not None else ranked


def _all_topk(data: np.ndarray, k: int) -> list[set]:
    unit, norms = _unit_rows(data)
    if np.any(norms == 0):
        raise ValueError("cosine similarity undefined for zero-norm rows")
    sims = unit @ unit.T
    return [set(_ranked(sims[i], i, k)) for i in range(data.shape[0])]


def synonym_drift(E_before, E_after, k: int = 10) -> tuple[float, float]:
    """Mean number of top-``k`` neighbours lost per term, and share of terms changed."""
    a, b = _array(E_before), _array(E_after)
    if a.shape[0] != b.shape[0]:
        raise ValueError("embedding matrices cover different vocabularies")
    if k >= a.shape[0]:
        raise ValueError("k must be smaller than the vocabulary size")
    before, after = _all_topk(a, k), _all_topk(b, k)
    diffs = np.array([len(x - y) for x, y in zip(before, after)], dtype=np.float64)
    return float(diffs.mean()), float(np.mean(diffs > 0))


def write_synonym_report(path, E, vocab: Vocabulary, terms: Sequence[str], k: int = 10) -> None:
    data = _array(E)
    unit, _ = _unit_rows(data)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("term\trank\tneighbor\tcosine\n")
        for t in terms:
            if t not in vocab:
                continue
            q = vocab.index[t]
            for rank, j in enumerate(top_k_synonyms(data, q, k), 1):
                fh.write(f"{t}\t{rank}\t{vocab.terms[j]}\t{float(unit[q] @ unit[j]):.6f}\n")
