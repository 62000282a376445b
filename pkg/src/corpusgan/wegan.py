"""Cross-corpus word embeddings trained against a discriminator and a classifier.

Each iteration first updates the discriminator D (originals vs. documents
mapped through the shared embeddings G) and the classifier C, then updates G
on an independent mini-batch.  Documents are embedded as ``tanh(t @ E)`` with
``t`` the L1-normalized tf-idf row.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from .embedding import EmbeddingMatrix
from .neural import (
    MlpParams,
    classifier_nll,
    forward_cache,
    init_mlp,
    load_checkpoint,
    mlp_from_arrays,
    mlp_to_arrays,
    save_checkpoint,
    sgd_step,
    wegan_disc_loss,
    wegan_gen_loss,
)

logger = logging.getLogger(__name__)


@dataclass
class WeganConfig:
    epochs: int = 100
    batch_per_corpus: int = 50
    lr_start: float = 0.01
    lr_end: float = 1.0
    classifier_hidden: int = 50
    discriminator_hidden: int = 10
    seed: int = 0
    train_generator: bool = True
    n_labels: int | None = None

    def __post_init__(self):
        if self.epochs < 0 or self.batch_per_corpus < 1:
            raise ValueError("epochs must be >= 0 and batch_per_corpus >= 1")
        if self.lr_start > self.lr_end:
            raise ValueError("lr_start must not exceed lr_end")

    def learning_rate(self, epoch: int) -> float:
        if self.epochs <= 1:
            return self.lr_start
        return self.lr_start + (self.lr_end - self.lr_start) * epoch / (self.epochs - 1)


@dataclass
class WeganState:
    G: EmbeddingMatrix
    corpus_embeddings: list[EmbeddingMatrix]
    D: MlpParams
    C: MlpParams
    epoch: int = 0
    history: list[dict] = field(default_factory=list)


def init_state(G_init: EmbeddingMatrix, corpus_embeddings: Sequence[EmbeddingMatrix],
               n_labels: int, cfg: WeganConfig) -> WeganState:
    d = G_init.dim
    for E in corpus_embeddings:
        if E.dim != d or E.rows != G_init.rows:
            raise ValueError("all embedding matrices must share shape")
    rng = np.random.default_rng([cfg.seed, 0])
    D = init_mlp([d, cfg.discriminator_hidden, 1], ["tanh", "sigmoid"], rng)
    C = init_mlp([d, cfg.classifier_hidden, n_labels], ["tanh", "softmax"], rng)
    return WeganState(EmbeddingMatrix(G_init.data.copy(), "wegan-output"), list(corpus_embeddings), D, C)


def _batch(rng, pools, b):
    return np.concatenate([rng.choice(p, size=min(b, len(p)), replace=False) for p in pools])


def train_wegan(
    T,
    corpus_ids,
    labels,
    corpus_embeddings: Sequence[EmbeddingMatrix],
    G_init: EmbeddingMatrix,
    cfg: WeganConfig,
    state: WeganState | None = None,
    on_epoch: Callable[[WeganState], None] | None = None,
) -> WeganState:
    """Run the alternating D/C and G updates for ``cfg.epochs`` epochs.

    ``T`` holds the (n, V) L1-normalized tf-idf rows of the training documents,
    ``corpus_ids`` their corpus index (0..M-1) and ``labels`` their class.
    Passing a ``state`` resumes at ``state.epoch``; ``on_epoch`` is called after
    every finished epoch (checkpointing hook).
    """
    T = sp.csr_matrix(T)
    corpus_ids = np.asarray(corpus_ids)
    labels = np.asarray(labels)
    M = len(corpus_embeddings)
    n_labels = cfg.n_labels or int(labels.max()) + 1
    if state is None:
        state = init_state(G_init, corpus_embeddings, n_labels, cfg)
    pools = [np.flatnonzero(corpus_ids == m) for m in range(M)]
    if any(len(p) == 0 for p in pools):
        raise ValueError("every corpus needs at least one training document")
    # originals never change: cache tanh(t @ V^m) per document
    originals = np.zeros((T.shape[0], G_init.dim))
    for m, p in enumerate(pools):
        originals[p] = np.tanh(np.asarray(T[p] @ corpus_embeddings[m].data))
    n_steps = max(1, math.ceil(T.shape[0] / (M * cfg.batch_per_corpus)))

    for epoch in range(state.epoch, cfg.epochs):
        rng = np.random.default_rng([cfg.seed, 1, epoch])
        lr = cfg.learning_rate(epoch)
        sums = dict(wegan_disc=0.0, wegan_gen=0.0, classifier=0.0, correct=0.0, n1=0, n2=0)
        for step in range(n_steps):
            s1 = _batch(rng, pools, cfg.batch_per_corpus)
            n1 = len(s1)
            fakes = np.tanh(np.asarray(T[s1] @ state.G.data))
            real = originals[s1]
            l9, gD = wegan_disc_loss(state.D, real, fakes)
            l11, gC = classifier_nll(state.C, fakes, labels[s1])
            _check_finite((l9, l11), epoch, step)
            p_real = forward_cache(state.D, real)[-1][:, 0]
            p_fake = forward_cache(state.D, fakes)[-1][:, 0]
            sums["correct"] += np.sum(p_real >= 0.5) + np.sum(p_fake < 0.5)
            sgd_step(state.D, gD, lr / n1)
            sgd_step(state.C, gC, lr / n1)

            s2 = _batch(rng, pools, cfg.batch_per_corpus)
            n2 = len(s2)
            l10, gG = wegan_gen_loss(state.D, state.C, state.G.data, T[s2], labels[s2])
            _check_finite((l10,), epoch, step)
            if cfg.train_generator:
                sgd_step(state.G.data, gG, lr / n2)
            sums["wegan_disc"] += l9
            sums["classifier"] += l11
            sums["wegan_gen"] += l10
            sums["n1"] += n1
            sums["n2"] += n2
        row = {
            "epoch": epoch + 1,
            "disc_loss": sums["wegan_disc"] / sums["n1"],
            "gen_loss": sums["wegan_gen"] / sums["n2"],
            "classifier_loss": sums["classifier"] / sums["n1"],
            "disc_accuracy": sums["correct"] / (2 * sums["n1"]),
            "lr": lr,
        }
        state.history.append(row)
        state.epoch = epoch + 1
        logger.info("wegan epoch %d: %s", epoch + 1, row)
        if on_epoch is not None:
            on_epoch(state)
    return state


def _check_finite(values, epoch, step):
    if not all(np.isfinite(v) for v in values):
        raise FloatingPointError(f"non-finite loss at epoch {epoch + 1}, batch {step + 1}")


def evaluate_losses(state: WeganState, T, corpus_ids, labels) -> dict:
    """Per-document losses and accuracies over a full document set."""
    T = sp.csr_matrix(T)
    corpus_ids = np.asarray(corpus_ids)
    labels = np.asarray(labels)
    originals = np.zeros((T.shape[0], state.G.dim))
    for m, E in enumerate(state.corpus_embeddings):
        p = np.flatnonzero(corpus_ids == m)
        originals[p] = np.tanh(np.asarray(T[p] @ E.data))
    fakes = np.tanh(np.asarray(T @ state.G.data))
    n = T.shape[0]
    l9, _ = wegan_disc_loss(state.D, originals, fakes)
    l11, _ = classifier_nll(state.C, fakes, labels)
    l10, _ = wegan_gen_loss(state.D, state.C, state.G.data, T, labels)
    pred = forward_cache(state.C, fakes)[-1].argmax(axis=1)
    return {"disc_loss": l9 / n, "gen_loss": l10 / n, "classifier_loss": l11 / n,
            "classifier_accuracy": float(np.mean(pred == labels))}


def save_state(path, state: WeganState, **meta) -> None:
    arrays_d, spec_d = mlp_to_arrays(state.D, "D")
    arrays_c, spec_c = mlp_to_arrays(state.C, "C")
    arrays = {"G": state.G.data, **arrays_d, **arrays_c}
    save_checkpoint(path, arrays, dict(meta, kind="wegan", epoch=state.epoch, D=spec_d, C=spec_c,
                                       history=state.history))


def load_state(path, corpus_embeddings: Sequence[EmbeddingMatrix]) -> WeganState:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "wegan":
        raise ValueError(f"{path} is not a weGAN checkpoint")
    return WeganState(
        EmbeddingMatrix(arrays["G"].copy(), "wegan-output"),
        list(corpus_embeddings),
        mlp_from_arrays(arrays, meta["D"], "D"),
        mlp_from_arrays(arrays, meta["C"], "C"),
        meta["epoch"],
        list(meta["history"]),
    )
