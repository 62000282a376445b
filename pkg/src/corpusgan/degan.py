"""Per-corpus generators of bag-of-words document embeddings.

Generator m maps noise ``n ~ U(-1, 1)^{d_n}`` to

    softmax(W_o^m tanh(W_h^m n) + w_o^0 tanh(W_h^0 n))

where ``W_h^0`` and ``w_o^0`` are shared by all corpora.  Generators carry no
bias terms.  A discriminator with 2M softmax outputs separates the M real
corpora from the M generated ones.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp

from . import neural
from .neural import (
    Layer,
    MlpParams,
    forward_cache,
    glorot_uniform,
    load_checkpoint,
    mlp_from_arrays,
    mlp_to_arrays,
    save_checkpoint,
    sgd_step,
    softmax,
)

logger = logging.getLogger(__name__)


@dataclass
class DeganGenerator:
    """View of one corpus generator; ``W_h0`` and ``w_o0`` are shared objects."""

    W_h: np.ndarray  # (T, d_n)
    W_h0: np.ndarray  # (T, d_n), shared
    W_o: np.ndarray  # (V, T)
    w_o0: np.ndarray  # (V, T), shared


@dataclass
class DeganGenerators:
    W_h: list[np.ndarray]
    W_o: list[np.ndarray]
    W_h0: np.ndarray
    w_o0: np.ndarray

    @property
    def n_corpora(self) -> int:
        return len(self.W_h)

    @property
    def noise_dim(self) -> int:
        return self.W_h0.shape[1]

    def generator(self, m: int) -> DeganGenerator:
        return DeganGenerator(self.W_h[m], self.W_h0, self.W_o[m], self.w_o0)

    def tensors(self) -> dict[str, np.ndarray]:
        out = {}
        for m in range(self.n_corpora):
            out[f"W_h.{m}"] = self.W_h[m]
            out[f"W_o.{m}"] = self.W_o[m]
        out["W_h0"] = self.W_h0
        out["w_o0"] = self.w_o0
        return out

    def copy(self) -> "DeganGenerators":
        return DeganGenerators([w.copy() for w in self.W_h], [w.copy() for w in self.W_o],
                               self.W_h0.copy(), self.w_o0.copy())

    def zeros_like(self) -> "DeganGenerators":
        return DeganGenerators([np.zeros_like(w) for w in self.W_h], [np.zeros_like(w) for w in self.W_o],
                               np.zeros_like(self.W_h0), np.zeros_like(self.w_o0))


@dataclass
class DeganConfig:
    noise_dim: int = 50
    topics: int = 50
    disc_hidden: int = 50
    lr_D: float = 0.1
    lr_G: float = 0.001
    batch_per_corpus: int = 50
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.lr_D <= 0 or self.lr_G <= 0:
            raise ValueError("learning rates must be positive")
        if self.noise_dim < 1 or self.topics < 1:
            raise ValueError("noise_dim and topics must be >= 1")


def sample_noise(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    return rng.uniform(-1.0, 1.0, size=(n, dim))


def _gen_forward(gen: DeganGenerator, N: np.ndarray):
    H = np.tanh(N @ gen.W_h.T)
    H0 = np.tanh(N @ gen.W_h0.T)
    out = softmax(H @ gen.W_o.T + H0 @ gen.w_o0.T)
    return out, H, H0


def degan_generate(gen: DeganGenerator, n) -> np.ndarray:
    """Generated document embedding(s) for noise ``n`` of shape (d_n,) or (b, d_n)."""
    n = np.asarray(n, dtype=np.float64)
    if n.shape[-1] != gen.W_h.shape[1]:
        raise ValueError(f"noise has dimension {n.shape[-1]}, generator expects {gen.W_h.shape[1]}")
    if n.ndim == 1:
        return _gen_forward(gen, n[None, :])[0][0]
    return _gen_forward(gen, n)[0]


def _gen_backward(gen: DeganGenerator, N, out, H, H0, d_out):
    dlogits = out * (d_out - np.sum(d_out * out, axis=1, keepdims=True))
    dW_o = dlogits.T @ H
    dw_o0 = dlogits.T @ H0
    dpre = (dlogits @ gen.W_o) * (1.0 - H * H)
    dpre0 = (dlogits @ gen.w_o0) * (1.0 - H0 * H0)
    return dpre.T @ N, dW_o, dpre0.T @ N, dw_o0


def generator_loss(D: MlpParams, gens: DeganGenerators, noise: Sequence[np.ndarray]) -> tuple[float, DeganGenerators]:
    """Ratio loss through the full generator; shared-path gradients are summed."""
    fakes, caches = [], []
    for m in range(gens.n_corpora):
        out, H, H0 = _gen_forward(gens.generator(m), noise[m])
        fakes.append(out)
        caches.append((out, H, H0))
    loss, d_fakes = neural.degan_gen_loss(D, fakes)
    grads = gens.zeros_like()
    for m in range(gens.n_corpora):
        dW_h, dW_o, dW_h0, dw_o0 = _gen_backward(gens.generator(m), noise[m], *caches[m], d_fakes[m])
        grads.W_h[m] += dW_h
        grads.W_o[m] += dW_o
        grads.W_h0 += dW_h0
        grads.w_o0 += dw_o0
    return loss, grads


def init_generators(n_corpora: int, n_terms: int, cfg: DeganConfig, rng: np.random.Generator,
                    lda_log: np.ndarray | None = None) -> DeganGenerators:
    """Scaled-uniform hidden weights; output layers from the (T, V) log topic-word matrix."""
    T, d_n = cfg.topics, cfg.noise_dim

    def hidden():
        return glorot_uniform(d_n, T, rng).T.copy()

    def output():
        if lda_log is None:
            return glorot_uniform(T, n_terms, rng).T.copy()
        if lda_log.shape != (T, n_terms):
            raise ValueError(f"log topic-word matrix has shape {lda_log.shape}, expected {(T, n_terms)}")
        return lda_log.T.copy()

    W_h = [hidden() for _ in range(n_corpora)]
    W_o = [output() for _ in range(n_corpora)]
    return DeganGenerators(W_h, W_o, hidden(), output())


def init_discriminator(n_terms: int, n_corpora: int, cfg: DeganConfig, rng: np.random.Generator,
                       word_embed: np.ndarray | None = None, embed_dim: int = 50) -> MlpParams:
    """V -> d (tanh, word-embedding init) -> hidden (tanh) -> 2M softmax."""
    if word_embed is not None:
        word_embed = np.asarray(getattr(word_embed, "data", word_embed))
        if word_embed.shape[0] != n_terms:
            raise ValueError("word embedding rows must equal the vocabulary size")
        W1 = word_embed.copy()
    else:
        W1 = glorot_uniform(n_terms, embed_dim, rng)
    d = W1.shape[1]
    return MlpParams([
        Layer(W1, np.zeros(d), "tanh"),
        Layer(glorot_uniform(d, cfg.disc_hidden, rng), np.zeros(cfg.disc_hidden), "tanh"),
        Layer(glorot_uniform(cfg.disc_hidden, 2 * n_corpora, rng), np.zeros(2 * n_corpora), "softmax"),
    ])


@dataclass
class DeganState:
    gens: DeganGenerators
    D: MlpParams
    epoch: int = 0
    history: list[dict] = field(default_factory=list)


def _dense_rows(X, idx):
    rows = X[idx]
    return rows.toarray() if sp.issparse(rows) else np.asarray(rows)


def train_degan(
    X,
    corpus_ids,
    cfg: DeganConfig,
    lda_log: np.ndarray | None = None,
    word_embed=None,
    state: DeganState | None = None,
    on_epoch: Callable[[DeganState], None] | None = None,
) -> DeganState:
    """Alternate discriminator and generator updates for ``cfg.epochs`` epochs.

    ``X`` holds L1-normalized tf-idf rows of the training documents and
    ``corpus_ids`` their corpus index.  Each step draws ``batch_per_corpus``
    documents and noise vectors per corpus; the generator step draws fresh
    noise.  Losses are averaged over the batch before the SGD step.
    """
    X = sp.csr_matrix(X)
    corpus_ids = np.asarray(corpus_ids)
    M = int(corpus_ids.max()) + 1
    V = X.shape[1]
    if state is None:
        rng0 = np.random.default_rng([cfg.seed, 0])
        gens = init_generators(M, V, cfg, rng0, lda_log)
        D = init_discriminator(V, M, cfg, rng0, word_embed)
        state = DeganState(gens, D)
    pools = [np.flatnonzero(corpus_ids == m) for m in range(M)]
    if any(len(p) == 0 for p in pools):
        raise ValueError("every corpus needs at least one training document")
    n_steps = max(1, math.ceil(X.shape[0] / (M * cfg.batch_per_corpus)))
    b = cfg.batch_per_corpus
    d_n = state.gens.noise_dim

    for epoch in range(state.epoch, cfg.epochs):
        rng = np.random.default_rng([cfg.seed, 1, epoch])
        d_sum = g_sum = target_sum = 0.0
        n_d = n_g = 0
        correct = np.zeros(M)
        seen = np.zeros(M)
        for step in range(n_steps):
            reals = [_dense_rows(X, rng.choice(p, size=min(b, len(p)), replace=False)) for p in pools]
            fakes = [degan_generate(state.gens.generator(m), sample_noise(rng, b, d_n)) for m in range(M)]
            d_loss, gD = neural.degan_disc_loss(state.D, reals, fakes)
            nd = sum(len(r) for r in reals) + M * b
            for m, r in enumerate(reals):
                P = forward_cache(state.D, r)[-1]
                correct[m] += np.sum(P[:, :M].argmax(axis=1) == m)
                seen[m] += len(r)
            if not np.isfinite(d_loss):
                raise FloatingPointError(f"non-finite discriminator loss at epoch {epoch + 1}, batch {step + 1}")
            sgd_step(state.D, gD, cfg.lr_D / nd)

            noise = [sample_noise(rng, b, d_n) for _ in range(M)]
            g_loss, gG = generator_loss(state.D, state.gens, noise)
            if not np.isfinite(g_loss):
                raise FloatingPointError(f"non-finite generator loss at epoch {epoch + 1}, batch {step + 1}")
            sgd_step(state.gens, gG, cfg.lr_G / (M * b))
            for m in range(M):
                P = forward_cache(state.D, degan_generate(state.gens.generator(m), noise[m]))[-1]
                target_sum += P[:, m].sum()
            d_sum += d_loss
            g_sum += g_loss
            n_d += nd
            n_g += M * b
        row = {
            "epoch": epoch + 1,
            "disc_loss": d_sum / n_d,
            "gen_loss": g_sum / n_g,
            "real_accuracy": float(correct.sum() / seen.sum()),
            "target_prob": target_sum / n_g,
        }
        for m in range(M):
            row[f"real_accuracy_{m}"] = float(correct[m] / seen[m])
        state.history.append(row)
        state.epoch = epoch + 1
        logger.info("degan epoch %d: %s", epoch + 1, row)
        if on_epoch is not None:
            on_epoch(state)
    return state


def real_corpus_accuracy(D: MlpParams, X, corpus_ids) -> float:
    """Share of real documents whose most probable real class is their corpus."""
    corpus_ids = np.asarray(corpus_ids)
    M = D.out_dim // 2
    P = forward_cache(D, sp.csr_matrix(X))[-1]
    return float(np.mean(P[:, :M].argmax(axis=1) == corpus_ids))


def mean_target_probability(D: MlpParams, gens: DeganGenerators, n_draws: int = 1000, seed: int = 0) -> float:
    """Average ``e_m^T D(G^m(n))`` over noise draws and corpora."""
    rng = np.random.default_rng(seed)
    vals = []
    for m in range(gens.n_corpora):
        fakes = degan_generate(gens.generator(m), sample_noise(rng, n_draws, gens.noise_dim))
        vals.append(forward_cache(D, fakes)[-1][:, m].mean())
    return float(np.mean(vals))


def save_state(path, state: DeganState, **meta) -> None:
    arrays, spec = mlp_to_arrays(state.D, "D")
    for name, arr in state.gens.tensors().items():
        arrays[f"gen.{name}"] = arr
    save_checkpoint(path, arrays, dict(meta, kind="degan", epoch=state.epoch, D=spec,
                                       n_corpora=state.gens.n_corpora, history=state.history))


def load_state(path) -> DeganState:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "degan":
        raise ValueError(f"{path} is not a deGAN checkpoint")
    M = meta["n_corpora"]
    gens = DeganGenerators(
        [arrays[f"gen.W_h.{m}"].copy() for m in range(M)],
        [arrays[f"gen.W_o.{m}"].copy() for m in range(M)],
        arrays["gen.W_h0"].copy(),
        arrays["gen.w_o0"].copy(),
    )
    return DeganState(gens, mlp_from_arrays(arrays, meta["D"], "D"), meta["epoch"], list(meta["history"]))


def write_samples(path, gens: DeganGenerators, terms, names=None, n_per_corpus: int = 1,
                  k: int = 10, seed: int = 0) -> None:
    """TSV of generated samples: corpus and its top-``k`` terms by probability."""
    from .text import _stemmed_stop_words

    stop = _stemmed_stop_words()
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("corpus\tsample\ttop_terms\n")
        for m in range(gens.n_corpora):
            out = degan_generate(gens.generator(m), sample_noise(rng, n_per_corpus, gens.noise_dim))
            for i, row in enumerate(out):
                order = np.lexsort((np.arange(len(row)), -row))
                top = [terms[j] for j in order if terms[j] not in stop][:k]
                name = names[m] if names else str(m)
                fh.write(f"{name}\t{i}\t{' '.join(top)}\n")


# ---------------------------------------------------------------------------
# optimal discriminator on discrete supports


@dataclass
class DiscreteDistribution:
    support: np.ndarray  # (S, dim) points
    mass: np.ndarray  # (S,)

    def __post_init__(self):
        self.support = np.asarray(self.support, dtype=np.float64)
        if self.support.ndim == 1:
            self.support = self.support[:, None]
        self.mass = np.asarray(self.mass, dtype=np.float64)
        if self.mass.shape != (self.support.shape[0],):
            raise ValueError("one mass value per support point required")
        if np.any(self.mass < 0) or abs(self.mass.sum() - 1.0) > 1e-12:
            raise ValueError("mass must be a nonnegative probability vector")


def simplex_vertices(n_points: int, dim: int | None = None) -> np.ndarray:
    """The first ``n_points`` vertices of the probability simplex in R^dim."""
    dim = n_points if dim is None else dim
    if dim < n_points:
        raise ValueError("dim must be at least n_points")
    return np.eye(dim)[:n_points]


def optimal_discriminator(p: Sequence[DiscreteDistribution], q: Sequence[DiscreteDistribution]):
    """Pointwise maximiser ``(p_1..p_M, q_1..q_M) / (sum p + sum q)``.

    Returns ``(kept, D_star)``: indices of support points with positive total
    mass and the (len(kept), 2M) matrix of optimal class probabilities.
    """
    if len(p) != len(q) or not p:
        raise ValueError("need M real and M generated distributions")
    support = p[0].support
    for dist in list(p) + list(q):
        if dist.support.shape != support.shape or not np.array_equal(dist.support, support):
            raise ValueError("all distributions must share one support")
    masses = np.stack([d.mass for d in list(p) + list(q)], axis=1)
    total = masses.sum(axis=1)
    kept = np.flatnonzero(total > 0)
    return kept, masses[kept] / total[kept, None]


def discriminator_objective(p_mass: np.ndarray, q_mass: np.ndarray, b: np.ndarray) -> float:
    """Integrand of the discriminator objective summed over support points.

    ``p_mass``/``q_mass`` are (S, M); ``b`` is (S, 2M) of class probabilities.
    Terms with zero mass contribute nothing, so ``0 * log 0`` is taken as 0.
    """
    a = np.concatenate([p_mass, q_mass], axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(a > 0, a * np.log(b), 0.0)
    return float(terms.sum())


@dataclass
class Prop1Config:
    epochs: int = 300
    checkpoints: int = 5
    steps_per_epoch: int = 10
    batch: int = 64
    noise_dim: int = 8
    topics: int = 8
    disc_embed: int = 16
    disc_hidden: int = 16
    lr_D: float = 0.5
    lr_G: float = 0.5
    n_eval_noise: int = 1000
    seed: int = 0


def verify_proposition1(
    p: Sequence[np.ndarray],
    cfg: Prop1Config,
    frozen_q: Sequence[np.ndarray] | None = None,
) -> dict:
    """Train the 2M-class game on discrete data living on simplex vertices.

    ``p`` lists M mass vectors over the same S vertices (one-hot points in
    R^S).  A generated sample is a vertex drawn from the generator's softmax
    output, so the generator distribution ``q_m = E_n[G^m(n)]`` is exactly
    computable and the generator loss is the exact expectation over vertices.
    With ``frozen_q`` the generated samples come from fixed distributions and
    only the discriminator trains.

    Returns a report with, per checkpoint, the total-variation distance of each
    ``q_m`` to ``p_m`` and the sup-norm gap between the trained discriminator
    and the closed-form optimum computed from the current ``q``.
    """
    p = [np.asarray(x, dtype=np.float64) for x in p]
    M, S = len(p), len(p[0])
    vertices = simplex_vertices(S)
    rng0 = np.random.default_rng([cfg.seed, 0])
    dcfg = DeganConfig(noise_dim=cfg.noise_dim, topics=cfg.topics, disc_hidden=cfg.disc_hidden,
                       lr_D=cfg.lr_D, lr_G=cfg.lr_G, batch_per_corpus=cfg.batch, seed=cfg.seed)
    gens = init_generators(M, S, dcfg, rng0)
    D = init_discriminator(S, M, dcfg, rng0, embed_dim=cfg.disc_embed)
    eval_noise = sample_noise(np.random.default_rng([cfg.seed, 2]), cfg.n_eval_noise, cfg.noise_dim)

    def current_q():
        if frozen_q is not None:
            return [np.asarray(x, dtype=np.float64) for x in frozen_q]
        return [degan_generate(gens.generator(m), eval_noise).mean(axis=0) for m in range(M)]

    def checkpoint(epoch):
        q = current_q()
        dists_p = [DiscreteDistribution(vertices, x / x.sum()) for x in p]
        dists_q = [DiscreteDistribution(vertices, x / x.sum()) for x in q]
        kept, d_star = optimal_discriminator(dists_p, dists_q)
        d_now = forward_cache(D, vertices[kept])[-1]
        return {
            "epoch": epoch,
            "tv": [float(0.5 * np.abs(qm - pm).sum()) for qm, pm in zip(q, p)],
            "disc_gap": float(np.abs(d_now - d_star).max()),
            "q": [qm.tolist() for qm in q],
        }

    report = {"M": M, "support_size": S, "p": [x.tolist() for x in p], "config": vars(cfg).copy(),
              "frozen_generator": frozen_q is not None, "checkpoints": [checkpoint(0)]}
    marks = set()
    if cfg.epochs > 0 and cfg.checkpoints > 0:
        marks = {round(cfg.epochs * (i + 1) / cfg.checkpoints) for i in range(cfg.checkpoints)}

    for epoch in range(cfg.epochs):
        rng = np.random.default_rng([cfg.seed, 1, epoch])
        for _ in range(cfg.steps_per_epoch):
            reals = [vertices[rng.choice(S, size=cfg.batch, p=pm / pm.sum())] for pm in p]
            if frozen_q is not None:
                probs = [np.tile(np.asarray(x, dtype=np.float64), (cfg.batch, 1)) for x in frozen_q]
            else:
                probs = [degan_generate(gens.generator(m), sample_noise(rng, cfg.batch, cfg.noise_dim))
                         for m in range(M)]
            fakes = [vertices[_sample_rows(rng, pr)] for pr in probs]
            _, gD = neural.degan_disc_loss(D, reals, fakes)
            sgd_step(D, gD, cfg.lr_D / (2 * M * cfg.batch))
            if frozen_q is None:
                noise = [sample_noise(rng, cfg.batch, cfg.noise_dim) for _ in range(M)]
                _, gG = _expected_vertex_loss(D, gens, noise, vertices)
                sgd_step(gens, gG, cfg.lr_G / (M * cfg.batch))
        if epoch + 1 in marks:
            report["checkpoints"].append(checkpoint(epoch + 1))
    final = report["checkpoints"][-1]
    report["final_tv"] = final["tv"]
    report["final_disc_gap"] = final["disc_gap"]
    tvs = np.array([c["tv"] for c in report["checkpoints"]])
    gaps = np.array([c["disc_gap"] for c in report["checkpoints"]])
    report["tv_monotone"] = bool(np.all(np.diff(tvs, axis=0) <= 0))
    report["disc_gap_decreased"] = bool(gaps[-1] <= gaps[0])
    return report


def _sample_rows(rng, probs):
    u = rng.random(len(probs))
    cdf = np.cumsum(probs, axis=1)
    return np.minimum((cdf < u[:, None]).sum(axis=1), probs.shape[1] - 1)


def _expected_vertex_loss(D, gens, noise, vertices):
    """Generator loss averaged exactly over the vertex each output would emit."""
    M = gens.n_corpora
    last = D.layers[-1]
    Z = forward_cache(D, vertices)[-2] @ last.W  # (S, 2M) final logits
    if last.b is not None:
        Z = Z + last.b
    loss = 0.0
    grads = gens.zeros_like()
    for m in range(M):
        # p_{M+m} / (p_{M+m} + p_m) is a sigmoid of the logit difference
        logr = np.log(np.clip(neural.sigmoid(Z[:, M + m] - Z[:, m]), neural.PROB_MIN, neural.PROB_MAX))
        gen = gens.generator(m)
        out, H, H0 = _gen_forward(gen, noise[m])
        loss += float((out @ logr).sum())
        d_out = np.tile(logr, (len(out), 1))
        dW_h, dW_o, dW_h0, dw_o0 = _gen_backward(gen, noise[m], out, H, H0, d_out)
        grads.W_h[m] += dW_h
        grads.W_o[m] += dW_o
        grads.W_h0 += dW_h0
        grads.w_o0 += dw_o0
    return loss, grads
