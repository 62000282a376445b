"""Small random fixtures for finite-difference checks of the five losses.

Each factory returns ``(loss_fn, params)`` suitable for ``grad_check``.
"""
import numpy as np
import scipy.sparse as sp

from corpusgan import degan
from corpusgan.neural import (
    classifier_nll,
    degan_disc_loss,
    init_mlp,
    wegan_disc_loss,
    wegan_gen_loss,
)


def _mlp(rng, sizes, acts):
    net = init_mlp(sizes, acts, rng)
    for layer in net.layers:
        layer.b += rng.normal(scale=0.3, size=layer.b.shape)
    return net


def _tfidf(rng, n, V, nnz=3):
    rows = []
    for _ in range(n):
        w = np.zeros(V)
        idx = rng.choice(V, size=min(nnz, V), replace=False)
        w[idx] = rng.random(len(idx)) + 0.1
        rows.append(w / w.sum())
    return sp.csr_matrix(np.array(rows))


def wegan_disc(seed):
    rng = np.random.default_rng(seed)
    d = 4
    D = _mlp(rng, [d, 3, 1], ["tanh", "sigmoid"])
    real = np.tanh(rng.normal(size=(5, d)))
    fake = np.tanh(rng.normal(size=(6, d)))
    return (lambda P: wegan_disc_loss(P, real, fake)), D


def wegan_gen(seed):
    rng = np.random.default_rng(seed)
    V, d, K = 5, 3, 3
    D = _mlp(rng, [d, 4, 1], ["tanh", "sigmoid"])
    C = _mlp(rng, [d, 4, K], ["tanh", "softmax"])
    G = rng.normal(scale=0.8, size=(V, d))
    T = _tfidf(rng, 6, V)
    labels = rng.integers(0, K, size=6)
    return (lambda g: wegan_gen_loss(D, C, g, T, labels)), G


def classifier(seed):
    rng = np.random.default_rng(seed)
    d, K = 4, 3
    C = _mlp(rng, [d, 5, K], ["tanh", "softmax"])
    X = np.tanh(rng.normal(size=(7, d)))
    y = rng.integers(0, K, size=7)
    return (lambda P: classifier_nll(P, X, y)), C


def degan_disc(seed):
    rng = np.random.default_rng(seed)
    V, M = 6, 2
    D = _mlp(rng, [V, 4, 3, 2 * M], ["tanh", "tanh", "softmax"])
    reals = [_tfidf(rng, 3, V) for _ in range(M)]
    fakes = [np.random.default_rng(seed + 99).dirichlet(np.ones(V), size=3) for _ in range(M)]
    return (lambda P: degan_disc_loss(P, reals, fakes)), D


def degan_gen(seed, M=1):
    """Ratio loss differentiated through the full generator into every parameter."""
    rng = np.random.default_rng(seed)
    V = 6
    cfg = degan.DeganConfig(noise_dim=3, topics=4)
    gens = degan.init_generators(M, V, cfg, rng)
    D = _mlp(rng, [V, 4, 3, 2 * M], ["tanh", "tanh", "softmax"])
    # bigger discriminator weights make the ratio term non-trivial
    for layer in D.layers:
        layer.W *= 2.0
    noise = [degan.sample_noise(rng, 4, cfg.noise_dim) for _ in range(M)]
    return (lambda g: degan.generator_loss(D, g, noise)), gens


LOSSES = {"wegan_disc": wegan_disc, "wegan_gen": wegan_gen, "classifier": classifier, "degan_disc": degan_disc, "degan_gen": degan_gen}
