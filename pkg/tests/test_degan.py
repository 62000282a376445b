import math
from dataclasses import fields

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpusgan.degan import (
    DeganConfig,
    DeganGenerator,
    DeganGenerators,
    DiscreteDistribution,
    Prop1Config,
    degan_generate,
    discriminator_objective,
    generator_loss,
    init_discriminator,
    init_generators,
    load_state,
    mean_target_probability,
    optimal_discriminator,
    real_corpus_accuracy,
    sample_noise,
    save_state,
    simplex_vertices,
    train_degan,
    verify_proposition1,
    write_samples,
)
from corpusgan.lda import fit_lda, log_init
from corpusgan.neural import sgd_step


def random_gens(seed, M=2, V=7, d_n=3, T=4, scale=1.0):
    r = np.random.default_rng(seed)
    return DeganGenerators(
        [r.normal(scale=scale, size=(T, d_n)) for _ in range(M)],
        [r.normal(scale=scale, size=(V, T)) for _ in range(M)],
        r.normal(scale=scale, size=(T, d_n)),
        r.normal(scale=scale, size=(V, T)),
    )


class TestGenerate:
    def test_zero_noise_uniform(self):
        g = random_gens(0).generator(0)
        np.testing.assert_array_equal(degan_generate(g, np.zeros(3)), np.full(7, 1 / 7))

    def test_zero_weights_uniform(self):
        z = np.zeros
        g = DeganGenerator(z((4, 3)), z((4, 3)), z((7, 4)), z((7, 4)))
        out = degan_generate(g, np.random.default_rng(0).uniform(-1, 1, size=(5, 3)))
        np.testing.assert_array_equal(out, np.full((5, 7), 1 / 7))

    def test_hand_fixture(self):
        a, b, n = 0.7, -1.3, 0.4
        u = np.array([1.0, -2.0, 0.5])
        v = np.array([0.3, 0.0, -1.0])
        g = DeganGenerator(np.array([[a]]), np.array([[b]]), u[:, None], v[:, None])
        logits = [u[i] * math.tanh(a * n) + v[i] * math.tanh(b * n) for i in range(3)]
        e = [math.exp(x) for x in logits]
        np.testing.assert_allclose(degan_generate(g, [n]), [x / sum(e) for x in e], rtol=0, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            degan_generate(random_gens(0).generator(0), np.zeros(4))

    def test_ten_thousand_valid(self):
        gens = random_gens(5, M=3, V=30, scale=3.0)
        r = np.random.default_rng(0)
        out = np.vstack([degan_generate(gens.generator(m), sample_noise(r, 3334, 3)) for m in range(3)])
        assert out.shape[0] >= 10_000
        assert np.all(out >= 0) and np.all(np.abs(out.sum(axis=1) - 1) < 1e-6)

    @given(st.integers(0, 2**32 - 1), st.floats(0.01, 30))
    @settings(max_examples=40, deadline=None)
    def test_probability_vector_property(self, seed, scale):
        gens = random_gens(seed, scale=scale)
        noise = np.random.default_rng(seed).uniform(-1, 1, size=(20, 3))
        out = degan_generate(gens.generator(1), noise)
        assert np.all(out >= 0) and np.all(np.abs(out.sum(axis=1) - 1) < 1e-9)

    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 20))
    @settings(max_examples=40, deadline=None)
    def test_symmetric_noise_caps_expected_mass(self, seed, scale):
        # bias-free odd hidden layers: outputs at n and -n have opposite logits,
        # and softmax(l)_i + softmax(-l)_i <= 1, so the mean over +-n is <= 1/2
        g = random_gens(seed, scale=scale).generator(0)
        n = np.random.default_rng(seed).uniform(-1, 1, size=(50, 3))
        mean = 0.5 * (degan_generate(g, n) + degan_generate(g, -n))
        assert np.all(mean <= 0.5 + 1e-12)


class TestStructure:
    def test_no_biases(self):
        names = {f.name for f in fields(DeganGenerator)} | {f.name for f in fields(DeganGenerators)}
        assert not any(n.startswith("b") for n in names)
        gens = init_generators(2, 6, DeganConfig(noise_dim=3, topics=4), np.random.default_rng(0))
        assert set(gens.tensors()) == {"W_h.0", "W_h.1", "W_o.0", "W_o.1", "W_h0", "w_o0"}

    def test_shared_identity_after_step(self):
        cfg = DeganConfig(noise_dim=3, topics=4)
        r = np.random.default_rng(0)
        gens = init_generators(2, 6, cfg, r)
        D = init_discriminator(6, 2, cfg, r, embed_dim=5)
        _, grads = generator_loss(D, gens, [sample_noise(r, 4, 3) for _ in range(2)])
        before = gens.W_h0.copy()
        sgd_step(gens, grads, 0.5)
        g0, g1 = gens.generator(0), gens.generator(1)
        assert g0.W_h0 is g1.W_h0 and g0.w_o0 is g1.w_o0
        assert not np.array_equal(before, gens.W_h0)

    def test_shared_gradient_is_sum(self):
        cfg = DeganConfig(noise_dim=3, topics=4)
        r = np.random.default_rng(1)
        gens = init_generators(2, 6, cfg, r)
        D = init_discriminator(6, 2, cfg, r, embed_dim=5)
        noise = [sample_noise(r, 4, 3) for _ in range(2)]
        _, full = generator_loss(D, gens, noise)
        # with corpus 1's noise scaled to 0 its generator is constant, contributing no W_h0 gradient
        _, only0 = generator_loss(D, gens, [noise[0], np.zeros_like(noise[1])])
        np.testing.assert_allclose(only0.W_h0, full.W_h0 - (full.W_h0 - only0.W_h0), atol=1e-15)
        assert not np.allclose(full.W_h0, only0.W_h0)

    def test_lda_output_init(self):
        cfg = DeganConfig(noise_dim=3, topics=4)
        L = np.log(np.random.default_rng(0).dirichlet(np.ones(6), size=4))
        gens = init_generators(2, 6, cfg, np.random.default_rng(0), L)
        for W in gens.W_o + [gens.w_o0]:
            np.testing.assert_array_equal(W, L.T)
        with pytest.raises(ValueError):
            init_generators(2, 5, cfg, np.random.default_rng(0), L)

    def test_discriminator_shape_and_embedding_init(self):
        E = np.random.default_rng(0).normal(size=(6, 5))
        D = init_discriminator(6, 3, DeganConfig(disc_hidden=7), np.random.default_rng(0), E)
        assert [l.W.shape for l in D.layers] == [(6, 5), (5, 7), (7, 6)]
        assert [l.activation for l in D.layers] == ["tanh", "tanh", "softmax"]
        assert np.array_equal(D.layers[0].W, E) and D.layers[0].W is not E


def disjoint_fixture(n=100, seed=0):
    """Two corpora drawn from disjoint 10-term distributions."""
    r = np.random.default_rng(seed)
    X = np.zeros((2 * n, 20))
    c = np.repeat([0, 1], n)
    for i in range(2 * n):
        X[i, 10 * c[i]:10 * c[i] + 10] = r.dirichlet(np.ones(10))
    return X, c


class TestTraining:
    cfg = DeganConfig(noise_dim=10, topics=10, disc_hidden=10, epochs=100, lr_D=0.1, lr_G=0.1, seed=0)

    def test_target_probability_increases(self):
        X, c = disjoint_fixture()
        L = log_init(fit_lda(np.round(X * 40).astype(int), 10, iters=200, seed=0))
        r0 = np.random.default_rng([0, 0])
        gens0 = init_generators(2, 20, self.cfg, r0, L)
        D0 = init_discriminator(20, 2, self.cfg, r0, embed_dim=10)
        st = train_degan(X, c, self.cfg, L)
        assert mean_target_probability(st.D, st.gens) > mean_target_probability(D0, gens0) + 0.05
        assert real_corpus_accuracy(st.D, X, c) >= 0.95
        assert st.history[-1]["disc_loss"] < st.history[0]["disc_loss"]

    def test_single_corpus_smoke(self):
        X, _ = disjoint_fixture(n=20)
        cfg = DeganConfig(noise_dim=4, topics=4, disc_hidden=4, epochs=3)
        st = train_degan(X[:20], np.zeros(20, int), cfg)
        assert st.D.out_dim == 2 and len(st.history) == 3
        assert {"disc_loss", "gen_loss", "real_accuracy", "real_accuracy_0", "target_prob"} <= set(st.history[0])

    def test_epochs_zero(self):
        X, c = disjoint_fixture(n=10)
        cfg = DeganConfig(noise_dim=4, topics=4, disc_hidden=4, epochs=0, seed=3)
        st = train_degan(X, c, cfg)
        ref = init_generators(2, 20, cfg, np.random.default_rng([3, 0]))
        for k, v in ref.tensors().items():
            assert np.array_equal(st.gens.tensors()[k], v)

    def test_resume_matches(self, tmp_path):
        X, c = disjoint_fixture(n=15)
        cfg = DeganConfig(noise_dim=4, topics=4, disc_hidden=4, epochs=4, batch_per_corpus=5, seed=2)
        full = train_degan(X, c, cfg)

        class Stop(Exception):
            pass

        def hook(state):
            if state.epoch == 2:
                save_state(tmp_path / "d.ckpt", state)
                raise Stop

        with pytest.raises(Stop):
            train_degan(X, c, cfg, on_epoch=hook)
        resumed = train_degan(X, c, cfg, state=load_state(tmp_path / "d.ckpt"))
        assert resumed.history == full.history
        for k, v in full.gens.tensors().items():
            assert np.array_equal(resumed.gens.tensors()[k], v)

    def test_samples_tsv(self, tmp_path):
        gens = random_gens(0, V=12)
        terms = [f"w{i}" for i in range(12)]
        write_samples(tmp_path / "s.tsv", gens, terms, ["a", "b"], k=5)
        rows = [l.split("\t") for l in (tmp_path / "s.tsv").read_text().splitlines()]
        assert rows[0] == ["corpus", "sample", "top_terms"]
        assert [r[0] for r in rows[1:]] == ["a", "b"] and all(len(r[2].split()) == 5 for r in rows[1:])


def dists(masses, support):
    return [DiscreteDistribution(support, m) for m in masses]


class TestOptimalDiscriminator:
    def test_equal_gives_half(self):
        S = simplex_vertices(3)
        p = np.array([0.2, 0.3, 0.5])
        _, Ds = optimal_discriminator(dists([p], S), dists([p], S))
        np.testing.assert_array_equal(Ds, np.full((3, 2), 0.5))

    def test_two_point_hand(self):
        S = simplex_vertices(2)
        _, Ds = optimal_discriminator(dists([[0.8, 0.2]], S), dists([[0.2, 0.8]], S))
        np.testing.assert_allclose(Ds, [[0.8, 0.2], [0.2, 0.8]], atol=1e-15)

    def test_zero_mass_points_excluded(self):
        S = simplex_vertices(3)
        kept, Ds = optimal_discriminator(dists([[0.5, 0.5, 0.0]], S), dists([[1.0, 0.0, 0.0]], S))
        assert kept.tolist() == [0, 1] and Ds.shape == (2, 2)

    def test_mismatched_support(self):
        with pytest.raises(ValueError):
            optimal_discriminator(dists([[1.0, 0.0]], simplex_vertices(2)),
                                  dists([[1.0, 0.0]], simplex_vertices(2) * 2))

    def test_invalid_distribution(self):
        with pytest.raises(ValueError):
            DiscreteDistribution(simplex_vertices(2), [0.6, 0.6])

    @pytest.mark.parametrize("M", [1, 2, 3])
    def test_random_search_never_beats_closed_form(self, M):
        r = np.random.default_rng(M)
        S = 12
        support = simplex_vertices(S)
        p = r.dirichlet(np.ones(S), size=M)
        q = r.dirichlet(np.ones(S), size=M)
        p[0, :2] = 0.0
        p[0] /= p[0].sum()
        kept, Ds = optimal_discriminator(dists(p, support), dists(q, support))
        assert np.all(Ds >= 0) and np.all(np.abs(Ds.sum(axis=1) - 1) < 1e-12)
        best = discriminator_objective(p.T[kept], q.T[kept], Ds)
        for _ in range(1000):
            logits = r.normal(scale=2.0, size=Ds.shape)
            cand = np.exp(logits) / np.exp(logits).sum(axis=1, keepdims=True)
            assert discriminator_objective(p.T[kept], q.T[kept], cand) <= best + 1e-9


class TestProposition1:
    def test_frozen_generator_discriminator_gap(self):
        p = [np.array([0.3, 0.2, 0.5])]
        rep = verify_proposition1(p, Prop1Config(seed=0), frozen_q=p)
        assert rep["final_disc_gap"] < 0.05
        assert rep["frozen_generator"]

    def test_zero_epochs_baseline_only(self):
        rep = verify_proposition1([np.array([0.5, 0.5, 0.0])], Prop1Config(epochs=0))
        assert len(rep["checkpoints"]) == 1 and rep["checkpoints"][0]["epoch"] == 0

    def test_two_point_single_corpus(self):
        rep = verify_proposition1([np.array([0.5, 0.5, 0.0])], Prop1Config(seed=0))
        assert rep["final_tv"][0] < 0.15
        assert rep["final_tv"][0] < rep["checkpoints"][0]["tv"][0]
        assert rep["disc_gap_decreased"]
