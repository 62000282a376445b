import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from corpusgan.embedding import (
    EmbeddingMatrix,
    SkipGramConfig,
    doc_embed,
    doc_embed_matrix,
    init_embeddings,
    load_embeddings,
    save_word2vec,
    synonym_drift,
    top_k_synonyms,
    train_skipgram,
    write_synonym_report,
)
from corpusgan.text import Vocabulary


def cosine(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


def brute_topk(E, q, k):
    scored = [(-cosine(E[q], E[j]), j) for j in range(len(E)) if j != q]
    return [j for _, j in sorted(scored)[:k]]


class TestSkipGram:
    docs = [[0, 1, 0, 1]] * 30 + [[2, 3, 2, 3]] * 30

    def test_shape_finite(self):
        E = train_skipgram(self.docs, 4, SkipGramConfig(dim=8, epochs=2))
        assert E.data.shape == (4, 8) and np.isfinite(E.data).all()

    def test_epochs_zero_is_init(self):
        cfg = SkipGramConfig(dim=5, epochs=0, seed=3)
        E = train_skipgram(self.docs, 4, cfg)
        expected = init_embeddings(4, 5, np.random.default_rng(3))
        np.testing.assert_array_equal(E.data, expected)
        assert np.abs(E.data).max() <= 0.5 / 5

    def test_cooccurring_pair_similar(self):
        # 0 and 1 only ever appear together (as do 2 and 3), so they share contexts
        docs = [[0, 1] * 5] * 20 + [[2, 3] * 5] * 20
        E = train_skipgram(docs, 4, SkipGramConfig(dim=10, epochs=200, seed=0)).data
        sims = [cosine(E[i], E[j]) for i in range(4) for j in range(i + 1, 4)]
        assert cosine(E[0], E[1]) > np.mean(sims)
        assert cosine(E[2], E[3]) > np.mean(sims)

    def test_reproducible(self):
        cfg = SkipGramConfig(dim=6, epochs=3, seed=11)
        a = train_skipgram(self.docs, 4, cfg).data
        b = train_skipgram(self.docs, 4, cfg).data
        assert np.array_equal(a, b)

    def test_no_pairs_raises(self):
        with pytest.raises(ValueError):
            train_skipgram([[0], [1]], 3, SkipGramConfig(dim=4, epochs=1))

    def test_config_invariants(self):
        for bad in (dict(dim=0), dict(window=0), dict(negative_samples=0)):
            with pytest.raises(ValueError):
                SkipGramConfig(**bad)

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            EmbeddingMatrix(np.array([[np.nan]]), "trained-all")


class TestLoad:
    vocab = Vocabulary(["a", "b", "c"], [1, 1, 1])

    def test_full_coverage_roundtrip(self, tmp_path):
        E = np.arange(6, dtype=float).reshape(3, 2) / 7
        save_word2vec(tmp_path / "e.txt", E, self.vocab.terms)
        F, cov = load_embeddings(tmp_path / "e.txt", self.vocab)
        assert cov.coverage == 1.0 and cov.missing == []
        np.testing.assert_array_equal(F.data, E)

    def test_missing_term(self, tmp_path):
        (tmp_path / "e.txt").write_text("2 4\na 1 2 3 4\nc 5 6 7 8\nzzz 0 0 0 0\n".replace("2 4", "3 4", 1))
        F, cov = load_embeddings(tmp_path / "e.txt", self.vocab, seed=5)
        assert cov.coverage == pytest.approx(2 / 3) and cov.missing == ["b"]
        assert np.all(np.abs(F.data[1]) <= 0.5 / 4)
        F2, _ = load_embeddings(tmp_path / "e.txt", self.vocab, seed=5)
        assert np.array_equal(F.data, F2.data)

    def test_wrong_value_count_names_line(self, tmp_path):
        rows = ["3 300", "a " + " ".join(["0.1"] * 300), "b " + " ".join(["0.1"] * 299)]
        (tmp_path / "e.txt").write_text("\n".join(rows) + "\n")
        with pytest.raises(ValueError, match=r"e\.txt:3"):
            load_embeddings(tmp_path / "e.txt", self.vocab)

    def test_malformed_header(self, tmp_path):
        (tmp_path / "e.txt").write_text("three 2\n")
        with pytest.raises(ValueError, match="header"):
            load_embeddings(tmp_path / "e.txt", self.vocab)

    def test_dimension_mismatch(self, tmp_path):
        (tmp_path / "e.txt").write_text("1 2\na 1 2\n")
        with pytest.raises(ValueError, match="dimension"):
            load_embeddings(tmp_path / "e.txt", self.vocab, dim=3)


class TestDocEmbed:
    def test_empty_is_zero(self):
        assert np.array_equal(doc_embed({}, np.ones((3, 4))), np.zeros(4))

    def test_unit_weight_identity(self):
        E = np.arange(12.0).reshape(3, 4)
        np.testing.assert_array_equal(doc_embed({2: 1.0}, E, "identity"), E[2])

    def test_cancelling_rows(self):
        E = np.array([[1.0] * 5, [-1.0] * 5])
        np.testing.assert_array_equal(doc_embed({0: 0.5, 1: 0.5}, E), np.zeros(5))

    def test_matrix_matches_single(self, small_prepared, rng):
        E = rng.normal(size=(len(small_prepared.vocab), 6))
        T = small_prepared.matrix()
        M = doc_embed_matrix(T, E)
        for i in range(0, len(small_prepared.docs), 17):
            np.testing.assert_allclose(M[i], doc_embed(small_prepared.docs[i], E), atol=1e-12)

    @given(arrays(np.float64, (6, 3), elements=st.floats(-10, 10)),
           st.dictionaries(st.integers(0, 5), st.floats(1e-3, 10), min_size=1, max_size=6))
    def test_tanh_bounded(self, E, w):
        # L1-normalized documents keep |x| <= 10; float64 tanh only rounds to 1 beyond ~19
        total = sum(w.values())
        v = doc_embed({j: x / total for j, x in w.items()}, E)
        assert np.all(np.abs(v) < 1)

    @given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
    @settings(max_examples=50)
    def test_linear_before_squash(self, a, b, seed):
        r = np.random.default_rng(seed)
        E = r.normal(size=(8, 4))
        t1 = {int(j): float(r.random()) for j in r.choice(8, 3, replace=False)}
        t2 = {int(j): float(r.random()) for j in r.choice(8, 3, replace=False)}
        mix = {j: a * t1.get(j, 0) + b * t2.get(j, 0) for j in set(t1) | set(t2)}
        lhs = doc_embed(mix, E, "identity")
        rhs = a * doc_embed(t1, E, "identity") + b * doc_embed(t2, E, "identity")
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)


class TestSynonyms:
    def test_identical_rows(self):
        E = np.array([[1.0, 2], [1, 2], [-1, 0.5]])
        assert top_k_synonyms(E, 0, 1) == [1]

    def test_orthogonal_ties_by_index(self):
        E = np.eye(3)
        assert top_k_synonyms(E, 0, 2) == [1, 2]

    def test_fixture_matches_brute_force(self):
        E = np.array([[1.0, 0.2], [0.3, 1.0], [-1.0, 0.1], [0.9, 0.5], [0.2, -1.0]])
        for q in range(5):
            assert top_k_synonyms(E, q, 4) == brute_topk(E, q, 4)

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50)
    def test_random_matches_brute_force(self, seed):
        E = np.random.default_rng(seed).normal(size=(12, 3))
        assert top_k_synonyms(E, 3, 5) == brute_topk(E, 3, 5)

    def test_by_term(self):
        v = Vocabulary(["a", "b", "c"], [1, 1, 1])
        E = np.array([[1.0, 0], [1, 0.1], [0, 1]])
        assert top_k_synonyms(E, "a", 1, v) == ["b"]
        with pytest.raises(KeyError):
            top_k_synonyms(E, "zzz", 1, v)

    def test_zero_query_is_error(self):
        with pytest.raises(ValueError, match="undefined"):
            top_k_synonyms(np.array([[0.0, 0], [1, 0], [0, 1]]), 0, 1)

    def test_report(self, tmp_path):
        v = Vocabulary(["a", "b", "c"], [1, 1, 1])
        write_synonym_report(tmp_path / "s.tsv", np.array([[1.0, 0], [1, 0.1], [0, 1]]), v, ["a", "zzz"], 2)
        lines = (tmp_path / "s.tsv").read_text().splitlines()
        assert lines[0] == "term\trank\tneighbor\tcosine"
        assert [l.split("\t")[:3] for l in lines[1:]] == [["a", "1", "b"], ["a", "2", "c"]]


class TestDrift:
    def test_identity(self, rng):
        E = rng.normal(size=(10, 3))
        assert synonym_drift(E, E.copy(), 3) == (0.0, 0.0)

    def test_single_change(self):
        # term 0's nearest neighbour switches from 1 to 2; no other list changes
        before = np.array([[1.0, 0.0], [1.0, 0.05], [1.0, -0.2], [-1.0, 0.1], [-1.0, -0.1]])
        after = before.copy()
        after[0] = [1.0, -0.12]
        b = [set(brute_topk(before, i, 1)) for i in range(5)]
        a = [set(brute_topk(after, i, 1)) for i in range(5)]
        assert sum(x != y for x, y in zip(b, a)) == 1
        assert synonym_drift(before, after, 1) == pytest.approx((1 / 5, 1 / 5))

    def test_random_matches_brute_force(self):
        r = np.random.default_rng(7)
        before, after = r.normal(size=(20, 4)), r.normal(size=(20, 4))
        k = 5
        diffs = [len(set(brute_topk(before, i, k)) - set(brute_topk(after, i, k))) for i in range(20)]
        mean, frac = synonym_drift(before, after, k)
        assert mean == pytest.approx(np.mean(diffs), abs=1e-12)
        assert frac == pytest.approx(np.mean([d > 0 for d in diffs]), abs=1e-12)

    def test_mismatch(self):
        with pytest.raises(ValueError):
            synonym_drift(np.ones((4, 2)), np.ones((5, 2)), 2)
