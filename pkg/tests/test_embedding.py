import numpy as np
import pytest

from memesearch import embedding as emb
from memesearch.corpus import FeatureVector
from memesearch.embedding import (
    EmbeddingModel,
    TrainConfig,
    WordVectorTable,
    embed_text,
    rank_memes,
    rank_texts,
    tokenize,
    train_embedding,
    triplet_loss,
)
from memesearch.errors import AllTokensUnknownError, DataError, DimensionMismatchError

from conftest import make_retrieval_fixture


def small_table():
    return WordVectorTable(
        dimension=2,
        vectors={
            "perro": np.array([1.0, 0.0]),
            "gato": np.array([0.0, 1.0]),
        },
    )


def identity_model(dim, **config_kwargs):
    cfg = TrainConfig(shared_dim=dim, **config_kwargs)
    eye = np.eye(dim)
    zero = np.zeros(dim)
    return EmbeddingModel(W_v=eye, b_v=zero, W_t=eye.copy(), b_t=zero.copy(), config=cfg)


class TestTokenize:
    def test_casefold_and_punctuation(self):
        assert tokenize("perro PERRO.") == ["perro", "perro"]

    def test_interior_punctuation_kept(self):
        assert tokenize("¿qué tal, don't!") == ["qué", "tal", "don't"]

    def test_empty(self):
        assert tokenize("  ...  ") == []


class TestEmbedText:
    def test_mean_of_two(self):
        vec, dropped = embed_text("perro gato", small_table())
        assert np.allclose(vec, [0.5, 0.5])
        assert dropped == []

    def test_single_token_identity(self):
        vec, _ = embed_text("gato", small_table())
        assert np.allclose(vec, [0.0, 1.0])

    def test_duplicates_counted_oov_dropped(self):
        vec, dropped = embed_text("perro PERRO. elefante", small_table())
        assert np.allclose(vec, [1.0, 0.0])
        assert dropped == ["elefante"]

    def test_all_unknown(self):
        with pytest.raises(AllTokensUnknownError) as exc:
            embed_text("elefante jirafa", small_table())
        assert exc.value.tokens == ["elefante", "jirafa"]


class TestProject:
    def test_identity(self):
        model = identity_model(3)
        x = np.array([1.0, -2.0, 0.5])
        assert np.allclose(model.project("visual", x), x)

    def test_scalar(self):
        cfg = TrainConfig(shared_dim=2)
        model = EmbeddingModel(
            W_v=2 * np.eye(2), b_v=np.zeros(2), W_t=np.eye(2), b_t=np.zeros(2), config=cfg
        )
        assert np.allclose(model.project("visual", [1.0, -1.0]), [2.0, -2.0])

    def test_matches_naive_matvec(self):
        gen = np.random.default_rng(0)
        W = gen.normal(size=(4, 6))
        b = gen.normal(size=4)
        cfg = TrainConfig(shared_dim=4)
        model = EmbeddingModel(W_v=W, b_v=b, W_t=gen.normal(size=(4, 3)), b_t=np.zeros(4), config=cfg)
        x = gen.normal(size=6)
        expected = [sum(W[i][j] * x[j] for j in range(6)) + b[i] for i in range(4)]
        assert np.allclose(model.project("visual", x), expected, atol=1e-9)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            identity_model(3).project("text", [1.0, 2.0])


class TestTripletLoss:
    def test_inactive_hinge(self):
        a = np.array([0.0, 0.0])
        p = a.copy()
        n = np.array([3.0, 0.0])
        loss, ga, gp, gn = triplet_loss(a, p, n, margin=1.0)
        assert loss == 0.0
        assert np.all(ga == 0) and np.all(gp == 0) and np.all(gn == 0)

    def test_equidistant_gives_margin(self):
        a = np.array([0.0, 0.0])
        p = np.array([1.0, 0.0])
        n = np.array([0.0, 1.0])
        for m in (0.0, 0.5, 2.0):
            loss, *_ = triplet_loss(a, p, n, margin=m)
            assert loss == pytest.approx(m)

    def test_hand_computed_squared_mode(self):
        a = np.array([0.0, 0.0])
        p = np.array([0.0, 2.0])
        n = np.array([1.0, 0.0])
        loss, ga, gp, gn = triplet_loss(a, p, n, margin=1.0, mode="squared_euclidean")
        assert loss == pytest.approx(4.0)
        assert np.allclose(ga, [2.0, -4.0])

    @pytest.mark.parametrize("mode", emb.DISTANCE_MODES)
    def test_gradients_match_finite_differences(self, mode):
        gen = np.random.default_rng(1)
        checked = 0
        while checked < 100:
            a, p, n = gen.normal(size=(3, 5))
            d_ap = np.sum((a - p) ** 2)
            d_an = np.sum((a - n) ** 2)
            if mode == "euclidean":
                d_ap, d_an = np.sqrt(d_ap), np.sqrt(d_an)
            if abs(d_ap - d_an + 1.0) <= 1e-3:
                continue
            checked += 1
            loss, ga, gp, gn = triplet_loss(a, p, n, margin=1.0, mode=mode)
            h = 1e-5
            for slot, grad in ((0, ga), (1, gp), (2, gn)):
                for j in range(5):
                    def at(delta):
                        trip = [a.copy(), p.copy(), n.copy()]
                        trip[slot][j] += delta
                        return triplet_loss(*trip, margin=1.0, mode=mode)[0]
                    numeric = (at(h) - at(-h)) / (2 * h)
                    if abs(numeric) < 1e-8 and abs(grad[j]) < 1e-8:
                        continue
                    rel = abs(grad[j] - numeric) / max(abs(numeric), abs(grad[j]), 1e-8)
                    assert rel < 1e-4

    def test_loss_nonnegative_property(self):
        gen = np.random.default_rng(2)
        for _ in range(200):
            a, p, n = gen.normal(size=(3, 4))
            m = abs(gen.normal())
            loss, *_ = triplet_loss(a, p, n, margin=m)
            assert loss >= 0.0
            d_ap = np.sum((a - p) ** 2)
            d_an = np.sum((a - n) ** 2)
            assert (loss == 0.0) == (d_ap + m <= d_an)


class TestTrainEmbedding:
    def make_pairs(self, n=12, dv=5, seed=0):
        gen = np.random.default_rng(seed)
        table = WordVectorTable(
            dimension=3, vectors={f"w{i}": gen.normal(size=3) for i in range(n)}
        )
        pairs = [
            (f"i{i}", f"w{i}", FeatureVector(id=f"i{i}", values=gen.normal(size=dv)))
            for i in range(n)
        ]
        return pairs, table

    def test_zero_learning_rate_keeps_parameters(self):
        pairs, table = self.make_pairs()
        cfg = TrainConfig(shared_dim=4, epochs=1, learning_rate=0.0, seed=3, batch_size=4)
        model, trace = train_embedding(pairs[:10], pairs[10:], table, cfg)
        init = emb.init_model(5, 3, cfg)
        assert np.array_equal(model.W_v, init.W_v)
        assert np.array_equal(model.W_t, init.W_t)
        assert len(trace.train_loss) == 1

    def test_deterministic_bitwise(self):
        pairs, table = self.make_pairs(n=16)
        cfg = TrainConfig(shared_dim=4, epochs=3, seed=9, batch_size=4, learning_rate=0.01)
        m1, t1 = train_embedding(pairs[:12], pairs[12:], table, cfg)
        m2, t2 = train_embedding(pairs[:12], pairs[12:], table, cfg)
        assert m1.to_json() == m2.to_json()
        assert t1 == t2

    def test_insufficient_pairs(self):
        pairs, table = self.make_pairs(n=2)
        cfg = TrainConfig(shared_dim=2, epochs=1)
        with pytest.raises(Exception):
            train_embedding(pairs[:1], pairs[1:], table, cfg)

    def test_trace_length_and_finite(self):
        pairs, table = self.make_pairs(n=20)
        cfg = TrainConfig(shared_dim=4, epochs=5, seed=1, learning_rate=0.001)
        _, trace = train_embedding(pairs[:15], pairs[15:], table, cfg)
        assert len(trace.train_loss) == 5
        assert all(np.isfinite(v) for v in trace.train_loss)
        assert all(np.isfinite(v) for v in trace.test_map)

    def test_synthetic_latent_task_beats_random_baseline(self):
        pairs, table = make_retrieval_fixture(n_pairs=120, seed=5)
        cfg = TrainConfig(shared_dim=16, epochs=30, seed=2, batch_size=16)
        _, trace = train_embedding(pairs[:100], pairs[100:], table, cfg)
        n_test = 20
        baseline = sum(1.0 / i for i in range(1, n_test + 1)) / n_test
        assert max(trace.test_map) > baseline
        # best mAP over training is at least the first-epoch mAP
        assert max(trace.test_map) >= trace.test_map[0]


class TestRanking:
    def items_from(self, vectors):
        return [(f"m{i}", FeatureVector(id=f"m{i}", values=np.asarray(v, dtype=float)))
                for i, v in enumerate(vectors)]

    def test_exact_match_rank_1(self):
        model = identity_model(2)
        items = self.items_from([[1.0, 0.0], [5.0, 5.0]])
        result = rank_memes(model, "perro", items, small_table())
        assert result.results[0] == ("m0", 0.0, 1)

    def test_sort_order(self):
        model = identity_model(2)
        items = self.items_from([[3.0, 0.0], [2.0, 0.0]])
        result = rank_memes(model, "perro", items, small_table())
        assert [r[0] for r in result.results] == ["m1", "m0"]
        assert [r[2] for r in result.results] == [1, 2]

    def test_matches_bruteforce_oracle(self):
        gen = np.random.default_rng(4)
        cfg = TrainConfig(shared_dim=3)
        model = EmbeddingModel(
            W_v=gen.normal(size=(3, 4)), b_v=gen.normal(size=3),
            W_t=gen.normal(size=(3, 2)), b_t=gen.normal(size=3), config=cfg,
        )
        items = self.items_from(gen.normal(size=(50, 4)))
        result = rank_memes(model, "perro gato", items, small_table())
        q = model.project("text", embed_text("perro gato", small_table())[0])
        expected = sorted(
            ((item_id, float(np.sum((model.project("visual", fv) - q) ** 2)))
             for item_id, fv in items),
            key=lambda t: (t[1], t[0]),
        )
        assert [r[0] for r in result.results] == [e[0] for e in expected]

    def test_distance_mode_orderings_agree(self):
        gen = np.random.default_rng(6)
        items = self.items_from(gen.normal(size=(30, 3)))
        sq = rank_memes(identity_model(3, distance_mode="squared_euclidean"),
                        "perro", items, WordVectorTable(3, {"perro": gen.normal(size=3)}))
        # rebuild table deterministically for the second call
        gen = np.random.default_rng(6)
        items = self.items_from(gen.normal(size=(30, 3)))
        eu = rank_memes(identity_model(3, distance_mode="euclidean"),
                        "perro", items, WordVectorTable(3, {"perro": gen.normal(size=3)}))
        assert [r[0] for r in sq.results] == [r[0] for r in eu.results]

    def test_top_k_clamped(self):
        model = identity_model(2)
        items = self.items_from([[1.0, 0.0], [0.0, 1.0]])
        result = rank_memes(model, "perro", items, small_table(), k=10)
        assert len(result.results) == 2

    def test_empty_items_rejected(self):
        with pytest.raises(DataError):
            rank_memes(identity_model(2), "perro", [], small_table())

    def test_rank_texts_mirror(self):
        model = identity_model(2)
        captions = [("c0", "perro"), ("c1", "gato")]
        result = rank_texts(model, np.array([0.0, 1.0]), captions, small_table())
        assert result.results[0] == ("c1", 0.0, 1)

    def test_reversal_symmetry_with_identity_heads(self):
        model = identity_model(2)
        table = small_table()
        items = self.items_from([[1.0, 0.0], [0.0, 1.0]])
        captions = [("m0", "perro"), ("m1", "gato")]
        top_item = rank_memes(model, "gato", items, table).results[0][0]
        assert top_item == "m1"
        fv = dict(items)[top_item]
        top_caption = rank_texts(model, fv, captions, table).results[0][0]
        assert top_caption == "m1"


class TestModelSerialization:
    def test_roundtrip_lossless(self):
        gen = np.random.default_rng(8)
        cfg = TrainConfig(shared_dim=3, epochs=7, seed=5)
        model = EmbeddingModel(
            W_v=gen.normal(size=(3, 4)), b_v=gen.normal(size=3),
            W_t=gen.normal(size=(3, 2)), b_t=gen.normal(size=3), config=cfg,
        )
        restored = EmbeddingModel.from_json(model.to_json())
        assert np.array_equal(restored.W_v, model.W_v)
        assert np.array_equal(restored.b_t, model.b_t)
        assert restored.config == model.config
        assert restored.to_json() == model.to_json()
