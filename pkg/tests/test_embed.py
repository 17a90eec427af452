import numpy as np
import pytest

from tests.helpers import make_tweets
from text_polarization.embed import EmbeddingTable, load_embeddings, \
    cooccurrence, GloveTrace, train_glove, sif_weights, \
    first_principal_component, remove_component, sentence_vectors, \
    sif_embed, save_sentence_embeddings, load_sentence_embeddings
from text_polarization.errors import EmbeddingError
from text_polarization.textprep import Vocab


@pytest.fixture
def communities():
    rows = []
    for k in range(60):
        rows.append((f'a{k}', 'gun law ban vote'))
        rows.append((f'b{k}', 'pray heart love vigil'))
    return make_tweets(rows)


class TestEmbeddingTable:

    def test_save_load(self, tmp_path):
        table = EmbeddingTable(3, {'gun': [0.1, -2.0, 3.5],
                                   'law': [1e-7, 0.0, 1.0]})
        table.save(tmp_path / 'emb.txt')
        loaded = load_embeddings(tmp_path / 'emb.txt')
        assert loaded.dim == 3 and loaded.stems == ['gun', 'law']
        assert np.array_equal(loaded['gun'], table['gun'])

    @pytest.mark.parametrize("content", [
        "",
        "gun\n",
        "gun 1 2\nlaw 1\n",
        "gun 1 x\n",
    ])
    def test_bad_file(self, tmp_path, content):
        (tmp_path / 'emb.txt').write_text(content, encoding='utf-8')
        with pytest.raises(EmbeddingError):
            load_embeddings(tmp_path / 'emb.txt')

    def test_shape(self):
        with pytest.raises(EmbeddingError):
            EmbeddingTable(2, {'gun': [1.0, 2.0, 3.0]})

    def test_not_finite(self):
        with pytest.raises(EmbeddingError):
            EmbeddingTable(2, {'gun': [1.0, np.nan]})


class TestCooccurrence:

    def test_window_weights(self):
        tweets = make_tweets([('a', 'gun law ban')])
        vocab = Vocab(['ban', 'gun', 'law'])
        matrix, occurrences = cooccurrence(tweets, vocab, window=1)
        gun, law, ban = (vocab.position(s) for s in ('gun', 'law', 'ban'))
        assert matrix[gun, law] == 1.0 and matrix[law, gun] == 1.0
        assert matrix[gun, ban] == 0.0
        matrix, _ = cooccurrence(tweets, vocab, window=2)
        assert matrix[gun, ban] == 0.5
        assert occurrences[gun] == 1


class TestGlove:

    def test_objective_decreases(self, communities):
        vocab = Vocab(['gun', 'law', 'ban', 'vote', 'pray', 'heart', 'love',
                       'vigil', 'unseen'])
        trace = GloveTrace()
        table = train_glove(communities, vocab, dim=8, iters=15, seed=3,
                            learning_rate=0.1, trace=trace)
        assert len(trace.objective) == 16
        assert trace.objective[-1] < 0.8 * trace.objective[0]
        assert trace.excluded == ['unseen']
        assert 'unseen' not in table and len(table) == 8

    def test_deterministic(self, communities):
        vocab = Vocab(['gun', 'law', 'pray', 'love'])
        first = train_glove(communities, vocab, dim=4, iters=3, seed=9)
        second = train_glove(communities, vocab, dim=4, iters=3, seed=9)
        assert all(np.array_equal(first[s], second[s]) for s in vocab)

    def test_batched(self, communities):
        vocab = Vocab(['gun', 'law', 'pray', 'love'])
        trace = GloveTrace()
        train_glove(communities, vocab, dim=4, iters=10, seed=0,
                    deterministic=False, trace=trace)
        assert trace.objective[-1] < trace.objective[0]

    def test_empty(self, communities):
        with pytest.raises(EmbeddingError):
            train_glove(communities, Vocab())
        with pytest.raises(EmbeddingError):
            train_glove(communities, Vocab(['missing']))


class TestPrincipalComponent:

    @pytest.mark.parametrize("seed", range(3))
    def test_against_eigh(self, seed):
        rng = np.random.default_rng(seed)
        rows = rng.normal(size=(50, 6)) + rng.normal(size=6) * 3
        values, vectors = np.linalg.eigh(rows.T @ rows)
        expected = vectors[:, np.argmax(values)]
        pc1 = first_principal_component(rows)
        assert abs(pc1 @ expected) == pytest.approx(1.0, abs=1e-8)
        assert np.linalg.norm(pc1) == pytest.approx(1.0)

    def test_longest_row_off_axis(self):
        rows = np.array([[3.0, 0.0]] + [[0.0, 1.0]] * 10)
        pc1 = first_principal_component(rows)
        assert pc1 == pytest.approx([0.0, 1.0], abs=1e-8)

    @pytest.mark.parametrize("dim", [2, 5, 8])
    def test_axis_aligned(self, dim):
        weights = np.arange(1, dim + 1, dtype=float)
        rows = np.diag(weights)
        pc1 = first_principal_component(rows)
        assert abs(pc1[-1]) == pytest.approx(1.0, abs=1e-8)

    def test_sign(self):
        rows = np.array([[-2.0, 0.0], [-3.0, 0.1], [2.5, -0.1]])
        pc1 = first_principal_component(rows)
        assert pc1[0] > 0

    def test_remove(self):
        rng = np.random.default_rng(0)
        rows = rng.normal(size=(20, 5)) + 2.0
        pc1 = first_principal_component(rows)
        removed = remove_component(rows, pc1)
        assert np.allclose(removed @ pc1, 0.0)
        assert remove_component(rows[0], pc1) @ pc1 == \
            pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("rows", [
        np.ones((1, 3)),
        np.zeros((4, 3)),
    ])
    def test_degenerate(self, rows):
        with pytest.raises(EmbeddingError):
            first_principal_component(rows)


class TestSif:

    @pytest.fixture
    def table(self):
        return EmbeddingTable(2, {'gun': [1.0, 0.0], 'law': [0.0, 1.0],
                                  'pray': [1.0, 1.0]})

    def test_weights(self):
        tweets = make_tweets([('a', 'gun law'), ('b', 'gun'),
                              ('c', 'gun pray')])
        weights = sif_weights(tweets, Vocab(['gun', 'law', 'pray', 'ban']))
        assert weights == {'gun': 1 / 3, 'law': 1.0, 'pray': 1.0}

    def test_weighted_average(self, table):
        tweets = make_tweets([('a', 'gun law gun'), ('b', 'nothing here')])
        ids, matrix, mask = sentence_vectors(
            tweets, table, {'gun': 0.5, 'law': 1.0, 'pray': 1.0})
        assert ids == ['ev-0', 'ev-1']
        assert np.allclose(matrix[0], [0.5, 0.5])
        assert mask.tolist() == [True, False]

    def test_embed(self, table):
        tweets = make_tweets([('a', 'gun'), ('b', 'law'), ('c', 'pray'),
                              ('d', 'gun pray')])
        weights = {'gun': 1.0, 'law': 1.0, 'pray': 1.0}
        embedded = sif_embed(tweets, table, weights)
        _, matrix, _ = sentence_vectors(tweets, table, weights)
        pc1 = first_principal_component(matrix)
        for emb in embedded:
            assert emb.e @ pc1 == pytest.approx(0.0, abs=1e-10)
        given = sif_embed(tweets, table, weights, pc1=np.array([1.0, 0.0]))
        assert np.allclose(given[1].e, [0.0, 1.0])

    @pytest.mark.parametrize("text,shuffled", [
        ('gun law pray', 'pray gun law'),
        ('gun gun law', 'law gun gun'),
    ])
    def test_token_order(self, table, text, shuffled):
        tweets = make_tweets([('a', text), ('b', shuffled)])
        weights = {'gun': 0.3, 'law': 1.0, 'pray': 0.7}
        _, matrix, _ = sentence_vectors(tweets, table, weights)
        assert np.allclose(matrix[0], matrix[1], atol=1e-12)
        pc1 = np.array([0.6, 0.8])
        first, second = sif_embed(tweets, table, weights, pc1=pc1)
        assert np.allclose(first.e, second.e, atol=1e-12)

    def test_save_load(self, table, tmp_path):
        tweets = make_tweets([('a', 'gun law'), ('b', 'pray'), ('c', 'x')])
        embedded = sif_embed(tweets, table, {'gun': 1.0, 'law': 0.5,
                                             'pray': 1.0})
        save_sentence_embeddings(embedded, tmp_path / 'sif.csv')
        ids, matrix = load_sentence_embeddings(tmp_path / 'sif.csv')
        assert ids == ['ev-0', 'ev-1']
        assert np.array_equal(matrix, np.array([e.e for e in embedded[:2]]))
