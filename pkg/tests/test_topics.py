import json
import math
from datetime import date

import numpy as np
import pytest
from sklearn.metrics import adjusted_rand_score

from tests.helpers import D, R, U, make_tweets
from text_polarization.corpus import EventMeta
from text_polarization.embed import EmbeddingTable
from text_polarization.errors import TopicModelError
from text_polarization.oracle import generate, oracle_labels, tweet_topics, \
    topic_spec
from text_polarization.textprep import Vocab, count_user_tokens
from text_polarization.topics import TopicModel, TopicAssignment, \
    topic_item, kmeans_cosine, assign_topics, nearest_rank, \
    filter_ambiguous, tweets_by_topic, within_topic_partisanship, \
    topic_counts, between_topic_partisanship, topic_log_odds, \
    nearest_stems, gen_word_intrusion_items, gen_tweet_intrusion_items, \
    write_intrusion_items, sample_tweets, topic_proportions, \
    write_assignments, load_assignments, daily_topic_polarization, \
    topic_partisan_items


def _model(*centroids):
    return TopicModel(len(centroids), np.array(centroids, dtype=float), 0.0,
                      seed=0)


def _assign(pairs):
    """
    :param pairs: (tweet_id, topic)
    """
    return [TopicAssignment(tid, x, 0.1, 0.5, 0.2) for tid, x in pairs]


@pytest.fixture
def clusters():
    rng = np.random.default_rng(7)
    centers = np.eye(4)[:3] * 5 + 1
    rows = np.vstack([c + rng.normal(0, 0.3, size=(40, 4)) for c in centers])
    truth = np.repeat([0, 1, 2], 40)
    return rows, truth


@pytest.fixture
def circle():
    angles = np.linspace(0.0, math.pi / 2, 40)
    vectors = {f's{n:02d}': [math.cos(a), math.sin(a)]
               for n, a in enumerate(angles)}
    return EmbeddingTable(2, vectors)


class TestKmeans:

    def test_recovers_clusters(self, clusters):
        rows, truth = clusters
        model = kmeans_cosine(rows, 3, seed=1)
        assert adjusted_rand_score(truth, model.labels) >= 0.99
        assert np.allclose(np.linalg.norm(model.centroids, axis=1), 1.0)

    def test_deterministic(self, clusters):
        rows, _ = clusters
        first = kmeans_cosine(rows, 3, seed=5)
        second = kmeans_cosine(rows, 3, seed=5)
        assert np.array_equal(first.centroids, second.centroids)
        assert first.history == second.history

    @pytest.mark.parametrize("seed", range(3))
    def test_positive_rescaling(self, clusters, seed):
        rows, _ = clusters
        rng = np.random.default_rng(seed)
        scales = 2.0 ** rng.integers(-3, 4, len(rows))
        model = kmeans_cosine(rows, 3, seed=seed)
        scaled = kmeans_cosine(rows * scales[:, None], 3, seed=seed)
        assert np.array_equal(model.labels, scaled.labels)
        assert np.allclose(model.centroids, scaled.centroids)

    def test_history_decreases(self, clusters):
        rows, _ = clusters
        history = kmeans_cosine(rows, 3, seed=2).history
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:]))

    @pytest.mark.parametrize("rows,k", [
        (np.eye(3), 1),
        (np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]]), 2),
        (np.array([[1.0, 0.0], [2.0, 0.0], [3.0, 0.0]]), 2),
    ])
    def test_invalid(self, rows, k):
        with pytest.raises(TopicModelError):
            kmeans_cosine(rows, k, seed=0)

    def test_save_load(self, clusters, tmp_path):
        model = kmeans_cosine(clusters[0], 3, seed=1)
        model.save(tmp_path / 'model.json')
        loaded = TopicModel.load(tmp_path / 'model.json')
        assert loaded.k == 3 and loaded.seed == 1
        assert np.array_equal(loaded.centroids, model.centroids)


class TestAssign:

    def test_closest_and_ratio(self):
        model = _model([1.0, 0.0], [0.0, 1.0])
        res = assign_topics(np.array([[2.0, 0.0], [1.0, 3.0]]), model,
                            ids=['a', 'b'])
        assert [a.topic for a in res] == [0, 1]
        assert res[0].d1 == 0.0 and res[0].d2 == 1.0 and res[0].ratio == 0.0
        assert res[1].ratio == pytest.approx(res[1].d1 / res[1].d2)
        assert len(res[1].distances) == 2

    def test_tie_lower_index(self):
        model = _model([1.0, 0.0], [0.0, 1.0])
        res = assign_topics(np.array([[1.0, 1.0]]), model, ids=['a'])
        assert res[0].topic == 0 and res[0].ratio == 1.0

    @pytest.mark.parametrize("seed", range(5))
    def test_rotation(self, seed):
        rng = np.random.default_rng(seed)
        rows = rng.normal(size=(20, 4))
        centers = rng.normal(size=(3, 4))
        model = _model(*(centers / np.linalg.norm(centers, axis=1)[:, None]))
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        rotated = TopicModel(3, model.centroids @ q, 0.0, seed=0)
        ids = [str(n) for n in range(20)]
        plain = assign_topics(rows, model, ids=ids)
        turned = assign_topics(rows @ q, rotated, ids=ids)
        for a, b in zip(plain, turned):
            assert np.allclose(a.distances, b.distances, atol=1e-10)

    def test_dimension(self):
        model = _model([1.0, 0.0], [0.0, 1.0])
        with pytest.raises(TopicModelError):
            assign_topics(np.ones((1, 3)), model, ids=['a'])

    def test_empty(self):
        assert assign_topics([], _model([1.0, 0.0], [0.0, 1.0])) == []


class TestAmbiguity:

    @pytest.mark.parametrize("percentile,expected", [
        (75, 4.0),
        (100, 4.0),
        (0, 1.0),
        (30, 2.0),
        (50, 3.0),
    ])
    def test_nearest_rank(self, percentile, expected):
        assert nearest_rank([4.0, 1.0, 3.0, 2.0], percentile) == expected

    def test_no_values(self):
        with pytest.raises(TopicModelError):
            nearest_rank([], 75)

    @pytest.mark.parametrize("ratios,removed_ids", [
        ([0.1, 0.2, 0.3, 0.4], []),
        ([0.4, 0.1, 0.3, 0.2, 0.3, 0.9, 0.25], ['5']),
    ])
    def test_filter(self, ratios, removed_ids):
        assignments = [TopicAssignment(str(n), 0, r, 1.0, r)
                       for n, r in enumerate(ratios)]
        kept, removed = filter_ambiguous(assignments, 75)
        assert [a.tweet_id for a in removed] == removed_ids
        assert len(kept) + len(removed) == len(ratios)

    def test_filter_everything_kept(self):
        assignments = [TopicAssignment(str(n), 0, r, 1.0, r)
                       for n, r in enumerate([0.9, 0.5, 0.7])]
        kept, removed = filter_ambiguous(assignments, 100)
        assert removed == [] and len(kept) == 3


class TestPartisanship:

    @pytest.fixture
    def tweets(self):
        return make_tweets([('a', 'gun law'), ('b', 'gun law'),
                            ('c', 'pray love'), ('d', 'pray love'),
                            ('a', 'gun pray'), ('c', 'gun pray'),
                            ('e', 'gun law')])

    @pytest.fixture
    def labels(self):
        return {'a': D, 'b': D, 'c': R, 'd': R, 'e': U}

    def test_between_perfect(self, tweets, labels):
        assignments = _assign([('ev-0', 0), ('ev-1', 0), ('ev-2', 1),
                               ('ev-3', 1), ('ev-6', 0)])
        assert between_topic_partisanship(assignments, labels, tweets) == \
            pytest.approx(1.0)

    def test_topic_counts(self, tweets, labels):
        assignments = _assign([('ev-0', 0), ('ev-1', 0), ('ev-2', 1),
                               ('ev-3', 1), ('ev-4', 1), ('ev-6', 0)])
        counts = topic_counts(assignments, labels, tweets)
        assert counts.users == ['a', 'b', 'c', 'd']
        assert list(counts.vocab) == [topic_item(0), topic_item(1)]
        assert counts.counts.toarray().tolist() == \
            [[1, 1], [1, 0], [0, 1], [0, 1]]

    def test_within(self, tweets, labels):
        assignments = _assign([('ev-0', 0), ('ev-1', 0), ('ev-2', 0),
                               ('ev-3', 0), ('ev-4', 1), ('ev-5', 1)])
        vocab = Vocab(['gun', 'law', 'pray', 'love'])

        def build(group, users):
            return count_user_tokens(group, vocab, users)

        per_topic, overall = within_topic_partisanship(
            tweets_by_topic(tweets, assignments), build, labels)
        assert list(per_topic) == [0]
        assert per_topic[0] == pytest.approx(1.0)
        assert overall == pytest.approx(1.0)

    def test_within_no_topic(self, tweets, labels):
        assignments = _assign([('ev-4', 1), ('ev-5', 1)])
        vocab = Vocab(['gun', 'pray'])
        with pytest.raises(TopicModelError):
            within_topic_partisanship(
                tweets_by_topic(tweets, assignments),
                lambda group, users: count_user_tokens(group, vocab, users),
                labels)

    def test_log_odds_sign(self, tweets, labels):
        assignments = _assign([('ev-0', 0), ('ev-1', 0), ('ev-2', 1),
                               ('ev-3', 1), ('ev-4', 1), ('ev-5', 0)])
        table = topic_log_odds(assignments, labels, tweets)
        assert table.items == [topic_item(0), topic_item(1)]
        assert table[topic_item(0)].delta < 0 < table[topic_item(1)].delta

    @pytest.mark.parametrize("n,expected", [
        (20, (['gun', 'law'], ['pray', 'love'])),
        (1, (['gun'], ['pray'])),
    ])
    def test_partisan_items(self, tweets, labels, n, expected):
        assignments = _assign([('ev-0', 0), ('ev-1', 0), ('ev-2', 0),
                               ('ev-3', 0), ('ev-4', 1)])
        vocab = Vocab(['gun', 'law', 'pray', 'love'])
        res = topic_partisan_items(
            tweets_by_topic(tweets, assignments),
            lambda group, users: count_user_tokens(group, vocab, users),
            labels, n=n)
        assert res == {0: expected}

    def test_proportions(self, tweets):
        assignments = _assign([('ev-0', 0), ('ev-1', 0), ('ev-2', 1),
                               ('ev-3', 1)])
        assert topic_proportions(assignments, tweets) == \
            {'ev': {0: 0.5, 1: 0.5}}

    def test_daily(self):
        rows = [('a', 'gun law'), ('b', 'gun law'), ('c', 'pray love'),
                ('d', 'pray love')]
        tweets = make_tweets(rows + [row + (2,) for row in rows] +
                             [('a', 'gun pray')])
        labels = {'a': D, 'b': D, 'c': R, 'd': R}
        assignments = _assign([(f'ev-{n}', 0) for n in range(8)] +
                              [('ev-8', 1)])
        event = EventMeta('ev', date(2017, 10, 1), ('ev',))
        res = daily_topic_polarization(tweets, assignments, labels,
                                       Vocab(['gun', 'law', 'pray', 'love']),
                                       event, days=3)
        assert sorted(res) == [(x, d) for x in (0, 1) for d in range(3)]
        assert float(res[(0, 0)]) == pytest.approx(1.0)
        assert float(res[(0, 2)]) == pytest.approx(1.0)
        assert res[(0, 1)] is None and res[(1, 0)] is None


class TestNearestStems:

    def test_order(self, circle):
        model = _model([1.0, 0.0], [0.0, 1.0])
        res = nearest_stems(model, circle, n=3)
        assert res[0] == ['s00', 's01', 's02']
        assert res[1] == ['s39', 's38', 's37']

    def test_vocab_filter(self, circle):
        model = _model([1.0, 0.0], [0.0, 1.0])
        res = nearest_stems(model, circle, n=2, vocab=['s05', 's10', 'xx'])
        assert res[0] == ['s05', 's10']


class TestIntrusion:

    def test_word_items(self, circle, tmp_path):
        model = _model([1.0, 0.0], [0.0, 1.0])
        items = gen_word_intrusion_items(model, circle, count=6, seed=2)
        near = nearest_stems(model, circle, n=10)
        assert len(items) == 6
        for item in items:
            assert len(item.candidates) == 6
            intruder = item.candidates[item.answer_index]
            others = [c for c in item.candidates if c != intruder]
            assert set(others) <= set(near[item.topic])
            assert intruder not in near[item.topic]
            assert intruder in near[1 - item.topic]
        write_intrusion_items(items, tmp_path / 'task.jsonl',
                              tmp_path / 'key.jsonl')
        with open(tmp_path / 'task.jsonl', encoding='utf-8') as fd:
            task = [json.loads(line) for line in fd]
        assert 'answer_index' not in task[0]
        assert task[0]['candidates'] == items[0].candidates

    def test_word_items_deterministic(self, circle):
        model = _model([1.0, 0.0], [0.0, 1.0])
        first = gen_word_intrusion_items(model, circle, count=3, seed=8)
        second = gen_word_intrusion_items(model, circle, count=3, seed=8)
        assert [i.candidates for i in first] == \
            [i.candidates for i in second]

    def test_word_items_small_vocab(self, circle):
        model = _model([1.0, 0.0], [0.0, 1.0], [0.7, 0.7])
        with pytest.raises(TopicModelError):
            gen_word_intrusion_items(model, circle, count=1, seed=0)

    def test_tweet_items(self):
        model = _model([1.0, 0.0], [0.0, 1.0])
        angles = np.linspace(0.0, math.pi / 2, 200)
        rows = np.column_stack([np.cos(angles), np.sin(angles)])
        ids = [f't{n:03d}' for n in range(200)]
        assignments = assign_topics(rows, model, ids=ids)
        texts = {tid: f'text of {tid}' for tid in ids}
        items = gen_tweet_intrusion_items(assignments, count=4, seed=1,
                                          texts=texts)
        for item in items:
            assert len(item.candidates) == 4
            intruder = item.candidates[item.answer_index]
            if item.topic == 0:
                assert intruder in ('text of t198', 'text of t199')
            else:
                assert intruder in ('text of t000', 'text of t001')

    def test_tweet_items_without_distances(self):
        with pytest.raises(TopicModelError):
            gen_tweet_intrusion_items(_assign([('a', 0)]), count=1, seed=0)


class TestSampling:

    def test_sample(self):
        tweets = {'x': list(range(100)), 'y': list(range(5))}
        first = sample_tweets(tweets, sample_size=10, seed=3)
        assert first == sample_tweets(tweets, sample_size=10, seed=3)
        assert len(first['x']) == 10 and first['x'] == sorted(first['x'])
        assert first['y'] == list(range(5))
        assert first['x'] != sample_tweets(tweets, sample_size=10,
                                           seed=4)['x']


class TestAssignmentFile:

    def test_save_load(self, tmp_path):
        model = _model([1.0, 0.0], [0.0, 1.0])
        res = assign_topics(np.array([[2.0, 0.5], [1.0, 3.0]]), model,
                            ids=['a', 'b'])
        write_assignments(res, tmp_path / 'assign.csv')
        loaded = load_assignments(tmp_path / 'assign.csv')
        assert [(a.tweet_id, a.topic, a.d1, a.d2, a.ratio) for a in loaded] \
            == [(a.tweet_id, a.topic, a.d1, a.d2, a.ratio) for a in res]


class TestDecomposition:

    UNIFORM = [[1, 1, 1, 1, 1]] * 2

    @staticmethod
    def _measures(spec):
        counts, tweets = generate(spec)
        labels = oracle_labels(counts)
        truth = tweet_topics(spec, tweets)
        assignments = _assign(sorted(truth.items()))
        vocab = Vocab(spec.tokens)

        def build(group, users):
            return count_user_tokens(group, vocab, users,
                                     items=lambda t: t.text.split())

        _, within = within_topic_partisanship(
            tweets_by_topic(tweets, assignments), build, labels)
        between = between_topic_partisanship(assignments, labels, tweets)
        return within, between

    @pytest.mark.parametrize("seed", range(10))
    def test_proportions_only(self, seed):
        spec = topic_spec([0.7, 0.3], [0.3, 0.7], self.UNIFORM,
                          self.UNIFORM, seed=seed)
        within, between = self._measures(spec)
        assert within == pytest.approx(0.5, abs=0.01)
        assert between > 0.52

    @pytest.mark.parametrize("seed", range(10))
    def test_within_only(self, seed):
        spec = topic_spec([0.5, 0.5], [0.5, 0.5],
                          [[6, 1, 1, 1, 1], [1, 1, 1, 1, 6]],
                          [[1, 1, 1, 1, 6], [6, 1, 1, 1, 1]], seed=seed)
        within, between = self._measures(spec)
        assert within > 0.52
        assert between == pytest.approx(0.5, abs=0.01)
