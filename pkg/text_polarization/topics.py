"""
Cosine k-means topics over sentence embeddings and the partisanship
analyses built on the tweet-to-topic assignment.
"""
import csv
import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import sparse

from text_polarization.corpus import PartyLabel
from text_polarization.errors import TopicModelError, EstimatorError, \
    LogOddsError
from text_polarization.lexica import token_log_odds, top_partisan_items
from text_polarization.polarization import leave_out, temporal_series
from text_polarization.textprep import UserTokenCounts, Vocab

ASSIGNMENT_COLUMNS = ['tweet_id', 'topic', 'd1', 'd2', 'ratio']
INTRUSION_TRIES = 100

logger = logging.getLogger(__name__)


def topic_item(topic: int) -> str:
    return f'topic{topic:02d}'


@dataclass
class TopicModel:
    k: int
    centroids: np.ndarray
    inertia: float
    seed: int
    labels: np.ndarray = None
    history: list = field(default_factory=list)

    def __post_init__(self):
        if self.k < 2:
            raise TopicModelError(f"A topic model needs k >= 2, got "
                                  f"{self.k}.")
        self.centroids = np.asarray(self.centroids, dtype=float)

    def distances(self, rows) -> np.ndarray:
        """
        Cosine distances of the rows to every centroid.
        """
        unit = _unit_rows(np.asarray(rows, dtype=float))
        return np.clip(np.round(1.0 - unit @ self.centroids.T, 12), 0.0, 2.0)

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as fd:
            json.dump({'k': self.k, 'seed': self.seed,
                       'inertia': self.inertia,
                       'centroids': self.centroids.tolist()},
                      fd, sort_keys=True)

    @classmethod
    def load(cls, path) -> 'TopicModel':
        with open(path, encoding='utf-8') as fd:
            data = json.load(fd)
        return cls(data['k'], np.array(data['centroids']), data['inertia'],
                   data['seed'])


@dataclass(frozen=True)
class TopicAssignment:
    tweet_id: str
    topic: int
    d1: float
    d2: float
    ratio: float
    distances: tuple = ()


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return np.divide(matrix, norms, out=np.zeros_like(matrix),
                     where=norms > 0)


def _plus_plus(X: np.ndarray, k: int, rng) -> np.ndarray:
    centroids = [X[rng.integers(len(X))]]
    dist = 1.0 - X @ centroids[0]
    for _ in range(1, k):
        weight = np.clip(dist, 0.0, None) ** 2
        if weight.sum() <= 0:
            raise TopicModelError("Too few distinct directions to seed "
                                  f"{k} centroids.")
        pick = rng.choice(len(X), p=weight / weight.sum())
        centroids.append(X[pick])
        dist = np.minimum(dist, 1.0 - X @ X[pick])
    return np.array(centroids)


def kmeans_cosine(embeddings, k: int, seed: int, max_iters: int = 100
                  ) -> TopicModel:
    """
    Spherical k-means: k-means++ seeding, assignment by cosine distance,
    centroids are renormalized member means. An empty cluster takes the
    point farthest from its own centroid.
    """
    if k < 2:
        raise TopicModelError(f"A topic model needs k >= 2, got {k}.")
    X = np.asarray(embeddings, dtype=float)
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise TopicModelError("Zero embeddings cannot be clustered.")
    X = X / norms[:, None]
    if len(np.unique(np.round(X, 12), axis=0)) < k:
        raise TopicModelError(f"The clustering needs at least {k} distinct "
                              f"rows.")
    rng = np.random.default_rng(seed)
    centroids = _plus_plus(X, k, rng)
    labels, history = None, []
    for it in range(max_iters):
        sims = X @ centroids.T
        new = np.argmax(sims, axis=1)
        dist = 1.0 - sims[np.arange(len(X)), new]
        history.append(float(np.clip(dist, 0.0, None).sum()))
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        taken = set()
        for x in range(k):
            members = labels == x
            if not members.any():
                order = [i for i in np.argsort(-dist, kind='stable')
                         if i not in taken]
                far = order[0]
                taken.add(far)
                logger.debug("Cluster %d is empty, re-seeded from row %d.",
                             x, far)
                centroids[x] = X[far]
                continue
            mean = X[members].sum(axis=0)
            centroids[x] = mean / np.linalg.norm(mean)
    else:
        logger.warning("k-means stopped after %d iterations.", max_iters)
    return TopicModel(k, centroids, history[-1], seed, labels, history)


def assign_topics(embeddings, model: TopicModel, ids=None
                  ) -> [TopicAssignment]:
    """
    Closest and second closest centroid of every embedding; ties go to
    the lower topic index.
    :param embeddings: SentenceEmbedding list, or a matrix with `ids`
    """
    if model.k < 2:
        raise TopicModelError("The distance ratio needs two topics.")
    if ids is None:
        embeddings = [e for e in embeddings if getattr(e, 'embeddable', True)]
        ids = [e.tweet_id for e in embeddings]
        rows = np.array([e.e for e in embeddings])
    else:
        rows = np.asarray(embeddings, dtype=float)
    if len(rows) == 0:
        return []
    if rows.shape[1] != model.centroids.shape[1]:
        raise TopicModelError(f"The embeddings have dimension "
                              f"{rows.shape[1]}, the model "
                              f"{model.centroids.shape[1]}.")
    dist = model.distances(rows)
    order = np.argsort(dist, axis=1, kind='stable')
    res = []
    for n, tid in enumerate(ids):
        first, second = order[n, 0], order[n, 1]
        d1, d2 = float(dist[n, first]), float(dist[n, second])
        ratio = d1 / d2 if d2 > 0 else 1.0
        res.append(TopicAssignment(tid, int(first), d1, d2, ratio,
                                   tuple(map(float, dist[n]))))
    return res


def nearest_rank(values, percentile: float) -> float:
    """
    Order statistic of rank ceil(P / 100 * (N + 1)), clamped to [1, N].
    """
    values = sorted(values)
    if not values:
        raise TopicModelError("The percentile of no values is undefined.")
    rank = max(1, math.ceil(percentile / 100.0 * (len(values) + 1)))
    return values[min(rank, len(values)) - 1]


def filter_ambiguous(assignments, percentile: float = 75
                     ) -> ([TopicAssignment], [TopicAssignment]):
    """
    Remove the assignments whose ratio is strictly greater than the
    nearest-rank percentile of all ratios.
    """
    assignments = list(assignments)
    threshold = nearest_rank([a.ratio for a in assignments], percentile)
    kept = [a for a in assignments if a.ratio <= threshold]
    removed = [a for a in assignments if a.ratio > threshold]
    logger.info("Ambiguity threshold %.4f removes %d of %d tweets.",
                threshold, len(removed), len(assignments))
    return kept, removed


def tweets_by_topic(tweets, assignments) -> dict:
    topic = {a.tweet_id: a.topic for a in assignments}
    res = {}
    for tweet in tweets:
        if tweet.tweet_id in topic:
            res.setdefault(topic[tweet.tweet_id], []).append(tweet)
    return {x: res[x] for x in sorted(res)}


def within_topic_partisanship(tweets_by_topic: dict, counts_builder,
                              labels: dict) -> (dict, float):
    """
    Leave-out partisanship of every topic from its own tweets, and the
    mean weighted by the topics' shares of tweets. Topics without 2 users
    per party are left out and the weights renormalized.
    :param counts_builder: callable (tweets, labels) -> UserTokenCounts
    """
    per_topic, sizes = {}, {}
    for x in sorted(tweets_by_topic):
        tweets = tweets_by_topic[x]
        try:
            per_topic[x] = leave_out(counts_builder(tweets, labels)).pi_lo
        except EstimatorError as ex:
            logger.warning("Topic %s is excluded: %s", x, ex)
            continue
        sizes[x] = len(tweets)
    if not per_topic:
        raise TopicModelError("No topic has enough users per party.")
    total = sum(sizes.values())
    overall = sum(per_topic[x] * sizes[x] / total for x in per_topic)
    return per_topic, float(overall)


def topic_counts(assignments, labels: dict, tweets) -> UserTokenCounts:
    """
    User x topic counts: every tweet becomes the token of its topic.
    """
    user = {t.tweet_id: t.user_id for t in tweets}
    per_user = {}
    topics = set()
    for a in assignments:
        uid = user.get(a.tweet_id)
        label = labels.get(uid)
        if label is None or not label.is_partisan:
            continue
        per_user.setdefault(uid, Counter())[topic_item(a.topic)] += 1
        topics.add(topic_item(a.topic))
    vocab = Vocab(topics)
    users = sorted(per_user)
    row, col, data = [], [], []
    for i, uid in enumerate(users):
        for tok, cnt in sorted(per_user[uid].items()):
            row.append(i)
            col.append(vocab.position(tok))
            data.append(cnt)
    matrix = sparse.csr_matrix((data, (row, col)),
                               shape=(len(users), len(vocab)), dtype=np.int64)
    return UserTokenCounts(users, matrix, [labels[u] for u in users], vocab)


def between_topic_partisanship(assignments, labels: dict, tweets) -> float:
    """
    Leave-out partisanship after replacing every tweet by its topic.
    """
    return leave_out(topic_counts(assignments, labels, tweets)).pi_lo


def topic_log_odds(assignments, labels: dict, tweets,
                   prior_alpha: float = 0.01):
    """
    Log-odds of every topic from the number of tweets per party.
    """
    user = {t.tweet_id: t.user_id for t in tweets}
    counts = {PartyLabel.DEMOCRAT: Counter(), PartyLabel.REPUBLICAN: Counter()}
    topics = set()
    for a in assignments:
        label = labels.get(user.get(a.tweet_id))
        topics.add(topic_item(a.topic))
        if label in counts:
            counts[label][topic_item(a.topic)] += 1
    dem = {x: counts[PartyLabel.DEMOCRAT][x] for x in topics}
    rep = {x: counts[PartyLabel.REPUBLICAN][x] for x in topics}
    return token_log_odds(dem, rep, prior_alpha=prior_alpha)


def topic_partisan_items(tweets_by_topic: dict, counts_builder,
                         labels: dict, prior_alpha: float = 0.01,
                         n: int = 20) -> dict:
    """
    Most partisan stems of every topic, by the log-odds z of the topic's
    own tweets. Topics where a party has no tokens are skipped.
    :param counts_builder: callable (tweets, labels) -> UserTokenCounts
    :return: topic -> (most Democrat stems, most Republican stems)
    """
    res = {}
    for x in sorted(tweets_by_topic):
        counts = counts_builder(tweets_by_topic[x], labels)
        entries = counts.vocab.entries
        try:
            table = token_log_odds(
                dict(zip(entries, counts.group_counts(PartyLabel.DEMOCRAT))),
                dict(zip(entries,
                         counts.group_counts(PartyLabel.REPUBLICAN))),
                prior_alpha=prior_alpha)
        except LogOddsError as ex:
            logger.debug("Topic %s has no partisan items: %s", x, ex)
            continue
        res[x] = top_partisan_items(table, n)
    return res


def _stem_distances(model: TopicModel, table, stems) -> np.ndarray:
    return model.distances(table.matrix(stems))


def nearest_stems(model: TopicModel, table, n: int = 10, vocab=None) -> dict:
    """
    The n stems closest to every centroid, ties in lexicographic order.
    """
    stems = sorted(s for s in (vocab if vocab is not None else table.stems)
                   if s in table)
    dist = _stem_distances(model, table, stems)
    res = {}
    for x in range(model.k):
        order = sorted(range(len(stems)), key=lambda i: (dist[i, x], stems[i]))
        res[x] = [stems[i] for i in order[:n]]
    return res


@dataclass
class IntrusionItem:
    item_id: str
    topic: int
    candidates: list
    answer_index: int

    def task(self) -> dict:
        return {'item_id': self.item_id, 'candidates': self.candidates}

    def key(self) -> dict:
        return {'item_id': self.item_id, 'topic': self.topic,
                'answer_index': self.answer_index}


def _pool_size(n: int, share: float, minimum: int = 1) -> int:
    return min(n, max(minimum, math.ceil(share * n)))


def _ranked(values: np.ndarray, names) -> list:
    return sorted(range(len(names)), key=lambda i: (values[i], names[i]))


def _build_items(score: np.ndarray, names, count: int, seed: int,
                 in_topic: int, close_share: float, far_share: float,
                 prefix: str, close_pool: int = None) -> [IntrusionItem]:
    """
    :param score: rows x topics, lower is closer
    """
    rng = np.random.default_rng(seed)
    k = score.shape[1]
    n = len(names)
    near = close_pool if close_pool is not None else \
        _pool_size(n, close_share, in_topic)
    edge = _pool_size(n, far_share)
    ranked = [_ranked(score[:, x], names) for x in range(k)]
    items = []
    for num in range(count):
        for _ in range(INTRUSION_TRIES):
            x = int(rng.integers(k))
            closest = ranked[x][:near]
            farthest = set(ranked[x][-edge:])
            others = set()
            for y in range(k):
                if y != x:
                    others.update(ranked[y][:edge])
            pool = sorted(farthest & others - set(closest),
                          key=lambda i: names[i])
            if pool and len(closest) >= in_topic:
                break
        else:
            raise TopicModelError(f"No intruder found after "
                                  f"{INTRUSION_TRIES} topics.")
        picked = [closest[i] for i in
                  rng.choice(len(closest), size=in_topic, replace=False)]
        intruder = pool[int(rng.integers(len(pool)))]
        candidates = [names[i] for i in picked] + [names[intruder]]
        order = rng.permutation(len(candidates))
        shuffled = [candidates[i] for i in order]
        answer = int(np.flatnonzero(order == len(candidates) - 1)[0])
        items.append(IntrusionItem(f'{prefix}{num:05d}', x, shuffled,
                                   answer))
    return items


def gen_word_intrusion_items(model: TopicModel, table, count: int,
                             seed: int, vocab=None) -> [IntrusionItem]:
    """
    5 of the 10 stems closest to a sampled topic and 1 intruder among the
    5% farthest from it and the 5% closest to another topic, shuffled.
    """
    stems = sorted(s for s in (vocab if vocab is not None else table.stems)
                   if s in table)
    if len(stems) < 20 * model.k:
        raise TopicModelError(f"Word intrusion needs at least {20 * model.k} "
                              f"stems, got {len(stems)}.")
    dist = _stem_distances(model, table, stems)
    return _build_items(dist, stems, count, seed, in_topic=5,
                        close_share=0.0, far_share=0.05, prefix='word',
                        close_pool=10)


def topic_ratios(assignments) -> np.ndarray:
    """
    Ratio of every tweet's distance to a topic over its distance to the
    closest other topic, for all topics.
    """
    dist = np.array([a.distances for a in assignments], dtype=float)
    k = dist.shape[1]
    res = np.empty_like(dist)
    for x in range(k):
        other = np.delete(dist, x, axis=1).min(axis=1)
        res[:, x] = np.divide(dist[:, x], other, out=np.ones(len(dist)),
                              where=other > 0)
    return res


def gen_tweet_intrusion_items(assignments, count: int, seed: int,
                              texts: dict = None) -> [IntrusionItem]:
    """
    3 tweets among the 1% closest to a sampled topic and 1 intruder among
    the 1% farthest from it and the 1% closest to another topic. Proximity
    is the distance ratio to the topic over the closest other topic.
    """
    assignments = sorted(assignments, key=lambda a: a.tweet_id)
    if not assignments or not assignments[0].distances:
        raise TopicModelError("Tweet intrusion needs assignments with all "
                              "topic distances.")
    ratios = topic_ratios(assignments)
    ids = [a.tweet_id for a in assignments]
    items = _build_items(ratios, ids, count, seed, in_topic=3,
                         close_share=0.01, far_share=0.01, prefix='tweet')
    if texts is not None:
        for item in items:
            item.candidates = [texts.get(t, t) for t in item.candidates]
    return items


def write_intrusion_items(items, task_path, key_path):
    with open(task_path, 'w', encoding='utf-8') as fd:
        for item in items:
            fd.write(json.dumps(item.task(), sort_keys=True) + '\n')
    with open(key_path, 'w', encoding='utf-8') as fd:
        for item in items:
            fd.write(json.dumps(item.key(), sort_keys=True) + '\n')


def daily_topic_polarization(tweets, assignments, labels: dict, vocab,
                             event, days: int = 9, stopwords=None) -> dict:
    """
    Leave-out partisanship of every topic on each of the first `days` days.
    :return: (topic, day) -> PolarizationEstimate or None
    """
    res = {}
    grouped = tweets_by_topic(tweets, assignments)
    topics = sorted({a.topic for a in assignments})
    for x in topics:
        series = temporal_series(grouped.get(x, []), labels, vocab, event,
                                 days=days, stopwords=stopwords)
        for day, est in series:
            res[(x, day)] = est
    return res


def sample_tweets(tweets_by_event: dict, sample_size: int = 10000,
                  seed: int = 0) -> dict:
    """
    Seeded sample of every event without replacement, in corpus order.
    """
    res = {}
    for n, event_id in enumerate(sorted(tweets_by_event)):
        tweets = list(tweets_by_event[event_id])
        if len(tweets) <= sample_size:
            res[event_id] = tweets
            continue
        rng = np.random.default_rng([seed, n])
        picked = np.sort(rng.choice(len(tweets), size=sample_size,
                                    replace=False))
        res[event_id] = [tweets[i] for i in picked]
    return res


def topic_proportions(assignments, tweets) -> dict:
    """
    :return: event_id -> {topic: share of the event's assigned tweets}
    """
    event = {t.tweet_id: t.event_id for t in tweets}
    counts = {}
    for a in assignments:
        ev = event.get(a.tweet_id)
        if ev is not None:
            counts.setdefault(ev, Counter())[a.topic] += 1
    res = {}
    for ev in sorted(counts):
        total = sum(counts[ev].values())
        res[ev] = {x: counts[ev][x] / total for x in sorted(counts[ev])}
    return res


def write_assignments(assignments, path):
    frame = pd.DataFrame([(a.tweet_id, a.topic, a.d1, a.d2, a.ratio)
                          for a in assignments], columns=ASSIGNMENT_COLUMNS)
    frame.to_csv(path, index=False, lineterminator='\n')


def load_assignments(path) -> [TopicAssignment]:
    with open(path, encoding='utf-8', newline='') as fd:
        return [TopicAssignment(r['tweet_id'], int(r['topic']),
                                float(r['d1']), float(r['d2']),
                                float(r['ratio']))
                for r in csv.DictReader(fd)]
