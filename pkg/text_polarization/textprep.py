import csv
import logging
import re
from collections import Counter, defaultdict
from functools import lru_cache
from pathlib import Path

import numpy as np
import pandas as pd
from nltk.stem.snowball import SnowballStemmer
from scipy import sparse

from text_polarization.errors import VocabularyError

DATA_DIR = Path(__file__).parent / 'data'

URL_RE = re.compile(r"(?:https?://|www\.)\S+")
MENTION_RE = re.compile(r"@\w+")
TOKEN_RE = re.compile(r"#\w+|\w+(?:'\w+)*")

logger = logging.getLogger(__name__)

_stemmer = SnowballStemmer('english')


def tokenize(text: str) -> [str]:
    """
    Lowercased word tokens. Hashtags keep the leading '#', URLs and
    @-mentions are dropped, punctuation is stripped except apostrophes
    inside a word ("shouldn't" stays one token).
    """
    text = text.lower().replace('’', "'")
    text = URL_RE.sub(' ', text)
    text = MENTION_RE.sub(' ', text)
    return TOKEN_RE.findall(text)


@lru_cache(maxsize=200000)
def stem(token: str) -> str:
    """
    English Snowball stem; hashtags pass through unchanged.
    """
    if token.startswith('#'):
        return token
    return _stemmer.stem(token)


def load_stopwords(path=None) -> frozenset:
    """
    Load a comma or newline separated stopword list.
    :param path: default is the bundled list
    """
    path = Path(path) if path else DATA_DIR / 'stopwords.txt'
    with open(path, encoding='utf-8') as fd:
        words = re.split(r"[,\s]+", fd.read())
    return frozenset(w.strip().lower() for w in words if w.strip())


def is_stopword(token: str, stopwords: frozenset) -> bool:
    # the list spells contractions without apostrophes ("shouldnt")
    return token in stopwords or token.replace("'", '') in stopwords


def tweet_stems(text: str, stopwords: frozenset) -> [str]:
    """
    Stems of a tweet in order, stopwords removed before stemming.
    """
    return [stem(t) for t in tokenize(text) if not is_stopword(t, stopwords)]


def tweet_items(stems: [str], bigrams: bool = True) -> [str]:
    """
    Unigrams followed by bigrams of adjacent surviving stems.
    """
    items = list(stems)
    if bigrams:
        items += [f'{a} {b}' for a, b in zip(stems, stems[1:])]
    return items


class Vocab:
    """
    Ordered token list (stemmed unigrams and 'a b' bigrams), lexicographic.
    """

    def __init__(self, entries=()):
        self._entries = tuple(sorted(set(entries)))
        self._index = {tok: i for i, tok in enumerate(self._entries)}

    @property
    def entries(self) -> tuple:
        return self._entries

    @property
    def index(self) -> dict:
        return dict(self._index)

    def position(self, token: str):
        return self._index.get(token)

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __contains__(self, token):
        return token in self._index

    def __eq__(self, other):
        return isinstance(other, Vocab) and self._entries == other._entries

    def __repr__(self):
        return f"Vocab(size={len(self)})"

    def save(self, path):
        frame = pd.DataFrame(list(enumerate(self._entries)),
                             columns=['index', 'token'])
        frame.to_csv(path, index=False, lineterminator='\n')

    @classmethod
    def load(cls, path) -> 'Vocab':
        with open(path, encoding='utf-8', newline='') as fd:
            rows = list(csv.DictReader(fd))
        rows.sort(key=lambda r: int(r['index']))
        vocab = cls(r['token'] for r in rows)
        if list(vocab.entries) != [r['token'] for r in rows]:
            raise VocabularyError(f"The vocabulary file '{path}' is not "
                                  f"in lexicographic order.")
        return vocab


class UserTokenCounts:
    """
    Sparse user x token count matrix with the party label of every row.
    Row i holds c_i; totals are m_i and frequencies are q_i = c_i / m_i.
    """

    def __init__(self, users, counts, labels, vocab: Vocab):
        self.users = list(users)
        self.counts = sparse.csr_matrix(counts, dtype=np.int64)
        self.labels = list(labels)
        self.vocab = vocab
        if self.counts.shape != (len(self.users), len(vocab)):
            raise VocabularyError(
                f"The count matrix shape {self.counts.shape} does not match "
                f"{len(self.users)} users x {len(vocab)} tokens.")
        if len(self.labels) != len(self.users):
            raise VocabularyError("Every user needs exactly one label.")

    def __len__(self):
        return len(self.users)

    def __repr__(self):
        return (f"UserTokenCounts(users={len(self.users)}, "
                f"tokens={len(self.vocab)}, total={self.counts.sum()})")

    @property
    def totals(self) -> np.ndarray:
        return np.asarray(self.counts.sum(axis=1)).ravel()

    @property
    def frequencies(self) -> sparse.csr_matrix:
        totals = self.totals.astype(float)
        if np.any(totals == 0):
            raise VocabularyError("A user has no in-vocabulary tokens.")
        return sparse.diags(1.0 / totals) @ self.counts

    def mask(self, label) -> np.ndarray:
        return np.array([lab == label for lab in self.labels], dtype=bool)

    def relabel(self, labels) -> 'UserTokenCounts':
        return UserTokenCounts(self.users, self.counts, labels, self.vocab)

    def scaled(self, factor: int) -> 'UserTokenCounts':
        return UserTokenCounts(self.users, self.counts * int(factor),
                               self.labels, self.vocab)

    def select(self, rows) -> 'UserTokenCounts':
        rows = list(rows)
        return UserTokenCounts([self.users[i] for i in rows],
                               self.counts[rows],
                               [self.labels[i] for i in rows], self.vocab)

    def group_counts(self, label) -> np.ndarray:
        return np.asarray(self.counts[self.mask(label)].sum(axis=0)).ravel()

    def save(self, vocab_path, counts_path, labels_path=None):
        self.vocab.save(vocab_path)
        coo = self.counts.tocoo()
        order = np.lexsort((coo.col, coo.row))
        frame = pd.DataFrame({
            'user_id': [self.users[i] for i in coo.row[order]],
            'token_index': coo.col[order].astype(np.int64),
            'count': coo.data[order].astype(np.int64),
        }, columns=['user_id', 'token_index', 'count'])
        frame.to_csv(counts_path, index=False, lineterminator='\n')
        if labels_path:
            frame = pd.DataFrame(
                [(user, getattr(label, 'value', label))
                 for user, label in zip(self.users, self.labels)],
                columns=['user_id', 'party'])
            frame.to_csv(labels_path, index=False, lineterminator='\n')

    @classmethod
    def load(cls, vocab_path, counts_path, labels: dict) -> 'UserTokenCounts':
        vocab = Vocab.load(vocab_path)
        rows = defaultdict(dict)
        with open(counts_path, encoding='utf-8', newline='') as fd:
            for rec in csv.DictReader(fd):
                rows[rec['user_id']][int(rec['token_index'])] = \
                    int(rec['count'])
        users = sorted(rows)
        matrix = sparse.dok_matrix((len(users), len(vocab)), dtype=np.int64)
        for i, user in enumerate(users):
            for j, cnt in rows[user].items():
                matrix[i, j] = cnt
        return cls(users, matrix.tocsr(), [labels[u] for u in users], vocab)


def _item_counts(tweets, stopwords, bigrams=True) -> Counter:
    counter = Counter()
    for tweet in tweets:
        counter.update(tweet_items(tweet_stems(tweet.text, stopwords),
                                   bigrams=bigrams))
    return counter


def build_event_vocab(tweets, min_count: int = 50,
                      stopwords: frozenset = None) -> Vocab:
    """
    Unigrams and bigrams of one event occurring at least min_count times
    after stopword removal and stemming.
    """
    tweets = list(tweets)
    if not tweets:
        return Vocab()
    events = {t.event_id for t in tweets}
    if len(events) > 1:
        raise VocabularyError(f"The event vocabulary expects tweets of one "
                              f"event, got {sorted(events)}.")
    if stopwords is None:
        stopwords = load_stopwords()
    counter = _item_counts(tweets, stopwords)
    vocab = Vocab(tok for tok, cnt in counter.items() if cnt >= min_count)
    logger.debug("Event %s vocabulary: %d of %d items kept (min_count=%d).",
                 tweets[0].event_id, len(vocab), len(counter), min_count)
    return vocab


def build_joint_vocab(samples: dict, min_count: int = 10, min_events: int = 3,
                      stopwords: frozenset = None) -> Vocab:
    """
    Stems occurring at least min_count times in at least min_events events.
    :param samples: dict event_id -> tweets
    """
    if len(samples) < min_events:
        raise VocabularyError(f"The joint vocabulary needs at least "
                              f"{min_events} events, got {len(samples)}.")
    if stopwords is None:
        stopwords = load_stopwords()
    support = Counter()
    for event_id in sorted(samples):
        counter = _item_counts(samples[event_id], stopwords, bigrams=False)
        support.update(s for s, cnt in counter.items() if cnt >= min_count)
    return Vocab(s for s, n in support.items() if n >= min_events)


def count_user_tokens(tweets, vocab: Vocab, labels: dict,
                      stopwords: frozenset = None,
                      items=None) -> UserTokenCounts:
    """
    Per-user summed counts of vocabulary items. Users without a partisan
    label and users with no in-vocabulary item are dropped.
    :param items: optional callable tweet -> [token], default is stemmed
                  unigrams and bigrams of the tweet text
    """
    if stopwords is None and items is None:
        stopwords = load_stopwords()
    if items is None:
        def items(tweet):
            return tweet_items(tweet_stems(tweet.text, stopwords))
    per_user = defaultdict(Counter)
    for tweet in tweets:
        label = labels.get(tweet.user_id)
        if label is None or not getattr(label, 'is_partisan', False):
            continue
        per_user[tweet.user_id].update(
            vocab.position(tok) for tok in items(tweet) if tok in vocab)
    users = sorted(u for u, c in per_user.items() if sum(c.values()) > 0)
    dropped = len(per_user) - len(users)
    if dropped:
        logger.debug("%d users without in-vocabulary tokens dropped.",
                     dropped)
    row, col, data = [], [], []
    for i, user in enumerate(users):
        for j, cnt in sorted(per_user[user].items()):
            row.append(i)
            col.append(j)
            data.append(cnt)
    matrix = sparse.csr_matrix((data, (row, col)),
                               shape=(len(users), len(vocab)), dtype=np.int64)
    return UserTokenCounts(users, matrix, [labels[u] for u in users], vocab)
