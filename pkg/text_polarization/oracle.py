"""
Synthetic party-labeled corpora with known partisanship.

Every user draws tokens i.i.d. from the token distribution of their party.
With a topic structure, tokens are grouped into single-topic tweets: a
tweet's topic is drawn with probability equal to the party's mass on that
topic and its tokens from the party's distribution restricted to it, so
the marginal token distribution is unchanged.
"""
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml
from scipy import sparse

from text_polarization.corpus import PartyLabel, TweetCollection, \
    TweetRecord, FollowEdge, EventMeta, load_default_handles
from text_polarization.errors import ConfigError
from text_polarization.textprep import UserTokenCounts, Vocab

DEFAULT_START = datetime(2017, 10, 1, tzinfo=timezone.utc).timestamp()

logger = logging.getLogger(__name__)


@dataclass
class GenerativeSpec:
    phi_dem: list
    phi_rep: list
    n_dem: int
    n_rep: int
    tokens_per_user: object = 100
    topic_structure: dict = None
    seed: int = 0
    tokens: list = None
    tokens_per_tweet: int = 12
    event_id: str = 'oracle'
    user_prefix: str = ''
    tweet_prefix: str = ''
    start: float = DEFAULT_START
    day: int = 0
    days: int = 1

    def __post_init__(self):
        self.phi_dem = np.asarray(self.phi_dem, dtype=float)
        self.phi_rep = np.asarray(self.phi_rep, dtype=float)
        if self.phi_dem.shape != self.phi_rep.shape or self.phi_dem.ndim != 1:
            raise ConfigError("phi_dem and phi_rep must be vectors of the "
                              "same length.")
        for name, phi in (('phi_dem', self.phi_dem),
                          ('phi_rep', self.phi_rep)):
            if np.any(phi < 0) or abs(phi.sum() - 1.0) > 1e-12:
                raise ConfigError(f"{name} is not a probability vector.")
        if self.tokens is None:
            width = len(str(len(self.phi_dem) - 1))
            self.tokens = [f'w{j:0{width}d}' for j in range(len(self.phi_dem))]
        if len(self.tokens) != len(self.phi_dem):
            raise ConfigError("The token list does not match phi.")
        if self.n_dem < 0 or self.n_rep < 0 or self.tokens_per_tweet < 1:
            raise ConfigError("User counts and tweet length must be "
                              "positive.")
        if self.topic_structure is not None:
            missing = [t for t in self.tokens if t not in self.topic_structure]
            if missing:
                raise ConfigError(f"Tokens without a topic: {missing[:5]}")

    @classmethod
    def from_dict(cls, data: dict) -> 'GenerativeSpec':
        try:
            return cls(**data)
        except TypeError as ex:
            raise ConfigError(f"Invalid generative spec: {ex}") from ex

    @classmethod
    def load(cls, path) -> 'GenerativeSpec':
        with open(path, encoding='utf-8') as fd:
            try:
                data = yaml.safe_load(fd)
            except yaml.YAMLError as ex:
                raise ConfigError(f"The spec '{path}' is not valid "
                                  f"YAML.") from ex
        if not isinstance(data, dict):
            raise ConfigError(f"The spec '{path}' must be a mapping.")
        return cls.from_dict(data)

    def user_ids(self, label: PartyLabel) -> [str]:
        n = self.n_dem if label is PartyLabel.DEMOCRAT else self.n_rep
        tag = 'd' if label is PartyLabel.DEMOCRAT else 'r'
        return [f'{self.user_prefix}{tag}{i:04d}' for i in range(n)]


def true_partisanship(spec: GenerativeSpec) -> float:
    """
    Expected posterior a neutral observer assigns to the true party after
    one random token:
    1/2 [sum phi_D^2 / (phi_D + phi_R) + sum phi_R^2 / (phi_D + phi_R)].
    """
    d, r = spec.phi_dem, spec.phi_rep
    denom = d + r
    support = denom > 0
    d, r, denom = d[support], r[support], denom[support]
    return float(0.5 * (np.sum(d * d / denom) + np.sum(r * r / denom)))


def _user_total(spec: GenerativeSpec, rng) -> int:
    tpu = spec.tokens_per_user
    if isinstance(tpu, (list, tuple)):
        return int(rng.integers(tpu[0], tpu[1] + 1))
    return int(tpu)


def _topic_tables(spec: GenerativeSpec, phi: np.ndarray):
    topics = sorted({spec.topic_structure[t] for t in spec.tokens})
    members = {x: np.array([j for j, t in enumerate(spec.tokens)
                            if spec.topic_structure[t] == x])
               for x in topics}
    mass = np.array([phi[members[x]].sum() for x in topics])
    return topics, members, mass


def _user_tweets(spec: GenerativeSpec, phi: np.ndarray, total: int, rng):
    """
    :return: list of token index arrays, one per tweet
    """
    size = spec.tokens_per_tweet
    if spec.topic_structure is None:
        draws = rng.choice(len(phi), size=total, p=phi)
        return [draws[k:k + size] for k in range(0, total, size)]
    topics, members, mass = _topic_tables(spec, phi)
    tweets, remaining = [], total
    while remaining > 0:
        x = rng.choice(len(topics), p=mass / mass.sum())
        idx = members[topics[x]]
        local = phi[idx] / phi[idx].sum()
        n = min(size, remaining)
        tweets.append(idx[rng.choice(len(idx), size=n, p=local)])
        remaining -= n
    return tweets


def generate(spec: GenerativeSpec) -> (UserTokenCounts, TweetCollection):
    """
    Draw a corpus from the spec; deterministic per seed, every user has
    their own sub-seed (seed, user index).
    """
    vocab = Vocab(spec.tokens)
    column = np.array([vocab.position(t) for t in spec.tokens])
    users, labels, rows, records = [], [], [], []
    index = 0
    for label, phi in ((PartyLabel.DEMOCRAT, spec.phi_dem),
                       (PartyLabel.REPUBLICAN, spec.phi_rep)):
        for user in spec.user_ids(label):
            rng = np.random.default_rng([spec.seed, index])
            index += 1
            total = _user_total(spec, rng)
            tweets = _user_tweets(spec, phi, total, rng)
            counts = np.zeros(len(vocab), dtype=np.int64)
            for k, draw in enumerate(tweets):
                np.add.at(counts, column[draw], 1)
                offset = (spec.day + rng.random() * spec.days) * 86400
                words = ' '.join(spec.tokens[j] for j in draw)
                text = f'{spec.tweet_prefix} {words}'.strip()
                records.append(TweetRecord(
                    tweet_id=f'{spec.event_id}-{user}-{k}',
                    user_id=user,
                    event_id=spec.event_id,
                    timestamp=float(round(spec.start + offset, 3)),
                    text=text,
                ))
            if counts.sum() == 0:
                continue
            users.append(user)
            labels.append(label)
            rows.append(counts)
    matrix = sparse.csr_matrix(np.array(rows).reshape(len(rows), len(vocab)))
    logger.debug("Generated %d users and %d tweets (seed %d).",
                 len(users), len(records), spec.seed)
    return (UserTokenCounts(users, matrix, labels, vocab),
            TweetCollection(records))


def oracle_labels(counts: UserTokenCounts) -> dict:
    return dict(zip(counts.users, counts.labels))


def tweet_topics(spec: GenerativeSpec, tweets) -> dict:
    """
    True topic of every generated tweet.
    """
    if spec.topic_structure is None:
        raise ConfigError("The spec has no topic structure.")
    res = {}
    for tweet in tweets:
        words = tweet.text.split()
        token = next(w for w in words if w in spec.topic_structure)
        res[tweet.tweet_id] = spec.topic_structure[token]
    return res


def mixture_phi(topic_weights, within: list) -> np.ndarray:
    """
    Token distribution of a party from its topic weights and one
    within-topic distribution per topic (tokens laid out topic by topic).
    """
    weights = np.asarray(topic_weights, dtype=float)
    weights = weights / weights.sum()
    parts = [w * np.asarray(p, dtype=float) / np.sum(p)
             for w, p in zip(weights, within)]
    phi = np.concatenate(parts)
    return phi / phi.sum()


def topic_spec(dem_weights, rep_weights, dem_within, rep_within,
               n_users: int = 200, tokens_per_user: int = 120,
               seed: int = 0, words=None, **kwargs) -> GenerativeSpec:
    """
    Spec whose tokens are grouped into len(dem_weights) topics.
    :param words: optional token names per topic
    """
    sizes = [len(p) for p in dem_within]
    tokens, structure = [], {}
    for x, size in enumerate(sizes):
        for j in range(size):
            tok = words[x][j] if words else f't{x}w{j:02d}'
            tokens.append(tok)
            structure[tok] = x
    return GenerativeSpec(
        phi_dem=mixture_phi(dem_weights, dem_within),
        phi_rep=mixture_phi(rep_weights, rep_within),
        n_dem=n_users, n_rep=n_users, tokens_per_user=tokens_per_user,
        topic_structure=structure, tokens=tokens, seed=seed, **kwargs)


def synthetic_follows(labels: dict, dem_handles, rep_handles, seed: int = 0
                      ) -> [FollowEdge]:
    """
    Follow edges consistent with the labels: a partisan user follows 1-4
    handles of their party and 0-2 fewer of the other party.
    """
    dem_handles = sorted(dem_handles)
    rep_handles = sorted(rep_handles)
    rng = np.random.default_rng(seed)
    edges = []
    for user in sorted(labels):
        label = labels[user]
        if not label.is_partisan:
            continue
        own, other = (dem_handles, rep_handles) \
            if label is PartyLabel.DEMOCRAT else (rep_handles, dem_handles)
        n_own = int(rng.integers(1, 5))
        n_other = int(rng.integers(0, n_own))
        for h in rng.choice(len(own), size=n_own, replace=False):
            edges.append(FollowEdge(user, own[h]))
        for h in rng.choice(len(other), size=n_other, replace=False):
            edges.append(FollowEdge(user, other[h]))
    return edges


def load_spec(path=None) -> GenerativeSpec:
    path = Path(path) if path else \
        Path(__file__).parent / 'data' / 'demo_spec.yaml'
    return GenerativeSpec.load(path)


DEMO_TOPICS = (
    ('gun', 'control', 'law', 'ban', 'congress', 'vote', 'reform', 'nra',
     'must', 'we', 'act', 'sandyhook'),
    ('pray', 'heart', 'love', 'victim', 'family', 'sad', 'vigil',
     'condolences', 'columbine'),
    ('police', 'suspect', 'arrest', 'confirm', 'dead', 'injured', 'report',
     'shooter'),
    ('terrorist', 'crazy', 'islam', 'white', 'radical', 'motive', 'mental',
     'hate', 'should', 'they'),
)

# event_id, date, keyword, shooter race
DEMO_EVENTS = (
    ('toy_vegas', '2017-10-01', 'vegas', 'white'),
    ('toy_sanbernardino', '2015-12-02', 'sanbernardino', 'person_of_color'),
)


def demo_corpus(seed: int = 0, n_users: int = 100,
                tokens_per_user: int = 150, days: int = 3):
    """
    Toy corpus of two events about 4 topics. Democrats lean to the laws and
    solidarity topics, Republicans to news and the shooter; inside the
    shooter topic the leaning word order flips with the shooter's race.
    :return: (TweetCollection, labels, {event_id: EventMeta}, [FollowEdge])
    """
    records, labels, events = [], {}, {}
    for n, (event_id, day, keyword, race) in enumerate(DEMO_EVENTS):
        date = datetime.strptime(day, '%Y-%m-%d').replace(tzinfo=timezone.utc)
        events[event_id] = EventMeta(event_id, date.date(), (keyword,),
                                     shooter_race=race)
        dem_within, rep_within = [], []
        for x, words in enumerate(DEMO_TOPICS):
            ramp = np.linspace(2.0, 1.0, len(words))
            flip = x == 3 and race != 'white'
            dem_within.append(ramp[::-1] if flip else ramp)
            rep_within.append(ramp if flip else ramp[::-1])
        spec = topic_spec([0.35, 0.35, 0.15, 0.15], [0.15, 0.2, 0.35, 0.3],
                          dem_within, rep_within, n_users=n_users,
                          tokens_per_user=tokens_per_user,
                          seed=seed * 100 + n, words=DEMO_TOPICS,
                          event_id=event_id, start=date.timestamp(),
                          days=days, tweet_prefix=f'{keyword} shooting')
        counts, tweets = generate(spec)
        labels.update(oracle_labels(counts))
        records.extend(tweets)
    dem_handles, rep_handles = load_default_handles()
    follows = synthetic_follows(labels, sorted(dem_handles)[:10],
                                sorted(rep_handles)[:10], seed=seed)
    return TweetCollection(records), labels, events, follows
