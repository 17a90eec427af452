import csv
import json
import logging
import re
from dataclasses import dataclass, field, asdict
from datetime import date, datetime, timezone
from enum import Enum
from pathlib import Path

import pandas as pd

from text_polarization.errors import CorpusError
from text_polarization.matcher import KeywordMatcher, HASHTAG_RE
from text_polarization.textprep import DATA_DIR, stem, tokenize

TWEET_FIELDS = ('tweet_id', 'user_id', 'event_id', 'timestamp', 'text')
DEFAULT_LEMMAS = ('shoot', 'gun', 'kill', 'attack', 'massacre', 'victim')
CAMEL_RE = re.compile(r"[A-Z]+(?![a-z])|[A-Z]?[a-z]+|\d+")

RACE_GROUPS = {
    'white': 'white',
    'mixed': 'person_of_color',
    'middle eastern': 'person_of_color',
    'black': 'person_of_color',
    'hispanic': 'person_of_color',
    'asian': 'person_of_color',
    'person_of_color': 'person_of_color',
}

logger = logging.getLogger(__name__)


class PartyLabel(str, Enum):
    DEMOCRAT = 'Democrat'
    REPUBLICAN = 'Republican'
    UNASSIGNED = 'Unassigned'

    @property
    def is_partisan(self) -> bool:
        return self is not PartyLabel.UNASSIGNED

    @property
    def opposite(self) -> 'PartyLabel':
        if self is PartyLabel.DEMOCRAT:
            return PartyLabel.REPUBLICAN
        if self is PartyLabel.REPUBLICAN:
            return PartyLabel.DEMOCRAT
        return self

    @classmethod
    def parse(cls, value) -> 'PartyLabel':
        if isinstance(value, cls):
            return value
        val = str(value).strip().lower()
        for label in cls:
            if val in (label.value.lower(), label.value[0].lower()):
                return label
        raise CorpusError(f"Unknown party label '{value}'.")


@dataclass(frozen=True)
class TweetRecord:
    tweet_id: str
    user_id: str
    event_id: str
    timestamp: float
    text: str
    state: str = None

    @property
    def day(self) -> date:
        return datetime.fromtimestamp(self.timestamp, tz=timezone.utc).date()


@dataclass(frozen=True)
class EventMeta:
    event_id: str
    date: date
    keywords: tuple
    shooter_race: str = 'unknown'
    location_kind: str = ''
    victims: int = 0

    def __post_init__(self):
        if not self.keywords:
            raise CorpusError(f"The event '{self.event_id}' has no keywords.")
        if self.shooter_race not in ('white', 'person_of_color', 'unknown'):
            raise CorpusError(f"The event '{self.event_id}' has got an "
                              f"unsupported shooter_race.")

    @property
    def start(self) -> float:
        return datetime(self.date.year, self.date.month, self.date.day,
                        tzinfo=timezone.utc).timestamp()

    def day_index(self, timestamp: float) -> int:
        return int((timestamp - self.start) // 86400)


@dataclass(frozen=True)
class FollowEdge:
    user_id: str
    politician_handle: str


@dataclass
class TweetCollection:
    records: list = field(default_factory=list)
    skipped: int = 0

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, item):
        return self.records[item]

    @property
    def event_ids(self) -> [str]:
        return sorted({t.event_id for t in self.records})

    @property
    def user_ids(self) -> [str]:
        return sorted({t.user_id for t in self.records})

    def by_event(self) -> dict:
        res = {}
        for tweet in self.records:
            res.setdefault(tweet.event_id, []).append(tweet)
        return {k: TweetCollection(res[k]) for k in sorted(res)}

    def where(self, predicate) -> 'TweetCollection':
        return TweetCollection([t for t in self.records if predicate(t)])


def _parse_record(raw: dict) -> TweetRecord:
    missing = [f for f in TWEET_FIELDS
               if f not in raw or raw[f] is None or
               (isinstance(raw[f], float) and pd.isna(raw[f]))]
    if missing:
        raise ValueError(f"missing fields {missing}")
    state = raw.get('state')
    if state is not None and not isinstance(state, str):
        state = None if pd.isna(state) else str(state)
    return TweetRecord(
        tweet_id=str(raw['tweet_id']),
        user_id=str(raw['user_id']),
        event_id=str(raw['event_id']),
        timestamp=float(raw['timestamp']),
        text=str(raw['text']),
        state=state or None,
    )


def load_tweets(path, format: str = None) -> TweetCollection:
    """
    Load tweets from JSONL or CSV. Malformed records are skipped with
    a warning and counted.
    :param path: file path
    :param format: 'jsonl' or 'csv', default by file suffix
    """
    path = Path(path)
    fmt = (format or path.suffix.lstrip('.')).lower()
    if fmt == 'json':
        fmt = 'jsonl'
    if fmt not in ('jsonl', 'csv'):
        raise CorpusError(f"The tweet file '{path}' has got an unsupported "
                          f"format '{fmt}'.")
    try:
        fd = open(path, encoding='utf-8', newline='')
    except OSError as ex:
        raise CorpusError(f"The tweet file '{path}' can not be read.") from ex
    records, skipped, seen = [], 0, set()
    with fd:
        if fmt == 'jsonl':
            rows = enumerate(fd, 1)
        else:
            rows = enumerate(csv.DictReader(fd), 2)
        for lineno, row in rows:
            try:
                if fmt == 'jsonl':
                    if not row.strip():
                        continue
                    row = json.loads(row)
                    if not isinstance(row, dict):
                        raise ValueError('not an object')
                record = _parse_record(row)
                if record.tweet_id in seen:
                    raise ValueError(f"duplicate tweet_id {record.tweet_id}")
            except (ValueError, TypeError) as ex:
                logger.warning("Skip malformed record %s:%d (%s).",
                               path.name, lineno, ex)
                skipped += 1
                continue
            seen.add(record.tweet_id)
            records.append(record)
    return TweetCollection(records, skipped)


def save_tweets(tweets, path, format: str = None):
    path = Path(path)
    fmt = (format or path.suffix.lstrip('.')).lower()
    if fmt == 'csv':
        frame = pd.DataFrame(
            [(t.tweet_id, t.user_id, t.event_id, t.timestamp, t.text,
              t.state or '') for t in tweets],
            columns=list(TWEET_FIELDS) + ['state'])
        frame.to_csv(path, index=False, lineterminator='\n')
        return
    with open(path, 'w', encoding='utf-8') as fd:
        for t in tweets:
            rec = {k: v for k, v in asdict(t).items()
                   if k != 'state' or v is not None}
            fd.write(json.dumps(rec, ensure_ascii=False) + '\n')


def race_group(race: str) -> str:
    return RACE_GROUPS.get(str(race).strip().lower(), 'unknown')


def load_events(path=None) -> dict:
    """
    Load the event table (event_id, date, keywords, shooter_race,
    location_kind, victims). Keywords are separated by '|'.
    :return: dict event_id -> EventMeta
    """
    path = Path(path) if path else DATA_DIR / 'events.csv'
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as ex:
        raise CorpusError(f"The event table '{path}' can not be read.") from ex
    events = {}
    for row in frame.to_dict('records'):
        try:
            day = datetime.strptime(row['date'], '%Y-%m-%d').date()
        except ValueError as ex:
            raise CorpusError(f"The event '{row['event_id']}' has got "
                              f"an invalid date.") from ex
        keywords = tuple(k.strip().lower() for k in row['keywords'].split('|')
                         if k.strip())
        events[row['event_id']] = EventMeta(
            event_id=row['event_id'],
            date=day,
            keywords=keywords,
            shooter_race=race_group(row.get('shooter_race', '')),
            location_kind=row.get('location_kind', ''),
            victims=int(row.get('victims') or 0),
        )
    return events


def save_events(events: dict, path):
    frame = pd.DataFrame(
        [(e.event_id, e.date.isoformat(), '|'.join(e.keywords),
          e.shooter_race, e.location_kind, e.victims)
         for _, e in sorted(events.items())],
        columns=['event_id', 'date', 'keywords', 'shooter_race',
                 'location_kind', 'victims'])
    frame.to_csv(path, index=False, lineterminator='\n')


def save_follow_edges(edges, path):
    frame = pd.DataFrame([(e.user_id, e.politician_handle) for e in edges],
                         columns=['user_id', 'handle'])
    frame.to_csv(path, index=False, lineterminator='\n')


def load_handles(path) -> set:
    with open(path, encoding='utf-8') as fd:
        return {line.strip().lower() for line in fd
                if line.strip() and not line.startswith('#')}


def load_default_handles() -> (set, set):
    return (load_handles(DATA_DIR / 'dem_handles.txt'),
            load_handles(DATA_DIR / 'rep_handles.txt'))


def load_follow_edges(path) -> [FollowEdge]:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except OSError as ex:
        raise CorpusError(f"The follow file '{path}' can not be read.") from ex
    if not {'user_id', 'handle'} <= set(frame.columns):
        raise CorpusError(f"The follow file '{path}' needs the columns "
                          f"user_id,handle.")
    return [FollowEdge(r['user_id'], r['handle'])
            for r in frame.to_dict('records')]


def load_labels(path) -> dict:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    return {r['user_id']: PartyLabel.parse(r['party'])
            for r in frame.to_dict('records')}


def save_labels(labels: dict, path):
    frame = pd.DataFrame(
        [(u, labels[u].value) for u in sorted(labels)],
        columns=['user_id', 'party'])
    frame.to_csv(path, index=False, lineterminator='\n')


def hashtag_segments(body: str) -> [str]:
    """
    Lowercased CamelCase parts of a hashtag body: "LasVegasShooting" ->
    ['las', 'vegas', 'shooting'].
    """
    return [part.lower() for part in CAMEL_RE.findall(body)]


def lemma_matches(token: str, lemma_stems) -> bool:
    """
    A word matches when its stem is a lemma stem, a CamelCase hashtag when
    one of its parts does. A hashtag in a single case has no parts to
    split on and matches when it contains a lemma stem, so "#skills"
    still counts as "kill".
    """
    if token.startswith('#'):
        body = token[1:]
        if body.islower() or body.isupper():
            return any(s in body.lower() for s in lemma_stems)
        return any(stem(part) in lemma_stems
                   for part in hashtag_segments(body))
    return stem(token.lower()) in lemma_stems


def is_relevant(text: str, matcher: KeywordMatcher, lemma_stems) -> bool:
    if matcher.match(text) is None:
        return False
    words = [tok for tok in tokenize(text) if not tok.startswith('#')]
    hashtags = [f'#{body}' for body in HASHTAG_RE.findall(text)]
    return any(lemma_matches(tok, lemma_stems) for tok in words + hashtags)


def filter_relevant(tweets, event: EventMeta,
                    lemma_list=DEFAULT_LEMMAS) -> TweetCollection:
    """
    Keep tweets that mention one of the event keywords and contain a token
    whose stem equals a lemma's stem.
    """
    if not lemma_list:
        raise CorpusError("The lemma list must not be empty.")
    matcher = KeywordMatcher({event.event_id: list(event.keywords)})
    lemma_stems = frozenset(stem(lemma.lower()) for lemma in lemma_list)
    kept = [t for t in tweets if is_relevant(t.text, matcher, lemma_stems)]
    logger.debug("Event %s: %d of %d tweets relevant.",
                 event.event_id, len(kept), len(tweets))
    return TweetCollection(kept)


def assign_party(edges, dem_handles: set, rep_handles: set) -> dict:
    """
    Democrat if a user follows more Democratic than Republican handles,
    Republican if the reverse, Unassigned on a tie.
    """
    dem = {h.lower() for h in dem_handles}
    rep = {h.lower() for h in rep_handles}
    overlap = dem & rep
    if overlap:
        raise CorpusError(f"The handle lists are not disjoint: "
                          f"{sorted(overlap)[:5]}")
    score = {}
    for edge in edges:
        handle = edge.politician_handle.lower().lstrip('@')
        cur = score.setdefault(edge.user_id, [0, 0])
        if handle in dem:
            cur[0] += 1
        elif handle in rep:
            cur[1] += 1
    labels = {}
    for user, (n_dem, n_rep) in score.items():
        if n_dem > n_rep:
            labels[user] = PartyLabel.DEMOCRAT
        elif n_rep > n_dem:
            labels[user] = PartyLabel.REPUBLICAN
        else:
            labels[user] = PartyLabel.UNASSIGNED
    return labels


def follow_counts(edges, labels: dict, dem_handles: set,
                  rep_handles: set) -> (dict, dict):
    """
    :return: (followed_total, followed_own_party) per user
    """
    dem = {h.lower() for h in dem_handles}
    rep = {h.lower() for h in rep_handles}
    total, own = {}, {}
    for edge in edges:
        handle = edge.politician_handle.lower().lstrip('@')
        if handle not in dem and handle not in rep:
            continue
        total[edge.user_id] = total.get(edge.user_id, 0) + 1
        label = labels.get(edge.user_id)
        if (label is PartyLabel.DEMOCRAT and handle in dem) or \
                (label is PartyLabel.REPUBLICAN and handle in rep):
            own[edge.user_id] = own.get(edge.user_id, 0) + 1
    own = {u: own.get(u, 0) for u in total}
    return total, own


def partisan_coverage(labels: dict) -> float:
    if not labels:
        raise CorpusError("The label map is empty.")
    assigned = sum(1 for lab in labels.values() if lab.is_partisan)
    return assigned / len(labels)


def state_validation(tweets, labels: dict, vote_share: dict,
                     exclude=('DC',)):
    """
    Compare inferred labels with election results: per-state Republican
    share of partisan users regressed on the state's Republican two-party
    vote share, weighted by the number of partisan users in the state.
    :param vote_share: dict state -> Republican two-party share
    :return: (RegressionReport, DataFrame of per-state values)
    """
    from text_polarization.stats import ols

    users = {}
    for tweet in tweets:
        if tweet.state and tweet.user_id not in users:
            users[tweet.user_id] = tweet.state.strip().upper()
    per_state = {}
    for user, state in users.items():
        label = labels.get(user)
        if label is None or not label.is_partisan or state in exclude:
            continue
        cur = per_state.setdefault(state, [0, 0])
        cur[label is PartyLabel.REPUBLICAN] += 1
    rows = [(s, cnt[1] / sum(cnt), float(vote_share[s]), sum(cnt))
            for s, cnt in sorted(per_state.items()) if s in vote_share]
    frame = pd.DataFrame(rows, columns=['state', 'rep_user_share',
                                        'rep_vote_share', 'n_users'])
    report = ols(frame['rep_user_share'].to_numpy(),
                 frame[['rep_vote_share']].to_numpy(),
                 weights=frame['n_users'].to_numpy(dtype=float),
                 names=['rep_vote_share'])
    return report, frame
