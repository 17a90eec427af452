"""
Framing devices: tracked tokens, grounding in past events, necessity
modals, pronouns and modal collocations.
"""
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from text_polarization.corpus import PartyLabel, race_group
from text_polarization.errors import LogOddsError, ConfigError
from text_polarization.lexica import token_log_odds, zscore_within_group
from text_polarization.matcher import KeywordMatcher
from text_polarization.stats import two_sample_ttest
from text_polarization.textprep import DATA_DIR, tokenize

CONTRACTIONS = {
    "shouldn't": ['should', 'not'],
    "shouldnt": ['should', 'not'],
    "should've": ['should', 'have'],
    "shouldve": ['should', 'have'],
    "mustn't": ['must', 'not'],
    "mustnt": ['must', 'not'],
    "must've": ['must', 'have'],
    "mustve": ['must', 'have'],
    "needn't": ['need', 'not'],
    "neednt": ['need', 'not'],
    "haven't": ['have', 'not'],
    "havent": ['have', 'not'],
    "hasn't": ['has', 'not'],
    "hadn't": ['had', 'not'],
}

DEFAULT_MODALS = {
    'should': ['should'],
    'must': ['must'],
    'have to': ['have to', 'has to', 'had to'],
    'need to': ['need to', 'needs to', 'needed to'],
    'should have': ['should have'],
}

logger = logging.getLogger(__name__)


def normalize_contractions(tokens) -> [str]:
    """
    Expand contracted modal forms ("shouldn't" -> "should", "not").
    """
    res = []
    for tok in tokens:
        res.extend(CONTRACTIONS.get(tok, [tok]))
    return res


def modal_tokens(text: str) -> [str]:
    return normalize_contractions(tokenize(text))


def _pattern_positions(tokens, pattern) -> [int]:
    n = len(pattern)
    return [i for i in range(len(tokens) - n + 1)
            if tokens[i:i + n] == pattern]


def _compile_forms(forms: dict) -> dict:
    return {name: [p.lower().split() for p in patterns]
            for name, patterns in forms.items()}


def _party_tweets(tweets, labels: dict) -> dict:
    res = {PartyLabel.DEMOCRAT: [], PartyLabel.REPUBLICAN: []}
    for tweet in tweets:
        label = labels.get(tweet.user_id)
        if label in res:
            res[label].append(tweet)
    return res


def _by_event(tweets) -> dict:
    res = {}
    for tweet in tweets:
        res.setdefault(tweet.event_id, []).append(tweet)
    return {k: res[k] for k in sorted(res)}


@dataclass
class TrackedTokenReport:
    token: str
    per_event: dict = field(default_factory=dict)
    groups: dict = field(default_factory=dict)

    def summary(self) -> dict:
        """
        Number of Democrat-leaning, neutral and Republican-leaning events
        per shooter race group.
        """
        res = {}
        for group, deltas in sorted(self.groups.items()):
            res[group] = {
                'dem': sum(1 for d in deltas if d < 0),
                'neutral': sum(1 for d in deltas if d == 0),
                'rep': sum(1 for d in deltas if d > 0),
            }
        return res

    def to_json(self) -> str:
        return json.dumps({'token': self.token, **self.groups},
                          sort_keys=True)


def track_token(token: str, per_event_counts: dict, events: dict,
                prior_alpha: float = 0.01) -> TrackedTokenReport:
    """
    Log-odds of one token in every event where either party used it,
    grouped by the race of the shooter.
    :param per_event_counts: event_id -> UserTokenCounts
    :param events: event_id -> EventMeta
    """
    report = TrackedTokenReport(token)
    for event_id in sorted(per_event_counts):
        counts = per_event_counts[event_id]
        pos = counts.vocab.position(token)
        if pos is None:
            continue
        dem = counts.group_counts(PartyLabel.DEMOCRAT)
        rep = counts.group_counts(PartyLabel.REPUBLICAN)
        if dem[pos] == 0 and rep[pos] == 0:
            continue
        table = token_log_odds({token: int(dem[pos])}, {token: int(rep[pos])},
                               prior_alpha=prior_alpha,
                               totals=(int(dem.sum()), int(rep.sum())),
                               vocab_size=len(counts.vocab))
        entry = table.entries[0]
        report.per_event[event_id] = entry
        group = race_group(events[event_id].shooter_race)
        report.groups.setdefault(group, []).append(entry.delta)
    if not report.per_event:
        raise LogOddsError(f"The token '{token}' does not occur in any "
                           f"event.")
    return report


def race_group_test(report: TrackedTokenReport,
                    groups=('white', 'person_of_color')):
    """
    Welch t-test of the per-event log-odds between two shooter groups.
    """
    a = report.groups.get(groups[0], [])
    b = report.groups.get(groups[1], [])
    return two_sample_ttest(a, b)


@dataclass(frozen=True)
class ContextEventReport:
    context_event: str
    mentions_dem: int
    mentions_rep: int
    delta: float
    z: float
    dem_share: float
    rep_share: float


def load_context_events(path=None) -> (dict, dict):
    """
    :return: (name -> [keyword], name -> focal event_id or None)
    """
    path = Path(path) if path else DATA_DIR / 'context_events.yaml'
    with open(path, encoding='utf-8') as fd:
        try:
            data = yaml.safe_load(fd)
        except yaml.YAMLError as ex:
            raise ConfigError(f"The context events '{path}' are not valid "
                              f"YAML.") from ex
    if not isinstance(data, dict) or not data:
        raise ConfigError(f"The context events '{path}' must be a non-empty "
                          f"mapping.")
    keywords, focal = {}, {}
    for name, item in data.items():
        if isinstance(item, dict):
            keywords[name] = list(item.get('keywords', []))
            focal[name] = item.get('event_id')
        else:
            keywords[name] = list(item)
            focal[name] = None
    return keywords, focal


def context_mentions(text: str, matcher: KeywordMatcher) -> [str]:
    return matcher.matches(text)


def grounding_log_odds(tweets, labels: dict, context_keywords: dict,
                       min_mentions: int = 100, exclude=(),
                       prior_alpha: float = 0.01) -> [ContextEventReport]:
    """
    Partisan log-odds of past events referenced in the tweets. A tweet
    counts once per context event it mentions; N is the number of tweets
    of a party. Context events mentioned fewer than min_mentions times by
    both parties are dropped.
    """
    if not context_keywords:
        raise ConfigError("The context keyword map is empty.")
    keywords = {k: v for k, v in context_keywords.items() if k not in exclude}
    matcher = KeywordMatcher(keywords)
    parties = _party_tweets(tweets, labels)
    mentions = {label: Counter() for label in parties}
    for label, party_tweets in parties.items():
        for tweet in party_tweets:
            mentions[label].update(context_mentions(tweet.text, matcher))
    n_dem = len(parties[PartyLabel.DEMOCRAT])
    n_rep = len(parties[PartyLabel.REPUBLICAN])
    if n_dem == 0 or n_rep == 0:
        logger.warning("Grounding needs tweets of both parties.")
        return []
    dem, rep = mentions[PartyLabel.DEMOCRAT], mentions[PartyLabel.REPUBLICAN]
    kept = sorted(name for name in keywords
                  if dem[name] >= min_mentions or rep[name] >= min_mentions)
    if not kept:
        return []
    table = token_log_odds({k: dem[k] for k in kept},
                           {k: rep[k] for k in kept},
                           prior_alpha=prior_alpha, totals=(n_dem, n_rep),
                           vocab_size=len(keywords))
    return [ContextEventReport(e.item, int(e.f_dem), int(e.f_rep), e.delta,
                               e.z, e.f_dem / n_dem, e.f_rep / n_rep)
            for e in table]


def modal_hits(tweets, modal_forms: dict = None) -> dict:
    """
    :return: modal -> set of ids of tweets containing one of its patterns
    """
    forms = _compile_forms(modal_forms or DEFAULT_MODALS)
    res = {name: set() for name in forms}
    for tweet in tweets:
        tokens = modal_tokens(tweet.text)
        for name, patterns in forms.items():
            if any(_pattern_positions(tokens, p) for p in patterns):
                res[name].add(tweet.tweet_id)
    return res


def modal_partisanship(tweets, labels: dict, modal_forms: dict = None,
                       prior_alpha: float = 0.01) -> dict:
    """
    Log-odds of the number of tweets containing each modal, per event.
    :return: event_id -> LogOddsTable
    """
    modal_forms = modal_forms or DEFAULT_MODALS
    res = {}
    for event_id, event_tweets in _by_event(tweets).items():
        parties = _party_tweets(event_tweets, labels)
        if not all(parties.values()):
            logger.warning("Event %s lacks tweets of one party.", event_id)
            continue
        counts = {}
        for label, party_tweets in parties.items():
            hits = modal_hits(party_tweets, modal_forms)
            counts[label] = {m: len(hits[m]) for m in modal_forms}
        res[event_id] = token_log_odds(
            counts[PartyLabel.DEMOCRAT], counts[PartyLabel.REPUBLICAN],
            prior_alpha=prior_alpha,
            totals=(len(parties[PartyLabel.DEMOCRAT]),
                    len(parties[PartyLabel.REPUBLICAN])))
    return res


@dataclass
class ModalRepresentation:
    modal: str
    per_topic: dict
    f_x: dict
    f_x_m: dict

    def weighted_mean(self) -> float:
        total = sum(self.f_x.values())
        return sum(self.per_topic[x] * self.f_x[x] / total
                   for x in self.per_topic)


def modal_topic_representation(assignments, modal_hits: set, modal: str
                               ) -> ModalRepresentation:
    """
    p_x = (f_x^m / sum f^m) / (f_x / sum f): the share of the modal's
    tweets in topic x over the topic's share of all tweets.
    """
    f_x = Counter(a.topic for a in assignments)
    f_x_m = Counter(a.topic for a in assignments if a.tweet_id in modal_hits)
    total_m = sum(f_x_m.values())
    if total_m == 0:
        raise LogOddsError(f"The modal '{modal}' has no assigned tweets.")
    total = sum(f_x.values())
    per_topic = {x: (f_x_m[x] / total_m) / (f_x[x] / total)
                 for x in sorted(f_x) if f_x[x] > 0}
    return ModalRepresentation(modal, per_topic, dict(sorted(f_x.items())),
                               {x: f_x_m[x] for x in sorted(f_x)})


def load_pronouns(path=None) -> dict:
    path = Path(path) if path else DATA_DIR / 'pronouns_default.yaml'
    with open(path, encoding='utf-8') as fd:
        data = yaml.safe_load(fd)
    if not isinstance(data, dict):
        raise ConfigError(f"The pronoun categories '{path}' must be a "
                          f"mapping.")
    return {name: frozenset(w.lower() for w in words)
            for name, words in data.items()}


def _check_categories(categories: dict):
    empty = [name for name, words in categories.items() if not words]
    if empty:
        raise LogOddsError(f"The pronoun categories {empty} are empty.")


def pronoun_partisanship(tweets, labels: dict, categories: dict,
                         prior_alpha: float = 0.01) -> dict:
    """
    Log-odds of every pronoun category per event; N is the number of
    tokens a party used in the event.
    :return: event_id -> LogOddsTable
    """
    _check_categories(categories)
    res = {}
    for event_id, event_tweets in _by_event(tweets).items():
        parties = _party_tweets(event_tweets, labels)
        counts, totals, types = {}, {}, set()
        for label, party_tweets in parties.items():
            tokens = Counter()
            for tweet in party_tweets:
                tokens.update(modal_tokens(tweet.text))
            types.update(tokens)
            totals[label] = sum(tokens.values())
            counts[label] = {name: sum(tokens[w] for w in words)
                             for name, words in categories.items()}
        if not all(totals.values()):
            logger.warning("Event %s lacks tokens of one party.", event_id)
            continue
        res[event_id] = token_log_odds(
            counts[PartyLabel.DEMOCRAT], counts[PartyLabel.REPUBLICAN],
            prior_alpha=prior_alpha,
            totals=(totals[PartyLabel.DEMOCRAT],
                    totals[PartyLabel.REPUBLICAN]),
            vocab_size=len(types))
    return res


def pronoun_topic_representation(assignments, tweets, categories: dict
                                 ) -> dict:
    """
    Topic representation of every pronoun category.
    :return: category -> ModalRepresentation
    """
    _check_categories(categories)
    hits = {name: set() for name in categories}
    for tweet in tweets:
        tokens = set(modal_tokens(tweet.text))
        for name, words in categories.items():
            if tokens & words:
                hits[name].add(tweet.tweet_id)
    res = {}
    for name in sorted(categories):
        try:
            res[name] = modal_topic_representation(assignments, hits[name],
                                                   name)
        except LogOddsError as ex:
            logger.warning("%s", ex)
    return res


def collocations(tokens, pattern) -> [str]:
    """
    The token before the pattern, the pattern and up to two tokens after
    it; one collocation per complement length.
    """
    res = []
    n = len(pattern)
    for i in _pattern_positions(tokens, pattern):
        subject = tokens[i - 1:i]
        for extra in (1, 2):
            after = tokens[i + n:i + n + extra]
            if len(after) < extra:
                break
            res.append(' '.join(subject + pattern + after))
    return res


@dataclass
class CollocationReport:
    modal: str
    collocation: str
    side: PartyLabel
    events: dict


def modal_collocations(tweets, labels: dict, modal: str,
                       modal_forms: dict = None, z_threshold: float = 0.5,
                       min_events: int = 3, prior_alpha: float = 0.01
                       ) -> [CollocationReport]:
    """
    Collocations of a modal that are at least z_threshold SD partisan in at
    least min_events events, with the same sign in every such event.
    Log-odds are standardized within event and modal.
    """
    forms = _compile_forms(modal_forms or DEFAULT_MODALS)
    if modal not in forms:
        raise ConfigError(f"Unknown modal '{modal}'.")
    tables = {}
    for event_id, event_tweets in _by_event(tweets).items():
        parties = _party_tweets(event_tweets, labels)
        counts = {}
        for label, party_tweets in parties.items():
            counter = Counter()
            for tweet in party_tweets:
                tokens = modal_tokens(tweet.text)
                found = set()
                for pattern in forms[modal]:
                    found.update(collocations(tokens, pattern))
                counter.update(found)
            counts[label] = counter
        if not parties[PartyLabel.DEMOCRAT] or \
                not parties[PartyLabel.REPUBLICAN]:
            continue
        table = token_log_odds(
            counts[PartyLabel.DEMOCRAT], counts[PartyLabel.REPUBLICAN],
            prior_alpha=prior_alpha,
            totals=(len(parties[PartyLabel.DEMOCRAT]),
                    len(parties[PartyLabel.REPUBLICAN])))
        if len(table) < 2 or len(set(table.deltas)) < 2:
            logger.debug("Event %s has too few collocations of '%s'.",
                         event_id, modal)
            continue
        tables[event_id] = table
    standardized = zscore_within_group(tables)
    strong = {}
    for event_id, table in standardized.items():
        for entry in table:
            if abs(entry.delta) >= z_threshold:
                strong.setdefault(entry.item, {})[event_id] = entry.delta
    res = []
    for item in sorted(strong):
        values = strong[item]
        signs = {v > 0 for v in values.values()}
        if len(values) >= min_events and len(signs) == 1:
            side = PartyLabel.REPUBLICAN if signs.pop() else \
                PartyLabel.DEMOCRAT
            res.append(CollocationReport(modal, item, side, values))
    return res


def device_rows(device: str, tables: dict) -> list:
    """
    Rows for lexica.write_entries from event_id -> LogOddsTable.
    """
    return [((device, e.item, event_id), e)
            for event_id, table in sorted(tables.items())
            for e in table]
