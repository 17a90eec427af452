"""
Partisan log-odds of tokens and token categories, and affect lexicons
induced from word embeddings.

Log-odds follow the informative Dirichlet model with a uniform symmetric
prior; Democrat-leaning items are negative, Republican-leaning positive.
"""
import logging
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd

from text_polarization.corpus import PartyLabel
from text_polarization.errors import LogOddsError, EmbeddingError
from text_polarization.textprep import DATA_DIR, load_stopwords, tweet_stems

LOG_ODDS_COLUMNS = ['item', 'f_dem', 'f_rep', 'delta', 'variance', 'z',
                    'raw_delta']
CATEGORIES = ('positive', 'negative', 'sadness', 'disgust', 'anger', 'fear',
              'trust')

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LogOddsEntry:
    item: str
    f_dem: float
    f_rep: float
    delta: float
    variance: float
    z: float
    raw_delta: float = float('nan')


@dataclass
class LogOddsTable:
    entries: list = field(default_factory=list)
    standardized: bool = False

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, item: str) -> LogOddsEntry:
        for entry in self.entries:
            if entry.item == item:
                return entry
        raise KeyError(item)

    def __contains__(self, item):
        return any(e.item == item for e in self.entries)

    @property
    def items(self) -> [str]:
        return [e.item for e in self.entries]

    @property
    def deltas(self) -> np.ndarray:
        return np.array([e.delta for e in self.entries], dtype=float)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([[getattr(e, c) for c in LOG_ODDS_COLUMNS]
                             for e in self.entries], columns=LOG_ODDS_COLUMNS)

    def save(self, path):
        self.to_frame().to_csv(path, index=False, lineterminator='\n',
                               float_format='%.12g')


def token_log_odds(counts_dem: dict, counts_rep: dict,
                   prior_alpha: float = 0.01, totals=None,
                   vocab_size: int = None) -> LogOddsTable:
    """
    Log-odds ratio of every item, Republicans relative to Democrats:
    delta = log[(f_R+a)/(N_R+a|V|-f_R-a)] - log[(f_D+a)/(N_D+a|V|-f_D-a)]
    variance = 1/(f_D+a) + 1/(f_R+a), z = delta / sqrt(variance).
    :param totals: (N_D, N_R), default is the summed counts
    :param vocab_size: |V|, default is the number of distinct items
    """
    if prior_alpha <= 0:
        raise LogOddsError(f"The prior alpha must be positive, got "
                           f"{prior_alpha}.")
    items = sorted(set(counts_dem) | set(counts_rep))
    f_dem = np.array([counts_dem.get(i, 0) for i in items], dtype=float)
    f_rep = np.array([counts_rep.get(i, 0) for i in items], dtype=float)
    n_dem, n_rep = totals if totals is not None else (f_dem.sum(),
                                                       f_rep.sum())
    if n_dem <= 0 or n_rep <= 0:
        raise LogOddsError(f"Both parties need a positive token total, got "
                           f"{n_dem} and {n_rep}.")
    size = len(items) if vocab_size is None else vocab_size
    a = prior_alpha
    delta = np.log((f_rep + a) / (n_rep + a * size - f_rep - a)) - \
        np.log((f_dem + a) / (n_dem + a * size - f_dem - a))
    variance = 1.0 / (f_dem + a) + 1.0 / (f_rep + a)
    z = delta / np.sqrt(variance)
    with np.errstate(divide='ignore', invalid='ignore'):
        raw = np.log(f_rep / (n_rep - f_rep)) - np.log(f_dem / (n_dem - f_dem))
    raw = np.where(np.isfinite(raw), raw, np.nan)
    return LogOddsTable([
        LogOddsEntry(item, float(fd), float(fr), float(d), float(v),
                     float(zz), float(rd))
        for item, fd, fr, d, v, zz, rd in zip(items, f_dem, f_rep, delta,
                                              variance, z, raw)
    ])


def standardize(table: LogOddsTable) -> LogOddsTable:
    deltas = table.deltas
    if len(deltas) < 2:
        raise LogOddsError(f"Standardizing needs at least 2 items, got "
                           f"{len(deltas)}.")
    sd = deltas.std()
    if sd == 0:
        raise LogOddsError("The log-odds have zero variance.")
    mean = deltas.mean()
    entries = []
    for entry, value in zip(table.entries, (deltas - mean) / sd):
        entries.append(replace(entry, delta=float(value),
                               z=float(value / np.sqrt(entry.variance))))
    return LogOddsTable(entries, standardized=True)


def zscore_within_group(tables: dict) -> dict:
    """
    Standardize delta within every group (event, topic or event+modal):
    subtract the mean and divide by the (population) SD across items.
    """
    return {key: standardize(tables[key]) for key in sorted(tables)}


def top_partisan_items(table: LogOddsTable, n: int = 20) -> ([str], [str]):
    """
    :return: (most Democrat items, most Republican items), most partisan
             first, by z
    """
    ordered = sorted(table.entries, key=lambda e: (e.z, e.item))
    dem = [e.item for e in ordered[:n] if e.z < 0]
    rep = [e.item for e in reversed(ordered[-n:]) if e.z > 0]
    return dem, rep


@dataclass(frozen=True)
class Lexicon:
    category: str
    stems: frozenset
    seeds: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, 'stems', frozenset(self.stems))
        object.__setattr__(self, 'seeds', frozenset(self.seeds))

    def __len__(self):
        return len(self.stems)

    def __contains__(self, item):
        return item in self.stems

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as fd:
            fd.write(f'[{self.category}]\n')
            if self.seeds:
                fd.write(f"# seeds: {' '.join(sorted(self.seeds))}\n")
            for s in sorted(self.stems):
                fd.write(f'{s}\n')

    @classmethod
    def load(cls, path) -> 'Lexicon':
        category, seeds, stems = None, [], []
        with open(path, encoding='utf-8') as fd:
            for line in fd:
                line = line.strip()
                if not line:
                    continue
                if line.startswith('[') and line.endswith(']'):
                    category = line[1:-1].strip()
                elif line.startswith('# seeds:'):
                    seeds = line[len('# seeds:'):].split()
                elif not line.startswith('#'):
                    stems.append(line)
        if category is None:
            raise LogOddsError(f"The lexicon '{path}' has no category "
                               f"header.")
        return cls(category, frozenset(stems), frozenset(seeds))


def load_lexicons(directory=None) -> dict:
    directory = Path(directory) if directory else DATA_DIR / 'lexicons'
    res = {}
    for path in sorted(directory.glob('*.txt')):
        lex = Lexicon.load(path)
        res[lex.category] = lex
    return res


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    return np.divide(matrix, norms, out=np.zeros_like(matrix),
                     where=norms > 0)


def induce_lexicon(seeds, category: str, table, vocab,
                   size: int = 30) -> Lexicon:
    """
    The `size` vocabulary stems with the lowest mean cosine distance to
    the seed stems; ties in lexicographic order.
    """
    seeds = sorted(set(seeds))
    if not seeds:
        raise EmbeddingError(f"The category '{category}' has no seeds.")
    missing = [s for s in seeds if s not in table]
    if missing:
        raise EmbeddingError(f"The seed stems {missing} of '{category}' are "
                             f"not in the embedding table.")
    candidates = sorted(s for s in vocab if s in table)
    absent = sum(1 for s in vocab if s not in table)
    if absent:
        logger.warning("%d vocabulary stems have no embedding.", absent)
    seed_vecs = _unit_rows(np.array([table[s] for s in seeds]))
    cand_vecs = _unit_rows(np.array([table[s] for s in candidates]))
    mean_dist = (1.0 - cand_vecs @ seed_vecs.T).mean(axis=1)
    order = sorted(range(len(candidates)),
                   key=lambda i: (round(float(mean_dist[i]), 12),
                                  candidates[i]))
    stems = [candidates[i] for i in order[:size]]
    logger.debug("Lexicon %s: %s", category, stems)
    return Lexicon(category, frozenset(stems), frozenset(seeds))


def party_item_counts(tweets, labels: dict, items) -> (Counter, Counter):
    """
    Summed item counts per party.
    :param items: callable tweet -> iterable of items
    """
    res = {PartyLabel.DEMOCRAT: Counter(), PartyLabel.REPUBLICAN: Counter()}
    for tweet in tweets:
        label = labels.get(tweet.user_id)
        if label in res:
            res[label].update(items(tweet))
    return res[PartyLabel.DEMOCRAT], res[PartyLabel.REPUBLICAN]


def category_log_odds(tweets, labels: dict, lexicon: Lexicon,
                      vocab=None, stopwords: frozenset = None,
                      prior_alpha: float = 0.01) -> dict:
    """
    Log-odds of a lexicon treated as one item, for every event. N is the
    number of in-vocabulary stems a party used in the event.
    :return: event_id -> LogOddsEntry
    """
    if not lexicon.stems:
        raise LogOddsError(f"The lexicon '{lexicon.category}' is empty.")
    if stopwords is None:
        stopwords = load_stopwords()

    def __stems(tweet):
        stems = tweet_stems(tweet.text, stopwords)
        return stems if vocab is None else [s for s in stems if s in vocab]

    by_event = {}
    for tweet in tweets:
        by_event.setdefault(tweet.event_id, []).append(tweet)
    res = {}
    for event_id in sorted(by_event):
        dem, rep = party_item_counts(by_event[event_id], labels, __stems)
        n_dem, n_rep = sum(dem.values()), sum(rep.values())
        if n_dem == 0 or n_rep == 0:
            logger.warning("Event %s has no tokens of one party, category "
                           "%s skipped.", event_id, lexicon.category)
            continue
        size = len(vocab) if vocab is not None else len(set(dem) | set(rep))
        f_dem = sum(c for s, c in dem.items() if s in lexicon)
        f_rep = sum(c for s, c in rep.items() if s in lexicon)
        table = token_log_odds({lexicon.category: f_dem},
                               {lexicon.category: f_rep},
                               prior_alpha=prior_alpha,
                               totals=(n_dem, n_rep), vocab_size=size)
        res[event_id] = table.entries[0]
    return res


def write_entries(rows, path, columns=('device', 'item', 'event_id')):
    """
    :param rows: iterable of (key tuple, LogOddsEntry)
    """
    frame = pd.DataFrame(
        [list(key) + [f'{entry.f_dem:g}', f'{entry.f_rep:g}',
                      f'{entry.delta:.12g}', f'{entry.z:.12g}']
         for key, entry in rows],
        columns=list(columns) + ['f_dem', 'f_rep', 'delta', 'z'],
        dtype=object)
    frame.to_csv(path, index=False, lineterminator='\n')
