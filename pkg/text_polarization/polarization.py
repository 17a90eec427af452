import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import sparse

from text_polarization.corpus import PartyLabel, TweetCollection
from text_polarization.errors import EstimatorError, StatisticsError
from text_polarization.stats import ols, RegressionReport
from text_polarization.textprep import UserTokenCounts, Vocab, \
    count_user_tokens

ESTIMATE_COLUMNS = ['event_id', 'day', 'pi_lo', 'n_dem', 'n_rep']

logger = logging.getLogger(__name__)


@dataclass
class PosteriorVector:
    """
    Leave-out posterior of one user over the retained tokens.
    """
    rho: np.ndarray
    retained_tokens: np.ndarray


@dataclass
class PolarizationEstimate:
    pi_lo: float
    per_user: dict = field(default_factory=dict)
    n_dem: int = 0
    n_rep: int = 0
    vocab_size_effective: int = 0
    dem_mean: float = 0.0
    rep_mean: float = 0.0

    def __float__(self):
        return float(self.pi_lo)


@dataclass
class MultidayReport:
    users_total: int
    users_removed: int
    tweets_total: int
    tweets_removed: int

    @property
    def user_fraction(self) -> float:
        return self.users_removed / self.users_total if self.users_total \
            else 0.0

    @property
    def tweet_fraction(self) -> float:
        return self.tweets_removed / self.tweets_total if self.tweets_total \
            else 0.0


def retained_tokens(counts: UserTokenCounts) -> np.ndarray:
    """
    Indices of tokens used by at least two users.
    """
    users_per_token = np.asarray((counts.counts > 0).sum(axis=0)).ravel()
    return np.flatnonzero(users_per_token >= 2)


def _restrict(counts: UserTokenCounts) -> (UserTokenCounts, np.ndarray):
    if len(counts) and np.any(counts.totals == 0):
        zero = [counts.users[i] for i in np.flatnonzero(counts.totals == 0)]
        raise EstimatorError(f"Users without tokens must be dropped "
                             f"upstream: {zero[:5]}")
    keep = retained_tokens(counts)
    matrix = counts.counts[:, keep]
    totals = np.asarray(matrix.sum(axis=1)).ravel()
    rows = np.flatnonzero(totals > 0)
    if len(rows) < len(counts):
        logger.warning("%d users use only tokens of a single speaker and "
                       "are left out.", len(counts) - len(rows))
    restricted = UserTokenCounts(
        [counts.users[i] for i in rows], matrix[rows],
        [counts.labels[i] for i in rows],
        Vocab(counts.vocab.entries[j] for j in keep))
    return restricted, keep


def _check_parties(counts: UserTokenCounts) -> (np.ndarray, np.ndarray):
    dem = counts.mask(PartyLabel.DEMOCRAT)
    rep = counts.mask(PartyLabel.REPUBLICAN)
    if dem.sum() < 2 or rep.sum() < 2:
        raise EstimatorError(f"The leave-out estimate needs at least 2 users "
                             f"per party, got {int(dem.sum())} Democrats and "
                             f"{int(rep.sum())} Republicans.")
    return dem, rep


def _leave_out_values(matrix: sparse.csr_matrix, own: np.ndarray,
                      other: np.ndarray) -> np.ndarray:
    """
    q_i . rho_{-i} for every user of the own group, where rho is the
    posterior of the own group with user i held out.
    """
    own_rows = matrix[own].tocoo()
    own_totals = np.asarray(matrix[own].sum(axis=1)).ravel().astype(float)
    own_sum = np.asarray(matrix[own].sum(axis=0)).ravel().astype(float)
    own_total = own_totals.sum()
    other_sum = np.asarray(matrix[other].sum(axis=0)).ravel().astype(float)
    other_freq = other_sum / other_sum.sum()

    rows, cols = own_rows.row, own_rows.col
    vals = own_rows.data.astype(float)
    m = own_totals[rows]
    q = vals / m
    own_freq = (own_sum[cols] - vals) / (own_total - m)
    denom = own_freq + other_freq[cols]
    # tokens absent from both held-out groups are left out of the product
    rho = np.divide(own_freq, denom, out=np.zeros_like(denom),
                    where=denom > 0)
    return np.bincount(rows, weights=q * rho, minlength=int(own.sum()))


def posterior_vector(counts: UserTokenCounts, user_id: str) -> PosteriorVector:
    """
    Democrat posterior of every retained token with user_id held out.
    """
    restricted, keep = _restrict(counts)
    _check_parties(restricted)
    i = restricted.users.index(user_id)
    matrix = restricted.counts.astype(float).toarray()
    held = np.ones(len(restricted), dtype=bool)
    held[i] = False
    dem = restricted.mask(PartyLabel.DEMOCRAT) & held
    rep = restricted.mask(PartyLabel.REPUBLICAN) & held
    q_dem = matrix[dem].sum(axis=0) / matrix[dem].sum()
    q_rep = matrix[rep].sum(axis=0) / matrix[rep].sum()
    denom = q_dem + q_rep
    rho = np.divide(q_dem, denom, out=np.full_like(denom, np.nan),
                    where=denom > 0)
    return PosteriorVector(rho, keep)


def leave_out(counts: UserTokenCounts) -> PolarizationEstimate:
    """
    Leave-out estimate of partisanship:
    1/2 (mean_D q_i . rho_{-i} + mean_R q_i . (1 - rho_{-i})),
    over tokens used by at least two users.
    """
    restricted, keep = _restrict(counts)
    dem, rep = _check_parties(restricted)
    matrix = restricted.counts
    dem_values = _leave_out_values(matrix, dem, rep)
    rep_values = _leave_out_values(matrix, rep, dem)
    dem_mean = float(dem_values.mean())
    rep_mean = float(rep_values.mean())
    per_user = {}
    dem_users = [u for u, d in zip(restricted.users, dem) if d]
    rep_users = [u for u, r in zip(restricted.users, rep) if r]
    per_user.update(zip(dem_users, map(float, dem_values)))
    per_user.update(zip(rep_users, map(float, rep_values)))
    return PolarizationEstimate(
        pi_lo=0.5 * (dem_mean + rep_mean),
        per_user=per_user,
        n_dem=len(dem_users),
        n_rep=len(rep_users),
        vocab_size_effective=len(keep),
        dem_mean=dem_mean,
        rep_mean=rep_mean,
    )


def plug_in(counts: UserTokenCounts) -> float:
    """
    Plug-in (maximum likelihood) partisanship from pooled group frequencies.
    Biased upward in small samples; kept for comparison with leave_out.
    """
    dem, rep = _check_parties(counts)
    c_dem = counts.group_counts(PartyLabel.DEMOCRAT).astype(float)
    c_rep = counts.group_counts(PartyLabel.REPUBLICAN).astype(float)
    q_dem = c_dem / c_dem.sum()
    q_rep = c_rep / c_rep.sum()
    denom = q_dem + q_rep
    rho = np.divide(q_dem, denom, out=np.zeros_like(denom), where=denom > 0)
    return float(0.5 * q_dem @ rho + 0.5 * q_rep @ (1.0 - rho))


def random_assignment_baseline(counts: UserTokenCounts, trials: int,
                               seed: int) -> [float]:
    """
    Leave-out estimates after shuffling party labels among users, which
    keeps the party ratio of the data.
    """
    if trials < 1:
        raise EstimatorError(f"The number of trials must be positive, "
                             f"got {trials}.")
    rng = np.random.default_rng(seed)
    labels = np.array(counts.labels, dtype=object)
    res = []
    for _ in range(trials):
        shuffled = rng.permutation(labels)
        res.append(leave_out(counts.relabel(list(shuffled))).pi_lo)
    return res


def day_buckets(tweets, event) -> dict:
    """
    Group tweets by day since the event date; day d is
    [date + d, date + d + 1) in UTC.
    """
    res = {}
    for tweet in tweets:
        res.setdefault(event.day_index(tweet.timestamp), []).append(tweet)
    return res


def estimate_or_missing(tweets, labels: dict, vocab,
                        stopwords=None, items=None):
    counts = count_user_tokens(tweets, vocab, labels, stopwords=stopwords,
                               items=items)
    try:
        return leave_out(counts)
    except EstimatorError as ex:
        logger.debug("Estimate is missing: %s", ex)
        return None


def temporal_series(tweets, labels: dict, vocab, event, days: int = 10,
                    stopwords=None, items=None) -> list:
    """
    Leave-out estimate for each of the first `days` days after the event.
    Days without 2 users per party are returned as None.
    :return: [(day, PolarizationEstimate or None)]
    """
    buckets = day_buckets(tweets, event)
    series = []
    for day in range(days):
        est = None
        if buckets.get(day):
            est = estimate_or_missing(buckets[day], labels, vocab,
                                      stopwords=stopwords, items=items)
        if est is None:
            logger.debug("Event %s day %d is missing.", event.event_id, day)
        series.append((day, est))
    return series


def series_trend(series) -> RegressionReport:
    """
    OLS slope of a temporal series on the day index; missing days dropped.
    """
    points = [(day, float(est)) for day, est in series if est is not None]
    if len(points) < 3:
        raise StatisticsError(f"A trend needs at least 3 present days, "
                              f"got {len(points)}.")
    days, values = zip(*points)
    return ols(values, np.array(days, dtype=float), names=['day'])


def pooled_day_regression(series_by_event: dict) -> RegressionReport:
    """
    OLS of the daily leave-out values of all events on the day index, with
    an indicator for every event but the first. Missing days are dropped.
    :param series_by_event: event_id -> [(day, estimate or None)]
    """
    points = [(ev, day, float(est))
              for ev in sorted(series_by_event)
              for day, est in series_by_event[ev] if est is not None]
    events = sorted({ev for ev, _, _ in points})
    columns = [[float(day) for _, day, _ in points]]
    names = ['day']
    for ev in events[1:]:
        columns.append([1.0 if p[0] == ev else 0.0 for p in points])
        names.append(f'event[{ev}]')
    if len(points) <= len(names) + 1:
        raise StatisticsError(f"The pooled regression needs more than "
                              f"{len(names) + 1} present days, got "
                              f"{len(points)}.")
    y = [value for _, _, value in points]
    return ols(y, np.array(columns, dtype=float).T, names=names)


def exclude_multiday_users(tweets, labels: dict = None, event=None
                           ) -> (TweetCollection, MultidayReport):
    """
    Remove every tweet of users who tweeted on two or more day buckets.
    The report counts users with a partisan label (all users if labels
    are not given).
    """
    tweets = list(tweets)

    def __bucket(tweet):
        return event.day_index(tweet.timestamp) if event else tweet.day

    days = {}
    for tweet in tweets:
        days.setdefault(tweet.user_id, set()).add(__bucket(tweet))
    multiday = {u for u, d in days.items() if len(d) >= 2}

    def __counted(user):
        if labels is None:
            return True
        label = labels.get(user)
        return label is not None and label.is_partisan

    counted = [u for u in days if __counted(u)]
    counted_tweets = [t for t in tweets if __counted(t.user_id)]
    report = MultidayReport(
        users_total=len(counted),
        users_removed=sum(1 for u in counted if u in multiday),
        tweets_total=len(counted_tweets),
        tweets_removed=sum(1 for t in counted_tweets if t.user_id in multiday),
    )
    kept = TweetCollection([t for t in tweets if t.user_id not in multiday])
    logger.info("Removed %d multi-day users (%.1f%% of users, %.1f%% of "
                "tweets).", report.users_removed, 100 * report.user_fraction,
                100 * report.tweet_fraction)
    return kept, report


def user_follow_regression(per_user: dict, followed_total: dict,
                           followed_own_party: dict, event_ids: dict
                           ) -> RegressionReport:
    """
    Standardized user-level leave-out values regressed on the number of
    followed politicians and the number from the user's own party, with
    event indicators. Coefficients are in SD units of the response.
    """
    keys = sorted(per_user)
    for name, other in (('followed_total', followed_total),
                        ('followed_own_party', followed_own_party),
                        ('event_ids', event_ids)):
        if set(other) != set(keys):
            raise StatisticsError(f"The map '{name}' has a different key set "
                                  f"than the user values.")
    y = np.array([per_user[k] for k in keys], dtype=float)
    sd = y.std(ddof=1) if len(y) > 1 else 0.0
    if sd == 0:
        raise StatisticsError("The user values have zero variance.")
    y = (y - y.mean()) / sd
    columns = [[followed_total[k] for k in keys],
               [followed_own_party[k] for k in keys]]
    names = ['followed_total', 'followed_own_party']
    events = sorted({event_ids[k] for k in keys})
    for ev in events[1:]:
        columns.append([1.0 if event_ids[k] == ev else 0.0 for k in keys])
        names.append(f'event[{ev}]')
    return ols(y, np.array(columns, dtype=float).T, names=names)


def event_regression(estimates: dict, events: dict,
                     covariates=('days',)) -> RegressionReport:
    """
    Cross-event regression of overall polarization on event properties.
    :param estimates: event_id -> pi_lo
    :param covariates: any of 'days' (since the first event), 'is_white',
                       'victims'
    """
    keys = sorted(estimates)
    first = min(events[k].date for k in keys)
    builders = {
        'days': lambda ev: float((ev.date - first).days),
        'is_white': lambda ev: float(ev.shooter_race == 'white'),
        'victims': lambda ev: float(ev.victims),
    }
    X = np.array([[builders[c](events[k]) for c in covariates]
                  for k in keys])
    y = [float(estimates[k]) for k in keys]
    return ols(y, X, names=list(covariates))


def write_estimates(rows, path):
    """
    :param rows: iterable of (event_id, day, PolarizationEstimate or None),
                 day is '' for the event level estimate
    """
    frame = pd.DataFrame(
        [[event_id, day, '', '', ''] if est is None else
         [event_id, day, f'{est.pi_lo:.12f}', est.n_dem, est.n_rep]
         for event_id, day, est in rows],
        columns=ESTIMATE_COLUMNS, dtype=object)
    frame.to_csv(path, index=False, lineterminator='\n')
