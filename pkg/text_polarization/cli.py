"""
Command line front end of the pipeline.

Every command reads the configured inputs and the files earlier commands
wrote under the output directory, writes its own files there and lists
them in manifest.json, so each command can be rerun on its own.
"""
import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
import pandas as pd
import yaml

from text_polarization.config import RunConfig
from text_polarization.corpus import TweetCollection, PartyLabel, \
    load_tweets, save_tweets, load_events, save_events, load_follow_edges, \
    save_follow_edges, load_handles, load_default_handles, load_labels, \
    save_labels, filter_relevant, assign_party, follow_counts, \
    partisan_coverage, state_validation
from text_polarization.devices import DEFAULT_MODALS, load_context_events, \
    grounding_log_odds, modal_partisanship, modal_hits, \
    modal_topic_representation, load_pronouns, pronoun_partisanship, \
    pronoun_topic_representation, modal_collocations, device_rows, \
    track_token, race_group_test
from text_polarization.embed import GloveTrace, train_glove, \
    load_embeddings, sif_weights, sentence_vectors, \
    first_principal_component, sif_embed
from text_polarization.errors import PolarizationException, ConfigError, \
    MissingArtifactError, EmptyInputError, EstimatorError, \
    StatisticsError, LogOddsError, TopicModelError, VocabularyError
from text_polarization.jobs import run_per_event
from text_polarization.lexica import token_log_odds, zscore_within_group, \
    top_partisan_items, load_lexicons, induce_lexicon, category_log_odds, \
    write_entries
from text_polarization.oracle import load_spec, generate, \
    true_partisanship, demo_corpus
from text_polarization.polarization import leave_out, plug_in, \
    random_assignment_baseline, temporal_series, series_trend, \
    exclude_multiday_users, estimate_or_missing, user_follow_regression, \
    event_regression, pooled_day_regression, write_estimates
from text_polarization.textprep import Vocab, UserTokenCounts, stem, \
    load_stopwords, build_event_vocab, build_joint_vocab, count_user_tokens
from text_polarization.topics import kmeans_cosine, assign_topics, \
    filter_ambiguous, tweets_by_topic, within_topic_partisanship, \
    between_topic_partisanship, topic_log_odds, nearest_stems, \
    gen_word_intrusion_items, gen_tweet_intrusion_items, \
    write_intrusion_items, daily_topic_polarization, sample_tweets, \
    topic_proportions, topic_partisan_items, write_assignments, \
    load_assignments

MANIFEST = 'manifest.json'
TWEETS_FILE = 'tweets.jsonl'
LABELS_FILE = 'labels.csv'
JOINT_VOCAB_FILE = 'joint_vocab.csv'
EMBEDDINGS_FILE = 'embeddings.txt'
ASSIGNMENTS_FILE = 'assignments_kept.csv'
TRACKED_WORDS = ('terrorist', 'crazy')

EXIT_FAILURE = 1
EXIT_MISSING = 2
EXIT_CONFIG = 3

DEMO_CONFIG = {
    'tweets': TWEETS_FILE,
    'follows': 'follows.csv',
    'events': 'events.csv',
    'seed': 7,
    'min_count': 5,
    'joint_min_count': 5,
    'joint_min_events': 2,
    'k': 4,
    'glove_dim': 20,
    'glove_iters': 10,
    'min_mentions': 20,
    'days': 3,
    'topic_days': 3,
    'baseline_trials': 5,
    'intrusion_items': 5,
    'collocation_min_events': 2,
}

logger = logging.getLogger(__name__)


class StageOutput:
    """
    Files written by one command below the output directory.
    """

    def __init__(self, config: RunConfig, stage: str):
        self.logger = logging.getLogger(self.__class__.__name__)
        self.root = config.output_dir
        self.stage = stage
        self.files = []
        self.info = {}

    def path(self, name) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(Path(name).as_posix())
        return path

    def write_json(self, name, data):
        with open(self.path(name), 'w', encoding='utf-8') as fd:
            json.dump(data, fd, sort_keys=True, indent=2)
            fd.write('\n')

    def write_frame(self, name, frame: pd.DataFrame):
        frame.to_csv(self.path(name), index=False, lineterminator='\n',
                     float_format='%.12g')

    def close(self) -> [Path]:
        path = self.root / MANIFEST
        manifest = {}
        if path.exists():
            with open(path, encoding='utf-8') as fd:
                manifest = json.load(fd)
        files = sorted(set(self.files))
        manifest[self.stage] = {'files': files, **self.info}
        self.root.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as fd:
            json.dump(manifest, fd, sort_keys=True, indent=2)
            fd.write('\n')
        self.logger.info("Stage %s wrote %d files to %s.", self.stage,
                         len(files), self.root)
        return [self.root / f for f in files]


def _artifact(config: RunConfig, name: str) -> Path:
    path = config.output_dir / name
    if not path.exists():
        raise MissingArtifactError(f"The artifact '{path}' is missing, run "
                                   f"the stage that writes it first.")
    return path


def _stage_tweets(config: RunConfig) -> TweetCollection:
    """
    Relevant tweets written by ingest, or the configured tweet file.
    """
    path = config.output_dir / TWEETS_FILE
    if not path.exists():
        path = config.require('tweets')
    tweets = load_tweets(path)
    if not len(tweets):
        raise EmptyInputError(f"The tweet file '{path}' has no tweets.")
    return tweets


def _stage_labels(config: RunConfig) -> dict:
    path = config.output_dir / LABELS_FILE
    if not path.exists() and config.labels is not None:
        path = config.require('labels')
    if not path.exists():
        raise MissingArtifactError(f"The artifact '{path}' is missing, run "
                                   f"the ingest stage first.")
    labels = load_labels(path)
    if not labels:
        raise EmptyInputError(f"The label file '{path}' has no users.")
    return labels


def _stage_counts(config: RunConfig, event_id: str) -> UserTokenCounts:
    labels = load_labels(_artifact(config, f'counts/{event_id}.labels.csv'))
    return UserTokenCounts.load(_artifact(config, f'vocab/{event_id}.csv'),
                                _artifact(config, f'counts/{event_id}.csv'),
                                labels)


def _selected_events(config: RunConfig, event_ids, tweets) -> dict:
    events = load_events(config.events)
    present = set(tweets.event_ids)
    unknown = sorted(present - set(events))
    if unknown:
        logger.warning("Tweets of events missing from the event table are "
                       "ignored: %s", unknown)
    if event_ids:
        missing = [e for e in event_ids if e not in events]
        if missing:
            raise ConfigError(f"Unknown events {missing}.")
        selected = sorted(set(event_ids))
    else:
        selected = sorted(present & set(events))
    if not selected:
        raise EmptyInputError("No tweet belongs to a selected event.")
    return {e: events[e] for e in selected}


def _event_tweets(tweets: TweetCollection, events: dict) -> dict:
    grouped = tweets.by_event()
    return {e: list(grouped.get(e, [])) for e in events}


def _handles(config: RunConfig) -> (set, set):
    if config.dem_handles is None and config.rep_handles is None:
        return load_default_handles()
    if config.dem_handles is None or config.rep_handles is None:
        raise ConfigError("Configure both handle lists or neither.")
    return (load_handles(config.require('dem_handles')),
            load_handles(config.require('rep_handles')))


def cmd_ingest(config: RunConfig, event_ids=None) -> [Path]:
    """
    Keep the tweets relevant to their event and infer party labels from
    the follow edges.
    """
    out = StageOutput(config, 'ingest')
    path = config.require('tweets')
    tweets = load_tweets(path)
    if not len(tweets):
        raise EmptyInputError(f"The tweet file '{path}' has no tweets.")
    events = _selected_events(config, event_ids, tweets)
    grouped = _event_tweets(tweets, events)
    relevant = run_per_event(
        lambda ev, tw: filter_relevant(tw, events[ev]), grouped, config.jobs)
    kept = TweetCollection([t for ev in sorted(relevant)
                            for t in relevant[ev]])
    if not len(kept):
        raise EmptyInputError("No tweet is relevant to the selected events.")
    dem_handles, rep_handles = _handles(config)
    edges = load_follow_edges(config.require('follows'))
    labels = assign_party(edges, dem_handles, rep_handles)
    save_tweets(kept, out.path(TWEETS_FILE))
    save_labels(labels, out.path(LABELS_FILE))

    rows = []
    for ev in sorted(relevant):
        users = {t.user_id for t in relevant[ev]}
        rows.append((ev, len(grouped[ev]), len(relevant[ev]), len(users),
                     sum(1 for u in users
                         if labels.get(u) is PartyLabel.DEMOCRAT),
                     sum(1 for u in users
                         if labels.get(u) is PartyLabel.REPUBLICAN)))
    out.write_frame('ingest_summary.csv', pd.DataFrame(
        rows, columns=['event_id', 'tweets', 'relevant', 'users', 'n_dem',
                       'n_rep']))
    tweeting = {u: labels.get(u, PartyLabel.UNASSIGNED)
                for u in kept.user_ids}
    out.info = {'skipped': tweets.skipped,
                'coverage': partisan_coverage(tweeting)}
    if config.vote_share is not None:
        frame = pd.read_csv(config.require('vote_share'), dtype={'state': str})
        shares = dict(zip(frame['state'].str.upper(), frame['rep_share']))
        report, per_state = state_validation(kept, labels, shares)
        out.write_json('state_validation.json', json.loads(report.to_json()))
        out.write_frame('state_validation.csv', per_state)
    return out.close()


def cmd_vocab(config: RunConfig, event_ids=None) -> [Path]:
    """
    Event vocabularies and user x token counts of every event.
    """
    out = StageOutput(config, 'vocab')
    tweets = _stage_tweets(config)
    labels = _stage_labels(config)
    events = _selected_events(config, event_ids, tweets)
    stopwords = load_stopwords(config.stopwords)

    def __build(event_id, event_tweets):
        vocab = build_event_vocab(event_tweets, config.min_count, stopwords)
        if not len(vocab):
            logger.warning("Event %s has no item with at least %d "
                           "occurrences.", event_id, config.min_count)
        return count_user_tokens(event_tweets, vocab, labels, stopwords)

    res = run_per_event(__build, _event_tweets(tweets, events), config.jobs)
    for ev, counts in res.items():
        counts.save(out.path(f'vocab/{ev}.csv'), out.path(f'counts/{ev}.csv'),
                    out.path(f'counts/{ev}.labels.csv'))
    out.info = {'vocab_sizes': {ev: len(c.vocab) for ev, c in res.items()}}
    return out.close()


def _event_polarization(config, events, labels, stopwords, seed):
    def __estimate(event_id, event_tweets):
        event = events[event_id]
        counts = _stage_counts(config, event_id)
        res = {'estimate': None, 'plug_in': None, 'baseline': [],
               'trend': None, 'dem_items': [], 'rep_items': []}
        try:
            res['estimate'] = leave_out(counts)
            res['plug_in'] = plug_in(counts)
            if config.baseline_trials:
                res['baseline'] = random_assignment_baseline(
                    counts, config.baseline_trials,
                    seed=[seed, sorted(events).index(event_id)])
        except EstimatorError as ex:
            logger.warning("Event %s has no estimate: %s", event_id, ex)
        res['series'] = temporal_series(event_tweets, labels, counts.vocab,
                                        event, days=config.days,
                                        stopwords=stopwords)
        try:
            res['trend'] = series_trend(res['series'])
        except StatisticsError as ex:
            logger.debug("Event %s has no trend: %s", event_id, ex)
        kept, report = exclude_multiday_users(event_tweets, labels, event)
        res['multiday'] = report
        res['multiday_estimate'] = estimate_or_missing(
            kept, labels, counts.vocab, stopwords=stopwords)
        if len(counts.vocab) and len(counts):
            table = token_log_odds(
                dict(zip(counts.vocab.entries,
                         counts.group_counts(PartyLabel.DEMOCRAT))),
                dict(zip(counts.vocab.entries,
                         counts.group_counts(PartyLabel.REPUBLICAN))),
                prior_alpha=config.prior_alpha)
            try:
                res['dem_items'], res['rep_items'] = top_partisan_items(table)
            except LogOddsError as ex:
                logger.debug("Event %s: %s", event_id, ex)
        return res
    return __estimate


def cmd_polarize(config: RunConfig, event_ids=None) -> [Path]:
    """
    Leave-out partisanship of every event, its daily series, the label
    permutation baseline and the robustness checks.
    """
    out = StageOutput(config, 'polarize')
    tweets = _stage_tweets(config)
    labels = _stage_labels(config)
    events = _selected_events(config, event_ids, tweets)
    stopwords = load_stopwords(config.stopwords)
    seed = config.require_seed('polarize') if config.baseline_trials else None
    res = run_per_event(
        _event_polarization(config, events, labels, stopwords, seed),
        _event_tweets(tweets, events), config.jobs)

    rows, baseline, summary, multiday, items = [], [], [], [], []
    for ev, r in res.items():
        est = r['estimate']
        rows.append((ev, '', est))
        rows.extend((ev, day, day_est) for day, day_est in r['series'])
        baseline.extend((ev, n, value)
                        for n, value in enumerate(r['baseline']))
        trend = r['trend']
        summary.append((
            ev, est.pi_lo if est else None, r['plug_in'],
            float(np.mean(r['baseline'])) if r['baseline'] else None,
            est.n_dem if est else 0, est.n_rep if est else 0,
            est.vocab_size_effective if est else 0,
            trend.coefficients['day'] if trend else None,
            trend.p_values['day'] if trend else None))
        rep, md_est = r['multiday'], r['multiday_estimate']
        multiday.append((ev, rep.users_removed, rep.user_fraction,
                         rep.tweets_removed, rep.tweet_fraction,
                         md_est.pi_lo if md_est else None))
        for party, party_items in (('Democrat', r['dem_items']),
                                   ('Republican', r['rep_items'])):
            items.extend((ev, party, rank + 1, item)
                         for rank, item in enumerate(party_items))

    write_estimates(rows, out.path('polarization.csv'))
    out.write_frame('baseline.csv', pd.DataFrame(
        baseline, columns=['event_id', 'trial', 'pi_lo']))
    out.write_frame('polarization_summary.csv', pd.DataFrame(
        summary, columns=['event_id', 'pi_lo', 'plug_in', 'baseline_mean',
                          'n_dem', 'n_rep', 'vocab_size', 'trend_slope',
                          'trend_p']))
    out.write_frame('multiday.csv', pd.DataFrame(
        multiday, columns=['event_id', 'users_removed', 'user_fraction',
                           'tweets_removed', 'tweet_fraction', 'pi_lo']))
    out.write_frame('partisan_items.csv', pd.DataFrame(
        items, columns=['event_id', 'party', 'rank', 'item']))

    estimates = {ev: r['estimate'].pi_lo for ev, r in res.items()
                 if r['estimate'] is not None}
    try:
        report = event_regression(estimates, events)
        out.write_json('event_regression.json', json.loads(report.to_json()))
    except (StatisticsError, ValueError) as ex:
        logger.warning("No cross-event regression: %s", ex)
    try:
        report = pooled_day_regression(
            {ev: r['series'] for ev, r in res.items()})
        out.write_json('day_regression.json', json.loads(report.to_json()))
    except StatisticsError as ex:
        logger.warning("No pooled day regression: %s", ex)
    if config.follows is not None:
        _follow_regression(config, out, res, labels)
    out.info = {'seed': seed, 'events': sorted(res)}
    return out.close()


def _follow_regression(config, out, res, labels):
    dem_handles, rep_handles = _handles(config)
    edges = load_follow_edges(config.require('follows'))
    total, own = follow_counts(edges, labels, dem_handles, rep_handles)
    per_user, followed, followed_own, event_of = {}, {}, {}, {}
    for ev, r in res.items():
        if r['estimate'] is None:
            continue
        for user, value in r['estimate'].per_user.items():
            if user not in total:
                continue
            key = f'{ev}/{user}'
            per_user[key] = value
            followed[key] = total[user]
            followed_own[key] = own[user]
            event_of[key] = ev
    try:
        report = user_follow_regression(per_user, followed, followed_own,
                                        event_of)
    except StatisticsError as ex:
        logger.warning("No follow regression: %s", ex)
        return
    out.write_json('follow_regression.json', json.loads(report.to_json()))


def _topic_analysis(config, events, labels, kept, stopwords):
    def __analyze(event_id, event_tweets):
        vocab = Vocab.load(_artifact(config, f'vocab/{event_id}.csv'))
        ids = {t.tweet_id for t in event_tweets}
        assignments = [a for a in kept if a.tweet_id in ids]
        res = {'per_topic': {}, 'within': None, 'between': None,
               'log_odds': None, 'daily': {}, 'items': {}}
        if not assignments:
            logger.warning("Event %s has no assigned tweets.", event_id)
            return res

        def __counts(tweets, labels_):
            return count_user_tokens(tweets, vocab, labels_, stopwords)

        grouped = tweets_by_topic(event_tweets, assignments)
        try:
            res['per_topic'], res['within'] = within_topic_partisanship(
                grouped, __counts, labels)
        except TopicModelError as ex:
            logger.warning("Event %s: %s", event_id, ex)
        try:
            res['between'] = between_topic_partisanship(assignments, labels,
                                                        event_tweets)
        except EstimatorError as ex:
            logger.warning("Event %s: %s", event_id, ex)
        try:
            res['log_odds'] = topic_log_odds(assignments, labels,
                                             event_tweets,
                                             prior_alpha=config.prior_alpha)
        except LogOddsError as ex:
            logger.warning("Event %s: %s", event_id, ex)
        res['items'] = topic_partisan_items(grouped, __counts, labels,
                                            prior_alpha=config.prior_alpha)
        res['daily'] = daily_topic_polarization(
            event_tweets, assignments, labels, vocab, events[event_id],
            days=config.topic_days, stopwords=stopwords)
        return res
    return __analyze


def cmd_topics(config: RunConfig, event_ids=None) -> [Path]:
    """
    Embed the sampled tweets, cluster them into k topics, assign every
    tweet and measure partisanship within and between topics.
    """
    out = StageOutput(config, 'topics')
    seed = config.require_seed('topics')
    tweets = _stage_tweets(config)
    labels = _stage_labels(config)
    events = _selected_events(config, event_ids, tweets)
    stopwords = load_stopwords(config.stopwords)
    grouped = _event_tweets(tweets, events)

    samples = sample_tweets(grouped, config.sample_size, seed)
    joint = build_joint_vocab(samples, config.joint_min_count,
                              config.joint_min_events, stopwords)
    if not len(joint):
        raise VocabularyError("The joint vocabulary is empty.")
    sample_list = [t for ev in sorted(samples) for t in samples[ev]]
    if config.embeddings is not None:
        table = load_embeddings(config.require('embeddings'))
    else:
        trace = GloveTrace()
        table = train_glove(sample_list, joint, dim=config.glove_dim,
                            window=config.glove_window,
                            x_max=config.glove_x_max,
                            alpha=config.glove_alpha,
                            iters=config.glove_iters, seed=seed,
                            learning_rate=config.glove_learning_rate,
                            stopwords=stopwords, trace=trace)
        out.write_frame('glove_objective.csv', pd.DataFrame(
            list(enumerate(trace.objective)), columns=['epoch', 'objective']))
    joint.save(out.path(JOINT_VOCAB_FILE))
    table.save(out.path(EMBEDDINGS_FILE))

    weights = sif_weights(sample_list, joint, stopwords)
    _, matrix, mask = sentence_vectors(sample_list, table, weights, stopwords)
    pc1 = first_principal_component(matrix[mask])
    sample_emb = sif_embed(sample_list, table, weights, pc1, stopwords)
    model = kmeans_cosine([e.e for e in sample_emb if e.embeddable],
                          config.k, seed)
    all_tweets = [t for ev in sorted(grouped) for t in grouped[ev]]
    assignments = assign_topics(
        sif_embed(all_tweets, table, weights, pc1, stopwords), model)
    kept, removed = filter_ambiguous(assignments, config.percentile)
    model.save(out.path('topic_model.json'))
    write_assignments(assignments, out.path('assignments.csv'))
    write_assignments(kept, out.path(ASSIGNMENTS_FILE))

    res = run_per_event(
        _topic_analysis(config, events, labels, kept, stopwords), grouped,
        config.jobs)
    _write_topic_results(out, res)
    shares = topic_proportions(kept, all_tweets)
    out.write_frame('topic_proportions.csv', pd.DataFrame(
        [(ev, x, share) for ev, per in shares.items()
         for x, share in per.items()],
        columns=['event_id', 'topic', 'share']))
    nearest = nearest_stems(model, table, vocab=joint)
    out.write_frame('nearest_stems.csv', pd.DataFrame(
        [(x, rank + 1, s) for x, stems in nearest.items()
         for rank, s in enumerate(stems)],
        columns=['topic', 'rank', 'stem']))
    if config.intrusion_items:
        _write_intrusion(config, out, model, table, joint, assignments,
                         all_tweets, seed)
    out.info = {'seed': seed, 'k': model.k, 'inertia': model.inertia,
                'assigned': len(assignments), 'removed': len(removed)}
    return out.close()


def _write_topic_results(out, res):
    partisanship, daily, items, tables = [], [], [], {}
    for ev, r in res.items():
        partisanship.append((ev, 'within', '', r['within']))
        partisanship.append((ev, 'between', '', r['between']))
        partisanship.extend((ev, 'topic', x, value)
                            for x, value in r['per_topic'].items())
        daily.extend((ev, x, day, est.pi_lo if est else None)
                     for (x, day), est in sorted(r['daily'].items()))
        for x, (dem, rep) in r['items'].items():
            items.extend((ev, x, 'Democrat', rank + 1, item)
                         for rank, item in enumerate(dem))
            items.extend((ev, x, 'Republican', rank + 1, item)
                         for rank, item in enumerate(rep))
        if r['log_odds'] is not None:
            tables[ev] = r['log_odds']
    out.write_frame('topic_partisanship.csv', pd.DataFrame(
        partisanship, columns=['event_id', 'measure', 'topic', 'pi_lo']))
    out.write_frame('topic_daily.csv', pd.DataFrame(
        daily, columns=['event_id', 'topic', 'day', 'pi_lo']))
    out.write_frame('topic_partisan_items.csv', pd.DataFrame(
        items, columns=['event_id', 'topic', 'party', 'rank', 'item']))
    write_entries([((ev, e.item), e) for ev, table in sorted(tables.items())
                   for e in table],
                  out.path('topic_log_odds.csv'), columns=('event_id', 'item'))
    standardized = {}
    for ev, table in tables.items():
        try:
            standardized[ev] = zscore_within_group({ev: table})[ev]
        except LogOddsError as ex:
            logger.warning("Event %s topic log-odds are not standardized: "
                           "%s", ev, ex)
    write_entries([((ev, e.item), e)
                   for ev, table in sorted(standardized.items())
                   for e in table],
                  out.path('topic_log_odds_std.csv'),
                  columns=('event_id', 'item'))


def _write_intrusion(config, out, model, table, joint, assignments,
                     tweets, seed):
    texts = {t.tweet_id: t.text for t in tweets}
    builders = (
        ('word', lambda: gen_word_intrusion_items(
            model, table, config.intrusion_items, seed, vocab=joint)),
        ('tweet', lambda: gen_tweet_intrusion_items(
            assignments, config.intrusion_items, seed, texts=texts)),
    )
    for name, build in builders:
        try:
            items = build()
        except TopicModelError as ex:
            logger.warning("No %s intrusion items: %s", name, ex)
            continue
        write_intrusion_items(items, out.path(f'intrusion/{name}_task.jsonl'),
                              out.path(f'intrusion/{name}_key.jsonl'))


def cmd_affect(config: RunConfig, event_ids=None) -> [Path]:
    """
    Induce the affect lexicons from the embeddings and measure the partisan
    log-odds of every category per event and per topic.
    """
    out = StageOutput(config, 'affect')
    tweets = _stage_tweets(config)
    labels = _stage_labels(config)
    events = _selected_events(config, event_ids, tweets)
    stopwords = load_stopwords(config.stopwords)
    joint = Vocab.load(_artifact(config, JOINT_VOCAB_FILE))
    table = load_embeddings(config.require('embeddings')
                            if config.embeddings is not None
                            else _artifact(config, EMBEDDINGS_FILE))
    bundled = load_lexicons(config.lexicons)
    if not bundled:
        raise MissingArtifactError("No lexicon files were found.")
    selected = TweetCollection([t for t in tweets if t.event_id in events])
    assignments = None
    if (config.output_dir / ASSIGNMENTS_FILE).exists():
        assignments = load_assignments(config.output_dir / ASSIGNMENTS_FILE)

    rows, topic_rows = [], []
    for category in sorted(bundled):
        lexicon = bundled[category]
        if lexicon.seeds and all(s in table for s in lexicon.seeds):
            lexicon = induce_lexicon(lexicon.seeds, category, table, joint,
                                     config.lexicon_size)
        else:
            logger.warning("The seeds of '%s' are not embedded, the bundled "
                           "stems are used.", category)
        lexicon.save(out.path(f'lexicons/{category}.txt'))
        try:
            entries = category_log_odds(selected, labels, lexicon, joint,
                                        stopwords, config.prior_alpha)
        except LogOddsError as ex:
            logger.warning("%s", ex)
            continue
        rows.extend(((category, ev), e) for ev, e in entries.items())
        if assignments is None:
            continue
        for x, topic_tweets in tweets_by_topic(selected, assignments).items():
            entries = category_log_odds(topic_tweets, labels, lexicon, joint,
                                        stopwords, config.prior_alpha)
            topic_rows.extend(((category, ev, x), e)
                              for ev, e in entries.items())
    write_entries(rows, out.path('affect.csv'),
                  columns=('category', 'event_id'))
    if assignments is not None:
        write_entries(sorted(topic_rows, key=lambda r: r[0]),
                      out.path('affect_topics.csv'),
                      columns=('category', 'event_id', 'topic'))
    return out.close()


def cmd_devices(config: RunConfig, event_ids=None) -> [Path]:
    """
    Grounding, modals, pronouns, modal collocations and tracked tokens.
    """
    out = StageOutput(config, 'devices')
    tweets = _stage_tweets(config)
    labels = _stage_labels(config)
    events = _selected_events(config, event_ids, tweets)
    grouped = _event_tweets(tweets, events)
    selected = TweetCollection([t for ev in sorted(grouped)
                                for t in grouped[ev]])
    keywords, focal = load_context_events(config.context_events)

    def __grounding(event_id, event_tweets):
        exclude = [name for name, ev in focal.items() if ev == event_id]
        return grounding_log_odds(event_tweets, labels, keywords,
                                  config.min_mentions, exclude,
                                  config.prior_alpha)

    grounding = run_per_event(__grounding, grouped, config.jobs)
    out.write_frame('grounding.csv', pd.DataFrame(
        [(ev, r.context_event, r.mentions_dem, r.mentions_rep, r.delta, r.z,
          r.dem_share, r.rep_share)
         for ev, reports in grounding.items() for r in reports],
        columns=['event_id', 'context_event', 'mentions_dem', 'mentions_rep',
                 'delta', 'z', 'dem_share', 'rep_share']))

    modals = modal_partisanship(selected, labels,
                                prior_alpha=config.prior_alpha)
    write_entries(device_rows('modal', modals), out.path('modals.csv'))
    categories = load_pronouns(config.pronouns)
    pronouns = pronoun_partisanship(selected, labels, categories,
                                    prior_alpha=config.prior_alpha)
    write_entries(device_rows('pronoun', pronouns), out.path('pronouns.csv'))

    colloc = []
    for modal in DEFAULT_MODALS:
        for r in modal_collocations(
                selected, labels, modal, z_threshold=config.z_threshold,
                min_events=config.collocation_min_events,
                prior_alpha=config.prior_alpha):
            colloc.append((modal, r.collocation, r.side.value, len(r.events),
                           float(np.mean(list(r.events.values())))))
    out.write_frame('collocations.csv', pd.DataFrame(
        colloc, columns=['modal', 'collocation', 'party', 'n_events',
                         'mean_z']))

    if (config.output_dir / ASSIGNMENTS_FILE).exists():
        assignments = load_assignments(config.output_dir / ASSIGNMENTS_FILE)
        _write_representation(out, assignments, selected, categories)
    _write_tracked(config, out, events)
    return out.close()


def _write_representation(out, assignments, tweets, categories):
    ids = {t.tweet_id for t in tweets}
    assignments = [a for a in assignments if a.tweet_id in ids]
    representations = []
    hits = modal_hits(tweets)
    for modal in DEFAULT_MODALS:
        try:
            representations.append(('modal', modal_topic_representation(
                assignments, hits[modal], modal)))
        except LogOddsError as ex:
            logger.warning("%s", ex)
    for rep in pronoun_topic_representation(assignments, tweets,
                                            categories).values():
        representations.append(('pronoun', rep))
    out.write_frame('topic_representation.csv', pd.DataFrame(
        [(kind, rep.modal, x, value, rep.f_x[x], rep.f_x_m[x])
         for kind, rep in representations
         for x, value in rep.per_topic.items()],
        columns=['kind', 'name', 'topic', 'representation', 'f_x',
                 'f_x_m']))


def _write_tracked(config, out, events):
    if not all((config.output_dir / f'counts/{ev}.csv').exists()
               for ev in events):
        logger.warning("Tracked tokens need the vocab stage, skipped.")
        return
    counts = {ev: _stage_counts(config, ev) for ev in events}
    res = {}
    for word in TRACKED_WORDS:
        token = stem(word)
        try:
            report = track_token(token, counts, events,
                                 prior_alpha=config.prior_alpha)
        except LogOddsError as ex:
            logger.info("%s", ex)
            continue
        try:
            t, p, _ = race_group_test(report)
            test = {'t': t, 'p': p}
        except StatisticsError as ex:
            logger.debug("No group test for '%s': %s", token, ex)
            test = None
        res[token] = {'per_event': {ev: e.delta
                                    for ev, e in report.per_event.items()},
                      'groups': report.summary(), 'test': test}
    out.write_json('tracked_tokens.json', res)


def _write_demo_corpus(directory, seed: int) -> [Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    tweets, _, events, follows = demo_corpus(seed=seed)
    save_tweets(tweets, directory / TWEETS_FILE)
    save_events(events, directory / 'events.csv')
    save_follow_edges(follows, directory / 'follows.csv')
    with open(directory / 'config.yaml', 'w', encoding='utf-8') as fd:
        yaml.safe_dump(DEMO_CONFIG, fd, sort_keys=False)
    logger.info("Demo corpus of %d tweets written to %s.", len(tweets),
                directory)
    return [directory / n for n in (TWEETS_FILE, 'events.csv', 'follows.csv',
                                    'config.yaml')]


def cmd_oracle(config: RunConfig, spec_path=None, corpus_dir=None) -> [Path]:
    """
    Generate a corpus with known partisanship and compare the estimates
    with the true value.
    """
    out = StageOutput(config, 'oracle')
    spec = load_spec(spec_path)
    if config.seed is not None:
        spec.seed = config.seed
    counts, tweets = generate(spec)
    est = leave_out(counts)
    truth = true_partisanship(spec)
    write_estimates([(spec.event_id, '', est)],
                    out.path('oracle_estimate.csv'))
    save_tweets(tweets, out.path('oracle_tweets.jsonl'))
    summary = {'true': truth, 'pi_lo': est.pi_lo, 'plug_in': plug_in(counts),
               'n_dem': est.n_dem, 'n_rep': est.n_rep, 'seed': spec.seed}
    out.write_json('oracle.json', summary)
    logger.info("True partisanship %.4f, leave-out %.4f, plug-in %.4f.",
                truth, est.pi_lo, summary['plug_in'])
    if corpus_dir is not None:
        written = _write_demo_corpus(corpus_dir, spec.seed)
        out.info['corpus'] = [p.as_posix() for p in written]
    return out.close()


def _read_stage(config: RunConfig, name: str):
    path = config.output_dir / name
    if not path.exists():
        logger.info("The report skips the missing '%s'.", name)
        return None
    return pd.read_csv(path)


def _report_polarization(config):
    frames = []
    series = _read_stage(config, 'polarization.csv')
    if series is not None:
        series = series[series['day'].notna()]
        frames.append(pd.DataFrame({
            'event_id': series['event_id'], 'day': series['day'].astype(int),
            'measure': 'leave_out', 'value': series['pi_lo']}))
    daily = _read_stage(config, 'topic_daily.csv')
    if daily is not None:
        frames.append(pd.DataFrame({
            'event_id': daily['event_id'], 'day': daily['day'],
            'measure': [f'topic{x:02d}' for x in daily['topic']],
            'value': daily['pi_lo']}))
    if not frames:
        return None
    return pd.concat(frames, ignore_index=True).sort_values(
        ['event_id', 'measure', 'day'], kind='mergesort')


def _report_topics(config):
    frame = _read_stage(config, 'topic_log_odds_std.csv')
    if frame is None:
        return None
    return frame[['event_id', 'item', 'delta', 'z']].rename(
        columns={'item': 'topic'})


def _report_affect(config):
    frame = _read_stage(config, 'affect.csv')
    if frame is None:
        return None
    return frame[['category', 'event_id', 'delta', 'z']]


def _report_modals(config):
    frame = _read_stage(config, 'modals.csv')
    if frame is None:
        return None
    return frame[['item', 'event_id', 'delta', 'z']].rename(
        columns={'item': 'modal'})


def _report_grounding(config):
    frame = _read_stage(config, 'grounding.csv')
    if frame is None:
        return None
    long = frame.melt(id_vars=['event_id', 'context_event'],
                      value_vars=['dem_share', 'rep_share'],
                      var_name='party', value_name='share')
    long['party'] = long['party'].map({'dem_share': 'Democrat',
                                       'rep_share': 'Republican'})
    return long.sort_values(['event_id', 'context_event', 'party'],
                            kind='mergesort')


REPORTS = (
    ('polarization_over_time.csv', _report_polarization),
    ('topic_log_odds.csv', _report_topics),
    ('affect.csv', _report_affect),
    ('modals.csv', _report_modals),
    ('grounding.csv', _report_grounding),
)


def cmd_report(config: RunConfig) -> [Path]:
    """
    Collate the stage files into long format tables, one per figure.
    """
    out = StageOutput(config, 'report')
    written = 0
    for name, build in REPORTS:
        frame = build(config)
        if frame is None:
            continue
        out.write_frame(f'report/{name}', frame)
        written += 1
    if not written:
        raise MissingArtifactError(f"No stage files found in "
                                   f"'{config.output_dir}'.")
    return out.close()


def _config(args) -> RunConfig:
    return RunConfig.load(args.config, seed=args.seed, output_dir=args.out,
                          jobs=args.jobs)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog='textpolar',
        description='Measure linguistic polarization of party-labeled tweets')
    parser.add_argument('-v', '--verbose', help='Verbose.',
                        action='store_true')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-c', '--config', help='YAML configuration file.')
    common.add_argument('-e', '--event', action='append', dest='events',
                        help='Event id, repeatable (default all events).')
    common.add_argument('-j', '--jobs', type=int,
                        help='Events processed in parallel.')
    common.add_argument('-s', '--seed', type=int,
                        help='Seed of the stochastic stages.')
    common.add_argument('-o', '--out', help='Output directory.')
    subparsers = parser.add_subparsers(help='sub-command help')

    stages = (
        ('ingest', cmd_ingest, 'Filter relevant tweets and label users.'),
        ('vocab', cmd_vocab, 'Build event vocabularies and token counts.'),
        ('polarize', cmd_polarize, 'Leave-out partisanship per event.'),
        ('topics', cmd_topics, 'Embed, cluster and decompose by topic.'),
        ('affect', cmd_affect, 'Affect lexicons and their log-odds.'),
        ('devices', cmd_devices, 'Grounding, modals and pronouns.'),
    )
    for name, func, help_text in stages:
        parser_stage = subparsers.add_parser(name, parents=[common],
                                             help=help_text)
        parser_stage.set_defaults(
            func=lambda args, func=func: func(_config(args), args.events))
    # Oracle
    parser_oracle = subparsers.add_parser(
        'oracle', parents=[common],
        help='Estimate partisanship of a synthetic corpus.')
    parser_oracle.add_argument('--spec', help='Generative spec (YAML), '
                                              'default is the bundled demo.')
    parser_oracle.add_argument('--corpus',
                               help='Also write the toy corpus and its '
                                    'config to this directory.')
    parser_oracle.set_defaults(
        func=lambda args: cmd_oracle(_config(args), args.spec, args.corpus))
    # Report
    parser_report = subparsers.add_parser(
        'report', parents=[common], help='Collate figure-ready tables.')
    parser_report.set_defaults(func=lambda args: cmd_report(_config(args)))

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    if not hasattr(args, 'func'):
        parser.print_help()
        return EXIT_FAILURE
    try:
        args.func(args)
    except (MissingArtifactError, EmptyInputError) as ex:
        return _fail(ex, EXIT_MISSING)
    except ConfigError as ex:
        return _fail(ex, EXIT_CONFIG)
    except PolarizationException as ex:
        return _fail(ex, EXIT_FAILURE)
    return 0


def _fail(ex: Exception, code: int) -> int:
    message = ' '.join(str(ex).split())
    print(f"error={ex.__class__.__name__} message={message}",
          file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
