from datetime import date

import numpy as np
import pytest

from tests.helpers import D, R, U, make_tweets, write_jsonl, timestamp
from text_polarization.corpus import PartyLabel, EventMeta, FollowEdge, \
    TweetCollection, TweetRecord, load_tweets, save_tweets, load_events, \
    save_events, race_group, load_default_handles, load_follow_edges, \
    save_follow_edges, filter_relevant, assign_party, follow_counts, \
    partisan_coverage, state_validation, lemma_matches, DEFAULT_LEMMAS
from text_polarization.errors import CorpusError
from text_polarization.textprep import stem

VEGAS = EventMeta('vegas', date(2017, 10, 1), ('vegas', 'las vegas'),
                  shooter_race='white')


def _tweet(n, text='x', **kwargs):
    rec = {'tweet_id': str(n), 'user_id': 'u', 'event_id': 'vegas',
           'timestamp': timestamp('2017-10-01'), 'text': text}
    rec.update(kwargs)
    return rec


class TestLoadTweets:

    def test_jsonl(self, tmp_path):
        path = tmp_path / 'tweets.jsonl'
        write_jsonl(path, [_tweet(1), _tweet(2), _tweet(3)])
        tweets = load_tweets(path)
        assert [t.tweet_id for t in tweets] == ['1', '2', '3']
        assert tweets.skipped == 0

    def test_malformed_skipped(self, tmp_path):
        path = tmp_path / 'tweets.jsonl'
        write_jsonl(path, [_tweet(1), {'tweet_id': '2'}, _tweet(1), [1, 2]])
        with open(path, 'a', encoding='utf-8') as fd:
            fd.write('{not json\n\n')
        tweets = load_tweets(path)
        assert len(tweets) == 1
        assert tweets.skipped == 4

    def test_csv_roundtrip(self, tmp_path):
        tweets = make_tweets([('a', 'Pray, for "Vegas"'), ('b', 'gun\nlaw')])
        save_tweets(tweets, tmp_path / 'tweets.csv')
        assert load_tweets(tmp_path / 'tweets.csv').records == tweets.records

    def test_jsonl_keeps_state(self, tmp_path):
        tweets = TweetCollection([TweetRecord('1', 'u', 'e', 1.5, 't', 'TX')])
        save_tweets(tweets, tmp_path / 'tweets.jsonl')
        assert load_tweets(tmp_path / 'tweets.jsonl')[0].state == 'TX'

    def test_unsupported_format(self, tmp_path):
        with pytest.raises(CorpusError):
            load_tweets(tmp_path / 'tweets.xml')

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusError):
            load_tweets(tmp_path / 'missing.jsonl')


class TestEvents:

    def test_bundled_table(self):
        events = load_events()
        assert len(events) == 21
        assert events['san_bernardino'].shooter_race == 'person_of_color'
        assert events['colorado_springs'].shooter_race == 'white'
        assert 'coloradosprings' in events['colorado_springs'].keywords

    def test_save_load(self, tmp_path):
        save_events({'vegas': VEGAS}, tmp_path / 'events.csv')
        assert load_events(tmp_path / 'events.csv') == {'vegas': VEGAS}

    @pytest.mark.parametrize("race,group", [
        ('White', 'white'),
        ('Middle Eastern', 'person_of_color'),
        ('Mixed', 'person_of_color'),
        ('black', 'person_of_color'),
        ('', 'unknown'),
    ])
    def test_race_group(self, race, group):
        assert race_group(race) == group

    def test_day_index(self):
        assert VEGAS.day_index(timestamp('2017-10-01', 23)) == 0
        assert VEGAS.day_index(timestamp('2017-10-03', 0)) == 2

    def test_no_keywords(self):
        with pytest.raises(CorpusError):
            EventMeta('x', date(2017, 1, 1), ())


class TestFilterRelevant:

    @pytest.mark.parametrize("text,kept", [
        ("Praying for the Vegas victims", True),
        ("Las Vegas shooting is horrible", True),
        ("#VegasStrong #GunViolence", True),
        ("Vegas is fun", False),
        ("another shooting in Dallas", False),
    ])
    def test_relevant(self, text, kept):
        tweets = make_tweets([('a', text)])
        assert (len(filter_relevant(tweets, VEGAS)) == 1) is kept

    @pytest.mark.parametrize("token,matched", [
        ('#LasVegasShooting', True),
        ('#GunViolence', True),
        ('#USAShooting', True),
        ('#Skills', False),
        ('#SkillsTraining', False),
        ('#vegasshooting', True),
        ('#skills', True),
        ('killed', True),
        ('skills', False),
    ])
    def test_lemma_matches(self, token, matched):
        lemma_stems = frozenset(stem(lemma) for lemma in DEFAULT_LEMMAS)
        assert lemma_matches(token, lemma_stems) is matched

    def test_idempotent(self):
        tweets = make_tweets([('a', "Praying for the Vegas victims"),
                              ('b', "Vegas is fun"),
                              ('c', "#VegasStrong #GunViolence"),
                              ('d', "Vegas #Skills workshop"),
                              ('e', "Las Vegas shooting is horrible")])
        once = filter_relevant(tweets, VEGAS)
        twice = filter_relevant(once, VEGAS)
        assert [t.tweet_id for t in once] == ['ev-0', 'ev-2', 'ev-4']
        assert [t.tweet_id for t in twice] == [t.tweet_id for t in once]

    def test_empty_lemmas(self):
        with pytest.raises(CorpusError):
            filter_relevant(make_tweets([]), VEGAS, lemma_list=())


class TestParty:

    @pytest.fixture
    def edges(self):
        return [FollowEdge('a', 'd1'), FollowEdge('a', 'd2'),
                FollowEdge('a', 'r1'), FollowEdge('b', '@R1'),
                FollowEdge('c', 'd1'), FollowEdge('c', 'r1'),
                FollowEdge('e', 'nobody')]

    def test_assign(self, edges):
        labels = assign_party(edges, {'d1', 'd2'}, {'r1'})
        assert labels == {'a': D, 'b': R, 'c': U, 'e': U}

    @pytest.mark.parametrize("seed", range(5))
    def test_swap_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        dem = {f'd{n}' for n in range(6)}
        rep = {f'r{n}' for n in range(6)}
        handles = sorted(dem | rep) + ['other']
        edges = [FollowEdge(f'u{int(rng.integers(30))}',
                            handles[int(rng.integers(len(handles)))])
                 for _ in range(150)]
        flip = {D: R, R: D, U: U}
        forward = assign_party(edges, dem, rep)
        backward = assign_party(edges, rep, dem)
        assert backward == {u: flip[label] for u, label in forward.items()}

    def test_overlap(self, edges):
        with pytest.raises(CorpusError):
            assign_party(edges, {'d1', 'x'}, {'X'})

    def test_coverage(self, edges):
        labels = assign_party(edges, {'d1', 'd2'}, {'r1'})
        assert partisan_coverage(labels) == 0.5

    def test_coverage_empty(self):
        with pytest.raises(CorpusError):
            partisan_coverage({})

    def test_follow_counts(self, edges):
        labels = assign_party(edges, {'d1', 'd2'}, {'r1'})
        total, own = follow_counts(edges, labels, {'d1', 'd2'}, {'r1'})
        assert total == {'a': 3, 'b': 1, 'c': 2}
        assert own == {'a': 2, 'b': 1, 'c': 0}

    def test_bundled_handles_disjoint(self):
        dem, rep = load_default_handles()
        assert dem and rep
        assert not dem & rep

    def test_follow_file(self, tmp_path, edges):
        save_follow_edges(edges, tmp_path / 'follows.csv')
        assert load_follow_edges(tmp_path / 'follows.csv') == edges

    def test_parse(self):
        assert PartyLabel.parse('r') is R
        with pytest.raises(CorpusError):
            PartyLabel.parse('green')


class TestStateValidation:

    def test_perfect_fit(self):
        states = {'AA': (3, 1), 'BB': (1, 3), 'CC': (2, 2), 'DC': (0, 4)}
        records, labels = [], {}
        for state, (n_rep, n_dem) in states.items():
            for k in range(n_rep + n_dem):
                user = f'{state}{k}'
                labels[user] = R if k < n_rep else D
                records.append(TweetRecord(user, user, 'e', 0.0, 't', state))
        vote = {'AA': 0.7, 'BB': 0.3, 'CC': 0.5, 'DC': 0.1}
        report, frame = state_validation(records, labels, vote)
        assert list(frame['state']) == ['AA', 'BB', 'CC']
        assert report.coefficients['rep_vote_share'] == pytest.approx(1.25)
        assert report.r_squared == pytest.approx(1.0)
        assert report.weights_used
