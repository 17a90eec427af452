import json
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from scipy import sparse

from text_polarization.corpus import PartyLabel, TweetRecord, \
    TweetCollection
from text_polarization.textprep import UserTokenCounts, Vocab

DATA = Path(__file__).parent / 'data'

D = PartyLabel.DEMOCRAT
R = PartyLabel.REPUBLICAN
U = PartyLabel.UNASSIGNED


def timestamp(day: str, hour: int = 12) -> float:
    date = datetime.strptime(day, '%Y-%m-%d')
    return date.replace(hour=hour, tzinfo=timezone.utc).timestamp()


def make_tweets(rows, event_id='ev', day='2017-10-01') -> TweetCollection:
    """
    :param rows: (user_id, text) or (user_id, text, day offset)
    """
    records = []
    for n, row in enumerate(rows):
        user, text = row[0], row[1]
        offset = row[2] if len(row) > 2 else 0
        records.append(TweetRecord(
            tweet_id=f'{event_id}-{n}',
            user_id=user,
            event_id=event_id,
            timestamp=timestamp(day) + offset * 86400,
            text=text,
        ))
    return TweetCollection(records)


def make_counts(matrix, labels, tokens=None) -> UserTokenCounts:
    matrix = np.asarray(matrix, dtype=np.int64)
    tokens = tokens or [f'w{j}' for j in range(matrix.shape[1])]
    users = [f'u{i:02d}' for i in range(matrix.shape[0])]
    return UserTokenCounts(users, sparse.csr_matrix(matrix), labels,
                           Vocab(tokens))


def brute_force_leave_out(matrix, labels) -> float:
    """
    Leave-out partisanship by holding out every user in turn, over the
    tokens used by at least two users; tokens unused by both held-out
    groups are skipped.
    """
    matrix = np.asarray(matrix, dtype=float)
    keep = (matrix > 0).sum(axis=0) >= 2
    matrix = matrix[:, keep]
    rows = matrix.sum(axis=1) > 0
    matrix = matrix[rows]
    labels = [lab for lab, r in zip(labels, rows) if r]
    values = {D: [], R: []}
    for i, own in enumerate(labels):
        if own not in values:
            continue
        q = matrix[i] / matrix[i].sum()
        held = [k for k in range(len(labels)) if k != i]
        dem = matrix[[k for k in held if labels[k] is D]].sum(axis=0)
        rep = matrix[[k for k in held if labels[k] is R]].sum(axis=0)
        q_dem, q_rep = dem / dem.sum(), rep / rep.sum()
        total = 0.0
        for j in range(matrix.shape[1]):
            denom = q_dem[j] + q_rep[j]
            if denom == 0:
                continue
            share = q_dem[j] if own is D else q_rep[j]
            total += q[j] * share / denom
        values[own].append(total)
    return 0.5 * (np.mean(values[D]) + np.mean(values[R]))


def write_jsonl(path, records):
    with open(path, 'w', encoding='utf-8') as fd:
        for rec in records:
            fd.write(json.dumps(rec) + '\n')
