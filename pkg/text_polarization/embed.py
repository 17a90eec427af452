"""
Word embeddings (GloVe trained with AdaGrad, or loaded from text files) and
smooth inverse frequency sentence embeddings with the first principal
component removed.
"""
import csv
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import sparse

from text_polarization.errors import EmbeddingError
from text_polarization.textprep import load_stopwords, tweet_stems

PC_TOLERANCE = 1e-10
PC_MAX_ITERS = 200
PC_START_SEED = 0

logger = logging.getLogger(__name__)


@dataclass
class EmbeddingTable:
    dim: int
    vectors: dict = field(default_factory=dict)

    def __post_init__(self):
        for stem, vec in list(self.vectors.items()):
            vec = np.asarray(vec, dtype=float)
            if vec.shape != (self.dim,):
                raise EmbeddingError(f"The vector of '{stem}' has shape "
                                     f"{vec.shape}, expected ({self.dim},).")
            if not np.all(np.isfinite(vec)):
                raise EmbeddingError(f"The vector of '{stem}' is not finite.")
            self.vectors[stem] = vec

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, stem):
        return stem in self.vectors

    def __getitem__(self, stem) -> np.ndarray:
        return self.vectors[stem]

    @property
    def stems(self) -> [str]:
        return sorted(self.vectors)

    def matrix(self, stems=None) -> np.ndarray:
        stems = self.stems if stems is None else stems
        if not stems:
            return np.zeros((0, self.dim))
        return np.array([self.vectors[s] for s in stems])

    def transformed(self, transform: np.ndarray) -> 'EmbeddingTable':
        return EmbeddingTable(self.dim, {s: transform @ v
                                         for s, v in self.vectors.items()})

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as fd:
            for stem in self.stems:
                values = ' '.join(repr(float(x)) for x in self.vectors[stem])
                fd.write(f'{stem} {values}\n')


def load_embeddings(path) -> EmbeddingTable:
    """
    Whitespace separated text format, one `stem v1 ... vdim` per line.
    """
    dim, vectors = None, {}
    with open(path, encoding='utf-8') as fd:
        for num, line in enumerate(fd, start=1):
            parts = line.split()
            if not parts:
                continue
            if dim is None:
                dim = len(parts) - 1
                if dim < 1:
                    raise EmbeddingError(f"Line {num} of '{path}' has no "
                                         f"vector.")
            if len(parts) - 1 != dim:
                raise EmbeddingError(f"Line {num} of '{path}' has "
                                     f"{len(parts) - 1} values, expected "
                                     f"{dim}.")
            try:
                vectors[parts[0]] = np.array(parts[1:], dtype=float)
            except ValueError as ex:
                raise EmbeddingError(f"Line {num} of '{path}' is not "
                                     f"numeric.") from ex
    if dim is None:
        raise EmbeddingError(f"The embedding file '{path}' is empty.")
    return EmbeddingTable(dim, vectors)


def cooccurrence(tweets, vocab, window: int = 5,
                 stopwords: frozenset = None) -> (sparse.csr_matrix, Counter):
    """
    Symmetric co-occurrence counts inside tweets, every pair weighted by
    1/distance within `window`.
    :return: (matrix over vocab positions, stem occurrence counts)
    """
    if stopwords is None:
        stopwords = load_stopwords()
    rows, cols, data = [], [], []
    occurrences = Counter()
    for tweet in tweets:
        ids = [vocab.position(s) for s in tweet_stems(tweet.text, stopwords)
               if s in vocab]
        occurrences.update(ids)
        for a, i in enumerate(ids):
            for dist in range(1, window + 1):
                if a + dist >= len(ids):
                    break
                j = ids[a + dist]
                rows += [i, j]
                cols += [j, i]
                data += [1.0 / dist, 1.0 / dist]
    size = len(vocab)
    matrix = sparse.csr_matrix((data, (rows, cols)), shape=(size, size))
    matrix.sum_duplicates()
    return matrix, occurrences


def _objective(W, C, bw, bc, i, j, logx, fx) -> float:
    diff = np.einsum('ij,ij->i', W[i], C[j]) + bw[i] + bc[j] - logx
    return float(0.5 * np.sum(fx * diff * diff))


@dataclass
class GloveTrace:
    objective: list = field(default_factory=list)
    excluded: list = field(default_factory=list)


def train_glove(tweets, vocab, dim: int = 100, window: int = 5,
                x_max: float = 100.0, alpha: float = 0.75, iters: int = 25,
                seed: int = 0, learning_rate: float = 0.05,
                deterministic: bool = True, batch_size: int = 1024,
                stopwords: frozenset = None,
                trace: GloveTrace = None) -> EmbeddingTable:
    """
    Train GloVe vectors with AdaGrad. Word and context vectors are
    initialized uniformly in +-0.5/dim and their sum is returned.
    :param deterministic: one pair at a time in a seeded order; otherwise
                          vectorized updates over shuffled mini batches
    :param trace: receives the full objective before training and after
                  every epoch
    """
    if len(vocab) == 0:
        raise EmbeddingError("The vocabulary is empty.")
    if dim < 2:
        raise EmbeddingError(f"The dimension must be at least 2, got {dim}.")
    matrix, occurrences = cooccurrence(tweets, vocab, window, stopwords)
    present = [j for j in range(len(vocab)) if occurrences[j] > 0]
    excluded = [vocab.entries[j] for j in range(len(vocab))
                if occurrences[j] == 0]
    if excluded:
        logger.warning("%d vocabulary items never occur and are excluded: "
                       "%s", len(excluded), excluded[:10])
    if not present:
        raise EmbeddingError("No vocabulary item occurs in the tweets.")

    rng = np.random.default_rng(seed)
    size = len(vocab)
    W = (rng.random((size, dim)) - 0.5) / dim
    C = (rng.random((size, dim)) - 0.5) / dim
    bw = (rng.random(size) - 0.5) / dim
    bc = (rng.random(size) - 0.5) / dim
    gW, gC = np.ones_like(W), np.ones_like(C)
    gbw, gbc = np.ones_like(bw), np.ones_like(bc)

    coo = matrix.tocoo()
    pi, pj, x = coo.row, coo.col, coo.data
    logx = np.log(x)
    fx = np.minimum(1.0, (x / x_max) ** alpha)
    if trace is not None:
        trace.excluded = excluded
        trace.objective.append(_objective(W, C, bw, bc, pi, pj, logx, fx))

    for epoch in range(iters):
        order = rng.permutation(len(x))
        if deterministic:
            for k in order:
                i, j = pi[k], pj[k]
                diff = W[i] @ C[j] + bw[i] + bc[j] - logx[k]
                fdiff = fx[k] * diff
                grad_w = fdiff * C[j]
                grad_c = fdiff * W[i]
                W[i] -= learning_rate * grad_w / np.sqrt(gW[i])
                C[j] -= learning_rate * grad_c / np.sqrt(gC[j])
                bw[i] -= learning_rate * fdiff / np.sqrt(gbw[i])
                bc[j] -= learning_rate * fdiff / np.sqrt(gbc[j])
                gW[i] += grad_w ** 2
                gC[j] += grad_c ** 2
                gbw[i] += fdiff ** 2
                gbc[j] += fdiff ** 2
        else:
            for start in range(0, len(order), batch_size):
                batch = order[start:start + batch_size]
                i, j = pi[batch], pj[batch]
                diff = np.einsum('ij,ij->i', W[i], C[j]) + bw[i] + bc[j] - \
                    logx[batch]
                fdiff = (fx[batch] * diff)[:, None]
                grad_w = fdiff * C[j]
                grad_c = fdiff * W[i]
                np.subtract.at(W, i, learning_rate * grad_w / np.sqrt(gW[i]))
                np.subtract.at(C, j, learning_rate * grad_c / np.sqrt(gC[j]))
                np.subtract.at(bw, i, learning_rate * fdiff[:, 0] /
                               np.sqrt(gbw[i]))
                np.subtract.at(bc, j, learning_rate * fdiff[:, 0] /
                               np.sqrt(gbc[j]))
                np.add.at(gW, i, grad_w ** 2)
                np.add.at(gC, j, grad_c ** 2)
                np.add.at(gbw, i, fdiff[:, 0] ** 2)
                np.add.at(gbc, j, fdiff[:, 0] ** 2)
        if trace is not None:
            trace.objective.append(
                _objective(W, C, bw, bc, pi, pj, logx, fx))
            logger.debug("GloVe epoch %d objective %.6f", epoch,
                         trace.objective[-1])
    vectors = W + C
    return EmbeddingTable(dim, {vocab.entries[j]: vectors[j]
                                for j in present})


def sif_weights(samples, vocab, stopwords: frozenset = None) -> dict:
    """
    weight(s) = 1 / count of s in the sample tweets.
    """
    if stopwords is None:
        stopwords = load_stopwords()
    counts = Counter()
    for tweet in samples:
        counts.update(s for s in tweet_stems(tweet.text, stopwords)
                      if s in vocab)
    missing = [s for s in vocab if counts[s] == 0]
    if missing:
        logger.warning("%d vocabulary stems do not occur in the sample and "
                       "get no weight.", len(missing))
    return {s: 1.0 / counts[s] for s in vocab if counts[s] > 0}


def first_principal_component(rows) -> np.ndarray:
    """
    Dominant right singular vector of the rows (no centering), by power
    iteration on the Gram matrix from a seeded random start; the first
    nonzero entry is positive.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 2:
        raise EmbeddingError("The principal component needs at least 2 "
                             "rows.")
    if not np.any(rows):
        raise EmbeddingError("The principal component of a zero matrix is "
                             "undefined.")
    gram = rows.T @ rows
    gram /= np.linalg.norm(gram)
    v = np.random.default_rng(PC_START_SEED).standard_normal(rows.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(PC_MAX_ITERS):
        nxt = gram @ v
        norm = np.linalg.norm(nxt)
        if norm == 0:
            raise EmbeddingError("The power iteration collapsed.")
        nxt /= norm
        if nxt @ v < 0:
            nxt = -nxt
        done = np.linalg.norm(nxt - v) <= PC_TOLERANCE
        v = nxt
        if done:
            break
        # squaring the operator doubles the power applied per step
        gram = gram @ gram
        gram /= np.linalg.norm(gram)
    else:
        logger.warning("The power iteration did not converge.")
    nonzero = np.flatnonzero(np.abs(v) > 1e-12)
    if len(nonzero) and v[nonzero[0]] < 0:
        v = -v
    return v


def remove_component(vectors, pc1: np.ndarray) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=float)
    return vectors - np.outer(vectors @ pc1, pc1) if vectors.ndim == 2 \
        else vectors - (vectors @ pc1) * pc1


@dataclass
class SentenceEmbedding:
    tweet_id: str
    v: np.ndarray
    e: np.ndarray
    embeddable: bool = True


def sentence_vectors(tweets, table: EmbeddingTable, weights: dict,
                     stopwords: frozenset = None):
    """
    Weighted averages v_t of the embedded stems of every tweet.
    :return: (tweet ids, matrix of v_t, embeddable mask)
    """
    if stopwords is None:
        stopwords = load_stopwords()
    ids, rows, mask = [], [], []
    for tweet in tweets:
        stems = [s for s in tweet_stems(tweet.text, stopwords)
                 if s in table and s in weights]
        ids.append(tweet.tweet_id)
        if not stems:
            rows.append(np.zeros(table.dim))
            mask.append(False)
            continue
        w = np.array([weights[s] for s in stems])
        vecs = np.array([table[s] for s in stems])
        rows.append(w @ vecs / w.sum())
        mask.append(True)
    matrix = np.array(rows).reshape(len(rows), table.dim)
    return ids, matrix, np.array(mask, dtype=bool)


def sif_embed(tweets, table: EmbeddingTable, weights: dict, pc1=None,
              stopwords: frozenset = None) -> [SentenceEmbedding]:
    """
    SIF embeddings e_t = v_t - (v_t . pc1) pc1. pc1 is computed from these
    tweets when not given; compute it over the sample set and pass it in
    to embed the full corpus.
    """
    ids, matrix, mask = sentence_vectors(tweets, table, weights, stopwords)
    if pc1 is None:
        pc1 = first_principal_component(matrix[mask])
    removed = remove_component(matrix, pc1)
    if not mask.all():
        logger.debug("%d tweets have no embedded stem.", int((~mask).sum()))
    return [SentenceEmbedding(tid, matrix[k], removed[k] if mask[k]
                              else np.zeros(table.dim), bool(mask[k]))
            for k, tid in enumerate(ids)]


def save_sentence_embeddings(embeddings, path):
    embeddings = [e for e in embeddings if e.embeddable]
    dim = len(embeddings[0].e) if embeddings else 0
    frame = pd.DataFrame(
        [[emb.tweet_id] + [float(x) for x in emb.e] for emb in embeddings],
        columns=['tweet_id'] + [f'e{i + 1}' for i in range(dim)])
    frame.to_csv(path, index=False, lineterminator='\n')


def load_sentence_embeddings(path) -> (list, np.ndarray):
    with open(path, encoding='utf-8', newline='') as fd:
        reader = csv.reader(fd)
        header = next(reader, None)
        if header is None:
            raise EmbeddingError(f"The file '{path}' is empty.")
        ids, rows = [], []
        for rec in reader:
            ids.append(rec[0])
            rows.append([float(x) for x in rec[1:]])
    return ids, np.array(rows).reshape(len(rows), len(header) - 1)
