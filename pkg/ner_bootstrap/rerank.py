"""Rerankers and rank fusion over candidate lists."""
from __future__ import absolute_import

import logging
import math
from collections import OrderedDict, namedtuple

import numpy as np

from .exceptions import (
    EmbeddingDimensionMismatch,
    FormatError,
    MissingQueryEmbedding
)
from .retrieval import (
    CHAR,
    CONCAT,
    EDIT_RERANK,
    EMBEDDING_RERANK,
    RRF,
    WORD,
    edit_distance,
    rank_key
)
from .utils import fold_case, open_text, overlaps

logger = logging.getLogger(__name__)

MISSING_SCORE = -2.0


class FusionConfig(namedtuple('FusionConfig', 'rrf_k')):
    __slots__ = ()

    def __new__(cls, rrf_k=60):
        if not rrf_k > 0:
            raise ValueError('rrf_k must be > 0, got %s' % rrf_k)
        return super(FusionConfig, cls).__new__(cls, float(rrf_k))


class EmbeddingStore(object):

    """Precomputed text vectors of one fixed dimension.

    Arguments:
        vectors: mapping text key -> sequence of floats
        dimension: expected dimension (inferred when omitted)
    """
    def __init__(self, vectors, dimension=None):
        self.vectors = OrderedDict()
        self.dimension = dimension
        for key, values in vectors.items():
            self.add(key, values)

    def __repr__(self):
        return 'EmbeddingStore: %d vectors of dimension %s' % (
            len(self.vectors), self.dimension
        )

    def __len__(self):
        return len(self.vectors)

    def __contains__(self, key):
        return key in self.vectors

    def add(self, key, values):
        vector = np.asarray(values, dtype=np.float64)
        if self.dimension is None:
            self.dimension = vector.shape[0]
        if vector.ndim != 1 or vector.shape[0] != self.dimension:
            raise EmbeddingDimensionMismatch(
                '%r: dimension %d, expected %d' % (
                    key, vector.size, self.dimension
                )
            )
        if not np.all(np.isfinite(vector)):
            raise FormatError('%r: non-finite vector component' % key)
        self.vectors[key] = vector

    def get(self, key):
        return self.vectors.get(key)


def load_embeddings(source):
    """Reads `key\\tv1 v2 ... vd` lines into an EmbeddingStore."""
    store = EmbeddingStore({})
    handle = open_text(source)
    try:
        for number, line in enumerate(handle, 1):
            line = line.rstrip('\r\n')
            if not line.strip():
                continue
            fields = line.split('\t')
            if len(fields) != 2:
                raise FormatError(
                    'embeddings line %d: expected <key>\\t<vector>' % number
                )
            try:
                values = [float(v) for v in fields[1].split()]
            except ValueError:
                raise FormatError(
                    'embeddings line %d: malformed vector' % number
                )
            store.add(fields[0], values)
    finally:
        if handle is not source:
            handle.close()
    logger.info('loaded %r', store)
    return store


def cosine(a, b):
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if not norm:
        return 0.0
    return float(np.dot(a, b) / norm)


def rerank_edit_distance(query, candidates, case_folding=True):
    """Stable sort by (word edit distance, char edit distance)."""
    fold = fold_case if case_folding else (lambda text: text)
    surface = fold(query.surface)
    scored = []
    for candidate in candidates:
        text = fold(candidate.matched_text)
        scored.append((
            edit_distance(text, surface, WORD),
            edit_distance(text, surface, CHAR),
            candidate
        ))
    scored.sort(key=lambda item: item[:2])
    return [
        candidate._replace(
            score=-(words + chars / (chars + 1.0)),
            method=EDIT_RERANK
        )
        for words, chars, candidate in scored
    ]


def rerank_embedding(query, candidates, store, method=EMBEDDING_RERANK):
    """Sorts by cosine similarity to the query's vector.

    The query is looked up by its surface and candidates by their
    matched text; candidates without a vector keep their order at the
    end of the list.
    """
    target = store.get(query.surface)
    if target is None:
        raise MissingQueryEmbedding(query.surface)
    present = []
    missing = []
    for candidate in candidates:
        vector = store.get(candidate.matched_text)
        if vector is None:
            missing.append(candidate._replace(
                score=MISSING_SCORE, method=method
            ))
        else:
            present.append(candidate._replace(
                score=cosine(target, vector), method=method
            ))
    present.sort(key=rank_key)
    return present + missing


def fuse_rrf(lists, config=None):
    """Reciprocal rank fusion keyed by (doc_id, char_start, char_end)."""
    config = config or FusionConfig()
    terms = OrderedDict()
    representative = {}
    for candidates in lists:
        seen = set()
        for rank, candidate in enumerate(candidates, 1):
            key = candidate.key
            if key in seen:
                continue
            seen.add(key)
            terms.setdefault(key, []).append(1.0 / (config.rrf_k + rank))
            representative.setdefault(key, candidate)
    fused = [
        representative[key]._replace(score=math.fsum(values), method=RRF)
        for key, values in terms.items()
    ]
    fused.sort(key=rank_key)
    return fused


def fuse_concat(fuzzy_results, rrf_results):
    """Fuzzy results first, then RRF results not overlapping any of them.

    Scores are rewritten to minus the output rank.
    """
    output = []
    seen = set()
    claimed = {}
    for candidate in fuzzy_results:
        if candidate.key in seen:
            continue
        seen.add(candidate.key)
        claimed.setdefault(candidate.doc_id, []).append(
            (candidate.char_start, candidate.char_end)
        )
        output.append(candidate)
    for candidate in rrf_results:
        if candidate.key in seen or any(
            overlaps(candidate.char_start, candidate.char_end, start, end)
            for start, end in claimed.get(candidate.doc_id, ())
        ):
            continue
        seen.add(candidate.key)
        output.append(candidate)
    return [
        candidate._replace(score=-float(rank), method=CONCAT)
        for rank, candidate in enumerate(output, 1)
    ]
