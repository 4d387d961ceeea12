"""Fast candidate generation: Jaccard, BM25, boolean phrase, fuzzy regex.

Every search returns Candidates best first; equal scores are ordered by
(doc_id, char_start, char_end).
"""
from __future__ import absolute_import

import heapq
import logging
import math
from collections import Counter, OrderedDict, namedtuple

import Levenshtein
import regex

from .exceptions import FormatError
from .index import LengthWindow, enumerate_windows
from .ingest import tokenize
from .utils import fold_case, open_text, overlaps, read_tsv

logger = logging.getLogger(__name__)

JACCARD = 'jaccard'
BM25 = 'bm25'
BOOLEAN_PHRASE = 'boolean_phrase'
FUZZY_REGEX = 'fuzzy_regex'
EDIT_RERANK = 'edit_rerank'
EMBEDDING_RERANK = 'embedding_rerank'
RRF = 'rrf'
CONCAT = 'concat'
METHODS = (
    JACCARD,
    BM25,
    BOOLEAN_PHRASE,
    FUZZY_REGEX,
    EDIT_RERANK,
    EMBEDDING_RERANK,
    RRF,
    CONCAT
)
FAST_METHODS = (JACCARD, BM25, BOOLEAN_PHRASE, FUZZY_REGEX)

CHAR = 'char'
WORD = 'word'

DEFAULT_LIMIT = 10000
DEFAULT_CHAR_TOLERANCE = 0.3


class Candidate(namedtuple(
    'Candidate',
    'doc_id char_start char_end matched_text score method origin'
)):

    """One retrieval hit with document-level offsets.

    `origin` names the method that first produced the hit; it stays set
    when rerankers and fusion rewrite `method`.
    """
    __slots__ = ()

    def __new__(
        cls,
        doc_id,
        char_start,
        char_end,
        matched_text,
        score,
        method,
        origin=None
    ):
        return super(Candidate, cls).__new__(
            cls,
            doc_id,
            char_start,
            char_end,
            matched_text,
            float(score),
            method,
            origin or method
        )

    @property
    def key(self):
        return (self.doc_id, self.char_start, self.char_end)


def rank_key(candidate):
    return (-candidate.score, ) + candidate.key


def _top(candidates, limit):
    return heapq.nsmallest(limit, candidates, key=rank_key)


def _bigrams(text):
    if len(text) < 2:
        return set([text]) if text else set()
    return set(text[i:i + 2] for i in range(len(text) - 1))


def _words(text):
    return set(token.text for token in tokenize(text))


def _jaccard(a, b):
    if not a and not b:
        return 1.0
    union = len(a | b)
    return float(len(a & b)) / union


def jaccard_similarity(a, b, mode=CHAR):
    if mode == CHAR:
        return _jaccard(_bigrams(a), _bigrams(b))
    if mode == WORD:
        return _jaccard(_words(a), _words(b))
    raise ValueError('unknown Jaccard mode %r' % mode)


def search_jaccard(
    query,
    collection,
    limit=DEFAULT_LIMIT,
    tolerance_ratio=DEFAULT_CHAR_TOLERANCE,
    stride=1,
    case_folding=True
):
    """Scores every length-window substring by mean char/word Jaccard.

    Windows scoring 0 are not returned.
    """
    fold = fold_case if case_folding else (lambda text: text)
    surface = fold(query.surface)
    bigrams = _bigrams(surface)
    words = _words(surface)
    window = LengthWindow(len(query.surface), tolerance_ratio)
    found = []
    for doc in collection.sorted_docs():
        text = fold(doc.text)
        for start, end in enumerate_windows(doc, window, stride):
            piece = text[start:end]
            score = (
                _jaccard(bigrams, _bigrams(piece)) +
                _jaccard(words, _words(piece))
            ) / 2
            if score > 0:
                found.append(Candidate(
                    doc.doc_id, start, end, doc.text[start:end], score,
                    JACCARD
                ))
    return _top(found, limit)


def _distinct(terms):
    return list(OrderedDict.fromkeys(terms))


def bm25_score(terms, unit, index):
    """Okapi BM25 of a phrase unit for the distinct query terms."""
    if not index.avgdl:
        return 0.0
    counts = Counter(unit.terms)
    k1 = index.k1
    norm = k1 * (1 - index.b + index.b * unit.length / index.avgdl)
    score = 0.0
    for term in _distinct(terms):
        tf = counts.get(term, 0)
        if tf:
            score += index.idf(term) * tf * (k1 + 1) / (tf + norm)
    return score


def search_bm25(query, phrase_index, limit=DEFAULT_LIMIT):
    if phrase_index is None:
        return []
    terms = _distinct(query.lemmas)
    found = []
    for unit_id in phrase_index.candidates(terms):
        unit = phrase_index.units[unit_id]
        found.append(Candidate(
            unit.doc_id,
            unit.char_start,
            unit.char_end,
            unit.text,
            bm25_score(terms, unit, phrase_index),
            BM25
        ))
    return _top(found, limit)


def edit_distance(a, b, mode=CHAR):
    """Levenshtein distance over characters or over tokens."""
    if mode == CHAR:
        return Levenshtein.distance(a, b)
    if mode == WORD:
        return Levenshtein.distance(
            [token.text for token in tokenize(a)],
            [token.text for token in tokenize(b)]
        )
    raise ValueError('unknown edit distance mode %r' % mode)


def search_boolean_phrase(
    query,
    positional_index,
    limit=DEFAULT_LIMIT,
    case_folding=True
):
    """All contiguous occurrences of the query's lemma sequence.

    Hits are ranked by character edit distance to the surface.
    """
    lemmas = query.lemmas
    if not lemmas:
        return []
    matches = set(positional_index.lookup(lemmas[0]))
    for offset, lemma in enumerate(lemmas[1:], 1):
        if not matches:
            break
        following = set(positional_index.lookup(lemma))
        matches = set(
            (doc_id, position) for doc_id, position in matches
            if (doc_id, position + offset) in following
        )
    fold = fold_case if case_folding else (lambda text: text)
    surface = fold(query.surface)
    found = []
    for doc_id, position in matches:
        start, end = positional_index.span(
            doc_id, position, position + len(lemmas) - 1
        )
        text = positional_index.text(doc_id, start, end)
        found.append(Candidate(
            doc_id, start, end, text,
            -edit_distance(fold(text), surface), BOOLEAN_PHRASE
        ))
    return _top(found, limit)


def default_max_edits(surface):
    """One edit per five characters, rounded up."""
    return int(math.ceil(len(surface) / 5.0))


def _fuzzy_pattern(surface, max_edits):
    return regex.compile(
        '(?:%s){e<=%d}' % (regex.escape(surface), max_edits)
    )


def _fuzzy_hits(text, surface, max_edits):
    """(distance, length, start) of every substring within max_edits."""
    size = len(surface)
    shortest = max(1, size - max_edits)
    longest = size + max_edits
    hits = []
    for start in range(len(text)):
        for length in range(shortest, min(longest, len(text) - start) + 1):
            distance = Levenshtein.distance(
                text[start:start + length], surface, score_cutoff=max_edits
            )
            if distance <= max_edits:
                hits.append((distance, length, start))
    return hits


def suppress_overlaps(hits):
    """Keeps the best (distance, length, start) hit of each overlap cluster."""
    kept = []
    for distance, length, start in sorted(hits):
        end = start + length
        if any(overlaps(start, end, s, s + l) for _, l, s in kept):
            continue
        kept.append((distance, length, start))
    return kept


def search_fuzzy_regex(
    query,
    collection,
    max_edits=None,
    limit=DEFAULT_LIMIT
):
    """Substrings within `max_edits` edits of the case-folded surface.

    Arguments:
        query: Query
        collection: DocumentCollection
        max_edits: edit threshold (default one per five characters)
        limit: maximum number of candidates
    """
    surface = fold_case(query.surface)
    if max_edits is None:
        max_edits = default_max_edits(surface)
    if max_edits < 0:
        raise ValueError('max_edits must be >= 0, got %d' % max_edits)
    pattern = _fuzzy_pattern(surface, max_edits)
    found = []
    for doc in collection.sorted_docs():
        text = fold_case(doc.text)
        if not pattern.search(text):
            continue
        for distance, length, start in suppress_overlaps(
            _fuzzy_hits(text, surface, max_edits)
        ):
            end = start + length
            found.append(Candidate(
                doc.doc_id, start, end, doc.text[start:end],
                -distance, FUZZY_REGEX
            ))
    return _top(found, limit)


def _flat(text):
    return text.replace('\t', ' ').replace('\n', ' ').replace('\r', ' ')


def write_candidates(results, target):
    """Writes (entity_id, candidates) pairs as TSV rows."""
    handle = open_text(target, 'w')
    try:
        for entity_id, candidates in results:
            for c in candidates:
                handle.write('%s\t%s\t%s\t%d\t%d\t%r\t%s\n' % (
                    entity_id,
                    c.method,
                    c.doc_id,
                    c.char_start,
                    c.char_end,
                    c.score,
                    _flat(c.matched_text)
                ))
    finally:
        if handle is not target:
            handle.close()


def read_candidates(source):
    """Reads candidate TSV rows into {entity_id: [Candidate]}."""
    results = OrderedDict()
    for number, fields in read_tsv(source, 7, FormatError):
        entity_id, method, doc_id, start, end, score, text = fields
        try:
            candidate = Candidate(
                doc_id, int(start), int(end), text, float(score), method
            )
        except ValueError:
            raise FormatError('candidates line %d: malformed row' % number)
        results.setdefault(entity_id, []).append(candidate)
    return results
