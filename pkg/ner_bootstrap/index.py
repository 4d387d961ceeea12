"""Search structures over a document collection.

Three structures back the fast retrieval methods: a positional inverted
index of lemmas (boolean phrase queries), a BM25 index of token n-gram
phrase units, and a generator of length-windowed substrings (Jaccard).
"""
from __future__ import absolute_import

import logging
import math
from collections import OrderedDict, namedtuple
from concurrent.futures import ThreadPoolExecutor

from .ingest import Normalizer
from .utils import dump_binary, exact, load_binary

logger = logging.getLogger(__name__)

INDEX_MAGIC = b'NERBIDX\0'
INDEX_VERSION = 1

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75


class LengthWindow(namedtuple(
    'LengthWindow', 'target_length tolerance_ratio slack'
)):

    """Accepted lengths around a target length.

    Lengths in [ceil(t*(1-r)) - slack, floor(t*(1+r)) + slack] are
    accepted; the lower bound never drops below 1.
    """
    __slots__ = ()

    def __new__(cls, target_length, tolerance_ratio=0.3, slack=0):
        ratio = exact(tolerance_ratio)
        if not 0 <= ratio < 1:
            raise ValueError(
                'tolerance_ratio must be in [0, 1), got %s' % tolerance_ratio
            )
        if slack < 0:
            raise ValueError('slack must be >= 0, got %s' % slack)
        return super(LengthWindow, cls).__new__(
            cls, int(target_length), ratio, int(slack)
        )

    @property
    def bounds(self):
        target = self.target_length
        low = int(math.ceil(target * (1 - self.tolerance_ratio)))
        high = int(math.floor(target * (1 + self.tolerance_ratio)))
        return max(low - self.slack, 1), high + self.slack

    def accepts(self, length):
        low, high = self.bounds
        return low <= length <= high

    def lengths(self):
        low, high = self.bounds
        return range(low, high + 1)


def enumerate_windows(doc, window, stride=1):
    """Character spans starting at token starts and ending at token ends.

    Arguments:
        doc: a Document
        window: LengthWindow in characters
        stride: only every `stride`-th token starts a span
    Returns:
        (char_start, char_end) list in document order.
    """
    if stride < 1:
        raise ValueError('stride must be >= 1, got %d' % stride)
    low, high = window.bounds
    tokens = doc.tokens
    spans = []
    for first in range(0, len(tokens), stride):
        start = tokens[first].char_start
        for token in tokens[first:]:
            length = token.char_end - start
            if length > high:
                break
            if length >= low:
                spans.append((start, token.char_end))
    return spans


def _lemmatize(doc, normalizer):
    return doc.doc_id, tuple(
        normalizer.normalize(token.text) for token in doc.tokens
    )


def _map_docs(fn, docs, jobs):
    # results come back in input order, so merging stays deterministic
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            return list(executor.map(fn, docs))
    return [fn(doc) for doc in docs]


class PositionalIndex(object):

    """Lemma -> sorted (doc_id, token position) postings.

    Arguments:
        postings: mapping lemma -> list of (doc_id, position)
        lemmas: mapping doc_id -> per-token lemmas
        offsets: mapping doc_id -> per-token (char_start, char_end)
        texts: mapping doc_id -> page text
    """
    def __init__(self, postings, lemmas, offsets, texts):
        self.postings = dict(
            (lemma, tuple(tuple(p) for p in entries))
            for lemma, entries in postings.items()
        )
        self.lemmas = dict(
            (doc_id, tuple(values)) for doc_id, values in lemmas.items()
        )
        self.offsets = dict(
            (doc_id, tuple(tuple(o) for o in values))
            for doc_id, values in offsets.items()
        )
        self.texts = dict(texts)

    def __repr__(self):
        return 'PositionalIndex: %d lemmas over %d docs' % (
            len(self.postings), len(self.lemmas)
        )

    def __len__(self):
        return len(self.postings)

    def __contains__(self, lemma):
        return lemma in self.postings

    def lookup(self, lemma):
        return self.postings.get(lemma, ())

    def span(self, doc_id, first, last):
        """Character span covering tokens first..last inclusive."""
        offsets = self.offsets[doc_id]
        return offsets[first][0], offsets[last][1]

    def text(self, doc_id, char_start, char_end):
        return self.texts[doc_id][char_start:char_end]

    def to_payload(self):
        return {
            'postings': dict(
                (lemma, [list(p) for p in entries])
                for lemma, entries in self.postings.items()
            ),
            'lemmas': dict(
                (doc_id, list(values))
                for doc_id, values in self.lemmas.items()
            ),
            'offsets': dict(
                (doc_id, [list(o) for o in values])
                for doc_id, values in self.offsets.items()
            ),
            'texts': self.texts
        }

    @classmethod
    def from_payload(cls, payload):
        return cls(
            payload['postings'],
            payload['lemmas'],
            payload['offsets'],
            payload['texts']
        )


def build_positional_index(collection, normalizer, jobs=1):
    postings = {}
    lemmas = {}
    offsets = {}
    texts = {}
    docs = sorted(collection, key=lambda doc: doc.doc_id)
    results = _map_docs(
        lambda doc: _lemmatize(doc, normalizer), docs, jobs
    )
    for doc, (doc_id, doc_lemmas) in zip(docs, results):
        lemmas[doc_id] = doc_lemmas
        offsets[doc_id] = [(t.char_start, t.char_end) for t in doc.tokens]
        texts[doc_id] = doc.text
        for position, lemma in enumerate(doc_lemmas):
            postings.setdefault(lemma, []).append((doc_id, position))
    index = PositionalIndex(postings, lemmas, offsets, texts)
    logger.info('built %r', index)
    return index


class PhraseUnit(namedtuple(
    'PhraseUnit', 'doc_id char_start char_end text terms'
)):
    __slots__ = ()

    @property
    def length(self):
        return len(self.terms)


class PhraseIndex(object):

    """BM25 index over token n-gram phrase units.

    Arguments:
        units: PhraseUnit list, in (doc_id, char_start, char_end) order
        window: LengthWindow in tokens the units were cut with
        k1, b: BM25 parameters
    """
    def __init__(self, units, window, k1=DEFAULT_K1, b=DEFAULT_B):
        if k1 <= 0:
            raise ValueError('k1 must be > 0, got %s' % k1)
        if not 0 <= b <= 1:
            raise ValueError('b must be in [0, 1], got %s' % b)
        self.units = tuple(units)
        self.window = window
        self.k1 = float(k1)
        self.b = float(b)
        self.postings = {}
        for unit_id, unit in enumerate(self.units):
            for term in set(unit.terms):
                self.postings.setdefault(term, []).append(unit_id)
        self.N = len(self.units)
        self.avgdl = (
            float(sum(unit.length for unit in self.units)) / self.N
            if self.N else 0.0
        )

    def __repr__(self):
        return 'PhraseIndex: %d units, %d terms, lengths %s-%s' % (
            (self.N, len(self.postings)) + tuple(self.window.bounds)
        )

    def __len__(self):
        return self.N

    def df(self, term):
        return len(self.postings.get(term, ()))

    def idf(self, term):
        df = self.df(term)
        return math.log(1.0 + (self.N - df + 0.5) / (df + 0.5))

    def candidates(self, terms):
        """Ids of units containing at least one of `terms`, ascending."""
        found = set()
        for term in terms:
            found.update(self.postings.get(term, ()))
        return sorted(found)

    def to_payload(self):
        return {
            'window': [
                self.window.target_length,
                str(self.window.tolerance_ratio),
                self.window.slack
            ],
            'k1': self.k1,
            'b': self.b,
            'units': [
                [u.doc_id, u.char_start, u.char_end, u.text, list(u.terms)]
                for u in self.units
            ]
        }

    @classmethod
    def from_payload(cls, payload):
        return cls(
            [
                PhraseUnit(doc_id, start, end, text, tuple(terms))
                for doc_id, start, end, text, terms in payload['units']
            ],
            LengthWindow(*payload['window']),
            payload['k1'],
            payload['b']
        )


def build_phrase_index(
    collection,
    window,
    normalizer=None,
    k1=DEFAULT_K1,
    b=DEFAULT_B,
    jobs=1
):
    """Cuts every document into token n-grams with n in the window.

    Arguments:
        collection: DocumentCollection
        window: LengthWindow in tokens
        normalizer: maps tokens to terms (identity when omitted)
        k1, b: BM25 parameters
        jobs: documents processed concurrently
    """
    normalizer = normalizer or Normalizer(case_folding=False)
    sizes = list(window.lengths())
    docs = sorted(collection, key=lambda doc: doc.doc_id)

    def cut(doc):
        _, terms = _lemmatize(doc, normalizer)
        units = []
        for first in range(len(doc.tokens)):
            for size in sizes:
                last = first + size
                if last > len(doc.tokens):
                    break
                start = doc.tokens[first].char_start
                end = doc.tokens[last - 1].char_end
                units.append(PhraseUnit(
                    doc.doc_id, start, end, doc.text[start:end],
                    terms[first:last]
                ))
        return units

    units = []
    for doc_units in _map_docs(cut, docs, jobs):
        units.extend(doc_units)
    index = PhraseIndex(units, window, k1, b)
    logger.info('built %r', index)
    return index


class IndexBundle(object):

    """The persisted search structures of one collection.

    Arguments:
        normalizer: the Normalizer every lemma was produced with
        positional: PositionalIndex
        phrases: mapping entity token count -> PhraseIndex
    """
    def __init__(self, normalizer, positional, phrases=None):
        self.normalizer = normalizer
        self.positional = positional
        self.phrases = OrderedDict(sorted((phrases or {}).items()))

    def __repr__(self):
        return 'IndexBundle: %r, phrase lengths %s' % (
            self.positional, list(self.phrases)
        )

    def phrase_index(self, token_count):
        return self.phrases.get(token_count)


def build_indexes(
    collection,
    normalizer,
    token_counts=(),
    tolerance_ratio=0,
    slack=1,
    k1=DEFAULT_K1,
    b=DEFAULT_B,
    jobs=1
):
    """Builds the positional index and one phrase index per token count."""
    positional = build_positional_index(collection, normalizer, jobs)
    phrases = {}
    for count in sorted(set(token_counts)):
        phrases[count] = build_phrase_index(
            collection,
            LengthWindow(count, tolerance_ratio, slack),
            normalizer,
            k1,
            b,
            jobs
        )
    return IndexBundle(normalizer, positional, phrases)


def save_indexes(bundle, path):
    dump_binary(path, INDEX_MAGIC, INDEX_VERSION, {
        'normalizer': bundle.normalizer.to_payload(),
        'positional': bundle.positional.to_payload(),
        'phrases': [
            [count, index.to_payload()]
            for count, index in bundle.phrases.items()
        ]
    })
    logger.info('saved %r to %s', bundle, path)


def load_indexes(path):
    _, payload = load_binary(path, INDEX_MAGIC, (INDEX_VERSION, ))
    return IndexBundle(
        Normalizer.from_payload(payload['normalizer']),
        PositionalIndex.from_payload(payload['positional']),
        dict(
            (count, PhraseIndex.from_payload(index))
            for count, index in payload['phrases']
        )
    )

