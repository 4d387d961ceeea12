from __future__ import absolute_import

import logging
import threading
from collections import OrderedDict, namedtuple
from concurrent.futures import ThreadPoolExecutor

import inflection

from .exceptions import ConfigError, InvalidGazetteer
from .index import LengthWindow, build_phrase_index
from .query import SearchQuery
from .rerank import (
    FusionConfig,
    fuse_concat,
    fuse_rrf,
    rerank_edit_distance,
    rerank_embedding
)
from .retrieval import (
    BM25,
    BOOLEAN_PHRASE,
    CONCAT,
    DEFAULT_LIMIT,
    EDIT_RERANK,
    EMBEDDING_RERANK,
    FAST_METHODS,
    FUZZY_REGEX,
    JACCARD,
    RRF,
    search_bm25,
    search_boolean_phrase,
    search_fuzzy_regex,
    search_jaccard
)
from .utils import exact

logger = logging.getLogger(__name__)

BERTSCORE = 'bertscore'
SENTENCEBERT = 'sentencebert'
EMBEDDING_METHODS = (BERTSCORE, SENTENCEBERT)
RERANKERS = (EDIT_RERANK, ) + EMBEDDING_METHODS
ROSTER = FAST_METHODS + RERANKERS + (RRF, CONCAT)

ALL_INPUTS = 'all'
FAST_INPUTS = 'fast'

_DISPLAY_NAMES = {
    JACCARD: 'Jaccard',
    BM25: 'Okapi BM25',
    BOOLEAN_PHRASE: 'Boolean Phrase',
    FUZZY_REGEX: 'Fuzzy Regexes',
    EDIT_RERANK: 'Edit Distance',
    BERTSCORE: 'BERTScore',
    SENTENCEBERT: 'SentenceBERT',
    RRF: 'RRF',
    CONCAT: 'Concatenation'
}


def display_name(name):
    return _DISPLAY_NAMES.get(name) or inflection.titleize(name)


class RetrievalConfig(namedtuple('RetrievalConfig', [
    'char_tolerance',
    'phrase_tolerance',
    'phrase_slack',
    'stride',
    'max_edits',
    'k1',
    'b',
    'rrf_k',
    'rrf_inputs',
    'case_folding'
])):

    """Parameters of the retrieval roster.

    `max_edits` of None means one edit per five surface characters.
    """
    __slots__ = ()

    def __new__(
        cls,
        char_tolerance=0.3,
        phrase_tolerance=0,
        phrase_slack=1,
        stride=1,
        max_edits=None,
        k1=1.2,
        b=0.75,
        rrf_k=60,
        rrf_inputs=ALL_INPUTS,
        case_folding=True
    ):
        for key, ratio in (
            ('char_tolerance', char_tolerance),
            ('phrase_tolerance', phrase_tolerance)
        ):
            if not 0 <= exact(ratio) < 1:
                raise ConfigError('retrieval.%s' % key, 'must be in [0, 1)')
        if phrase_slack < 0:
            raise ConfigError('retrieval.phrase_slack', 'must be >= 0')
        if stride < 1:
            raise ConfigError('retrieval.stride', 'must be >= 1')
        if max_edits is not None and max_edits < 0:
            raise ConfigError('retrieval.max_edits', 'must be >= 0')
        if not k1 > 0:
            raise ConfigError('retrieval.k1', 'must be > 0')
        if not 0 <= b <= 1:
            raise ConfigError('retrieval.b', 'must be in [0, 1]')
        if not rrf_k > 0:
            raise ConfigError('retrieval.rrf_k', 'must be > 0')
        if rrf_inputs not in (ALL_INPUTS, FAST_INPUTS):
            raise ConfigError('retrieval.rrf_inputs', 'must be all or fast')
        return super(RetrievalConfig, cls).__new__(
            cls,
            char_tolerance,
            phrase_tolerance,
            phrase_slack,
            stride,
            max_edits,
            k1,
            b,
            rrf_k,
            rrf_inputs,
            case_folding
        )


class SearchContext(object):

    """Shared, read-only state the retrieval methods run against.

    Arguments:
        collection: DocumentCollection
        indexes: IndexBundle built over the collection
        gazetteer: Gazetteer providing the queries
        retrieval: RetrievalConfig
        embeddings: mapping embedding method name -> EmbeddingStore
        candidate_limit: default number of candidates per entity
        jobs: number of entities searched concurrently
    """
    def __init__(
        self,
        collection=None,
        indexes=None,
        gazetteer=None,
        retrieval=None,
        embeddings=None,
        candidate_limit=DEFAULT_LIMIT,
        jobs=1
    ):
        self._collection = collection
        self._indexes = indexes
        self._gazetteer = gazetteer
        self._embeddings = dict(embeddings or {})
        self._queries = None
        self._methods = {}
        self._results = {}
        self._lock = threading.RLock()
        self.retrieval = retrieval or RetrievalConfig()
        self.candidate_limit = candidate_limit
        self.jobs = jobs

    def __repr__(self):
        return 'SearchContext: %r' % self._collection

    # loaders; a pipeline overrides these to read its configured files

    def _load_collection(self):
        raise ConfigError('paths.manifest', 'no collection available')

    def _load_indexes(self):
        raise ConfigError('paths.output_dir', 'no indexes available')

    def _load_gazetteer(self):
        raise ConfigError('paths.gazetteer', 'no gazetteer available')

    def _load_embeddings(self, name):
        return None

    def _lazy(self, attribute, loader):
        with self._lock:
            if getattr(self, attribute) is None:
                setattr(self, attribute, loader())
            return getattr(self, attribute)

    @property
    def collection(self):
        return self._lazy('_collection', self._load_collection)

    @property
    def indexes(self):
        return self._lazy('_indexes', self._load_indexes)

    @property
    def gazetteer(self):
        return self._lazy('_gazetteer', self._load_gazetteer)

    @property
    def normalizer(self):
        return self.indexes.normalizer

    @property
    def queries(self):
        return self._lazy(
            '_queries', lambda: self.gazetteer.queries(self.normalizer)
        )

    def query(self, entity_id):
        for query in self.queries:
            if query.entity_id == entity_id:
                return query
        raise InvalidGazetteer('unknown entity id %s' % entity_id)

    def phrase_index(self, token_count):
        """The phrase index for entities of `token_count` tokens."""
        with self._lock:
            bundle = self.indexes
            index = bundle.phrase_index(token_count)
            if index is None:
                config = self.retrieval
                index = build_phrase_index(
                    self.collection,
                    LengthWindow(
                        token_count,
                        config.phrase_tolerance,
                        config.phrase_slack
                    ),
                    bundle.normalizer,
                    config.k1,
                    config.b,
                    self.jobs
                )
                bundle.phrases[token_count] = index
            return index

    def embeddings(self, name):
        with self._lock:
            if name not in self._embeddings:
                self._embeddings[name] = self._load_embeddings(name)
            return self._embeddings[name]

    def cached(self, key, compute):
        with self._lock:
            if key in self._results:
                return self._results[key]
        value = compute()
        with self._lock:
            return self._results.setdefault(key, value)

    def map(self, fn, items):
        """Applies fn to every item, results in input order."""
        items = list(items)
        if self.jobs > 1 and len(items) > 1:
            with ThreadPoolExecutor(max_workers=self.jobs) as executor:
                return list(executor.map(fn, items))
        return [fn(item) for item in items]

    def method(self, name):
        key = inflection.underscore(name)
        if key not in ROSTER:
            key = key.replace('_', '')
        if key not in ROSTER:
            raise AttributeError(name)
        with self._lock:
            if key not in self._methods:
                self._methods[key] = RetrievalMethod(self, key)
            return self._methods[key]

    def available(self):
        """Roster methods that can run, in roster order."""
        return [
            name for name in ROSTER
            if name not in EMBEDDING_METHODS or self.embeddings(name)
        ]

    def __getattr__(self, key):
        if key.startswith('_'):
            raise AttributeError(key)
        return self.method(key)


class RetrievalMethod(object):

    """A single retrieval, reranking or fusion method.

    Arguments:
        context: a SearchContext
        name: a roster method name
    """
    def __init__(self, context, name):
        self.name = inflection.underscore(name)
        self.context = context

    def __repr__(self):
        return self.name

    @property
    def display_name(self):
        return display_name(self.name)

    def search(self, query, limit, **extras):
        """Ranked candidates of one query, at most `limit` of them."""
        if extras:
            return self._search(query, limit, **extras)
        return self.context.cached(
            (self.name, query.entity_id, limit),
            lambda: self._search(query, limit)
        )

    def run(self, queries, limit, **extras):
        results = self.context.map(
            lambda query: self.search(query, limit, **extras), queries
        )
        logger.info('%s: %d candidates for %d entities', self.name, sum(
            len(candidates) for candidates in results
        ), len(results))
        return results

    def _search(self, query, limit, **extras):
        context = self.context
        config = context.retrieval
        name = self.name
        if name == JACCARD:
            return search_jaccard(
                query,
                context.collection,
                limit,
                config.char_tolerance,
                config.stride,
                config.case_folding
            )
        if name == BM25:
            return search_bm25(
                query, context.phrase_index(len(query.lemmas)), limit
            )
        if name == BOOLEAN_PHRASE:
            return search_boolean_phrase(
                query, context.indexes.positional, limit, config.case_folding
            )
        if name == FUZZY_REGEX:
            return search_fuzzy_regex(
                query,
                context.collection,
                extras.get('max_edits', config.max_edits),
                limit
            )
        # rerankers and fusion see full candidate lists, cut after ranking
        depth = max(limit, context.candidate_limit)
        if name == EDIT_RERANK:
            return rerank_edit_distance(
                query, self._pool(query, depth), config.case_folding
            )[:limit]
        if name in EMBEDDING_METHODS:
            store = context.embeddings(name)
            if store is None:
                raise ConfigError(
                    'paths.%s_vectors' % name, 'no vector file configured'
                )
            return rerank_embedding(
                query, self._pool(query, depth), store, EMBEDDING_RERANK
            )[:limit]
        if name == RRF:
            inputs = FAST_METHODS
            if config.rrf_inputs == ALL_INPUTS:
                inputs = [
                    n for n in context.available() if n in FAST_METHODS or
                    n in RERANKERS
                ]
            return fuse_rrf(
                [context.method(n).search(query, depth) for n in inputs],
                FusionConfig(config.rrf_k)
            )[:limit]
        if name == CONCAT:
            return fuse_concat(
                context.method(FUZZY_REGEX).search(query, depth),
                context.method(RRF).search(query, depth)
            )[:limit]
        raise ConfigError('bootstrap.method', 'unknown method %r' % name)

    def _pool(self, query, limit):
        """Union of the fast methods' candidates, first occurrence kept."""
        pool = OrderedDict()
        for name in FAST_METHODS:
            for candidate in self.context.method(name).search(query, limit):
                pool.setdefault(candidate.key, candidate)
        return list(pool.values())

    def __getattr__(self, value):
        if value.startswith('_'):
            raise AttributeError(value)
        return getattr(SearchQuery(self), value)
