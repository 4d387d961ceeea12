from __future__ import absolute_import

import logging
import os
import sys

from .bootstrap import BootstrapConfig, bootstrap_corpus
from .config import load_config
from .evaluation import evaluate_retrieval, load_judgments
from .exceptions import ConfigError
from .index import build_indexes, load_indexes, save_indexes
from .ingest import (
    load_collection,
    load_collection_cache,
    load_normalizer,
    read_abbreviations,
    save_collection
)
from .method import ROSTER, SearchContext
from .query import load_gazetteer
from .rerank import load_embeddings

logger = logging.getLogger(__name__)

COLLECTION_FILE = 'collection.bin'
INDEX_FILE = 'indexes.bin'

_LEVELS = (logging.WARNING, logging.INFO, logging.DEBUG)


def configure_logging(verbosity=0, stream=None):
    """Sends package logs to stderr at WARNING, INFO (1) or DEBUG (2+)."""
    level = _LEVELS[min(max(verbosity, 0), len(_LEVELS) - 1)]
    root = logging.getLogger('ner_bootstrap')
    root.setLevel(level)
    if not root.handlers:
        handler = logging.StreamHandler(stream or sys.stderr)
        handler.setFormatter(logging.Formatter(
            '%(asctime)s %(levelname)s %(name)s: %(message)s'
        ))
        root.addHandler(handler)
    return level


class Pipeline(SearchContext):
    """Corpus bootstrapping pipeline.

    Loads the collection, indexes, gazetteer and embedding vectors named
    by a PipelineConfig on first use, and exposes every retrieval method
    through access-by-name.

    Arguments:
        config: PipelineConfig (defaults to load_config())
        verbose: if set, logs progress to stderr
        collection, indexes, gazetteer: preloaded objects that replace
            the configured files

    Examples:

    Getting a pipeline:

        pipeline = Pipeline(load_config('toy/config.ini'))

    Candidates of every gazetteer entity for one method:

        pipeline.boolean_phrase.list()
        pipeline.FuzzyRegex.limit(20).map()

    Candidates of a few entities, with per-call parameters:

        pipeline.fuzzy_regex.only('e1', 'e2').extra(max_edits=1).list()

    A single entity:

        candidates = pipeline.bm25.get('e3')

    Bootstrapping a corpus:

        corpus = pipeline.bootstrap()
    """
    def __init__(self, config=None, verbose=False, **kwargs):
        config = config or load_config()
        self.config = config
        self._normalizer = None
        self._abbreviations = None
        self._judgments = None
        if verbose:
            configure_logging(1)
        super(Pipeline, self).__init__(
            retrieval=config.retrieval,
            candidate_limit=config.bootstrap.candidate_limit,
            jobs=config.jobs,
            **kwargs
        )

    def __repr__(self):
        return 'Pipeline: %r' % self.config

    def output(self, *parts):
        return self.config.output(*parts)

    def ensure_output_dir(self):
        directory = self.config.path('output_dir')
        if not os.path.isdir(directory):
            os.makedirs(directory)
        return directory

    def _require(self, key):
        path = self.config.path(key)
        if path is None:
            raise ConfigError('paths.%s' % key, 'not configured')
        return path

    @property
    def abbreviations(self):
        def load():
            path = self.config.path('abbreviations')
            return tuple(read_abbreviations(path)) if path else ()
        return self._lazy('_abbreviations', load)

    @property
    def configured_normalizer(self):
        """Normalizer read from the configured rule files; searches use
        the one stored with the indexes."""
        return self._lazy('_normalizer', lambda: load_normalizer(
            self.config.path('lemma_dictionary'),
            self.config.path('suffix_rules'),
            self.config.retrieval.case_folding
        ))

    @property
    def judgments(self):
        return self._lazy('_judgments', lambda: load_judgments(
            self._require('judgments')
        ))

    # loaders

    def _load_collection(self):
        cache = self.output(COLLECTION_FILE)
        if os.path.exists(cache):
            logger.info('reading collection cache %s', cache)
            return load_collection_cache(cache)
        return self.read_collection()

    def read_collection(self):
        """Reads the collection from the configured manifest."""
        return load_collection(
            self._require('manifest'),
            abbreviations=self.abbreviations,
            jobs=self.jobs
        )

    def _load_indexes(self):
        path = self.output(INDEX_FILE)
        if os.path.exists(path):
            logger.info('reading indexes %s', path)
            return load_indexes(path)
        return self.build_indexes()

    def build_indexes(self):
        """Builds indexes over the collection, phrase indexes sized by
        the gazetteer's token counts when one is configured."""
        counts = ()
        if self.config.path('gazetteer'):
            counts = self.gazetteer.token_counts()
        config = self.config.retrieval
        return build_indexes(
            self.collection,
            self.configured_normalizer,
            counts,
            config.phrase_tolerance,
            config.phrase_slack,
            config.k1,
            config.b,
            self.jobs
        )

    def _load_gazetteer(self):
        return load_gazetteer(self._require('gazetteer'))

    def _load_embeddings(self, name):
        path = self.config.path('%s_vectors' % name)
        if path is None:
            logger.warning('%s: no vector file configured, skipped', name)
            return None
        return load_embeddings(path)

    # stages

    def ingest(self):
        """Reads the manifest and writes the collection cache."""
        collection = self.read_collection()
        self.ensure_output_dir()
        save_collection(collection, self.output(COLLECTION_FILE))
        with self._lock:
            self._collection = collection
        return collection

    def index(self, rebuild=False):
        """Writes the index file, building it when missing or asked to."""
        path = self.output(INDEX_FILE)
        with self._lock:
            if rebuild or not os.path.exists(path):
                self._indexes = self.build_indexes()
            bundle = self.indexes
        self.ensure_output_dir()
        save_indexes(bundle, path)
        return bundle

    def bootstrap(self, method=None):
        config = self.config.bootstrap
        if method is not None:
            config = BootstrapConfig(**dict(config._asdict(), method=method))
        return bootstrap_corpus(
            self.gazetteer,
            self.collection,
            self.indexes,
            config=config,
            name=self.config.name,
            context=self
        )

    def retrieve(self, name, entity_ids=(), limit=None):
        """(entity_id, candidates) pairs of one method."""
        query = self.method(name).only(*entity_ids)
        if limit is not None:
            query = query.limit(limit)
        return [
            (entry.entity_id, candidates) for entry, candidates in query
        ]

    def compare_methods(self, names=None):
        """Runs the roster against the judged entities.

        Returns:
            RetrievalReport over every method that can run.
        """
        judgments = self.judgments
        available = self.available()
        names = [
            name for name in (names or ROSTER) if name in available
        ]
        entity_ids = sorted(judgments.entities)
        cutoff = self.config.eval.cutoff
        results = dict(
            (name, dict(self.retrieve(name, entity_ids, cutoff)))
            for name in names
        )
        return evaluate_retrieval(results, judgments, self.config.eval)
