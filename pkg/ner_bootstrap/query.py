from __future__ import absolute_import

from collections import OrderedDict, namedtuple

from six import string_types

from .corpus import EntityType
from .exceptions import InvalidGazetteer
from .ingest import tokenize
from .utils import read_tsv


class Query(namedtuple(
    'Query', 'entity_id surface entity_type tokens lemmas'
)):

    """A gazetteer entity prepared for retrieval.

    `tokens` are the surface's token texts and `lemmas` their normalized
    forms, produced by the same Normalizer the indexes were built with.
    """
    __slots__ = ()

    def __repr__(self):
        return 'Query: %s %s %r' % (
            self.entity_id, self.entity_type, self.surface
        )


def make_query(entity_id, surface, entity_type, normalizer):
    if not surface or not surface.strip():
        raise InvalidGazetteer('%s: empty surface' % entity_id)
    if isinstance(entity_type, string_types):
        try:
            entity_type = EntityType(entity_type)
        except ValueError:
            raise InvalidGazetteer('%s: unknown entity type %r' % (
                entity_id, entity_type
            ))
    tokens = tuple(token.text for token in tokenize(surface))
    return Query(
        entity_id,
        surface,
        entity_type,
        tokens,
        tuple(normalizer.normalize(token) for token in tokens)
    )


class SearchQuery(object):

    """A lazy, chainable retrieval request against one method.

    Iterating yields (Query, candidates) pairs ordered by entity_id.

    Examples:

        pipeline.boolean_phrase.limit(10).list()
        pipeline.FuzzyRegex.only('e1', 'e7').extra(max_edits=2).map()
        pipeline.bm25.get('e3')
    """
    def __init__(
        self,
        method=None,
        entity_ids=None,
        size=None,
        extras=None
    ):
        self.method = method
        self.entity_ids = entity_ids or []
        self.size = size
        self.extras = extras or {}

    def __repr__(self):
        return 'Query: %s' % self.method.name

    def list(self):
        return list(self)

    def first(self):
        """The (Query, candidates) pair of the first selected entity."""
        queries = self._get_queries()[:1]
        if not queries:
            return None
        return queries[0], self.method.search(
            queries[0], self._get_limit(), **self.extras
        )

    def map(self):
        """Candidates keyed by entity_id."""
        return OrderedDict(
            (query.entity_id, candidates) for query, candidates in self
        )

    def get(self, entity_id):
        """Returns the candidates of a single entity.

        Arguments:
            entity_id: a gazetteer entity ID
        """
        return self.method.search(
            self.method.context.query(entity_id),
            self._get_limit(),
            **self.extras
        )

    def only(self, *entity_ids):
        return self._copy(entity_ids=entity_ids)

    def limit(self, size):
        return self._copy(size=size)

    def extra(self, **kwargs):
        return self._copy(extras=kwargs)

    def _get_limit(self):
        if self.size is None:
            return self.method.context.candidate_limit
        return self.size

    def _get_queries(self):
        queries = self.method.context.queries
        if self.entity_ids:
            wanted = set(self.entity_ids)
            queries = [q for q in queries if q.entity_id in wanted]
        return queries

    def _copy(self, entity_ids=(), size=None, extras=None):
        # entity selections accumulate; extras override key by key
        merged = dict(self.extras)
        merged.update(extras or {})
        return SearchQuery(
            self.method,
            sorted(set(self.entity_ids) | set(entity_ids)),
            self.size if size is None else size,
            merged
        )

    def __iter__(self):
        queries = self._get_queries()
        results = self.method.run(queries, self._get_limit(), **self.extras)
        for query, candidates in zip(queries, results):
            yield query, candidates


GazetteerEntry = namedtuple('GazetteerEntry', 'entity_id surface entity_type')


class Gazetteer(object):

    """Known entities used as distant supervision.

    Arguments:
        entries: GazetteerEntry iterable with unique entity_ids and
            non-empty surfaces
    """
    def __init__(self, entries):
        self.entries = tuple(entries)
        seen = set()
        for entry in self.entries:
            if entry.entity_id in seen:
                raise InvalidGazetteer(
                    'duplicate entity id %s' % entry.entity_id
                )
            seen.add(entry.entity_id)
            if not entry.surface.strip():
                raise InvalidGazetteer('%s: empty surface' % entry.entity_id)

    def __repr__(self):
        return 'Gazetteer: %d entries' % len(self.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def token_counts(self):
        """Distinct token counts of the surfaces."""
        return sorted(set(
            len(tokenize(entry.surface)) for entry in self.entries
        ))

    def queries(self, normalizer):
        """Queries for every entry, ordered by entity_id."""
        return [
            make_query(e.entity_id, e.surface, e.entity_type, normalizer)
            for e in sorted(self.entries, key=lambda e: e.entity_id)
        ]


def load_gazetteer(source):
    """Reads `entity_id\\tentity_type\\tsurface` rows."""
    entries = []
    for number, (entity_id, entity_type, surface) in read_tsv(
        source, 3, InvalidGazetteer
    ):
        try:
            entity_type = EntityType(entity_type.strip())
        except ValueError:
            raise InvalidGazetteer('gazetteer line %d: unknown type %r' % (
                number, entity_type
            ))
        entries.append(GazetteerEntry(entity_id, surface.strip(), entity_type))
    return Gazetteer(entries)
