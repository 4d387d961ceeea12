import io
import math
import random
from collections import Counter
from unittest import TestCase

import Levenshtein
from ner_bootstrap.exceptions import FormatError
from ner_bootstrap.index import (
    LengthWindow,
    build_phrase_index,
    build_positional_index
)
from ner_bootstrap.ingest import DocumentCollection, Normalizer
from ner_bootstrap.query import make_query
from ner_bootstrap.retrieval import (
    WORD,
    Candidate,
    default_max_edits,
    edit_distance,
    jaccard_similarity,
    rank_key,
    read_candidates,
    search_bm25,
    search_boolean_phrase,
    search_fuzzy_regex,
    search_jaccard,
    suppress_overlaps,
    write_candidates
)
from ner_bootstrap.utils import fold_case, overlaps
from six.moves import range
from tests.setup import create_fixture

VOCABULARY = ('ab', 'ba', 'abb', 'b', 'aab', 'bab')


def random_collection(rng, docs=3, words=(4, 14)):
    return DocumentCollection.from_texts([
        ('d%d' % number, 'cs', ' '.join(
            rng.choice(VOCABULARY) for _ in range(rng.randint(*words))
        ))
        for number in range(docs)
    ])


def random_query(rng, normalizer, size=(1, 3)):
    surface = ' '.join(
        rng.choice(VOCABULARY) for _ in range(rng.randint(*size))
    )
    return make_query('q', surface, 'PER', normalizer)


def bigrams(text):
    if len(text) < 2:
        return set([text]) if text else set()
    return set(text[i:i + 2] for i in range(len(text) - 1))


def jaccard(a, b):
    if not a and not b:
        return 1.0
    return float(len(a & b)) / len(a | b)


class SimilarityTestCase(TestCase):

    def test_jaccard(self):
        self.assertEqual(1.0, jaccard_similarity('abc', 'abc'))
        self.assertEqual(0.0, jaccard_similarity('ab', 'cd'))
        self.assertEqual(1.0 / 3, jaccard_similarity('abc', 'bcd'))
        self.assertEqual(0.5, jaccard_similarity('Jan Vok', 'Jan', WORD))
        with self.assertRaises(ValueError):
            jaccard_similarity('a', 'b', 'other')

    def test_edit_distance(self):
        self.assertEqual(2, edit_distance('Praze', 'Praha'))
        self.assertEqual(1, edit_distance('Jan z Kralup', 'Jan Kralup', WORD))
        self.assertEqual(3, default_max_edits('Jan z Kralup'))
        self.assertEqual(1, default_max_edits('Brno'))

    def test_rank_key(self):
        a = Candidate('d2', 0, 3, 'abc', 1.0, 'x')
        b = Candidate('d1', 5, 8, 'abc', 1.0, 'x')
        c = Candidate('d3', 0, 3, 'abc', 2.0, 'x')
        self.assertEqual([c, b, a], sorted([a, b, c], key=rank_key))
        self.assertEqual('x', a.origin)


class SearchOracleTestCase(TestCase):

    def setUp(self):
        self.normalizer = Normalizer()

    def test_jaccard(self):
        for seed in range(100):
            rng = random.Random(seed)
            collection = random_collection(rng)
            query = random_query(rng, self.normalizer)
            surface = query.surface
            low, high = LengthWindow(len(surface), 0.3).bounds
            expected = {}
            for doc in collection:
                for i, first in enumerate(doc.tokens):
                    for last in doc.tokens[i:]:
                        start, end = first.char_start, last.char_end
                        if not low <= end - start <= high:
                            continue
                        piece = doc.text[start:end]
                        score = (
                            jaccard(bigrams(piece), bigrams(surface)) +
                            jaccard(set(piece.split()), set(surface.split()))
                        ) / 2
                        if score > 0:
                            expected[(doc.doc_id, start, end)] = score
            found = search_jaccard(query, collection)
            self.assertEqual(sorted(found, key=rank_key), found)
            self.assertEqual(set(expected), set(c.key for c in found))
            for candidate in found:
                self.assertAlmostEqual(expected[candidate.key], candidate.score)

    def test_bm25(self):
        k1, b = 1.2, 0.75
        for seed in range(100):
            rng = random.Random(seed)
            collection = random_collection(rng)
            query = random_query(rng, self.normalizer, (1, 2))
            window = LengthWindow(len(query.lemmas), 0, 1)
            low, high = window.bounds
            units = []
            for doc in collection.sorted_docs():
                words = [t.text for t in doc.tokens]
                for first in range(len(words)):
                    for size in range(low, high + 1):
                        if first + size <= len(words):
                            units.append((doc, first, words[first:first + size]))
            avgdl = float(sum(len(u[2]) for u in units)) / len(units)
            terms = list(dict.fromkeys(query.lemmas))
            expected = {}
            for doc, first, words in units:
                counts = Counter(words)
                if not any(term in counts for term in terms):
                    continue
                score = 0.0
                for term in terms:
                    df = sum(1 for u in units if term in u[2])
                    idf = math.log(1 + (len(units) - df + 0.5) / (df + 0.5))
                    tf = counts[term]
                    score += idf * tf * (k1 + 1) / (
                        tf + k1 * (1 - b + b * len(words) / avgdl)
                    )
                key = (
                    doc.doc_id,
                    doc.tokens[first].char_start,
                    doc.tokens[first + len(words) - 1].char_end
                )
                expected[key] = score
            index = build_phrase_index(collection, window, self.normalizer)
            found = search_bm25(query, index)
            self.assertEqual(sorted(found, key=rank_key), found)
            self.assertEqual(set(expected), set(c.key for c in found))
            for candidate in found:
                self.assertAlmostEqual(expected[candidate.key], candidate.score)

    def test_bm25_without_index(self):
        query = make_query('q', 'ab', 'PER', self.normalizer)
        self.assertEqual([], search_bm25(query, None))

    def test_boolean_phrase(self):
        for seed in range(100):
            rng = random.Random(seed)
            collection = random_collection(rng, words=(10, 30))
            query = random_query(rng, self.normalizer, (1, 2))
            size = len(query.tokens)
            expected = set()
            for doc in collection:
                words = [t.text for t in doc.tokens]
                for first in range(len(words) - size + 1):
                    if tuple(words[first:first + size]) == query.lemmas:
                        expected.add((
                            doc.doc_id,
                            doc.tokens[first].char_start,
                            doc.tokens[first + size - 1].char_end
                        ))
            index = build_positional_index(collection, self.normalizer)
            found = search_boolean_phrase(query, index)
            self.assertEqual(expected, set(c.key for c in found))
            for candidate in found:
                # lemmas are the tokens themselves, so every hit is exact
                self.assertEqual(0.0, candidate.score)
                self.assertEqual(query.surface, candidate.matched_text)

    def test_fuzzy_regex(self):
        for seed in range(100):
            rng = random.Random(seed)
            collection = random_collection(rng, docs=2, words=(3, 8))
            surface = ''.join(
                rng.choice('ab') for _ in range(rng.randint(3, 6))
            )
            query = make_query('q', surface, 'LOC', self.normalizer)
            max_edits = rng.randint(0, 1)
            found = search_fuzzy_regex(query, collection, max_edits)
            self.assertEqual(sorted(found, key=rank_key), found)
            by_doc = {}
            for candidate in found:
                distance = Levenshtein.distance(
                    candidate.matched_text, surface
                )
                self.assertTrue(distance <= max_edits)
                self.assertEqual(-distance, candidate.score)
                by_doc.setdefault(candidate.doc_id, []).append(candidate)
            for hits in by_doc.values():
                for i, a in enumerate(hits):
                    for b in hits[i + 1:]:
                        self.assertFalse(overlaps(
                            a.char_start, a.char_end, b.char_start, b.char_end
                        ))
            # brute force: every close substring, best (distance, length,
            # start) first, dropping any that overlaps one already kept
            expected = []
            for doc in collection:
                text = fold_case(doc.text)
                close = sorted(
                    (Levenshtein.distance(text[start:end], surface),
                     end - start, start)
                    for start in range(len(text))
                    for end in range(start + 1, len(text) + 1)
                )
                kept = []
                for distance, length, start in close:
                    if distance > max_edits:
                        break
                    if not any(
                        overlaps(start, start + length, s, e)
                        for s, e in kept
                    ):
                        kept.append((start, start + length))
                        expected.append(
                            (doc.doc_id, start, start + length, -distance)
                        )
            self.assertEqual(
                sorted(expected),
                sorted(c.key + (c.score, ) for c in found),
                seed
            )

    def test_fuzzy_case_folding(self):
        collection = DocumentCollection.from_texts([
            ('d1', 'cs', 'Listina z KRALUP a Kralupy')
        ])
        query = make_query('e1', 'Kralup', 'LOC', self.normalizer)
        found = search_fuzzy_regex(query, collection, 0)
        self.assertEqual(['KRALUP', 'Kralup'], [
            c.matched_text for c in found
        ])
        with self.assertRaises(ValueError):
            search_fuzzy_regex(query, collection, -1)

    def test_suppress_overlaps(self):
        hits = [(1, 3, 0), (0, 3, 2), (1, 2, 6), (1, 2, 7)]
        self.assertEqual([(0, 3, 2), (1, 2, 6)], suppress_overlaps(hits))

    def test_limit(self):
        rng = random.Random(1)
        collection = random_collection(rng, words=(20, 30))
        query = make_query('q', 'ab', 'PER', self.normalizer)
        full = search_jaccard(query, collection)
        self.assertEqual(full[:3], search_jaccard(query, collection, 3))


class FixtureSearchTestCase(TestCase):

    def setUp(self):
        self.fixture = create_fixture()

    def _query(self, entity_id):
        for entry in self.fixture.gazetteer:
            if entry.entity_id == entity_id:
                return make_query(
                    entry.entity_id, entry.surface, entry.entity_type,
                    self.fixture.normalizer
                )

    def test_boolean_phrase_matches_inflections(self):
        found = search_boolean_phrase(
            self._query('e3'), self.fixture.indexes.positional
        )
        self.assertEqual(6, len(found))
        self.assertEqual(
            ['Praha', 'Praha', 'Praha'],
            [c.matched_text for c in found[:3]]
        )
        self.assertEqual(['p2', 'p3', 'p4'], [c.doc_id for c in found[:3]])
        self.assertEqual(
            set(['Praze', 'Prahy']), set(c.matched_text for c in found[3:])
        )

    def test_multi_token_entity(self):
        found = search_boolean_phrase(
            self._query('e1'), self.fixture.indexes.positional
        )
        self.assertEqual(
            ['p1', 'p1', 'p2', 'p4', 'p5'], [c.doc_id for c in found]
        )
        self.assertEqual((15, 27), (found[0].char_start, found[0].char_end))

    def test_candidates_file(self):
        candidates = [
            Candidate('p1', 15, 27, 'Jan z\tKralup', 0.5, 'bm25'),
            Candidate('p2', 64, 76, 'Jan z Kralup', -1.0, 'fuzzy_regex')
        ]
        buffer = io.StringIO()
        write_candidates([('e1', candidates)], buffer)
        buffer.seek(0)
        again = read_candidates(buffer)
        self.assertEqual(['e1'], list(again))
        self.assertEqual(
            [c.key for c in candidates], [c.key for c in again['e1']]
        )
        self.assertEqual('Jan z Kralup', again['e1'][0].matched_text)
        self.assertEqual(0.5, again['e1'][0].score)

    def test_malformed_candidates_file(self):
        with self.assertRaises(FormatError):
            read_candidates(io.StringIO(u'e1\tbm25\tp1\tx\t27\t0.5\tJan\n'))
