"""Loading OCR page texts, segmenting them and normalizing tokens."""
from __future__ import absolute_import

import io
import logging
import os
from bisect import bisect_left, bisect_right
from concurrent.futures import ThreadPoolExecutor

import regex

from .corpus import AnnotatedSentence, Label, Token
from .exceptions import (
    DuplicateDocId,
    FormatError,
    InvalidCorpus,
    InvalidEncoding,
    MissingFile
)
from .utils import dump_binary, load_binary, open_text, read_tsv

logger = logging.getLogger(__name__)

DATA_DIR = os.path.join(os.path.dirname(__file__), 'data')
DEFAULT_SUFFIX_RULES = os.path.join(DATA_DIR, 'suffix_rules.txt')
DEFAULT_ABBREVIATIONS = os.path.join(DATA_DIR, 'abbreviations.txt')
DEFAULT_MANIFEST = 'manifest.tsv'

COLLECTION_MAGIC = b'NERBCOL\0'
COLLECTION_VERSION = 1

_TOKEN = regex.compile(r'[\p{L}\p{M}\p{N}]+|[^\p{L}\p{M}\p{N}\s]')
_BOUNDARY = regex.compile(r'[.!?](?=\s+[\p{Lu}\p{Lt}\p{N}])')
_GAP = regex.compile(r'\s+')
_LAST_WORD = regex.compile(r'[\p{L}\p{M}\p{N}]*[.!?]\Z')
# longest abbreviation considered when suppressing a boundary
_ABBREVIATION_REACH = 40


def tokenize(text, offset=0):
    """Splits text into letter/digit runs and single punctuation marks.

    Arguments:
        text: string to tokenize
        offset: added to every character offset
    """
    return [
        Token(match.group(), match.start() + offset, match.end() + offset)
        for match in _TOKEN.finditer(text)
    ]


def split_sentences(text, abbreviations=()):
    """Partitions text into sentence spans.

    A sentence ends after '.', '!' or '?' followed by whitespace and an
    upper-case letter or a digit, unless the word ending in the mark is a
    listed abbreviation. The whitespace belongs to the earlier sentence.
    """
    if not text:
        return []
    abbreviations = frozenset(abbreviations)
    starts = [0]
    for match in _BOUNDARY.finditer(text):
        reach = text[max(0, match.end() - _ABBREVIATION_REACH):match.end()]
        word = _LAST_WORD.search(reach)
        if word and word.group() in abbreviations:
            continue
        starts.append(_GAP.match(text, match.end()).end())
    return list(zip(starts, starts[1:] + [len(text)]))


class Normalizer(object):

    """Maps surface tokens to lemma-like index terms.

    Arguments:
        lemma_dictionary: mapping surface form -> lemma
        suffix_rules: ordered (suffix, minimum stem length) strip rules
        case_folding: fold case before lookup
    """
    def __init__(
        self,
        lemma_dictionary=None,
        suffix_rules=None,
        case_folding=True
    ):
        self.case_folding = case_folding
        self.suffix_rules = tuple(
            (suffix, int(min_stem))
            for suffix, min_stem in (suffix_rules or ())
            if suffix
        )
        self.lemma_dictionary = dict(
            (self._fold(surface), self._fold(lemma))
            for surface, lemma in (lemma_dictionary or {}).items()
        )

    def __repr__(self):
        return 'Normalizer: %d lemmas, %d rules' % (
            len(self.lemma_dictionary), len(self.suffix_rules)
        )

    def _fold(self, token):
        return token.casefold() if self.case_folding else token

    def _step(self, token):
        lemma = self.lemma_dictionary.get(token)
        if lemma is not None:
            return lemma
        for suffix, min_stem in self.suffix_rules:
            if (
                token.endswith(suffix) and
                len(token) - len(suffix) >= min_stem
            ):
                return token[:-len(suffix)]
        return token

    def normalize(self, token):
        current = self._fold(token)
        trail = [current]
        seen = set(trail)
        while True:
            following = self._step(current)
            if following == current:
                return current
            if following in seen:
                # dictionary cycle
                return min(trail[trail.index(following):])
            trail.append(following)
            seen.add(following)
            current = following

    def to_payload(self):
        return {
            'case_folding': self.case_folding,
            'suffix_rules': [list(rule) for rule in self.suffix_rules],
            'lemma_dictionary': sorted(self.lemma_dictionary.items())
        }

    @classmethod
    def from_payload(cls, payload):
        normalizer = cls(
            suffix_rules=payload['suffix_rules'],
            case_folding=payload['case_folding']
        )
        normalizer.lemma_dictionary = dict(
            (surface, lemma)
            for surface, lemma in payload['lemma_dictionary']
        )
        return normalizer


def normalize(token, normalizer):
    return normalizer.normalize(token)


def read_suffix_rules(source):
    rules = []
    handle = open_text(source)
    try:
        for number, line in enumerate(handle, 1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            parts = line.split()
            if len(parts) != 2 or not parts[1].isdigit():
                raise FormatError('%s:%d: expected "<suffix> <min stem>"' % (
                    getattr(handle, 'name', '<stream>'), number
                ))
            rules.append((parts[0], int(parts[1])))
    finally:
        if handle is not source:
            handle.close()
    return rules


def read_abbreviations(source):
    handle = open_text(source)
    try:
        return [
            line.strip() for line in handle
            if line.strip() and not line.lstrip().startswith('#')
        ]
    finally:
        if handle is not source:
            handle.close()


def read_lemma_dictionary(source):
    return dict(
        (surface, lemma)
        for _, (surface, lemma) in read_tsv(source, 2, FormatError)
    )


def load_normalizer(
    lemma_dictionary=None,
    suffix_rules=DEFAULT_SUFFIX_RULES,
    case_folding=True
):
    return Normalizer(
        lemma_dictionary=(
            read_lemma_dictionary(lemma_dictionary)
            if lemma_dictionary else None
        ),
        suffix_rules=read_suffix_rules(suffix_rules) if suffix_rules else (),
        case_folding=case_folding
    )


class Document(object):

    """One OCR page with its sentence and token segmentation.

    `sentences` holds (start, end) spans of the sentences that contain at
    least one token, trimmed to their first and last token. `tokens`
    carries document-level offsets.
    """
    __slots__ = (
        'doc_id',
        'language',
        'text',
        'relevant',
        'sentences',
        'tokens',
        '_sentence_starts',
        '_token_starts'
    )

    def __init__(self, doc_id, language, text, relevant=True,
                 abbreviations=()):
        self.doc_id = doc_id
        self.language = language
        self.text = text
        self.relevant = relevant
        self.tokens = tuple(tokenize(text))
        self._token_starts = [token.char_start for token in self.tokens]
        sentences = []
        for start, end in split_sentences(text, abbreviations):
            first = bisect_left(self._token_starts, start)
            last = bisect_left(self._token_starts, end)
            if first < last:
                sentences.append((
                    self.tokens[first].char_start,
                    self.tokens[last - 1].char_end
                ))
        self.sentences = tuple(sentences)
        self._sentence_starts = [start for start, _ in sentences]

    def __repr__(self):
        return 'Document: %s (%s, %d sentences)' % (
            self.doc_id, self.language, len(self.sentences)
        )

    def sentence_id(self, index):
        return '%s:%d' % (self.doc_id, index)

    def sentence_index(self, offset):
        """Index of the sentence whose partition contains `offset`."""
        return max(bisect_right(self._sentence_starts, offset) - 1, 0)

    def token_range(self, index):
        start, end = self.sentences[index]
        return (
            bisect_left(self._token_starts, start),
            bisect_left(self._token_starts, end)
        )

    def sentence_tokens(self, index):
        """Tokens of a sentence, rebased to sentence-relative offsets."""
        base = self.sentences[index][0]
        first, last = self.token_range(index)
        return [
            Token(token.text, token.char_start - base, token.char_end - base)
            for token in self.tokens[first:last]
        ]

    def sentence_text(self, index):
        start, end = self.sentences[index]
        return self.text[start:end]

    def annotated_sentence(self, index, tags=None):
        tokens = self.sentence_tokens(index)
        return AnnotatedSentence(
            sentence_id=self.sentence_id(index),
            doc_id=self.doc_id,
            language=self.language,
            text=self.sentence_text(index),
            tokens=tokens,
            tags=tags if tags is not None else [Label.O] * len(tokens)
        )


class DocumentCollection(object):

    """An immutable, ordered set of documents.

    Arguments:
        docs: Document iterable; doc_ids must be unique
        abbreviations: abbreviations used for sentence splitting
    """
    def __init__(self, docs, abbreviations=()):
        self.docs = tuple(docs)
        self.abbreviations = tuple(abbreviations)
        self._by_id = {}
        for doc in self.docs:
            if doc.doc_id in self._by_id:
                raise DuplicateDocId(doc.doc_id)
            self._by_id[doc.doc_id] = doc

    def __repr__(self):
        return 'DocumentCollection: %d docs' % len(self.docs)

    def __len__(self):
        return len(self.docs)

    def __iter__(self):
        return iter(self.docs)

    def __getitem__(self, doc_id):
        return self._by_id[doc_id]

    def get(self, doc_id, default=None):
        return self._by_id.get(doc_id, default)

    @property
    def sentence_count(self):
        return sum(len(doc.sentences) for doc in self.docs)

    def sorted_docs(self):
        return sorted(self.docs, key=lambda doc: doc.doc_id)

    @classmethod
    def from_texts(cls, records, abbreviations=()):
        """Builds a collection from (doc_id, language, text[, relevant])."""
        return cls([
            Document(*record, abbreviations=abbreviations)
            for record in records
        ], abbreviations)

    def to_payload(self):
        return {
            'abbreviations': list(self.abbreviations),
            'docs': [
                [doc.doc_id, doc.language, doc.text, doc.relevant]
                for doc in self.docs
            ]
        }

    @classmethod
    def from_payload(cls, payload):
        return cls.from_texts(
            [tuple(record) for record in payload['docs']],
            payload['abbreviations']
        )


def _read_page(path):
    if not os.path.exists(path):
        raise MissingFile(path)
    with io.open(path, 'rb') as handle:
        data = handle.read()
    try:
        return data.decode('utf-8')
    except UnicodeDecodeError as e:
        raise InvalidEncoding('%s: %s' % (path, e))


def read_manifest(path):
    """Reads `doc_id\\tlanguage\\trelative_path[\\trelevant]` rows."""
    rows = []
    seen = set()
    for number, fields in read_tsv(path, (3, 4), InvalidCorpus):
        doc_id, language, relative = fields[:3]
        if doc_id in seen:
            raise DuplicateDocId('%s (manifest line %d)' % (doc_id, number))
        seen.add(doc_id)
        relevant = fields[3].strip() != '0' if len(fields) == 4 else True
        rows.append((doc_id, language or 'unknown', relative, relevant))
    return rows


def load_collection(path, manifest=None, abbreviations=(), jobs=1):
    """Loads, segments and tokenizes every page listed in a manifest.

    Arguments:
        path: collection directory, or the manifest file itself
        manifest: manifest path (defaults to <path>/manifest.tsv);
            page paths are resolved against the manifest's directory
        abbreviations: abbreviations suppressing sentence boundaries
        jobs: number of files read concurrently
    Returns:
        DocumentCollection in manifest order.
    """
    if manifest is None:
        manifest = (
            path if os.path.isfile(path)
            else os.path.join(path, DEFAULT_MANIFEST)
        )
    elif not os.path.isabs(manifest) and os.path.isdir(path):
        manifest = os.path.join(path, manifest)
    if not os.path.exists(manifest):
        raise MissingFile(manifest)
    base = os.path.dirname(os.path.abspath(manifest))
    rows = read_manifest(manifest)

    def load(row):
        doc_id, language, relative, relevant = row
        text = _read_page(os.path.join(base, relative))
        return Document(doc_id, language, text, relevant, abbreviations)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            docs = list(executor.map(load, rows))
    else:
        docs = [load(row) for row in rows]
    collection = DocumentCollection(docs, abbreviations)
    logger.info(
        'loaded %d documents, %d sentences from %s',
        len(collection), collection.sentence_count, manifest
    )
    return collection


def save_collection(collection, path):
    dump_binary(
        path, COLLECTION_MAGIC, COLLECTION_VERSION, collection.to_payload()
    )


def load_collection_cache(path):
    _, payload = load_binary(path, COLLECTION_MAGIC, (COLLECTION_VERSION, ))
    return DocumentCollection.from_payload(payload)
