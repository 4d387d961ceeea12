"""Gazetteer-driven corpus bootstrapping.

Every gazetteer entity is searched in the collection, each hit's
surrounding sentence is extracted, sentences hit more than once are
merged, mentions are projected to BIO tags and the corpus is split.
"""
from __future__ import absolute_import

import logging
import math
from collections import OrderedDict, namedtuple

import numpy as np
from tqdm import tqdm

from .corpus import (
    TEST,
    TRAIN,
    UNASSIGNED,
    VALIDATION,
    Corpus,
    EntityMention,
    align_mention,
    covered_tokens,
    project_bio,
    render_mentions,
    validate_corpus
)
from .exceptions import ConfigError, SpanOutOfRange
from .method import ROSTER, SearchContext
from .retrieval import BOOLEAN_PHRASE, DEFAULT_LIMIT
from .utils import exact, open_text

logger = logging.getLogger(__name__)

DEFAULT_RATIOS = (0.8, 0.1, 0.1)


def check_ratios(ratios, key='bootstrap.split_ratios'):
    ratios = tuple(ratios)
    if len(ratios) != 3:
        raise ConfigError(key, 'expected train, validation and test ratios')
    if any(exact(r) <= 0 for r in ratios):
        raise ConfigError(key, 'ratios must be positive')
    if sum(exact(r) for r in ratios) != 1:
        raise ConfigError(key, 'ratios must sum to 1')
    return ratios


class BootstrapConfig(namedtuple('BootstrapConfig', [
    'method',
    'candidate_limit',
    'split_ratios',
    'rng_seed',
    'review_sample'
])):
    __slots__ = ()

    def __new__(
        cls,
        method=BOOLEAN_PHRASE,
        candidate_limit=DEFAULT_LIMIT,
        split_ratios=DEFAULT_RATIOS,
        rng_seed=0,
        review_sample=100
    ):
        if method not in ROSTER:
            raise ConfigError('bootstrap.method', 'unknown method %r' % (
                method,
            ))
        if candidate_limit < 1:
            raise ConfigError('bootstrap.candidate_limit', 'must be >= 1')
        if review_sample < 0:
            raise ConfigError('bootstrap.review_sample', 'must be >= 0')
        return super(BootstrapConfig, cls).__new__(
            cls,
            method,
            candidate_limit,
            check_ratios(split_ratios),
            rng_seed,
            review_sample
        )


def extract_occurrence(doc, char_start, char_end, entity_type):
    """Maps a document-level span to its sentence.

    Returns:
        (sentence_id, sentence-relative EntityMention) for the sentence
        containing `char_start`, the span clipped to that sentence; None
        when nothing but whitespace remains after clipping.
    """
    if not 0 <= char_start < char_end <= len(doc.text):
        raise SpanOutOfRange('%s: span %d-%d outside 0-%d' % (
            doc.doc_id, char_start, char_end, len(doc.text)
        ))
    if not doc.sentences:
        return None
    index = doc.sentence_index(char_start)
    base, end = doc.sentences[index]
    start = max(char_start, base) - base
    stop = min(char_end, end) - base
    if start >= stop or not covered_tokens(
        doc.sentence_tokens(index), start, stop
    ):
        return None
    return doc.sentence_id(index), EntityMention(entity_type, start, stop)


def _parse_sentence_id(sentence_id):
    doc_id, _, index = sentence_id.rpartition(':')
    return doc_id, int(index)


def resolve_overlaps(mentions):
    """Keeps the longest of overlapping mentions.

    Ties go to the earlier start, then PER over LOC. The result is in
    start order.
    """
    kept = []
    for mention in sorted(mentions, key=lambda m: (
        -m.length, m.char_start, m.entity_type.rank
    )):
        if not any(mention.overlaps(other) for other in kept):
            kept.append(mention)
    return sorted(kept, key=lambda m: m.char_start)


def merge_occurrences(extractions, collection):
    """Builds one annotated sentence per distinct extracted sentence.

    Arguments:
        extractions: (sentence_id, mention, entity_type) triples
        collection: the DocumentCollection the sentence ids refer to
    Returns:
        AnnotatedSentence list ordered by (doc_id, sentence index).
    """
    grouped = OrderedDict()
    for sentence_id, mention, entity_type in extractions:
        grouped.setdefault(sentence_id, []).append(
            mention._replace(entity_type=entity_type, nested=())
        )
    sentences = []
    for sentence_id in sorted(grouped, key=_parse_sentence_id):
        doc_id, index = _parse_sentence_id(sentence_id)
        doc = collection[doc_id]
        tokens = doc.sentence_tokens(index)
        aligned = OrderedDict()
        for mention in grouped[sentence_id]:
            mention = align_mention(tokens, mention)
            if mention is not None:
                aligned.setdefault(
                    (mention.entity_type, mention.char_start,
                     mention.char_end),
                    mention
                )
        mentions = resolve_overlaps(aligned.values())
        sentences.append(
            doc.annotated_sentence(index, project_bio(tokens, mentions))
        )
    return sentences


def split_corpus(corpus, ratios=DEFAULT_RATIOS, seed=0):
    """Assigns train/validation/test by a seeded permutation.

    The permutation comes from numpy's PCG64 generator. The first
    floor(r_train * n) permuted sentences train, the next
    floor(r_validation * n) validate and the rest test.
    """
    ratios = check_ratios(ratios)
    n = len(corpus)
    order = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    train = int(math.floor(exact(ratios[0]) * n))
    validation = int(math.floor(exact(ratios[1]) * n))
    splits = [UNASSIGNED] * n
    for rank, position in enumerate(order):
        if rank < train:
            splits[position] = TRAIN
        elif rank < train + validation:
            splits[position] = VALIDATION
        else:
            splits[position] = TEST
    metadata = OrderedDict(corpus.metadata)
    metadata['seed'] = seed
    return corpus.replace(splits=splits, metadata=metadata)


def bootstrap_corpus(
    gazetteer,
    collection,
    indexes,
    config=None,
    retrieval=None,
    embeddings=None,
    name='bootstrap',
    jobs=1,
    context=None
):
    """Annotates every sentence the gazetteer's entities are found in.

    Arguments:
        gazetteer: Gazetteer
        collection: DocumentCollection
        indexes: IndexBundle over the collection
        config: BootstrapConfig
        retrieval: RetrievalConfig for the search methods
        embeddings: mapping embedding method name -> EmbeddingStore
        name: corpus name
        jobs: entities searched concurrently
        context: an existing SearchContext to search with
    Returns:
        A validated, split Corpus.
    """
    config = config or BootstrapConfig()
    if context is None:
        context = SearchContext(
            collection=collection,
            indexes=indexes,
            gazetteer=gazetteer,
            retrieval=retrieval,
            embeddings=embeddings,
            candidate_limit=config.candidate_limit,
            jobs=jobs
        )
    results = context.method(config.method).limit(
        config.candidate_limit
    ).list()
    extractions = []
    verbose = logger.isEnabledFor(logging.INFO)
    for query, candidates in tqdm(
        results, desc='extracting', disable=not verbose
    ):
        for candidate in candidates:
            occurrence = extract_occurrence(
                collection[candidate.doc_id],
                candidate.char_start,
                candidate.char_end,
                query.entity_type
            )
            if occurrence is not None:
                extractions.append(occurrence + (query.entity_type, ))
    sentences = merge_occurrences(extractions, collection)
    corpus = Corpus(name, sentences, metadata=OrderedDict([
        ('method', config.method)
    ]))
    corpus = split_corpus(corpus, config.split_ratios, config.rng_seed)
    logger.info(
        'bootstrapped %r from %d extractions', corpus, len(extractions)
    )
    return validate_corpus(corpus)


def review_sample(corpus, size=100, seed=0):
    """A seeded sample of test sentences in corpus order."""
    tests = corpus.split(TEST)
    if len(tests) <= size:
        return tests
    rng = np.random.Generator(np.random.PCG64(seed))
    chosen = sorted(rng.choice(len(tests), size=size, replace=False))
    return [tests[i] for i in chosen]


def write_review(corpus, target, size=100, seed=0):
    """Writes sampled test sentences with bracketed mentions for checking."""
    sample = review_sample(corpus, size, seed)
    handle = open_text(target, 'w')
    try:
        handle.write('# corpus=%s seed=%s sample=%d\n\n' % (
            corpus.name, seed, len(sample)
        ))
        for sentence in sample:
            handle.write('# %s\n%s\n\n' % (
                sentence.sentence_id,
                render_mentions(sentence.text, sentence.mentions())
            ))
    finally:
        if handle is not target:
            handle.close()
    return sample
