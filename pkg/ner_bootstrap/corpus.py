"""Corpus model: labels, tokens, mentions, annotated sentences and corpora.

Offsets are counted in Unicode code points. A corpus file is CoNLL-style
UTF-8 text: a `# corpus=<name> ...` line, then per sentence a header
`# id=<sentence_id> doc=<doc_id> lang=<code> split=<split>`, an optional
`# text=<sentence text>` line, one `<token>\t<label>` line per token and a
blank line. Nested gold mentions go to a sidecar TSV with records
`<sentence_id>\t<type>\t<char_start>\t<char_end>\t<parent_index|-1>`.
"""
from __future__ import absolute_import

import logging
import re
from collections import OrderedDict, namedtuple
from enum import Enum

from six import string_types

from .exceptions import (
    AlignmentError,
    InvalidBio,
    InvalidCorpus,
    OverlapConflict
)
from .utils import open_text, read_tsv

logger = logging.getLogger(__name__)

STRICT = 'strict'
REPAIR = 'repair'

TRAIN = 'train'
VALIDATION = 'validation'
TEST = 'test'
UNASSIGNED = 'unassigned'
SPLITS = (TRAIN, VALIDATION, TEST, UNASSIGNED)

_HEADER_FIELD = re.compile(r'(\w+)=(\S*)')


class EntityType(Enum):
    PER = 'PER'
    LOC = 'LOC'

    def __str__(self):
        return self.value

    @property
    def rank(self):
        # PER wins ties against LOC when overlapping mentions are resolved
        return 0 if self is EntityType.PER else 1


class Label(Enum):
    B_PER = 'B-PER'
    I_PER = 'I-PER'
    B_LOC = 'B-LOC'
    I_LOC = 'I-LOC'
    O = 'O'

    def __str__(self):
        return self.value

    @property
    def id(self):
        return _LABEL_IDS[self]

    @property
    def entity_type(self):
        if self is Label.O:
            return None
        return EntityType(self.value[2:])

    @property
    def is_begin(self):
        return self.value.startswith('B-')

    @property
    def is_inside(self):
        return self.value.startswith('I-')

    @classmethod
    def begin(cls, entity_type):
        return cls('B-%s' % entity_type.value)

    @classmethod
    def inside(cls, entity_type):
        return cls('I-%s' % entity_type.value)

    @classmethod
    def from_id(cls, label_id):
        return LABELS[label_id]

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, string_types):
            try:
                return cls(value)
            except ValueError:
                pass
        raise InvalidCorpus('unknown label %r' % (value, ))


LABELS = tuple(Label)
_LABEL_IDS = dict((label, i) for i, label in enumerate(LABELS))
ENTITY_LABELS = tuple(label for label in LABELS if label is not Label.O)

Token = namedtuple('Token', 'text char_start char_end')


class EntityMention(namedtuple(
    'EntityMention', 'entity_type char_start char_end nested'
)):
    """A typed character span, possibly carrying nested inner mentions."""

    __slots__ = ()

    def __new__(cls, entity_type, char_start, char_end, nested=()):
        if isinstance(entity_type, string_types):
            entity_type = EntityType(entity_type)
        return super(EntityMention, cls).__new__(
            cls, entity_type, char_start, char_end, tuple(nested)
        )

    @property
    def length(self):
        return self.char_end - self.char_start

    def top(self):
        return self._replace(nested=())

    def walk(self):
        """Yields this mention and all nested mentions, parents first."""
        yield self
        for inner in self.nested:
            for mention in inner.walk():
                yield mention

    def overlaps(self, other):
        return (
            self.char_start < other.char_end and
            other.char_start < self.char_end
        )


class AnnotatedSentence(namedtuple(
    'AnnotatedSentence',
    'sentence_id doc_id language text tokens tags gold_entities'
)):

    __slots__ = ()

    def __new__(
        cls,
        sentence_id,
        doc_id,
        language,
        text,
        tokens,
        tags,
        gold_entities=None
    ):
        return super(AnnotatedSentence, cls).__new__(
            cls,
            sentence_id,
            doc_id,
            language,
            text,
            tuple(tokens),
            tuple(Label.coerce(tag) for tag in tags),
            None if gold_entities is None else tuple(gold_entities)
        )

    def mentions(self, mode=REPAIR):
        return parse_bio(self.tags, self.tokens, mode)

    def gold_mentions(self):
        """Top-level gold mentions: the sidecar ones, else the tags."""
        if self.gold_entities is not None:
            return list(self.gold_entities)
        return parse_bio(self.tags, self.tokens, STRICT)

    def with_tags(self, tags):
        return self._replace(tags=tuple(Label.coerce(t) for t in tags))

    def covered(self, mention):
        return self.text[mention.char_start:mention.char_end]


class Corpus(object):

    """An ordered collection of annotated sentences with split tags.

    Arguments:
        name: corpus name
        sentences: AnnotatedSentence iterable
        splits: per-sentence split tags (defaults to all 'unassigned')
        metadata: extra key/value pairs echoed into the file header
    """
    def __init__(self, name, sentences, splits=None, metadata=None):
        self.name = name
        self.sentences = tuple(sentences)
        if splits is None:
            splits = (UNASSIGNED, ) * len(self.sentences)
        self.splits = tuple(splits)
        self.metadata = OrderedDict(metadata or ())

    def __repr__(self):
        return 'Corpus: %s (%d sentences)' % (self.name, len(self))

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def split(self, name):
        return [
            sentence for sentence, split in zip(self.sentences, self.splits)
            if split == name
        ]

    def assignment(self):
        return OrderedDict(
            (sentence.sentence_id, split)
            for sentence, split in zip(self.sentences, self.splits)
        )

    def replace(self, **kwargs):
        data = {
            'name': self.name,
            'sentences': self.sentences,
            'splits': self.splits,
            'metadata': self.metadata
        }
        data.update(kwargs)
        return Corpus(**data)


def _mention_from_run(entity_type, tokens, first, last):
    return EntityMention(
        entity_type, tokens[first].char_start, tokens[last].char_end
    )


def parse_bio(tags, tokens, mode=STRICT):
    """Decodes a BIO tag sequence into top-level mentions.

    In repair mode an I-X without a B-X/I-X predecessor opens a new
    mention; in strict mode it raises InvalidBio at its position.
    """
    if len(tags) != len(tokens):
        raise AlignmentError(
            '%d tags for %d tokens' % (len(tags), len(tokens))
        )
    mentions = []
    current = None
    first = last = None
    for position, tag in enumerate(tags):
        tag = Label.coerce(tag)
        if tag is Label.O:
            if current is not None:
                mentions.append(
                    _mention_from_run(current, tokens, first, last)
                )
                current = None
            continue
        if tag.is_inside and current is tag.entity_type:
            last = position
            continue
        if tag.is_inside and mode == STRICT:
            raise InvalidBio(position)
        if current is not None:
            mentions.append(_mention_from_run(current, tokens, first, last))
        current = tag.entity_type
        first = last = position
    if current is not None:
        mentions.append(_mention_from_run(current, tokens, first, last))
    return mentions


def covered_tokens(tokens, char_start, char_end):
    """Indices of tokens overlapping [char_start, char_end)."""
    return [
        i for i, token in enumerate(tokens)
        if token.char_start < char_end and char_start < token.char_end
    ]


def align_mention(tokens, mention):
    """Expands a mention outward to full token boundaries.

    Returns None when the span covers no token.
    """
    indices = covered_tokens(tokens, mention.char_start, mention.char_end)
    if not indices:
        return None
    return mention._replace(
        char_start=tokens[indices[0]].char_start,
        char_end=tokens[indices[-1]].char_end
    )


def project_bio(tokens, mentions):
    tags = [Label.O] * len(tokens)
    owners = [None] * len(tokens)
    for number, mention in enumerate(mentions):
        indices = covered_tokens(tokens, mention.char_start, mention.char_end)
        for offset, index in enumerate(indices):
            if owners[index] is not None:
                raise OverlapConflict(
                    'token %d claimed by mentions %d and %d' % (
                        index, owners[index], number
                    )
                )
            owners[index] = number
            tags[index] = (
                Label.begin(mention.entity_type) if offset == 0
                else Label.inside(mention.entity_type)
            )
    return tags


def is_bio_valid(tags):
    previous = Label.O
    for tag in tags:
        if tag.is_inside and previous.entity_type is not tag.entity_type:
            return False
        previous = tag
    return True


def validate_sentence(sentence, mode=STRICT):
    sid = sentence.sentence_id
    if len(sentence.tags) != len(sentence.tokens):
        raise InvalidCorpus('%s: %d tags for %d tokens' % (
            sid, len(sentence.tags), len(sentence.tokens)
        ))
    end = 0
    for token in sentence.tokens:
        if not (end <= token.char_start < token.char_end):
            raise InvalidCorpus('%s: token %r out of order' % (sid, token))
        if sentence.text[token.char_start:token.char_end] != token.text:
            raise InvalidCorpus('%s: token %r does not match text' % (
                sid, token.text
            ))
        end = token.char_end
    try:
        parse_bio(sentence.tags, sentence.tokens, mode)
    except InvalidBio as e:
        raise InvalidBio(e.position, '%s: %s' % (sid, e))
    if sentence.gold_entities is not None:
        starts = set(t.char_start for t in sentence.tokens)
        ends = set(t.char_end for t in sentence.tokens)
        _validate_mentions(sid, sentence.gold_entities, starts, ends, None)
    return sentence


def _validate_mentions(sid, mentions, starts, ends, parent):
    ordered = sorted(mentions, key=lambda m: (m.char_start, m.char_end))
    for mention in ordered:
        if mention.char_start >= mention.char_end:
            raise InvalidCorpus('%s: empty mention %r' % (sid, mention))
        if mention.char_start not in starts or mention.char_end not in ends:
            raise InvalidCorpus(
                '%s: mention %d-%d does not align with tokens' % (
                    sid, mention.char_start, mention.char_end
                )
            )
        if parent is not None and not (
            parent.char_start <= mention.char_start and
            mention.char_end <= parent.char_end and
            (mention.char_start, mention.char_end) !=
            (parent.char_start, parent.char_end)
        ):
            raise InvalidCorpus(
                '%s: nested mention %d-%d escapes its parent' % (
                    sid, mention.char_start, mention.char_end
                )
            )
        _validate_mentions(sid, mention.nested, starts, ends, mention)
    if parent is not None:
        for left, right in zip(ordered, ordered[1:]):
            if left.overlaps(right):
                raise InvalidCorpus(
                    '%s: nested mentions overlap at %d' % (
                        sid, right.char_start
                    )
                )


def validate_corpus(corpus, mode=STRICT):
    if len(corpus.splits) != len(corpus.sentences):
        raise InvalidCorpus('%s: split tags do not cover every sentence' % (
            corpus.name
        ))
    seen = set()
    for sentence, split in zip(corpus.sentences, corpus.splits):
        if sentence.sentence_id in seen:
            raise InvalidCorpus(
                'duplicate sentence id %s' % sentence.sentence_id
            )
        seen.add(sentence.sentence_id)
        if split not in SPLITS:
            raise InvalidCorpus('%s: unknown split %r' % (
                sentence.sentence_id, split
            ))
        validate_sentence(sentence, mode)
    return corpus


SplitStats = namedtuple('SplitStats', 'sentences b_per b_loc')


def corpus_stats(corpus):
    """Sentence, B-PER and B-LOC counts per split, plus a 'total' row."""
    counts = OrderedDict((split, [0, 0, 0]) for split in SPLITS)
    for sentence, split in zip(corpus.sentences, corpus.splits):
        row = counts[split]
        row[0] += 1
        for tag in sentence.tags:
            if tag is Label.B_PER:
                row[1] += 1
            elif tag is Label.B_LOC:
                row[2] += 1
    stats = OrderedDict(
        (split, SplitStats(*row)) for split, row in counts.items()
    )
    stats['total'] = SplitStats(*[
        sum(row[i] for row in counts.values()) for i in range(3)
    ])
    return stats


_SPLIT_TITLES = OrderedDict((
    (TRAIN, 'Training'),
    (VALIDATION, 'Validation'),
    (TEST, 'Testing'),
    (UNASSIGNED, 'Unassigned'),
))


def format_stats(named_stats):
    """Renders (name, stats) pairs as a fixed-width table."""
    lines = ['%-24s %12s %10s %10s' % (
        'Corpus', '# Sentences', '# B-PER', '# B-LOC'
    )]
    for name, stats in named_stats:
        total = stats['total']
        lines.append('%-24s %12s %10s %10s' % (
            name,
            format(total.sentences, ','),
            format(total.b_per, ','),
            format(total.b_loc, ',')
        ))
        for split, title in _SPLIT_TITLES.items():
            row = stats[split]
            if split == UNASSIGNED and not row.sentences:
                continue
            lines.append('  %-22s %12s %10s %10s' % (
                title,
                format(row.sentences, ','),
                format(row.b_per, ','),
                format(row.b_loc, ',')
            ))
    return '\n'.join(lines) + '\n'


def render_mentions(text, mentions, marks=None):
    """Brackets top-level mentions inline: `[PER Jan z Kralup]`.

    Arguments:
        text: sentence text
        mentions: non-overlapping mentions
        marks: optional per-mention suffix placed before the closing
            bracket
    """
    pieces = []
    cursor = 0
    ordered = sorted(
        enumerate(mentions), key=lambda item: item[1].char_start
    )
    for number, mention in ordered:
        pieces.append(text[cursor:mention.char_start])
        pieces.append('[%s %s%s]' % (
            mention.entity_type.value,
            text[mention.char_start:mention.char_end],
            marks[number] if marks else ''
        ))
        cursor = mention.char_end
    pieces.append(text[cursor:])
    return _flat_text(''.join(pieces))


def _flat_text(text):
    return text.replace('\t', ' ').replace('\n', ' ').replace('\r', ' ')


def write_corpus(corpus, target):
    handle = open_text(target, 'w')
    try:
        header = ['corpus=%s' % corpus.name] + [
            '%s=%s' % item for item in corpus.metadata.items()
        ]
        handle.write('# %s\n\n' % ' '.join(header))
        for sentence, split in zip(corpus.sentences, corpus.splits):
            handle.write('# id=%s doc=%s lang=%s split=%s\n' % (
                sentence.sentence_id,
                sentence.doc_id,
                sentence.language,
                split
            ))
            handle.write('# text=%s\n' % _flat_text(sentence.text))
            for token, tag in zip(sentence.tokens, sentence.tags):
                handle.write('%s\t%s\n' % (token.text, tag.value))
            handle.write('\n')
    finally:
        if handle is not target:
            handle.close()


def _align_tokens(sid, text, words):
    tokens = []
    cursor = 0
    for word in words:
        start = text.find(word, cursor)
        if start < 0:
            raise InvalidCorpus('%s: token %r not found in text' % (sid, word))
        cursor = start + len(word)
        tokens.append(Token(word, start, cursor))
    return tokens


def _build_sentence(block):
    fields = block['header']
    sid = fields.get('id')
    if not sid:
        raise InvalidCorpus('sentence header without id')
    words = [word for word, _ in block['rows']]
    text = block['text']
    if text is None:
        text = ' '.join(words)
    sentence = AnnotatedSentence(
        sentence_id=sid,
        doc_id=fields.get('doc', ''),
        language=fields.get('lang', 'unknown'),
        text=text,
        tokens=_align_tokens(sid, text, words),
        tags=[tag for _, tag in block['rows']]
    )
    return sentence, fields.get('split', UNASSIGNED)


def read_corpus(source, name=None, mode=STRICT):
    """Reads a CoNLL corpus file.

    Arguments:
        source: path or open text file
        name: corpus name (defaults to the name in the file header)
        mode: 'strict' rejects invalid BIO; 'repair' promotes stray I-X
    Returns:
        A validated Corpus.
    """
    metadata = OrderedDict()
    sentences = []
    splits = []
    block = None

    def finish():
        if block is not None:
            sentence, split = _build_sentence(block)
            sentences.append(sentence)
            splits.append(split)

    handle = open_text(source)
    try:
        for number, line in enumerate(handle, 1):
            line = line.rstrip('\r\n')
            if line.startswith('# id='):
                finish()
                block = {
                    'header': dict(_HEADER_FIELD.findall(line)),
                    'text': None,
                    'rows': []
                }
            elif line.startswith('# text='):
                if block is None:
                    raise InvalidCorpus('line %d: text outside sentence' % (
                        number
                    ))
                block['text'] = line[len('# text='):]
            elif line.startswith('#'):
                if block is None:
                    metadata.update(_HEADER_FIELD.findall(line))
            elif not line.strip():
                finish()
                block = None
            else:
                fields = line.split('\t')
                if len(fields) != 2 or block is None:
                    raise InvalidCorpus(
                        'line %d: expected <token>\\t<label>' % number
                    )
                block['rows'].append((fields[0], Label.coerce(fields[1])))
        finish()
    finally:
        if handle is not source:
            handle.close()

    if mode == REPAIR:
        sentences = [
            s.with_tags(project_bio(s.tokens, parse_bio(
                s.tags, s.tokens, REPAIR
            )))
            for s in sentences
        ]
    corpus_name = name or metadata.pop('corpus', None) or 'corpus'
    metadata.pop('corpus', None)
    corpus = Corpus(corpus_name, sentences, splits, metadata)
    logger.info('read %r', corpus)
    return validate_corpus(corpus, mode)


def write_gold_entities(corpus, target):
    handle = open_text(target, 'w')
    try:
        for sentence in corpus.sentences:
            if not sentence.gold_entities:
                continue
            records = []

            def visit(mention, parent):
                index = len(records)
                records.append((mention, parent))
                for inner in mention.nested:
                    visit(inner, index)

            for mention in sentence.gold_entities:
                visit(mention, -1)
            for mention, parent in records:
                handle.write('%s\t%s\t%d\t%d\t%d\n' % (
                    sentence.sentence_id,
                    mention.entity_type.value,
                    mention.char_start,
                    mention.char_end,
                    parent
                ))
    finally:
        if handle is not target:
            handle.close()


def read_gold_entities(source):
    """Reads a nested-mention sidecar into {sentence_id: top mentions}."""
    records = OrderedDict()
    for number, fields in read_tsv(source, 5, InvalidCorpus):
        sid, entity_type, start, end, parent = fields
        try:
            record = (
                EntityType(entity_type), int(start), int(end), int(parent)
            )
        except ValueError:
            raise InvalidCorpus('sidecar line %d: malformed record' % number)
        own = records.setdefault(sid, [])
        if not -1 <= record[3] < len(own):
            raise InvalidCorpus(
                'sidecar line %d: parent %d not yet defined' % (
                    number, record[3]
                )
            )
        own.append(record)

    entities = OrderedDict()
    for sid, own in records.items():
        children = [[] for _ in own]
        for index, record in enumerate(own):
            if record[3] >= 0:
                children[record[3]].append(index)

        def build(index):
            entity_type, start, end, _ = own[index]
            return EntityMention(
                entity_type, start, end, [build(c) for c in children[index]]
            )

        entities[sid] = tuple(
            build(index) for index, record in enumerate(own)
            if record[3] < 0
        )
    return entities


def attach_gold_entities(corpus, entities):
    """Sets sidecar mentions as gold; sentences without records keep
    their tags as gold."""
    unknown = set(entities) - set(s.sentence_id for s in corpus.sentences)
    if unknown:
        raise InvalidCorpus('sidecar names unknown sentences: %s' % (
            ', '.join(sorted(unknown))
        ))
    sentences = [
        s._replace(gold_entities=entities.get(s.sentence_id))
        for s in corpus.sentences
    ]
    return validate_corpus(corpus.replace(sentences=sentences))
