"""Token and entity metrics, confusion matrices and retrieval judging.

Zero denominators give 0 and set an `undefined` flag instead of NaN.
"""
from __future__ import absolute_import

import logging
from collections import OrderedDict, namedtuple

import numpy as np

from .corpus import LABELS, REPAIR, Label, render_mentions
from .exceptions import (
    AlignmentError,
    ConfigError,
    InvalidJudgments,
    UnjudgedResult
)
from .utils import open_text, read_tsv

logger = logging.getLogger(__name__)

STRICT = 'strict'
FUZZY = 'fuzzy'
REGIMES = (STRICT, FUZZY)

DEFAULT_BETA = 0.25
DEFAULT_CUTOFF = 10


class EvalConfig(namedtuple(
    'EvalConfig', 'beta regime per_language cutoff'
)):
    __slots__ = ()

    def __new__(
        cls,
        beta=DEFAULT_BETA,
        regime=STRICT,
        per_language=True,
        cutoff=DEFAULT_CUTOFF
    ):
        if not beta > 0:
            raise ConfigError('eval.beta', 'must be > 0')
        if regime not in REGIMES:
            raise ConfigError('eval.regime', 'must be strict or fuzzy')
        if cutoff < 1:
            raise ConfigError('eval.cutoff', 'must be >= 1')
        return super(EvalConfig, cls).__new__(
            cls, float(beta), regime, per_language, cutoff
        )


def fbeta(p, r, beta=DEFAULT_BETA):
    if p == 0 and r == 0:
        return 0.0
    b2 = beta * beta
    return (1 + b2) * p * r / (b2 * p + r)


def _ratio(numerator, denominator):
    if not denominator:
        return 0.0, True
    return float(numerator) / denominator, False


class Counts(namedtuple('Counts', 'tp fp fn')):

    """Pooled true positive, false positive and false negative counts."""
    __slots__ = ()

    def __add__(self, other):
        return Counts(*[a + b for a, b in zip(self, other)])

    @classmethod
    def zero(cls):
        return cls(0, 0, 0)

    def scores(self, beta=DEFAULT_BETA):
        precision, p_undefined = _ratio(self.tp, self.tp + self.fp)
        recall, r_undefined = _ratio(self.tp, self.tp + self.fn)
        return TokenScores(
            self.tp,
            self.fp,
            self.fn,
            precision,
            recall,
            fbeta(precision, recall, beta),
            p_undefined or r_undefined
        )


TokenScores = namedtuple(
    'TokenScores', 'tp fp fn precision recall fbeta undefined'
)


def _sentences(corpus):
    return list(getattr(corpus, 'sentences', corpus))


def align(gold, predicted):
    """Pairs gold and predicted sentences by sentence_id, in gold order."""
    gold = _sentences(gold)
    by_id = OrderedDict((s.sentence_id, s) for s in _sentences(predicted))
    if len(by_id) != len(gold):
        raise AlignmentError('%d gold sentences, %d predicted' % (
            len(gold), len(by_id)
        ))
    pairs = []
    for sentence in gold:
        other = by_id.get(sentence.sentence_id)
        if other is None:
            raise AlignmentError(
                'no prediction for sentence %s' % sentence.sentence_id
            )
        if len(other.tokens) != len(sentence.tokens):
            raise AlignmentError('%s: %d gold tokens, %d predicted' % (
                sentence.sentence_id, len(sentence.tokens), len(other.tokens)
            ))
        pairs.append((sentence, other))
    return pairs


def count_tags(gold_tags, predicted_tags):
    tp = fp = fn = 0
    for g, p in zip(gold_tags, predicted_tags):
        if g is p:
            if g is not Label.O:
                tp += 1
            continue
        if p is not Label.O:
            fp += 1
        if g is not Label.O:
            fn += 1
    return Counts(tp, fp, fn)


def token_counts(pairs):
    total = Counts.zero()
    for gold, predicted in pairs:
        total += count_tags(gold.tags, predicted.tags)
    return total


def token_metrics(gold, predicted, config=None):
    """Micro-averaged token scores over the non-O labels."""
    config = config or EvalConfig()
    return token_counts(align(gold, predicted)).scores(config.beta)


EntityCounts = namedtuple(
    'EntityCounts', 'matched_predicted predicted matched_gold gold'
)
EntityScores = namedtuple('EntityScores', [
    'regime',
    'matched_predicted',
    'predicted',
    'matched_gold',
    'gold',
    'precision',
    'recall',
    'fbeta',
    'undefined'
])


def _gold_candidates(tops):
    """(top index, mention) for every top-level and nested gold mention."""
    candidates = []
    for index, top in enumerate(tops):
        for mention in top.walk():
            candidates.append((index, mention))
    candidates.sort(key=lambda c: (c[1].char_start, c[1].char_end))
    return candidates


def match_mentions(tops, predictions, regime):
    """Greedy one-to-one matching of predictions to gold mentions.

    Exact type-and-span matches are taken first, left to right; the fuzzy
    regime then matches remaining predictions to any unused same-type
    gold mention they overlap.

    Returns:
        (matched prediction indices, matched top-level gold indices)
    """
    candidates = _gold_candidates(tops)
    used = set()
    matched = set()
    tops_hit = set()

    def run(test):
        for p_index, prediction in enumerate(predictions):
            if p_index in matched:
                continue
            for c_index, (top, mention) in enumerate(candidates):
                if c_index in used:
                    continue
                if mention.entity_type is prediction.entity_type and test(
                    mention, prediction
                ):
                    used.add(c_index)
                    matched.add(p_index)
                    tops_hit.add(top)
                    break

    run(lambda g, p: (g.char_start, g.char_end) == (
        p.char_start, p.char_end
    ))
    if regime == FUZZY:
        run(lambda g, p: g.overlaps(p))
    return matched, tops_hit


def entity_counts(pairs, regime):
    matched_predicted = predicted_total = matched_gold = gold_total = 0
    for gold, predicted in pairs:
        tops = gold.gold_mentions()
        predictions = predicted.mentions(REPAIR)
        matched, tops_hit = match_mentions(tops, predictions, regime)
        matched_predicted += len(matched)
        predicted_total += len(predictions)
        matched_gold += len(tops_hit)
        gold_total += len(tops)
    return EntityCounts(
        matched_predicted, predicted_total, matched_gold, gold_total
    )


def entity_scores(counts, regime, beta=DEFAULT_BETA):
    precision, p_undefined = _ratio(counts.matched_predicted, counts.predicted)
    recall, r_undefined = _ratio(counts.matched_gold, counts.gold)
    return EntityScores(
        regime,
        counts.matched_predicted,
        counts.predicted,
        counts.matched_gold,
        counts.gold,
        precision,
        recall,
        fbeta(precision, recall, beta),
        p_undefined or r_undefined
    )


def entity_metrics(gold, predicted, regime=STRICT, beta=DEFAULT_BETA):
    """Entity precision and recall with nested gold mentions allowed.

    Precision counts matched predictions; recall counts top-level gold
    mentions matched directly or through any of their nested mentions.
    """
    if regime not in REGIMES:
        raise ValueError('unknown regime %r' % regime)
    return entity_scores(
        entity_counts(align(gold, predicted), regime), regime, beta
    )


class ConfusionMatrix(object):

    """Gold (rows) by predicted (columns) label counts.

    Arguments:
        counts: 5x5 integer array indexed by label id
    """
    def __init__(self, counts):
        self.counts = np.asarray(counts, dtype=np.int64)
        support = self.counts.sum(axis=1)
        self.unsupported = [
            LABELS[i] for i in range(len(LABELS)) if not support[i]
        ]
        self.matrix = np.zeros(self.counts.shape, dtype=np.float64)
        rows = support > 0
        self.matrix[rows] = (
            self.counts[rows] / support[rows][:, np.newaxis].astype(float)
        )

    def __repr__(self):
        return 'ConfusionMatrix: %d tokens' % self.counts.sum()

    def recall(self, label):
        return float(self.matrix[label.id, label.id])

    def format_text(self):
        width = 8
        lines = ['%-8s' % 'gold\\pred' + ''.join(
            '%*s' % (width, label.value) for label in LABELS
        )]
        for label in LABELS:
            row = self.matrix[label.id]
            lines.append('%-8s' % label.value + ''.join(
                '%*.4f' % (width, value) for value in row
            ) + ('  (no support)' if label in self.unsupported else ''))
        return '\n'.join(lines) + '\n'

    def to_csv(self):
        lines = [','.join(['gold'] + [label.value for label in LABELS])]
        for label in LABELS:
            lines.append(','.join([label.value] + [
                '%.6f' % value for value in self.matrix[label.id]
            ]))
        return '\n'.join(lines) + '\n'


def confusion(gold, predicted):
    counts = np.zeros((len(LABELS), len(LABELS)), dtype=np.int64)
    for g, p in align(gold, predicted):
        for gold_tag, predicted_tag in zip(g.tags, p.tags):
            counts[gold_tag.id, predicted_tag.id] += 1
    return ConfusionMatrix(counts)


class RelevanceJudgments(object):

    """Expert relevance labels of retrieved spans.

    Arguments:
        records: (entity_id, (doc_id, char_start, char_end), relevant)
            triples; (entity_id, key) pairs must be unique
    """
    def __init__(self, records):
        self.records = OrderedDict()
        self.relevant_counts = OrderedDict()
        for entity_id, key, relevant in records:
            key = tuple(key)
            if (entity_id, key) in self.records:
                raise InvalidJudgments('duplicate judgment %s %s:%d-%d' % (
                    (entity_id, ) + key
                ))
            self.records[(entity_id, key)] = bool(relevant)
            self.relevant_counts.setdefault(entity_id, 0)
            if relevant:
                self.relevant_counts[entity_id] += 1

    def __repr__(self):
        return 'RelevanceJudgments: %d records for %d entities' % (
            len(self.records), len(self.relevant_counts)
        )

    @property
    def entities(self):
        return list(self.relevant_counts)

    def judge(self, entity_id, key):
        """True/False when judged, None otherwise."""
        return self.records.get((entity_id, tuple(key)))


def load_judgments(source):
    """Reads `entity_id\\tdoc_id\\tchar_start\\tchar_end\\trelevant` rows."""
    records = []
    for number, fields in read_tsv(source, 5, InvalidJudgments):
        entity_id, doc_id, start, end, relevant = fields
        if relevant not in ('0', '1'):
            raise InvalidJudgments(
                'judgments line %d: relevant must be 0 or 1' % number
            )
        try:
            key = (doc_id, int(start), int(end))
        except ValueError:
            raise InvalidJudgments('judgments line %d: bad offsets' % number)
        records.append((entity_id, key, relevant == '1'))
    return RelevanceJudgments(records)


RetrievalRow = namedtuple('RetrievalRow', [
    'method',
    'retrieved',
    'relevant_retrieved',
    'relevant_total',
    'precision',
    'recall',
    'fbeta'
])
RetrievalReport = namedtuple('RetrievalReport', 'rows warnings')


def evaluate_retrieval(results, judgments, config=None):
    """Scores each method's top results against relevance judgments.

    Arguments:
        results: mapping method -> mapping entity_id -> candidates
        judgments: RelevanceJudgments; only judged entities count
        config: EvalConfig (beta, cutoff)
    Returns:
        RetrievalReport with rows sorted by descending F-beta and the
        unjudged results that were counted as non-relevant.
    """
    config = config or EvalConfig()
    entities = judgments.entities
    relevant_total = sum(judgments.relevant_counts.values())
    rows = []
    warnings = []
    for method, per_entity in results.items():
        retrieved = relevant = 0
        for entity_id in entities:
            for candidate in list(per_entity.get(entity_id, ()))[
                :config.cutoff
            ]:
                retrieved += 1
                verdict = judgments.judge(entity_id, candidate.key)
                if verdict is None:
                    warnings.append(
                        UnjudgedResult(method, entity_id, candidate.key)
                    )
                elif verdict:
                    relevant += 1
        precision, _ = _ratio(relevant, retrieved)
        recall, _ = _ratio(relevant, relevant_total)
        rows.append(RetrievalRow(
            method, retrieved, relevant, relevant_total, precision, recall,
            fbeta(precision, recall, config.beta)
        ))
    rows.sort(key=lambda row: (-row.fbeta, row.method))
    for warning in warnings:
        logger.warning('%r', warning)
    return RetrievalReport(rows, warnings)


def format_retrieval_report(report, names=None):
    """Renders the report as a fixed-width table, best method first."""
    names = names or {}
    lines = ['%-20s %10s %10s %10s' % ('Technique', 'Precision', 'Recall',
                                        'F-beta')]
    for row in report.rows:
        lines.append('%-20s %9.2f%% %9.2f%% %9.2f%%' % (
            names.get(row.method, row.method),
            100 * row.precision,
            100 * row.recall,
            100 * row.fbeta
        ))
    if report.warnings:
        lines.append('')
        lines.append('Warnings (%d unjudged results counted as '
                     'non-relevant):' % len(report.warnings))
        for warning in report.warnings:
            lines.append('  %r' % warning)
    return '\n'.join(lines) + '\n'


BOUNDARY = 'boundary'
TYPE = 'type'
SPURIOUS = 'spurious'
MISSED = 'missed'
FLAGS = (BOUNDARY, TYPE, SPURIOUS, MISSED)

DiffReport = namedtuple('DiffReport', 'text counts')


def _sentence_flags(tops, predictions):
    matched, tops_hit = match_mentions(tops, predictions, STRICT)
    open_tops = [i for i in range(len(tops)) if i not in tops_hit]
    flags = []
    for p_index, prediction in enumerate(predictions):
        if p_index in matched:
            continue
        partner = None
        for t_index in open_tops:
            if tops[t_index].overlaps(prediction):
                partner = t_index
                break
        if partner is None:
            flags.append((SPURIOUS, p_index, None))
            continue
        open_tops.remove(partner)
        same = tops[partner].entity_type is prediction.entity_type
        flags.append((BOUNDARY if same else TYPE, p_index, partner))
    for t_index in open_tops:
        flags.append((MISSED, None, t_index))
    return flags


def diff_report(gold, predicted):
    """Gold and predicted mentions side by side with flagged errors.

    Each unmatched prediction is paired with at most one overlapping
    unmatched top-level gold mention: a boundary error when the types
    agree, a type error otherwise. Unpaired predictions are spurious and
    unpaired gold mentions are missed.
    """
    counts = OrderedDict((flag, 0) for flag in FLAGS)
    blocks = []
    for g, p in align(gold, predicted):
        tops = g.gold_mentions()
        predictions = p.mentions(REPAIR)
        flags = _sentence_flags(tops, predictions)
        lines = [
            '# %s' % g.sentence_id,
            'gold: %s' % render_mentions(g.text, [t.top() for t in tops]),
            'pred: %s' % render_mentions(p.text, predictions)
        ]
        for flag, p_index, t_index in flags:
            counts[flag] += 1
            parts = ['  %s:' % flag]
            if t_index is not None:
                top = tops[t_index]
                parts.append('gold %s %r' % (
                    top.entity_type, g.covered(top)
                ))
            if p_index is not None:
                mention = predictions[p_index]
                parts.append('pred %s %r' % (
                    mention.entity_type, p.covered(mention)
                ))
            lines.append(' '.join(parts))
        blocks.append('\n'.join(lines))
    summary = ' '.join('%s=%d' % item for item in counts.items())
    text = '\n\n'.join(blocks + ['# flags: %s' % summary]) + '\n'
    return DiffReport(text, counts)


EvalReport = namedtuple(
    'EvalReport', 'token strict fuzzy per_language confusion beta'
)
LanguageReport = namedtuple('LanguageReport', 'token strict fuzzy')


def evaluate(gold, predicted, config=None):
    """Token, strict and fuzzy entity scores, overall and per language.

    Overall scores come from summing the per-language integer counts.
    """
    config = config or EvalConfig()
    pairs = align(gold, predicted)
    grouped = OrderedDict()
    for pair in sorted(pairs, key=lambda pair: pair[0].language):
        grouped.setdefault(pair[0].language, []).append(pair)
    languages = OrderedDict()
    token_total = Counts.zero()
    strict_total = EntityCounts(0, 0, 0, 0)
    fuzzy_total = EntityCounts(0, 0, 0, 0)
    for language, group in grouped.items():
        token = token_counts(group)
        strict = entity_counts(group, STRICT)
        fuzzy = entity_counts(group, FUZZY)
        token_total += token
        strict_total = EntityCounts(*[a + b for a, b in zip(
            strict_total, strict
        )])
        fuzzy_total = EntityCounts(*[a + b for a, b in zip(
            fuzzy_total, fuzzy
        )])
        languages[language] = LanguageReport(
            token.scores(config.beta),
            entity_scores(strict, STRICT, config.beta),
            entity_scores(fuzzy, FUZZY, config.beta)
        )
    return EvalReport(
        token_total.scores(config.beta),
        entity_scores(strict_total, STRICT, config.beta),
        entity_scores(fuzzy_total, FUZZY, config.beta),
        languages if config.per_language else OrderedDict(),
        confusion(gold, predicted),
        config.beta
    )


def _score_row(name, scores):
    return '%-16s %10.2f %10.2f %10.2f%s' % (
        name,
        100 * scores.precision,
        100 * scores.recall,
        100 * scores.fbeta,
        '  (undefined)' if scores.undefined else ''
    )


def format_report(report):
    lines = ['%-16s %10s %10s %10s' % (
        'Scope', 'Precision', 'Recall', 'F-beta'
    )]
    sections = [('all', report)] + list(report.per_language.items())
    for scope, scores in sections:
        lines.append(_score_row('%s token' % scope, scores.token))
        lines.append(_score_row('%s strict' % scope, scores.strict))
        lines.append(_score_row('%s fuzzy' % scope, scores.fuzzy))
    lines.append('')
    lines.append('beta = %g' % report.beta)
    lines.append('')
    lines.append('Confusion matrix (rows gold, columns predicted):')
    lines.append(report.confusion.format_text())
    return '\n'.join(lines)


def report_items(report):
    """Flat key/value pairs of a report, for machine-readable output."""
    items = OrderedDict()
    items['beta'] = report.beta
    sections = [('all', report)] + list(report.per_language.items())
    for scope, scores in sections:
        for name in ('token', 'strict', 'fuzzy'):
            values = getattr(scores, name)
            for field in ('precision', 'recall', 'fbeta'):
                items['%s.%s.%s' % (scope, name, field)] = getattr(
                    values, field
                )
            items['%s.%s.undefined' % (scope, name)] = int(values.undefined)
    for label in report.confusion.unsupported:
        items['confusion.unsupported.%s' % label.value] = 1
    return items


def write_items(items, target):
    handle = open_text(target, 'w')
    try:
        for key, value in items.items():
            if isinstance(value, float):
                value = '%.6f' % value
            handle.write('%s = %s\n' % (key, value))
    finally:
        if handle is not target:
            handle.close()


ModelRow = namedtuple('ModelRow', 'model_id training_data loss fbeta')


def format_models_table(rows):
    """Renders trained-model scores as a fixed-width table."""
    lines = ['%-12s %-16s %-8s %8s' % (
        'Model Id', 'Training Data', 'TC Loss', 'F-beta'
    )]
    for row in rows:
        lines.append('%-12s %-16s %-8s %7.2f%%' % (
            row.model_id, row.training_data, row.loss, 100 * row.fbeta
        ))
    return '\n'.join(lines) + '\n'
