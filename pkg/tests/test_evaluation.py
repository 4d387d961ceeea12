import io
import random
from unittest import TestCase

from ner_bootstrap.corpus import (
    LABELS,
    EntityMention,
    Label,
    project_bio,
    read_corpus
)
from ner_bootstrap.evaluation import (
    BOUNDARY,
    FUZZY,
    MISSED,
    SPURIOUS,
    STRICT,
    TYPE,
    Counts,
    EvalConfig,
    ModelRow,
    RelevanceJudgments,
    confusion,
    diff_report,
    entity_metrics,
    evaluate,
    evaluate_retrieval,
    fbeta,
    format_models_table,
    format_report,
    format_retrieval_report,
    load_judgments,
    report_items,
    token_metrics,
    write_items
)
from ner_bootstrap.exceptions import (
    AlignmentError,
    ConfigError,
    InvalidJudgments
)
from ner_bootstrap.ingest import tokenize
from ner_bootstrap.method import SearchContext
from ner_bootstrap.retrieval import Candidate
from six.moves import range
from tests.setup import create_fixture, fixture_path, make_sentence

B_PER, I_PER, B_LOC, I_LOC, O = (
    Label.B_PER, Label.I_PER, Label.B_LOC, Label.I_LOC, Label.O
)

# published (precision, recall, F-beta in percent) of each retrieval method
TECHNIQUES = (
    ('Manatee', 1.0000, 0.1734, 78.10),
    ('Fuzzy Regexes', 0.7898, 0.2340, 69.30),
    ('Edit Distance', 0.7400, 0.2492, 66.32),
    ('Concatenation', 0.7250, 0.2441, 64.97),
    ('BERTScore', 0.7050, 0.2374, 63.18),
    ('SentenceBERT', 0.6950, 0.2340, 62.28),
    ('Jaccard', 0.6300, 0.2121, 56.46),
    ('RRF', 0.6200, 0.2088, 55.56),
    ('Okapi BM25', 0.3503, 0.1162, 31.31)
)

WORDS = 'Jan z Kralup prodal dvůr v Praze a Brno .'.split()
GOLD_TAGS = [B_PER, I_PER, I_PER, O, O, O, B_LOC, O, B_LOC, O]
PREDICTED_TAGS = [B_PER, I_PER, O, O, B_LOC, O, B_PER, O, O, O]


def random_tags(rng, count):
    tokens = tokenize(' '.join('w%d' % i for i in range(count)))
    mentions = []
    position = rng.randint(0, 2)
    while position < count:
        length = rng.randint(1, min(3, count - position))
        mentions.append(EntityMention(
            rng.choice(('PER', 'LOC')),
            tokens[position].char_start,
            tokens[position + length - 1].char_end
        ))
        position += length + rng.randint(0, 3)
    return project_bio(tokens, mentions)


def random_pair(rng, sentences=5):
    gold = []
    predicted = []
    for number in range(sentences):
        count = rng.randint(1, 12)
        words = ['w%d' % i for i in range(count)]
        sentence_id = 'd%d:0' % number
        language = rng.choice(('cs', 'de', 'la'))
        gold.append(make_sentence(
            sentence_id, words, random_tags(rng, count), language
        ))
        predicted.append(make_sentence(
            sentence_id, words, random_tags(rng, count), language
        ))
    return gold, predicted


class FbetaTestCase(TestCase):

    def test_technique_table(self):
        for name, precision, recall, printed in TECHNIQUES:
            # the printed BM25 row is itself rounded from unrounded counts
            tolerance = 0.01 if name == 'Okapi BM25' else 0.005
            self.assertTrue(
                abs(100 * fbeta(precision, recall, 0.25) - printed) <=
                tolerance,
                name
            )

    def test_edges(self):
        self.assertEqual(0.0, fbeta(0, 0))
        self.assertEqual(1.0, fbeta(1, 1))
        self.assertEqual(0.0, fbeta(0.5, 0))

    def test_monotone(self):
        rng = random.Random(0)
        for _ in range(1000):
            p, r = rng.random(), rng.random()
            q = p + rng.random() * (1 - p)
            self.assertTrue(fbeta(q, r) >= fbeta(p, r) - 1e-12)
            self.assertTrue(fbeta(p, q) >= fbeta(p, r) - 1e-12)

    def test_counts(self):
        scores = Counts(3, 1, 2).scores()
        self.assertEqual(0.75, scores.precision)
        self.assertEqual(0.6, scores.recall)
        self.assertFalse(scores.undefined)
        empty = Counts.zero().scores()
        self.assertEqual(0.0, empty.fbeta)
        self.assertTrue(empty.undefined)


class TokenMetricsTestCase(TestCase):

    def setUp(self):
        self.gold = [make_sentence('a:0', WORDS, GOLD_TAGS)]
        self.predicted = [make_sentence('a:0', WORDS, PREDICTED_TAGS)]

    def test_token_counts(self):
        scores = token_metrics(self.gold, self.predicted)
        # Jan and z right; dvůr and Praze wrong predictions; Kralup,
        # Praze and Brno missed
        self.assertEqual((2, 2, 3), (scores.tp, scores.fp, scores.fn))

    def test_alignment(self):
        with self.assertRaises(AlignmentError):
            token_metrics(self.gold, [])
        with self.assertRaises(AlignmentError):
            token_metrics(self.gold, [
                make_sentence('b:0', WORDS, PREDICTED_TAGS)
            ])
        with self.assertRaises(AlignmentError):
            token_metrics(self.gold, [
                make_sentence('a:0', WORDS[:3], PREDICTED_TAGS[:3])
            ])

    def test_confusion(self):
        matrix = confusion(self.gold, self.predicted)
        self.assertEqual(1.0, matrix.recall(B_PER))
        self.assertEqual(0.5, matrix.recall(I_PER))
        self.assertEqual(0.0, matrix.recall(B_LOC))
        self.assertEqual([I_LOC], matrix.unsupported)
        for label in LABELS:
            total = matrix.matrix[label.id].sum()
            if label in matrix.unsupported:
                self.assertEqual(0.0, total)
            else:
                self.assertAlmostEqual(1.0, total)
        self.assertIn('(no support)', matrix.format_text())
        self.assertTrue(matrix.to_csv().startswith(
            'gold,B-PER,I-PER,B-LOC,I-LOC,O\n'
        ))

    def test_confusion_rows_sum_to_one(self):
        for seed in range(100):
            gold, predicted = random_pair(random.Random(seed))
            matrix = confusion(gold, predicted)
            for label in LABELS:
                if label not in matrix.unsupported:
                    self.assertAlmostEqual(
                        1.0, matrix.matrix[label.id].sum()
                    )


class EntityMetricsTestCase(TestCase):

    def test_strict_and_fuzzy(self):
        gold = [make_sentence('a:0', WORDS, GOLD_TAGS)]
        predicted = [make_sentence('a:0', WORDS, PREDICTED_TAGS)]
        strict = entity_metrics(gold, predicted, STRICT)
        self.assertEqual((0, 3, 0, 3), (
            strict.matched_predicted, strict.predicted,
            strict.matched_gold, strict.gold
        ))
        fuzzy = entity_metrics(gold, predicted, FUZZY)
        self.assertEqual(1, fuzzy.matched_predicted)
        self.assertEqual(1, fuzzy.matched_gold)
        with self.assertRaises(ValueError):
            entity_metrics(gold, predicted, 'loose')

    def test_strict_never_beats_fuzzy(self):
        for seed in range(300):
            gold, predicted = random_pair(random.Random(seed))
            strict = entity_metrics(gold, predicted, STRICT)
            fuzzy = entity_metrics(gold, predicted, FUZZY)
            self.assertTrue(strict.precision <= fuzzy.precision)
            self.assertTrue(strict.recall <= fuzzy.recall)

    def test_nested_gold(self):
        sentence = make_sentence(
            'a:0', ['Jan', 'z', 'Kralup', 'prodal'],
            [B_PER, I_PER, I_PER, O]
        )
        gold = sentence._replace(gold_entities=(EntityMention(
            'PER', 0, 12, [EntityMention('LOC', 6, 12)]
        ), ))
        predicted = sentence.with_tags([O, O, B_LOC, O])
        scores = entity_metrics([gold], [predicted], STRICT)
        self.assertEqual(1.0, scores.precision)
        self.assertEqual(1.0, scores.recall)

    def test_identical(self):
        gold = read_corpus(create_fixture().gold_path)
        scores = entity_metrics(gold, gold, STRICT)
        self.assertEqual(1.0, scores.fbeta)
        self.assertFalse(scores.undefined)


class DiffTestCase(TestCase):

    def test_flags(self):
        gold = [make_sentence('a:0', WORDS, GOLD_TAGS)]
        predicted = [make_sentence('a:0', WORDS, PREDICTED_TAGS)]
        report = diff_report(gold, predicted)
        self.assertEqual(
            {BOUNDARY: 1, TYPE: 1, SPURIOUS: 1, MISSED: 1},
            dict(report.counts)
        )
        self.assertIn("boundary: gold PER 'Jan z Kralup' pred PER 'Jan z'",
                      report.text)
        self.assertIn("type: gold LOC 'Praze' pred PER 'Praze'", report.text)
        self.assertIn("spurious: pred LOC 'dvůr'", report.text)
        self.assertIn("missed: gold LOC 'Brno'", report.text)
        self.assertTrue(report.text.startswith('# a:0\n'))

    def test_no_errors(self):
        gold = [make_sentence('a:0', WORDS, GOLD_TAGS)]
        report = diff_report(gold, gold)
        self.assertEqual([0, 0, 0, 0], list(report.counts.values()))


class EvaluateTestCase(TestCase):

    def test_per_language_pooling(self):
        for seed in range(50):
            gold, predicted = random_pair(random.Random(seed), 8)
            report = evaluate(gold, predicted)
            self.assertEqual(
                sorted(set(s.language for s in gold)),
                list(report.per_language)
            )
            for field in ('tp', 'fp', 'fn'):
                self.assertEqual(
                    getattr(report.token, field),
                    sum(
                        getattr(language.token, field)
                        for language in report.per_language.values()
                    )
                )
            self.assertEqual(
                report.strict.gold,
                sum(r.strict.gold for r in report.per_language.values())
            )
            self.assertEqual(
                token_metrics(gold, predicted), report.token
            )

    def test_without_languages(self):
        gold, predicted = random_pair(random.Random(1))
        report = evaluate(gold, predicted, EvalConfig(per_language=False))
        self.assertEqual({}, dict(report.per_language))

    def test_report_output(self):
        gold = read_corpus(create_fixture().gold_path)
        report = evaluate(gold, gold)
        self.assertEqual(1.0, report.token.fbeta)
        text = format_report(report)
        self.assertIn('beta = 0.25', text)
        self.assertIn('all strict', text)
        items = report_items(report)
        self.assertEqual(1.0, items['all.token.fbeta'])
        self.assertEqual(0, items['all.fuzzy.undefined'])
        buffer = io.StringIO()
        write_items(items, buffer)
        self.assertIn('all.token.fbeta = 1.000000\n', buffer.getvalue())

    def test_config(self):
        for kwargs, key in (
            ({'beta': 0}, 'eval.beta'),
            ({'regime': 'loose'}, 'eval.regime'),
            ({'cutoff': 0}, 'eval.cutoff')
        ):
            with self.assertRaises(ConfigError) as context:
                EvalConfig(**kwargs)
            self.assertEqual(key, context.exception.key)

    def test_models_table(self):
        text = format_models_table([
            ModelRow('M1', 'small', 'WCE', 0.5),
            ModelRow('M2', 'medium', 'CE', 0.25)
        ])
        lines = text.splitlines()
        self.assertEqual(3, len(lines))
        self.assertTrue(lines[1].startswith('M1'))
        self.assertTrue(lines[1].endswith('50.00%'))


class RetrievalEvaluationTestCase(TestCase):

    def setUp(self):
        self.judgments = RelevanceJudgments([
            ('e1', ('d', 0, 3), True),
            ('e1', ('d', 4, 7), False),
            ('e1', ('d', 8, 9), True),
            ('e2', ('d', 10, 12), True)
        ])
        self.results = {
            'a': {
                'e1': [
                    Candidate('d', 0, 3, 'x', 3, 'a'),
                    Candidate('d', 4, 7, 'x', 2, 'a'),
                    Candidate('d', 20, 22, 'x', 1, 'a')
                ],
                'e2': [Candidate('d', 10, 12, 'x', 1, 'a')]
            },
            'b': {
                'e1': [Candidate('d', 8, 9, 'x', 1, 'b')],
                'e3': [Candidate('d', 30, 32, 'x', 1, 'b')]
            }
        }

    def test_rows(self):
        report = evaluate_retrieval(self.results, self.judgments)
        self.assertEqual(['b', 'a'], [row.method for row in report.rows])
        b, a = report.rows
        self.assertEqual((1, 1, 3), (
            b.retrieved, b.relevant_retrieved, b.relevant_total
        ))
        self.assertEqual((4, 2, 3), (
            a.retrieved, a.relevant_retrieved, a.relevant_total
        ))
        self.assertEqual(0.5, a.precision)
        self.assertAlmostEqual(fbeta(0.5, 2.0 / 3), a.fbeta)
        self.assertEqual(1, len(report.warnings))
        warning = report.warnings[0]
        self.assertEqual(('a', 'e1', ('d', 20, 22)), (
            warning.method, warning.entity_id, warning.key
        ))

    def test_cutoff(self):
        report = evaluate_retrieval(
            self.results, self.judgments, EvalConfig(cutoff=1)
        )
        a = [row for row in report.rows if row.method == 'a'][0]
        self.assertEqual((2, 2), (a.retrieved, a.relevant_retrieved))
        self.assertEqual([], report.warnings)

    def test_format(self):
        report = evaluate_retrieval(self.results, self.judgments)
        text = format_retrieval_report(report, {'a': 'Method A'})
        lines = text.splitlines()
        self.assertTrue(lines[0].startswith('Technique'))
        self.assertTrue(lines[1].startswith('b '))
        self.assertTrue(lines[2].startswith('Method A'))
        self.assertIn('50.00%', lines[2])
        self.assertIn('1 unjudged results', text)

    def test_load_judgments(self):
        judgments = load_judgments(io.StringIO(
            u'e1\td\t0\t3\t1\ne1\td\t4\t7\t0\n'
        ))
        self.assertEqual(['e1'], judgments.entities)
        self.assertTrue(judgments.judge('e1', ('d', 0, 3)))
        self.assertFalse(judgments.judge('e1', ('d', 4, 7)))
        self.assertIsNone(judgments.judge('e1', ('d', 5, 7)))
        for text in (
            u'e1\td\t0\t3\t2\n',
            u'e1\td\tx\t3\t1\n',
            u'e1\td\t0\t3\t1\ne1\td\t0\t3\t0\n'
        ):
            with self.assertRaises(InvalidJudgments):
                load_judgments(io.StringIO(text))

    def test_fixture_judgments(self):
        fixture = create_fixture()
        judgments = load_judgments(fixture_path('judgments.tsv'))
        self.assertEqual(4, judgments.relevant_counts['e1'])
        self.assertFalse(judgments.judge('e1', ('p4', 45, 57)))
        context = SearchContext(
            collection=fixture.collection,
            indexes=fixture.indexes,
            gazetteer=fixture.gazetteer
        )
        results = {'boolean_phrase': context.boolean_phrase.only('e1').map()}
        row = evaluate_retrieval(results, judgments).rows[0]
        self.assertEqual((5, 4), (row.retrieved, row.relevant_retrieved))
