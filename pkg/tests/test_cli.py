import io
import os
import shutil
import tempfile
from unittest import TestCase

from ner_bootstrap.cli import build_parser, run
from ner_bootstrap.corpus import TEST, read_corpus
from ner_bootstrap.evaluation import token_metrics
from tests.setup import create_fixture, fixture_path


class CliTestCase(TestCase):

    def setUp(self):
        self.fixture = create_fixture()
        self.directory = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.directory)

    def _run(self, *argv):
        stdout = io.StringIO()
        stderr = io.StringIO()
        status = run(list(argv), stdout, stderr)
        return status, stdout.getvalue(), stderr.getvalue()

    def _configured(self, command, output_dir, *argv):
        return self._run(
            command,
            '--config', self.fixture.config_path,
            '--set', 'paths.output_dir=%s' % output_dir,
            *argv
        )

    def _read(self, directory):
        contents = {}
        for name in sorted(os.listdir(directory)):
            with open(os.path.join(directory, name), 'rb') as handle:
                contents[name] = handle.read()
        return contents

    def _pipeline(self, name, *extra):
        out = os.path.join(self.directory, name)

        def step(*argv):
            status, stdout, stderr = self._configured(
                argv[0], out, *(argv[1:] + extra)
            )
            self.assertEqual(0, status, stderr)
            return stdout

        self.assertIn('documents = 5\n', step('ingest'))
        step('index')
        step('bootstrap')
        corpus = os.path.join(out, 'toy.conll')
        model = os.path.join(out, 'model.bin')
        step('train', corpus)
        predicted = os.path.join(out, 'predicted.conll')
        step('infer', '--model', model, '--corpus', corpus, '-o', predicted)
        step(
            'eval', corpus, predicted, '--split', TEST,
            '-o', os.path.join(out, 'eval.txt'),
            '--items', os.path.join(out, 'eval.items'),
            '--diff', os.path.join(out, 'eval.diff'),
            '--confusion-csv', os.path.join(out, 'confusion.csv')
        )
        return out

    def test_pipeline_is_reproducible(self):
        first = self._read(self._pipeline('first'))
        self.assertEqual(sorted([
            'collection.bin', 'confusion.csv', 'eval.diff', 'eval.items',
            'eval.txt', 'indexes.bin', 'model.bin', 'model.report.txt',
            'predicted.conll', 'toy.conll', 'toy.review.txt'
        ]), sorted(first))
        self.assertEqual(first, self._read(self._pipeline('second')))
        self.assertEqual(
            first, self._read(self._pipeline('parallel', '--jobs', '4'))
        )
        self.assertTrue(first['eval.txt'].startswith(b'# seed=7\n'))
        self.assertTrue(
            first['toy.review.txt'].startswith(b'# corpus=toy seed=7')
        )

    def test_bootstrap_stats(self):
        out = os.path.join(self.directory, 'out')
        status, stdout, _ = self._configured('bootstrap', out)
        self.assertEqual(0, status)
        corpus = read_corpus(os.path.join(out, 'toy.conll'))
        self.assertEqual('toy', corpus.name)
        self.assertEqual(19, len(corpus))
        self.assertTrue(stdout.startswith('Corpus'))
        self.assertIn('Training', stdout)

    def test_stats(self):
        status, stdout, _ = self._run('stats', self.fixture.gold_path)
        self.assertEqual(0, status)
        lines = stdout.splitlines()
        self.assertEqual(
            ['toy-gold', '10', '7', '7'], lines[1].split()
        )
        self.assertEqual(['Training', '8'], lines[2].split()[:2])

    def test_retrieve(self):
        out = os.path.join(self.directory, 'out')
        status, stdout, _ = self._configured(
            'retrieve', out, '--method', 'boolean_phrase', '--entity', 'e3'
        )
        self.assertEqual(0, status)
        rows = [line.split('\t') for line in stdout.splitlines()]
        self.assertEqual(6, len(rows))
        self.assertEqual(set(['e3']), set(row[0] for row in rows))
        self.assertEqual('Praha', rows[0][-1])
        status, stdout, _ = self._configured(
            'retrieve', out, '--method', 'jaccard', '--entity', 'e3',
            '--limit', '2'
        )
        self.assertEqual(2, len(stdout.splitlines()))

    def test_compare_methods(self):
        out = os.path.join(self.directory, 'out')
        status, stdout, _ = self._configured('compare-methods', out)
        self.assertEqual(0, status)
        lines = stdout.splitlines()
        self.assertEqual('# seed=7', lines[0])
        self.assertTrue(lines[1].startswith('Technique'))
        self.assertIn('Boolean Phrase', stdout)
        self.assertIn('Fuzzy Regex', stdout)
        # no vector files are configured
        self.assertNotIn('BERTScore', stdout)
        self.assertNotIn('SentenceBERT', stdout)
        status, stdout, _ = self._configured(
            'compare-methods', out, '--methods', 'bm25,rrf'
        )
        self.assertEqual(0, status)
        self.assertEqual(
            set(['Okapi', 'RRF']),
            set(line.split()[0] for line in stdout.splitlines()[2:4])
        )
        self.assertNotIn('Boolean Phrase', stdout)

    def test_infer_collection(self):
        out = os.path.join(self.directory, 'out')
        model = os.path.join(self.directory, 'model.bin')
        status, _, stderr = self._configured(
            'train', out, self.fixture.gold_path, '-o', model
        )
        self.assertEqual(0, status, stderr)
        self.assertTrue(
            os.path.exists(os.path.join(self.directory, 'model.report.txt'))
        )
        status, stdout, _ = self._configured(
            'infer', out, '--model', model, '--collection', '--relevant-only'
        )
        self.assertEqual(0, status)
        corpus = read_corpus(io.StringIO(stdout))
        self.assertEqual(19, len(corpus))
        self.assertEqual('toy', corpus.name)

        status, stdout, _ = self._configured(
            'augment', out, self.fixture.gold_path, '--model', model
        )
        self.assertEqual(0, status)
        gold = read_corpus(self.fixture.gold_path)
        augmented = read_corpus(io.StringIO(stdout))
        self.assertEqual(len(gold), len(augmented))
        self.assertEqual(gold.splits, augmented.splits)

    def test_split(self):
        target = os.path.join(self.directory, 'split.conll')
        status, _, _ = self._run(
            'split', self.fixture.gold_path,
            '--gold-entities', self.fixture.gold_entities_path,
            '--seed', '3', '-o', target
        )
        self.assertEqual(0, status)
        corpus = read_corpus(target)
        self.assertEqual(10, len(corpus))
        self.assertEqual(8, len(corpus.split('train')))
        self.assertTrue(
            os.path.exists(os.path.join(self.directory, 'split.entities.tsv'))
        )

    def test_eval_identical(self):
        gold = self.fixture.gold_path
        status, stdout, _ = self._run('eval', gold, gold)
        self.assertEqual(0, status)
        self.assertTrue(stdout.startswith('# seed=0\n'))
        self.assertIn('100.00', stdout)
        corpus = read_corpus(gold)
        self.assertEqual(1.0, token_metrics(corpus, corpus).fbeta)

    def test_ablate(self):
        out = os.path.join(self.directory, 'out')
        status, stdout, stderr = self._configured(
            'ablate', out, self.fixture.gold_path
        )
        self.assertEqual(0, status, stderr)
        lines = stdout.splitlines()
        self.assertEqual('# seed=7', lines[0])
        self.assertEqual(
            [
                'small-wce', 'small-ce', 'medium-wce', 'medium-ce',
                'large-wce', 'large-ce'
            ],
            [line.split()[0] for line in lines[2:]]
        )
        self.assertEqual(['Small', 'WCE'], lines[2].split()[1:3])
        self.assertEqual(['Large', 'CE'], lines[7].split()[1:3])

    def test_errors(self):
        status, _, _ = self._run('frobnicate')
        self.assertEqual(2, status)
        status, _, _ = self._run()
        self.assertEqual(2, status)
        status, _, stderr = self._run(
            'stats', self.fixture.gold_path, '--set', 'train.momentum=1'
        )
        self.assertEqual(1, status)
        self.assertIn('ConfigError', stderr)
        status, _, stderr = self._run(
            'stats', os.path.join(self.directory, 'missing.conll')
        )
        self.assertEqual(1, status)
        self.assertIn('MissingFile', stderr)
        status, _, stderr = self._run(
            'eval', self.fixture.gold_path, fixture_path('manifest.tsv')
        )
        self.assertEqual(1, status)

    def test_usage_errors_use_given_stream(self):
        status, stdout, stderr = self._run('frobnicate')
        self.assertEqual(2, status)
        self.assertEqual('', stdout)
        self.assertIn('invalid choice', stderr)
        status, _, stderr = self._run('retrieve', '--method', 'bm25',
                                      '--limit', '0')
        self.assertEqual(2, status)
        self.assertIn('--limit: must be >= 1', stderr)
        status, _, stderr = self._run('stats', 'x.conll', '--jobs', 'two')
        self.assertEqual(2, status)
        self.assertIn('--jobs', stderr)
        status, stdout, _ = self._run('stats', '--help')
        self.assertEqual(0, status)
        self.assertTrue(stdout.startswith('usage: ner-bootstrap stats'))

    def test_unreadable_input(self):
        out = os.path.join(self.directory, 'out')
        status, stdout, stderr = self._configured(
            'compare-methods', out,
            '--set', 'paths.bertscore_vectors=%s' % self.directory
        )
        self.assertEqual(1, status)
        self.assertEqual('', stdout)
        self.assertTrue(
            stderr.splitlines()[-1].startswith('error: '), stderr
        )
        self.assertNotIn('Traceback', stderr)

    def test_parser_commands(self):
        parser = build_parser()
        args = parser.parse_args(['compare-methods', '--jobs', '2'])
        self.assertEqual('compare-methods', args.command)
        self.assertEqual(2, args.jobs)
        self.assertEqual([], args.overrides)
