"""Command-line interface: `ner-bootstrap <subcommand> [options]`.

Every subcommand reads the pipeline configuration from `--config`, with
`--set section.key=value` overrides. Data errors exit with status 1 and
usage errors with status 2.
"""
from __future__ import absolute_import, print_function

import argparse
import logging
import os
import sys
from collections import OrderedDict

import inflection

from .bootstrap import split_corpus, write_review
from .config import load_config
from .corpus import (
    TEST,
    TRAIN,
    VALIDATION,
    attach_gold_entities,
    corpus_stats,
    format_stats,
    read_corpus,
    read_gold_entities,
    write_corpus,
    write_gold_entities
)
from .evaluation import (
    ModelRow,
    Counts,
    count_tags,
    diff_report,
    evaluate,
    format_models_table,
    format_report,
    format_retrieval_report,
    report_items,
    write_items
)
from .exceptions import BootstrapError
from .method import ROSTER, display_name
from .pipeline import Pipeline, configure_logging
from .retrieval import write_candidates
from .tagger import (
    UNWEIGHTED,
    WEIGHTED,
    TrainConfig,
    annotate_collection,
    augment_corpus,
    load_model,
    predict,
    save_model,
    train,
    write_training_report
)
from .utils import open_text

logger = logging.getLogger(__name__)

PROG = 'ner-bootstrap'
LOSS_NAMES = {WEIGHTED: 'WCE', UNWEIGHTED: 'CE'}


class CommandParser(argparse.ArgumentParser):

    """An ArgumentParser writing help and usage errors to given streams.

    Arguments:
        streams: (stdout, stderr) pair; None keeps the process streams
    """
    def __init__(self, *args, **kwargs):
        self.streams = kwargs.pop('streams', None) or (None, None)
        super(CommandParser, self).__init__(*args, **kwargs)

    def _print_message(self, message, file=None):
        if not message:
            return
        stdout, stderr = self.streams
        if file is sys.stderr:
            file = stderr or file
        else:
            file = stdout or file or sys.stdout
        file.write(message)


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError('invalid integer %r' % text)
    if value < 1:
        raise argparse.ArgumentTypeError('must be >= 1, got %d' % value)
    return value


def _add_common(parser):
    parser.add_argument(
        '--config', metavar='PATH', help='pipeline configuration file'
    )
    parser.add_argument(
        '--set', metavar='SECTION.KEY=VALUE', action='append', default=[],
        dest='overrides', help='override a configuration value'
    )
    parser.add_argument('--seed', type=int, help='shortcut for pipeline.seed')
    parser.add_argument(
        '--jobs', type=_positive_int, help='shortcut for pipeline.jobs'
    )
    parser.add_argument(
        '-v', '--verbose', action='count', default=0,
        help='log progress to stderr (twice for debug output)'
    )


def _add_output(parser, help_text='output file (default: stdout)'):
    parser.add_argument('-o', '--output', metavar='PATH', help=help_text)


def _add_corpus(parser, name='corpus', help_text='CoNLL corpus file'):
    parser.add_argument(name, help=help_text)
    parser.add_argument(
        '--gold-entities', metavar='PATH',
        help='nested gold mention sidecar of the corpus'
    )


def build_parser(stdout=None, stderr=None):
    streams = (stdout, stderr)
    parser = CommandParser(
        prog=PROG,
        streams=streams,
        description='Bootstrap and evaluate named-entity corpora from a '
                    'gazetteer and a page collection.'
    )
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    def command(name, help_text):
        sub = commands.add_parser(
            name, help=help_text, description=help_text, streams=streams
        )
        _add_common(sub)
        return sub

    command('ingest', 'read the page collection and write its cache')

    sub = command('index', 'build and write the retrieval indexes')
    sub.add_argument(
        '--rebuild', action='store_true', help='ignore an existing index file'
    )

    sub = command('retrieve', 'write ranked candidates of one method as TSV')
    sub.add_argument('--method', required=True, choices=ROSTER)
    sub.add_argument(
        '--entity', action='append', default=[], metavar='ID',
        help='restrict to these entity ids'
    )
    sub.add_argument(
        '--limit', type=_positive_int, help='candidates per entity'
    )
    _add_output(sub)

    sub = command(
        'compare-methods', 'score every retrieval method against judgments'
    )
    sub.add_argument(
        '--methods', metavar='A,B', help='comma-separated subset of methods'
    )
    _add_output(sub)

    sub = command('bootstrap', 'annotate a corpus from gazetteer hits')
    sub.add_argument('--method', choices=ROSTER)
    _add_output(sub, 'corpus file (default: <output_dir>/<name>.conll)')
    sub.add_argument('--review', metavar='PATH', help='review sample file')

    sub = command('split', 'assign train/validation/test splits')
    _add_corpus(sub)
    _add_output(sub, 'corpus file (default: stdout)')

    sub = command('train', 'train a tagger on a corpus')
    _add_corpus(sub)
    sub.add_argument('--loss', choices=(WEIGHTED, UNWEIGHTED))
    _add_output(sub, 'model file (default: <output_dir>/model.bin)')
    sub.add_argument('--report', metavar='PATH', help='training report file')

    sub = command('infer', 'tag a corpus or the whole collection')
    sub.add_argument('--model', required=True, metavar='PATH')
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument('--corpus', metavar='PATH')
    group.add_argument(
        '--collection', action='store_true', help='tag every page'
    )
    sub.add_argument(
        '--relevant-only', action='store_true',
        help='with --collection, skip pages marked not relevant'
    )
    _add_output(sub, 'corpus file (default: stdout)')

    sub = command('augment', 'add model predictions to a corpus')
    _add_corpus(sub)
    sub.add_argument('--model', required=True, metavar='PATH')
    _add_output(sub, 'corpus file (default: stdout)')

    sub = command('eval', 'score predicted tags against gold tags')
    _add_corpus(sub, 'gold', 'gold CoNLL corpus')
    sub.add_argument('predicted', help='predicted CoNLL corpus')
    sub.add_argument(
        '--split', choices=(TRAIN, VALIDATION, TEST),
        help='only score gold sentences of this split'
    )
    _add_output(sub, 'report file (default: stdout)')
    sub.add_argument('--items', metavar='PATH', help='key = value scores')
    sub.add_argument('--diff', metavar='PATH', help='error analysis file')
    sub.add_argument(
        '--confusion-csv', metavar='PATH', help='confusion matrix as CSV'
    )

    sub = command('ablate', 'train the training-data and loss variants')
    _add_corpus(sub, 'corpus', 'bootstrapped (small) corpus')
    sub.add_argument(
        '--gold', metavar='PATH',
        help='corpus whose test split scores the models '
             '(default: the small corpus)'
    )
    sub.add_argument(
        '--all-pages', action='store_true',
        help='build the large corpus from every page, not only relevant ones'
    )
    _add_output(sub, 'table file (default: stdout)')

    sub = command('stats', 'count sentences and entities per split')
    sub.add_argument('corpora', nargs='+', metavar='corpus')
    _add_output(sub)
    return parser


def _write_text(text, path, stdout):
    if path is None:
        stdout.write(text)
        return
    handle = open_text(path, 'w')
    try:
        handle.write(text)
    finally:
        handle.close()


def _write_corpus(corpus, path, stdout):
    write_corpus(corpus, stdout if path is None else path)


def _read_corpus(path, gold_entities=None):
    corpus = read_corpus(path)
    if gold_entities:
        corpus = attach_gold_entities(
            corpus, read_gold_entities(gold_entities)
        )
    return corpus


def _seeded(corpus, seed):
    metadata = OrderedDict(corpus.metadata)
    metadata['seed'] = seed
    return corpus.replace(metadata=metadata)


def _sidecar_path(path):
    return os.path.splitext(path)[0] + '.entities.tsv'


class Commands(object):

    """Subcommand handlers, named after the subcommands."""

    def __init__(self, args, stdout):
        self.args = args
        self.stdout = stdout
        self.config = load_config(
            args.config, args.overrides, args.seed, args.jobs
        )
        self.pipeline = Pipeline(self.config)

    def __call__(self):
        handler = getattr(self, inflection.underscore(self.args.command))
        return handler()

    def ingest(self):
        collection = self.pipeline.ingest()
        self.stdout.write('documents = %d\nsentences = %d\n' % (
            len(collection), collection.sentence_count
        ))

    def index(self):
        bundle = self.pipeline.index(rebuild=self.args.rebuild)
        self.stdout.write('%r\n' % bundle)

    def retrieve(self):
        results = self.pipeline.retrieve(
            self.args.method, self.args.entity, self.args.limit
        )
        if self.args.output is None:
            write_candidates(results, self.stdout)
        else:
            write_candidates(results, self.args.output)

    def compare_methods(self):
        names = None
        if self.args.methods:
            names = [n.strip() for n in self.args.methods.split(',')]
        report = self.pipeline.compare_methods(names)
        text = format_retrieval_report(
            report, dict((name, display_name(name)) for name in ROSTER)
        )
        _write_text(
            '%s\n%s' % (self.config.header, text), self.args.output,
            self.stdout
        )

    def bootstrap(self):
        corpus = self.pipeline.bootstrap(self.args.method)
        self.pipeline.ensure_output_dir()
        path = self.args.output or self.pipeline.output(
            '%s.conll' % corpus.name
        )
        write_corpus(corpus, path)
        review = self.args.review or self.pipeline.output(
            '%s.review.txt' % corpus.name
        )
        write_review(
            corpus, review, self.config.bootstrap.review_sample,
            self.config.seed
        )
        self.stdout.write(format_stats([(corpus.name, corpus_stats(corpus))]))

    def split(self):
        args = self.args
        corpus = split_corpus(
            _read_corpus(args.corpus, args.gold_entities),
            self.config.bootstrap.split_ratios,
            self.config.seed
        )
        _write_corpus(corpus, args.output, self.stdout)
        if args.gold_entities and args.output:
            write_gold_entities(corpus, _sidecar_path(args.output))

    def train(self):
        args = self.args
        train_config = self.config.train
        if args.loss:
            train_config = TrainConfig(
                **dict(train_config._asdict(), loss=args.loss)
            )
        corpus = _read_corpus(args.corpus, args.gold_entities)
        model = train(
            corpus, self.config.features, train_config, self.config.eval.beta
        )
        if args.output is None:
            self.pipeline.ensure_output_dir()
        path = args.output or self.pipeline.output('model.bin')
        save_model(model, path)
        report = args.report or os.path.splitext(path)[0] + '.report.txt'
        write_training_report(model, report)
        logger.info('wrote %s and %s', path, report)

    def infer(self):
        args = self.args
        model = load_model(args.model)
        if args.collection:
            corpus = annotate_collection(
                model,
                self.pipeline.collection,
                args.relevant_only,
                self.config.name,
                self.config.jobs
            )
        else:
            source = read_corpus(args.corpus)
            corpus = source.replace(sentences=[
                sentence.with_tags(predict(model, sentence))
                for sentence in source.sentences
            ])
        _write_corpus(_seeded(corpus, self.config.seed), args.output,
                      self.stdout)

    def augment(self):
        args = self.args
        corpus = augment_corpus(
            _read_corpus(args.corpus, args.gold_entities),
            load_model(args.model)
        )
        _write_corpus(corpus, args.output, self.stdout)

    def eval(self):
        args = self.args
        gold = _read_corpus(args.gold, args.gold_entities)
        predicted = read_corpus(args.predicted)
        if args.split:
            kept = gold.split(args.split)
            ids = set(sentence.sentence_id for sentence in kept)
            gold = gold.replace(sentences=kept, splits=None)
            predicted = predicted.replace(sentences=[
                s for s in predicted.sentences if s.sentence_id in ids
            ], splits=None)
        report = evaluate(gold, predicted, self.config.eval)
        _write_text(
            '%s\n%s\n' % (self.config.header, format_report(report)),
            args.output,
            self.stdout
        )
        if args.items:
            write_items(report_items(report), args.items)
        if args.diff:
            _write_text(diff_report(gold, predicted).text, args.diff, None)
        if args.confusion_csv:
            _write_text(report.confusion.to_csv(), args.confusion_csv, None)

    def ablate(self):
        args = self.args
        config = self.config
        small = _read_corpus(args.corpus, args.gold_entities)
        gold = _read_corpus(args.gold) if args.gold else small
        test = gold.split(TEST)

        def score(model):
            total = Counts.zero()
            for sentence in test:
                total += count_tags(sentence.tags, predict(model, sentence))
            return total.scores(config.eval.beta).fbeta

        def fit(corpus, loss):
            train_config = TrainConfig(
                **dict(config.train._asdict(), loss=loss)
            )
            return train(corpus, config.features, train_config,
                         config.eval.beta)

        seed_model = fit(small, WEIGHTED)
        medium = augment_corpus(small, seed_model, '%s-medium' % small.name)
        large = split_corpus(
            annotate_collection(
                seed_model,
                self.pipeline.collection,
                relevant_only=not args.all_pages,
                name='%s-large' % small.name,
                jobs=config.jobs
            ),
            config.bootstrap.split_ratios,
            config.seed
        )
        large_name = 'Huge' if args.all_pages else 'Large'
        cells = [
            ('Small', WEIGHTED, lambda: seed_model),
            ('Small', UNWEIGHTED, lambda: fit(small, UNWEIGHTED)),
            ('Medium', WEIGHTED, lambda: fit(medium, WEIGHTED)),
            ('Medium', UNWEIGHTED, lambda: fit(medium, UNWEIGHTED)),
            (large_name, WEIGHTED, lambda: fit(large, WEIGHTED)),
            (large_name, UNWEIGHTED, lambda: fit(large, UNWEIGHTED))
        ]
        rows = []
        for data, loss, build in cells:
            model_id = ('%s-%s' % (data, LOSS_NAMES[loss])).lower()
            rows.append(ModelRow(
                model_id, data, LOSS_NAMES[loss], score(build())
            ))
            logger.info('%s: F-beta %.4f', model_id, rows[-1].fbeta)
        _write_text(
            '%s\n%s' % (config.header, format_models_table(rows)),
            args.output,
            self.stdout
        )

    def stats(self):
        named = []
        for path in self.args.corpora:
            corpus = read_corpus(path)
            named.append((corpus.name, corpus_stats(corpus)))
        _write_text(format_stats(named), self.args.output, self.stdout)


def run(argv=None, stdout=None, stderr=None):
    """Runs one subcommand and returns the exit status."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser(stdout, stderr)
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    configure_logging(args.verbose, stderr)
    try:
        Commands(args, stdout)()
    except (BootstrapError, ValueError, EnvironmentError) as e:
        stderr.write('error: %s: %s\n' % (type(e).__name__, e))
        return 1
    return 0


def main():
    sys.exit(run())
