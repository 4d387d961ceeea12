"""Pipeline configuration: one INI file plus command-line overrides.

Example:

    [pipeline]
    seed = 13
    jobs = 4

    [paths]
    manifest = pages/manifest.tsv
    gazetteer = gazetteer.tsv
    output_dir = out

    [bootstrap]
    method = boolean_phrase
    split_ratios = 0.8, 0.1, 0.1

    [train]
    loss = weighted
    epochs = 10

Relative paths resolve against the directory of the config file. Every
key can be overridden with `--set section.key=value`.
"""
from __future__ import absolute_import

import os
from collections import OrderedDict, namedtuple

from six.moves import configparser

from .bootstrap import BootstrapConfig
from .evaluation import EvalConfig
from .exceptions import ConfigError
from .ingest import DEFAULT_ABBREVIATIONS, DEFAULT_SUFFIX_RULES
from .method import RetrievalConfig
from .tagger import FeatureConfig, TrainConfig
from .utils import exact, open_text

# paths that must exist when set; output_dir is created on demand
INPUT_PATHS = (
    'manifest',
    'gazetteer',
    'lemma_dictionary',
    'suffix_rules',
    'abbreviations',
    'judgments',
    'bertscore_vectors',
    'sentencebert_vectors'
)


def _text(value):
    return value.strip()


def _integer(value):
    return int(value)


def _number(value):
    return float(value)


def _boolean(value):
    folded = value.strip().lower()
    if folded in ('1', 'yes', 'true', 'on'):
        return True
    if folded in ('0', 'no', 'false', 'off'):
        return False
    raise ValueError('expected a boolean, got %r' % value)


def _optional_integer(value):
    return int(value) if value.strip() else None


def _path(value):
    return value.strip() or None


def _integers(value):
    return tuple(int(v) for v in value.split(',') if v.strip())


def _fraction(value):
    return exact(value.strip())


def _fractions(value):
    return tuple(_fraction(v) for v in value.split(',') if v.strip())


SCHEMA = OrderedDict([
    ('pipeline', OrderedDict([
        ('seed', (_integer, '0')),
        ('jobs', (_integer, '1')),
        ('name', (_text, 'bootstrap'))
    ])),
    ('paths', OrderedDict([
        ('manifest', (_path, '')),
        ('gazetteer', (_path, '')),
        ('lemma_dictionary', (_path, '')),
        ('suffix_rules', (_path, DEFAULT_SUFFIX_RULES)),
        ('abbreviations', (_path, DEFAULT_ABBREVIATIONS)),
        ('output_dir', (_path, 'output')),
        ('judgments', (_path, '')),
        ('bertscore_vectors', (_path, '')),
        ('sentencebert_vectors', (_path, ''))
    ])),
    ('bootstrap', OrderedDict([
        ('method', (_text, 'boolean_phrase')),
        ('candidate_limit', (_integer, '10000')),
        ('split_ratios', (_fractions, '0.8, 0.1, 0.1')),
        ('review_sample', (_integer, '100'))
    ])),
    ('retrieval', OrderedDict([
        ('char_tolerance', (_fraction, '0.3')),
        ('phrase_tolerance', (_fraction, '0')),
        ('phrase_slack', (_integer, '1')),
        ('stride', (_integer, '1')),
        ('max_edits', (_optional_integer, '')),
        ('k1', (_number, '1.2')),
        ('b', (_number, '0.75')),
        ('rrf_k', (_number, '60')),
        ('rrf_inputs', (_text, 'all')),
        ('case_folding', (_boolean, 'yes'))
    ])),
    ('features', OrderedDict([
        ('hash_dim', (_integer, str(2 ** 18))),
        ('ngram_sizes', (_integers, '2, 3, 4')),
        ('window', (_integer, '2')),
        ('shape', (_boolean, 'yes'))
    ])),
    ('train', OrderedDict([
        ('learning_rate', (_number, '0.2')),
        ('epochs', (_integer, '10')),
        ('batch_size', (_integer, '16')),
        ('loss', (_text, 'weighted')),
        ('patience', (_integer, '3')),
        ('lr_schedule', (_text, 'constant')),
        ('warmup_epochs', (_integer, '0')),
        ('smoothing', (_boolean, 'yes'))
    ])),
    ('eval', OrderedDict([
        ('beta', (_number, '0.25')),
        ('regime', (_text, 'strict')),
        ('per_language', (_boolean, 'yes')),
        ('cutoff', (_integer, '10'))
    ]))
])


class PipelineConfig(namedtuple('PipelineConfig', [
    'source',
    'seed',
    'jobs',
    'name',
    'paths',
    'bootstrap',
    'retrieval',
    'features',
    'train',
    'eval'
])):

    """Validated pipeline settings.

    `paths` maps every [paths] key to an absolute path or None. The
    pipeline seed is copied into the bootstrap and train settings.
    """
    __slots__ = ()

    def __repr__(self):
        return 'PipelineConfig: %s (seed %d)' % (
            self.source or '<defaults>', self.seed
        )

    def path(self, key):
        return self.paths[key]

    def output(self, *parts):
        return os.path.join(self.paths['output_dir'], *parts)

    @property
    def header(self):
        return '# seed=%d' % self.seed


def parse_override(text):
    """Splits `section.key=value` into ((section, key), value)."""
    name, sep, value = text.partition('=')
    section, dot, key = name.strip().partition('.')
    if not sep or not dot or not section or not key:
        raise ConfigError(
            name.strip() or text, 'expected section.key=value'
        )
    return (section, key), value.strip()


def _read_parser(path):
    parser = configparser.RawConfigParser()
    if path is None:
        return parser
    handle = open_text(path)
    try:
        parser.read_file(handle, path)
    except configparser.Error as e:
        raise ConfigError(path, str(e).replace('\n', ' '))
    finally:
        handle.close()
    return parser


def _raw_values(parser, overrides):
    values = OrderedDict()
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(section, 'unknown section')
        for key, value in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError('%s.%s' % (section, key), 'unknown key')
            values[(section, key)] = value
    for override in overrides:
        (section, key), value = parse_override(override)
        if key not in SCHEMA.get(section, ()):
            raise ConfigError('%s.%s' % (section, key), 'unknown key')
        values[(section, key)] = value
    return values


def _parse_values(raw):
    parsed = OrderedDict()
    for section, keys in SCHEMA.items():
        for key, (convert, default) in keys.items():
            value = raw.get((section, key), default)
            try:
                parsed[(section, key)] = convert(value)
            except ValueError as e:
                raise ConfigError('%s.%s' % (section, key), str(e))
    return parsed


def _section(parsed, name):
    return OrderedDict(
        (key, value) for (section, key), value in parsed.items()
        if section == name
    )


def _resolve_paths(paths, base, check):
    resolved = OrderedDict()
    for key, value in paths.items():
        if value is not None:
            value = os.path.normpath(os.path.join(base, value))
            if check and key in INPUT_PATHS and not os.path.exists(value):
                raise ConfigError(
                    'paths.%s' % key, 'no such file: %s' % value
                )
        resolved[key] = value
    return resolved


def load_config(path=None, overrides=(), seed=None, jobs=None, check=True):
    """Reads, overrides and validates a pipeline configuration.

    Arguments:
        path: INI file, or None for the defaults
        overrides: `section.key=value` strings, applied after the file
        seed: shortcut for `pipeline.seed`
        jobs: shortcut for `pipeline.jobs`
        check: verify that configured input paths exist
    Raises:
        ConfigError naming the offending key.
    """
    overrides = list(overrides)
    if seed is not None:
        overrides.append('pipeline.seed=%d' % seed)
    if jobs is not None:
        overrides.append('pipeline.jobs=%d' % jobs)
    parsed = _parse_values(_raw_values(_read_parser(path), overrides))
    pipeline = _section(parsed, 'pipeline')
    if pipeline['jobs'] < 1:
        raise ConfigError('pipeline.jobs', 'must be >= 1')
    base = os.path.dirname(os.path.abspath(path)) if path else os.getcwd()
    bootstrap = _section(parsed, 'bootstrap')
    train = _section(parsed, 'train')
    features = _section(parsed, 'features')
    return PipelineConfig(
        source=path,
        seed=pipeline['seed'],
        jobs=pipeline['jobs'],
        name=pipeline['name'],
        paths=_resolve_paths(_section(parsed, 'paths'), base, check),
        bootstrap=BootstrapConfig(rng_seed=pipeline['seed'], **bootstrap),
        retrieval=RetrievalConfig(**_section(parsed, 'retrieval')),
        features=FeatureConfig(**features),
        train=TrainConfig(rng_seed=pipeline['seed'], **train),
        eval=EvalConfig(**_section(parsed, 'eval'))
    )
