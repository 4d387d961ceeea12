"""Feature-hashed linear token classifier trained with weighted cross-entropy.

Each token is described by hashed sparse binary features (context words,
character n-grams of the token, shape flags) plus a bias; a weight matrix
of shape (hash_dim + 1, 5) maps them to scores over the five labels.
"""
from __future__ import absolute_import

import logging
import zlib
from collections import OrderedDict, namedtuple
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from tqdm import tqdm

from .corpus import (
    LABELS,
    TRAIN,
    UNASSIGNED,
    VALIDATION,
    Corpus,
    Label,
    parse_bio,
    project_bio
)
from .evaluation import DEFAULT_BETA, Counts, count_tags
from .exceptions import ConfigError, EmptySplit, MissingClass
from .utils import dump_binary, load_binary, open_text

logger = logging.getLogger(__name__)

MODEL_MAGIC = b'NERBMDL\0'
MODEL_VERSION = 1

WEIGHTED = 'weighted'
UNWEIGHTED = 'unweighted'
CONSTANT = 'constant'
LINEAR = 'linear'

N_LABELS = len(LABELS)


class FeatureConfig(namedtuple(
    'FeatureConfig', 'hash_dim ngram_sizes window shape'
)):
    __slots__ = ()

    def __new__(cls, hash_dim=2 ** 18, ngram_sizes=(2, 3, 4), window=2,
                shape=True):
        if hash_dim < 2:
            raise ConfigError('features.hash_dim', 'must be >= 2')
        if window < 0:
            raise ConfigError('features.window', 'must be >= 0')
        if any(n < 1 for n in ngram_sizes):
            raise ConfigError('features.ngram_sizes', 'sizes must be >= 1')
        return super(FeatureConfig, cls).__new__(
            cls, int(hash_dim), tuple(ngram_sizes), int(window), bool(shape)
        )


class TrainConfig(namedtuple('TrainConfig', [
    'learning_rate',
    'epochs',
    'rng_seed',
    'loss',
    'patience',
    'batch_size',
    'lr_schedule',
    'warmup_epochs',
    'smoothing'
])):

    """SGD settings.

    `patience` is the number of epochs without a validation improvement
    after which training stops; 0 trains every epoch. `smoothing` adds one
    to every class count before computing class weights.
    """
    __slots__ = ()

    def __new__(
        cls,
        learning_rate=0.2,
        epochs=10,
        rng_seed=0,
        loss=WEIGHTED,
        patience=3,
        batch_size=16,
        lr_schedule=CONSTANT,
        warmup_epochs=0,
        smoothing=True
    ):
        if not learning_rate > 0:
            raise ConfigError('train.learning_rate', 'must be > 0')
        if epochs < 1:
            raise ConfigError('train.epochs', 'must be >= 1')
        if loss not in (WEIGHTED, UNWEIGHTED):
            raise ConfigError('train.loss', 'must be weighted or unweighted')
        if patience < 0:
            raise ConfigError('train.patience', 'must be >= 0')
        if batch_size < 1:
            raise ConfigError('train.batch_size', 'must be >= 1')
        if lr_schedule not in (CONSTANT, LINEAR):
            raise ConfigError('train.lr_schedule', 'must be constant or linear')
        if not 0 <= warmup_epochs < epochs:
            raise ConfigError('train.warmup_epochs', 'must be in [0, epochs)')
        return super(TrainConfig, cls).__new__(
            cls,
            float(learning_rate),
            int(epochs),
            rng_seed,
            loss,
            int(patience),
            int(batch_size),
            lr_schedule,
            int(warmup_epochs),
            bool(smoothing)
        )

    def rate(self, epoch):
        """Learning rate of a 0-based epoch."""
        base = self.learning_rate
        warmup = self.warmup_epochs
        if epoch < warmup:
            return base * (epoch + 1) / warmup
        if self.lr_schedule == LINEAR:
            remaining = self.epochs - warmup
            return base * (1 - float(epoch - warmup) / remaining)
        return base


class ClassWeights(object):

    """Per-label loss weights, indexed by label id."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.shape != (N_LABELS, ) or not np.all(self.values > 0):
            raise ValueError('expected %d positive weights' % N_LABELS)

    def __repr__(self):
        return 'ClassWeights: %s' % ', '.join(
            '%s=%.4f' % (label.value, self.values[label.id])
            for label in LABELS
        )

    def __getitem__(self, label):
        return float(self.values[Label.coerce(label).id])

    @classmethod
    def uniform(cls):
        return cls(np.ones(N_LABELS))

    def as_dict(self):
        return OrderedDict(
            (label.value, float(self.values[label.id])) for label in LABELS
        )


def class_weights(sentences, smoothing=False):
    """Inverse-frequency class weights rescaled to mean 1.

    Arguments:
        sentences: training sentences
        smoothing: add one to every class count first
    Raises:
        MissingClass: a class never occurs and smoothing is off
    """
    counts = np.zeros(N_LABELS, dtype=np.float64)
    for sentence in sentences:
        for tag in sentence.tags:
            counts[tag.id] += 1
    if smoothing:
        counts += 1
    for label in LABELS:
        if not counts[label.id]:
            raise MissingClass(label)
    inverse = counts.sum() / counts
    return ClassWeights(inverse * N_LABELS / inverse.sum())


def _hash(feature, hash_dim):
    return zlib.crc32(feature.encode('utf-8')) % hash_dim


def _shape(word):
    flags = []
    if word[:1].isupper():
        flags.append('shape=cap')
    if word.isupper():
        flags.append('shape=upper')
    if any(char.isdigit() for char in word):
        flags.append('shape=digit')
    if not any(char.isalnum() for char in word):
        flags.append('shape=punct')
    return flags


def token_features(words, position, config):
    """Feature strings of the token at `position`."""
    features = []
    for offset in range(-config.window, config.window + 1):
        index = position + offset
        if index < 0:
            word = '<s>'
        elif index >= len(words):
            word = '</s>'
        else:
            word = words[index].lower()
        features.append('w[%d]=%s' % (offset, word))
    padded = '<%s>' % words[position].lower()
    for size in config.ngram_sizes:
        for start in range(len(padded) - size + 1):
            features.append('c%d=%s' % (size, padded[start:start + size]))
    if config.shape:
        features.extend(_shape(words[position]))
    return features


def featurize(words, config):
    """Sorted hashed feature ids per token, bias id last."""
    return [
        np.array(sorted(set(
            _hash(feature, config.hash_dim)
            for feature in token_features(words, position, config)
        )) + [config.hash_dim], dtype=np.int64)
        for position in range(len(words))
    ]


def _flatten(token_features_list):
    lengths = np.array([len(f) for f in token_features_list], dtype=np.int64)
    starts = np.zeros(len(lengths), dtype=np.int64)
    if len(lengths):
        starts[1:] = np.cumsum(lengths)[:-1]
    flat = (
        np.concatenate(token_features_list) if token_features_list
        else np.zeros(0, dtype=np.int64)
    )
    return flat, starts, lengths


def scores(weights, token_features_list):
    """Per-token label scores, shape (tokens, 5)."""
    if not token_features_list:
        return np.zeros((0, N_LABELS))
    flat, starts, _ = _flatten(token_features_list)
    return np.add.reduceat(weights[flat], starts, axis=0)


def softmax(values):
    shifted = values - values.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def score_gradient(token_scores, labels, label_weights):
    """Mean weighted cross-entropy and its gradient w.r.t. the scores.

    Arguments:
        token_scores: (B, 5) scores
        labels: (B, ) gold label ids
        label_weights: (5, ) class weights
    """
    batch = len(labels)
    probabilities = softmax(token_scores)
    rows = np.arange(batch)
    w = label_weights[labels]
    loss = -np.sum(w * np.log(probabilities[rows, labels])) / batch
    gradient = probabilities
    gradient[rows, labels] -= 1.0
    gradient *= (w / batch)[:, np.newaxis]
    return loss, gradient


def weighted_cross_entropy(weights, token_features_list, labels,
                           label_weights):
    """Loss and dense weight gradient over a batch of tokens."""
    labels = np.asarray(labels, dtype=np.int64)
    loss, gradient = score_gradient(
        scores(weights, token_features_list), labels, label_weights
    )
    flat, _, lengths = _flatten(token_features_list)
    dense = np.zeros_like(weights)
    np.add.at(dense, flat, np.repeat(gradient, lengths, axis=0))
    return loss, dense


def _sgd_step(weights, token_features_list, labels, label_weights, rate):
    loss, gradient = score_gradient(
        scores(weights, token_features_list), labels, label_weights
    )
    flat, _, lengths = _flatten(token_features_list)
    np.add.at(weights, flat, -rate * np.repeat(gradient, lengths, axis=0))
    return loss


def decode_bio(label_ids):
    """Labels for raw argmax ids, rewriting a stray I-X to B-X."""
    labels = []
    previous = Label.O
    for label_id in label_ids:
        label = LABELS[label_id]
        if label.is_inside and previous.entity_type is not label.entity_type:
            label = Label.begin(label.entity_type)
        labels.append(label)
        previous = label
    return labels


EpochRecord = namedtuple(
    'EpochRecord', 'epoch learning_rate loss validation_fbeta'
)


class TaggerModel(object):

    """A trained token classifier.

    Arguments:
        weights: (hash_dim + 1, 5) matrix, bias in the last row
        feature_config: FeatureConfig
        class_weights: ClassWeights used in training
        metadata: training metadata (epochs, seed, corpus name, ...)
        history: EpochRecord list
    """
    def __init__(self, weights, feature_config, class_weights,
                 metadata=None, history=None):
        self.weights = np.asarray(weights, dtype=np.float64)
        expected = (feature_config.hash_dim + 1, N_LABELS)
        if self.weights.shape != expected:
            raise ValueError('weights of shape %s, expected %s' % (
                self.weights.shape, expected
            ))
        self.feature_config = feature_config
        self.class_weights = class_weights
        self.metadata = OrderedDict(metadata or ())
        self.history = list(history or ())

    def __repr__(self):
        return 'TaggerModel: hash_dim %d, trained on %s' % (
            self.feature_config.hash_dim, self.metadata.get('corpus')
        )

    def label_ids(self, words):
        if not words:
            return []
        token_scores = scores(
            self.weights, featurize(words, self.feature_config)
        )
        return [int(i) for i in np.argmax(token_scores, axis=1)]


def predict(model, sentence):
    """BIO-valid labels for a sentence (or a list of token texts)."""
    words = [
        getattr(token, 'text', token)
        for token in getattr(sentence, 'tokens', sentence)
    ]
    return decode_bio(model.label_ids(words))


def _validation_fbeta(model, sentences, beta):
    total = Counts.zero()
    for sentence in sentences:
        total += count_tags(sentence.tags, predict(model, sentence))
    return total.scores(beta).fbeta


def _training_arrays(sentences, config):
    features = []
    labels = []
    for sentence in sentences:
        features.extend(
            featurize([token.text for token in sentence.tokens], config)
        )
        labels.extend(tag.id for tag in sentence.tags)
    return features, np.array(labels, dtype=np.int64)


def train(corpus, feature_config=None, train_config=None,
          beta=DEFAULT_BETA, weights=None):
    """Mini-batch SGD over shuffled training tokens.

    The weights of the epoch with the best validation token F-beta are
    kept; an unweighted loss is the weighted one with all weights 1.
    Passing `weights` (ClassWeights) skips computing them from the data.

    Raises:
        EmptySplit: the train or validation split is empty
    """
    feature_config = feature_config or FeatureConfig()
    train_config = train_config or TrainConfig()
    training = corpus.split(TRAIN)
    validation = corpus.split(VALIDATION)
    if not training:
        raise EmptySplit('%s: empty train split' % corpus.name)
    if not validation:
        raise EmptySplit('%s: empty validation split' % corpus.name)

    if weights is not None:
        weights_used = weights
    elif train_config.loss == WEIGHTED:
        weights_used = class_weights(training, train_config.smoothing)
    else:
        weights_used = ClassWeights.uniform()
    label_weights = weights_used.values
    features, labels = _training_arrays(training, feature_config)
    n = len(labels)
    logger.info('training on %d tokens, %r', n, weights_used)

    rng = np.random.Generator(np.random.PCG64(train_config.rng_seed))
    matrix = np.zeros((feature_config.hash_dim + 1, N_LABELS))
    model = TaggerModel(matrix, feature_config, weights_used)
    best = (-1.0, None, 0)
    history = []
    stale = 0
    size = train_config.batch_size
    for epoch in range(train_config.epochs):
        rate = train_config.rate(epoch)
        order = rng.permutation(n)
        total = 0.0
        for start in tqdm(
            range(0, n, size),
            desc='epoch %d' % (epoch + 1),
            disable=not logger.isEnabledFor(logging.DEBUG)
        ):
            batch = order[start:start + size]
            loss = _sgd_step(
                model.weights,
                [features[i] for i in batch],
                labels[batch],
                label_weights,
                rate
            )
            total += loss * len(batch)
        score = _validation_fbeta(model, validation, beta)
        history.append(EpochRecord(epoch + 1, rate, total / n, score))
        logger.info(
            'epoch %d: lr %.4f, loss %.6f, validation F-beta %.4f',
            epoch + 1, rate, total / n, score
        )
        if score > best[0]:
            best = (score, model.weights.copy(), epoch + 1)
            stale = 0
        else:
            stale += 1
            if train_config.patience and stale >= train_config.patience:
                logger.info('early stop after epoch %d', epoch + 1)
                break

    metadata = OrderedDict([
        ('corpus', corpus.name),
        ('seed', train_config.rng_seed),
        ('loss', train_config.loss),
        ('epochs', len(history)),
        ('best_epoch', best[2]),
        ('validation_fbeta', best[0]),
        ('learning_rate', train_config.learning_rate),
        ('batch_size', train_config.batch_size),
        ('lr_schedule', train_config.lr_schedule)
    ])
    return TaggerModel(
        best[1], feature_config, weights_used, metadata, history
    )


def _merge_predictions(sentence, model):
    existing = parse_bio(sentence.tags, sentence.tokens)
    added = [
        mention for mention in parse_bio(
            predict(model, sentence), sentence.tokens
        )
        if not any(mention.overlaps(other) for other in existing)
    ]
    if not added:
        return sentence
    mentions = sorted(existing + added, key=lambda m: m.char_start)
    return sentence.with_tags(project_bio(sentence.tokens, mentions))


def augment_corpus(corpus, model, name=None):
    """Adds predicted mentions that do not overlap existing ones."""
    sentences = [_merge_predictions(s, model) for s in corpus.sentences]
    augmented = corpus.replace(
        name=name or corpus.name, sentences=sentences
    )
    logger.info('augmented %r', augmented)
    return augmented


def annotate_collection(model, collection, relevant_only=False,
                        name='annotated', jobs=1):
    """Tags every sentence of every (relevant) document.

    Arguments:
        model: TaggerModel
        collection: DocumentCollection
        relevant_only: skip documents flagged as not relevant
        name: corpus name
        jobs: documents tagged concurrently
    """
    docs = [
        doc for doc in collection
        if doc.relevant or not relevant_only
    ]

    def annotate(doc):
        return [
            doc.annotated_sentence(
                index, predict(model, doc.sentence_tokens(index))
            )
            for index in range(len(doc.sentences))
        ]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            per_doc = list(executor.map(annotate, docs))
    else:
        per_doc = [annotate(doc) for doc in docs]
    sentences = [sentence for group in per_doc for sentence in group]
    corpus = Corpus(name, sentences, [UNASSIGNED] * len(sentences))
    logger.info('annotated %r', corpus)
    return corpus


def save_model(model, path):
    config = model.feature_config
    dump_binary(path, MODEL_MAGIC, MODEL_VERSION, {
        'features': {
            'hash_dim': config.hash_dim,
            'ngram_sizes': list(config.ngram_sizes),
            'window': config.window,
            'shape': config.shape
        },
        'class_weights': [float(w) for w in model.class_weights.values],
        'metadata': dict(model.metadata),
        'history': [list(record) for record in model.history],
        'weights': model.weights.astype('<f8').tobytes()
    })


def load_model(path):
    _, payload = load_binary(path, MODEL_MAGIC, (MODEL_VERSION, ))
    config = FeatureConfig(**payload['features'])
    weights = np.frombuffer(payload['weights'], dtype='<f8').reshape(
        config.hash_dim + 1, N_LABELS
    )
    return TaggerModel(
        weights.astype(np.float64),
        config,
        ClassWeights(payload['class_weights']),
        payload['metadata'],
        [EpochRecord(*record) for record in payload['history']]
    )


def format_training_report(model):
    lines = ['# corpus=%s seed=%s' % (
        model.metadata.get('corpus'), model.metadata.get('seed')
    )]
    for key, value in model.metadata.items():
        if isinstance(value, float):
            value = '%.6f' % value
        lines.append('%s = %s' % (key, value))
    lines.append('')
    lines.append('Class weights:')
    for label, weight in model.class_weights.as_dict().items():
        lines.append('  %-6s %.6f' % (label, weight))
    lines.append('')
    lines.append('%-6s %10s %12s %12s' % (
        'Epoch', 'LR', 'Loss', 'Val F-beta'
    ))
    for record in model.history:
        lines.append('%-6d %10.6f %12.6f %12.6f' % tuple(record))
    return '\n'.join(lines) + '\n'


def write_training_report(model, target):
    handle = open_text(target, 'w')
    try:
        handle.write(format_training_report(model))
    finally:
        if handle is not target:
            handle.close()
