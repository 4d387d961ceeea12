class BootstrapError(Exception):
    """Base class for data errors; the CLI maps these to exit status 1."""
    pass


class InvalidBio(BootstrapError):

    def __init__(self, position, message=None):
        self.position = position
        super(InvalidBio, self).__init__(
            message or 'invalid BIO transition at token %d' % position
        )


class OverlapConflict(BootstrapError):
    pass


class InvalidCorpus(BootstrapError):
    pass


class MissingFile(BootstrapError):
    pass


class DuplicateDocId(BootstrapError):
    pass


class InvalidEncoding(BootstrapError):
    pass


class InvalidGazetteer(BootstrapError):
    pass


class SpanOutOfRange(BootstrapError):
    pass


class MissingQueryEmbedding(BootstrapError):
    pass


class EmbeddingDimensionMismatch(BootstrapError):
    pass


class MissingClass(BootstrapError):

    def __init__(self, label):
        self.label = label
        super(MissingClass, self).__init__(
            'class %s never occurs in the training split' % label
        )


class EmptySplit(BootstrapError):
    pass


class AlignmentError(BootstrapError):
    pass


class InvalidJudgments(BootstrapError):
    pass


class FormatError(BootstrapError):
    pass


class ConfigError(BootstrapError):

    def __init__(self, key, message=None):
        self.key = key
        super(ConfigError, self).__init__(
            '%s: %s' % (key, message or 'invalid value')
        )


class UnjudgedResult(object):
    """A retrieved result with no relevance judgment.

    Not raised: collected into the warnings section of a retrieval report
    and counted as non-relevant.
    """

    def __init__(self, method, entity_id, key):
        self.method = method
        self.entity_id = entity_id
        self.key = key

    def __repr__(self):
        return 'unjudged %s result for %s: %s:%d-%d' % (
            (self.method, self.entity_id) + tuple(self.key)
        )
