"""Exception hierarchy."""


class AHNSError(Exception):
    """Base class for all errors raised by this package."""


class DatasetError(AHNSError):
    pass


class ParseError(DatasetError):
    """Malformed interaction file; the message carries ``path:line``."""


class EmptyDatasetError(DatasetError):
    pass


class ManifestError(AHNSError):
    pass


class CheckpointError(AHNSError):
    pass


class SamplerError(AHNSError):
    pass


class ExhaustedItemsError(SamplerError):
    """A user has interacted with every item, so no negative exists."""


class ConfigError(AHNSError):
    pass


class EvaluationError(AHNSError):
    pass
