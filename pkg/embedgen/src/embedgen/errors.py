class EmbedGenError(Exception):
    """Base class for generator errors."""


class ConfigError(EmbedGenError):
    """Bad option, missing fixture, or incompatible encoder/strategy."""


class DataError(EmbedGenError):
    """Unusable inputs: empty corpora, nothing in vocabulary."""


class RetryableError(EmbedGenError):
    """Transient live-mode failure (network, auth, rate limit)."""
