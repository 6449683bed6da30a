"""Exception hierarchy.

Every error derives from one of three roots so the CLI can map it to an
exit code: :class:`DataError` (1), :class:`ConfigError` (2) and
:class:`ServiceError` (3).
"""


class HoliSpoofError(Exception):
    pass


class DataError(HoliSpoofError, ValueError):
    pass


class ConfigError(HoliSpoofError):
    pass


class ServiceError(HoliSpoofError):
    pass


# annotation

class NoJsonFoundError(DataError):
    pass


class MissingAuthenticityKeyError(DataError):
    pass


class InvalidFieldError(DataError):
    pass


class UnknownMethodError(InvalidFieldError):
    pass


class MalformedIntervalError(DataError):
    pass


class InconsistentRecordError(DataError):
    pass


class InvariantViolationError(DataError):
    pass


# metrics

class LengthMismatchError(DataError):
    pass


class EmptyInputError(DataError):
    pass


class NonFiniteLogitError(DataError):
    pass


class SingleClassInputError(DataError):
    pass


class NoEligibleSamplesError(DataError):
    pass


class WrongArityError(DataError):
    pass


class ScoreOutOfRangeError(DataError):
    pass


class DuplicateSampleIdError(DataError):
    pass


class ManifestNotFoundError(ConfigError, FileNotFoundError):
    pass


# mixer

class ZeroCapError(DataError):
    pass


# gateway / services

class GatewayTimeoutError(ServiceError):
    pass


class AuthFailureError(ServiceError):
    pass


class RateLimitedError(ServiceError):
    pass


class ServiceUnavailableError(ServiceError):
    pass


class RequestRejectedError(ServiceError):
    """Non-retryable 4xx other than auth and rate limiting."""


class MalformedResponseError(ServiceError):
    pass


class StructuredOutputFailureError(ServiceError):
    pass


class ScoreParseFailureError(ServiceError):
    pass


class SynthesisFailureError(ServiceError):
    pass


# curation

class IndexOutOfRangeError(DataError, IndexError):
    pass


class SpanNotFoundError(DataError):
    pass


class InvalidExampleRecordError(DataError):
    pass


class DialogueFailedError(HoliSpoofError):
    """Wraps an error raised while processing one dialogue."""

    def __init__(self, dialogue_id, cause):
        super().__init__(f"dialogue {dialogue_id}: {cause}")
        self.dialogue_id = dialogue_id
        self.cause = cause


# audio

class WavError(DataError):
    pass


class BadMagicError(WavError):
    pass


class UnsupportedFormatError(WavError):
    pass


class TruncatedFileError(WavError):
    pass


class InvalidHeaderError(WavError):
    pass


class RateMismatchError(DataError):
    pass


# adapter math

class DimensionMismatchError(DataError):
    pass


class ZeroColumnNormError(DataError):
    pass
