"""Exception hierarchy shared by every module."""


class WatermarkError(Exception):
    """Base class for all errors raised by wmstat."""


class InvalidVocabularyError(WatermarkError, ValueError):
    pass


class InvalidRegularityError(WatermarkError, ValueError):
    pass


class InvalidParameterError(WatermarkError, ValueError):
    pass


class DegenerateRandomnessError(WatermarkError, ValueError):
    pass


class FamilyMismatchError(WatermarkError, TypeError):
    """A score was applied to a pivot of the wrong watermark family."""


class EnumerationTooLargeError(WatermarkError, ValueError):
    pass


class MustUseMonteCarloError(WatermarkError, ValueError):
    """The null moments are infinite, so the Gaussian critical value is undefined."""


class DomainError(WatermarkError, ValueError):
    pass


class BracketError(WatermarkError, ValueError):
    pass


class PreconditionError(WatermarkError, ValueError):
    pass


class TraceError(WatermarkError, ValueError):
    """An NTP trace file could not be parsed or failed validation."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row
