"""Exception hierarchy shared across the package."""


class LcuLabError(Exception):
    """Base class for all lculab errors."""


class IllegalGeometry(LcuLabError):
    pass


class MalformedTree(LcuLabError):
    pass


class CapExceeded(LcuLabError):
    pass


class SequenceError(LcuLabError):
    """Base for mode-sequence parse failures."""


class TruncatedSequence(SequenceError):
    pass


class TrailingTokens(SequenceError):
    pass


class IllegalMode(SequenceError):
    pass


class ShapeMismatch(LcuLabError):
    pass


class SequenceTooLong(LcuLabError):
    pass


class BadMagic(LcuLabError):
    pass


class TruncatedFile(LcuLabError):
    pass


class EmptyFrame(LcuLabError):
    pass


class BadDimensions(LcuLabError):
    pass


class NoDeepSamples(LcuLabError):
    pass


class EmptyDataset(LcuLabError):
    pass


class InsufficientOverlap(LcuLabError):
    pass


class DivisionByZero(LcuLabError, ZeroDivisionError):
    pass


class IoError(LcuLabError, OSError):
    pass
