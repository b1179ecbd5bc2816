"""Exception hierarchy.

Every error raised for bad input or a broken contract derives from
:class:`HpcError`, which the command line maps to exit status 2.
"""


class HpcError(ValueError):
    """Input or contract violation."""


class WavFormatError(HpcError):
    pass


class PitchError(HpcError):
    pass


class UnvoicedUtteranceError(PitchError):
    pass


class TextGridError(HpcError):
    pass


class AlignmentError(HpcError):
    pass


class SyllabificationError(AlignmentError):
    pass


class MeasurementError(HpcError):
    pass


class StatsError(HpcError):
    pass


class PhoneMismatchError(HpcError):
    """Source and target phone sequences are not parallel."""

    def __init__(self, index, expected, found):
        self.index = index
        self.expected = expected
        self.found = found
        super().__init__(
            f"phone mismatch at index {index}: expected {expected!r}, found {found!r}"
        )


class TransplantError(HpcError):
    pass
