"""Exception hierarchy shared by every stage of the pipeline.

The CLI maps ``DataError`` to exit code 2 and ``NumericError`` to exit
code 3; anything raised for bad arguments maps to 1.
"""


class AduError(Exception):
    """Base class for all errors raised by this package."""


class DataError(AduError):
    """Input data is missing, malformed, or inconsistent."""


class NumericError(AduError):
    """A numerical computation produced a non-finite result."""


class AudioTooShortError(DataError):
    def __init__(self, n_samples, frame_length):
        super().__init__(
            f"audio too short: {n_samples} samples, need at least {frame_length}"
        )


class UnsupportedSampleRateError(DataError):
    def __init__(self, rate, supported=()):
        self.rate = rate
        msg = f"unsupported sample rate {rate} Hz"
        if supported:
            msg += f" (supported: {', '.join(str(r) for r in supported)})"
        super().__init__(msg)


class MultiChannelAudioError(DataError):
    def __init__(self, path, channels):
        super().__init__(
            f"{path}: {channels} channels; downmix to mono before feature extraction"
        )


class MalformedHeaderError(DataError):
    pass


class DimensionMismatchError(DataError):
    pass


class TruncatedPayloadError(DataError):
    pass


class ModelNotFoundError(DataError):
    pass


class TimeBaseMismatchError(DataError):
    pass


class DegenerateDetError(DataError):
    def __init__(self, msg="degenerate DET: need at least one positive and one negative score"):
        super().__init__(msg)


class NonFiniteLikelihoodError(NumericError):
    def __init__(self, utterance_id, detail="non-finite likelihood"):
        self.utterance_id = utterance_id
        super().__init__(f"{detail} in utterance {utterance_id!r}")
