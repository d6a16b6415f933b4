"""Exception hierarchy shared by all qnnc modules."""


class QnncError(Exception):
    """Base class for all library errors."""


class ValidationError(QnncError):
    """Malformed input: bad dimensions, bad probabilities, bad file contents."""


class ModelMismatchError(ValidationError):
    """A matrix contains a color the edge model assigns zero probability."""


class StreamError(ValidationError):
    """A bitstream is truncated or structurally inconsistent."""


class VerificationError(QnncError):
    """A cross-check between two computation paths failed."""
