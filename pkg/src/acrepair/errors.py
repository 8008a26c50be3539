"""Exception hierarchy shared by all modules."""
from __future__ import annotations


class AcRepairError(Exception):
    """Base class for every error raised by the toolkit."""


class UsageError(AcRepairError):
    """Bad invocation: missing inputs, unknown function names, etc."""


class MissingInput(AcRepairError):
    """A referenced file or directory does not exist."""


class EmptyTarget(AcRepairError):
    """The vulnerable function has no body to slice."""


class CorpusUnreadable(AcRepairError):
    pass


class ProviderUnavailable(AcRepairError):
    """The live model endpoint failed after all retries."""


class TranscriptDiverged(AcRepairError):
    def __init__(self, expected: str, actual: str, index: int):
        super().__init__(f"request #{index} diverged from transcript: expected {expected}, got {actual}")
        self.expected = expected
        self.actual = actual
        self.index = index


class TranscriptExhausted(ProviderUnavailable):
    """Replay ran past the last recorded exchange."""


class Unparseable(AcRepairError):
    """A model response carried no recoverable structure."""


class PairUnresolved(AcRepairError):
    pass


class GenerationFailed(AcRepairError):
    pass


class ContextOverflow(AcRepairError):
    pass


class DebateAborted(AcRepairError):
    """Provider failure inside the debate loop; carries the partial state."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state
