"""
Domain errors raised by bubblescope.

Every error carries a machine-readable ``code`` (the class name) next to the
human-readable message, so the CLI can report failures as JSON.
"""
from typing import Any, Dict


class BubbleScopeError(Exception):
    """Base class for all domain errors"""

    def __init__(self, message: str):
        self.message = message
        super().__init__(self.message)

    @property
    def code(self) -> str:
        return type(self).__name__

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message}


class MalformedCSV(BubbleScopeError):
    """Header or date column could not be read"""


class MalformedPrice(BubbleScopeError):
    """Price missing, non-numeric, non-finite or not positive"""


class NonMonotonicTime(BubbleScopeError):
    """Times are not strictly increasing"""


class TooShort(BubbleScopeError):
    """Not enough observations for the requested operation"""


class InvalidParameter(BubbleScopeError):
    """A parameter violates the operation's preconditions"""


class BeyondSingularity(BubbleScopeError):
    """Model evaluated at or past its critical time"""


class DegenerateDesign(BubbleScopeError):
    """Least-squares design is rank deficient or the target has no variance"""


class NoFit(BubbleScopeError):
    """Every calibration start failed"""


class TooFewDrawdowns(BubbleScopeError):
    """Bulk sample too small for a distribution fit"""


class DegenerateSample(BubbleScopeError):
    """All sample values are equal"""


class NoCrashes(BubbleScopeError):
    """A report without crash events has no precedence rate"""


class InputError(BubbleScopeError):
    """Input file missing or unreadable"""


class OutputError(BubbleScopeError):
    """Output file could not be written"""
