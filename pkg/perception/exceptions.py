"""
Exception types raised by the perception pipeline.

Each carries the process exit code the management commands report for it.
"""


class GraspPipelineError(Exception):
    """Base class for pipeline failures"""
    exit_code = 2


class ConfigError(GraspPipelineError):
    """Invalid or unknown configuration key"""
    exit_code = 1

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class DataError(GraspPipelineError, ValueError):
    """Input data violates a precondition (shape, range, emptiness, missing file)"""
    exit_code = 2


class LibraryError(DataError):
    """Response library misuse (bad slot, dimension mismatch, empty library)"""


class UninitializedSlotError(LibraryError):
    """A slot was read before any feature was written to it"""

    def __init__(self, slot):
        super().__init__(
            f'slot {slot} was never written; that illumination level was not seen in training'
        )
        self.slot = slot


class GraspError(DataError):
    """Grasp search cannot proceed (no region, no valid depth)"""


class NumericError(GraspPipelineError, ArithmeticError):
    """Non-finite values reached a parameter update or a result"""
    exit_code = 3
