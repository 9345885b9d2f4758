"""Exception types shared across the package.

The CLI maps these onto exit codes: input/validation problems exit 2,
numerical failures during a run exit 3, I/O problems exit 4.
"""


class HkflowError(Exception):
    pass


class InputError(HkflowError):
    """Bad user-supplied data: unknown scenario, malformed snapshot, bad flags."""


class FrameError(InputError):
    """A supplied frame is not admissible (not orthonormal, wrongly oriented,
    or inconsistent with the twistor relations)."""


class PreconditionError(InputError):
    """A diagnostic was asked for outside its domain of validity, e.g. the
    Lagrangian angle of a visibly non-Lagrangian surface."""


class NumericalError(HkflowError):
    """The computation degenerated: metric collapse, stability violation,
    failed eigensolve.  Carries the step index when raised inside a flow."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class IOFailure(HkflowError):
    """File could not be read or written."""
