"""Exception hierarchy shared by every module."""


class SWLError(Exception):
    """Base class for all library errors."""


class OutOfParent(SWLError):
    pass


class EmptySelection(SWLError):
    pass


class NoConeFound(SWLError):
    pass


class SingularPoint(SWLError):
    pass


class SingularityTooClose(SWLError):
    pass


class BallNotContained(SWLError):
    pass


class ConeTooNarrow(SWLError):
    pass


class TooDeep(SWLError):
    pass


class TooLarge(SWLError):
    """A resource guard tripped (too many cubes, cells or nodes)."""


class FormatError(SWLError):
    pass


class NotOnSupport(SWLError):
    pass


class CertificateMissing(SWLError):
    pass


class InvariantViolation(SWLError):
    """A structural invariant failed; ``name`` identifies which one."""

    def __init__(self, name, message=""):
        self.name = name
        super().__init__(f"{name}: {message}" if message else name)
