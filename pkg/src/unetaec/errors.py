"""Exception taxonomy shared across the package."""


class UnetAecError(Exception):
    """Base class for errors raised by this package."""


class InvalidArgumentError(UnetAecError, ValueError):
    """A caller violated a documented precondition (shape, dtype, range)."""


class FormatError(UnetAecError, ValueError):
    """A file or byte stream does not follow its documented format."""


class ProcessingError(UnetAecError, RuntimeError):
    """A runtime failure during signal processing or training."""
