"""Exception hierarchy shared by every stage of the pipeline."""


class GlucokitError(Exception):
    """Base class for all errors raised by glucokit."""


class InvalidValueError(GlucokitError, ValueError):
    pass


class InvalidParameterError(GlucokitError, ValueError):
    pass


class ConfigError(GlucokitError, ValueError):
    pass


class SchemaError(GlucokitError, ValueError):
    pass


class ParseError(GlucokitError, ValueError):
    pass


class TransportError(GlucokitError):
    pass


class AuthError(GlucokitError):
    pass


class EmptySourceError(GlucokitError, ValueError):
    pass


class EmptySetError(GlucokitError, ValueError):
    """Raised when a frame is too short to produce any supervised sample."""


class InsufficientDataError(GlucokitError, ValueError):
    pass


class ShapeError(GlucokitError, ValueError):
    pass


class UnsupportedFormatError(GlucokitError):
    pass


class IntegrityError(GlucokitError):
    pass


class AlignmentError(GlucokitError, ValueError):
    pass


class StaleModelError(GlucokitError):
    pass


class WorkspaceError(GlucokitError):
    pass
