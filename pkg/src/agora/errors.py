"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class AgoraError(Exception):
    exit_code = 1

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def to_dict(self):
        out = {"error": type(self).__name__, "message": str(self)}
        out.update({k: _jsonable(v) for k, v in self.context.items()})
        return out


class ConfigError(AgoraError, ValueError):
    """Malformed input: bad shapes, bad parameters, invalid scenario."""

    exit_code = 2


class DimensionError(ConfigError):
    pass


class AssumptionError(AgoraError):
    """A modelling assumption (e.g. global learnability) does not hold."""

    exit_code = 3


class MissingInputError(AgoraError, FileNotFoundError):
    exit_code = 4


class NumericError(AgoraError, ArithmeticError):
    exit_code = 5


class CapabilityError(ConfigError):
    """Problem size beyond what this desk-scale package supports."""


def _jsonable(value):
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value
