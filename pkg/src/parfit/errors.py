"""Exception hierarchy. Everything raised on purpose derives from ParfitError."""


class ParfitError(ValueError):
    pass


class InvalidRange(ParfitError):
    pass


class InvalidStep(ParfitError):
    pass


class WrongRole(ParfitError):
    pass


class NameCollision(ParfitError):
    pass


class UnboundObservable(ParfitError):
    pass


class DuplicateObservable(ParfitError):
    pass


class DimensionMismatch(ParfitError):
    pass


class OutOfRange(ParfitError):
    pass


class GraphError(ParfitError):
    """Malformed PDF graph (arity, shared nodes, observable mismatch)."""


class DomainError(ParfitError):
    """A kernel was evaluated outside its domain (e.g. sigma <= 0)."""


class ZeroIntegral(ParfitError):
    pass


class NonFiniteMetric(ParfitError):
    def __init__(self, event_index, value):
        super().__init__(f"non-finite metric contribution at event {event_index}: {value!r}")
        self.event_index = event_index
        self.value = value


class ConfigError(ParfitError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


class EnvelopeError(ParfitError):
    pass


class DeterminismError(ParfitError):
    pass
