class HintmatchError(Exception):
    """Base class for every error raised by the library."""


class MarketError(HintmatchError, ValueError):
    pass


class PreferenceError(HintmatchError, ValueError):
    pass


class ParameterError(HintmatchError, ValueError):
    pass


class ObservationError(HintmatchError, ValueError):
    pass


class ProtocolError(HintmatchError, RuntimeError):
    """A policy or the round protocol produced an inconsistent action."""

    def __init__(self, message, round_index=None):
        self.round_index = round_index
        if round_index is not None:
            message = f"round {round_index}: {message}"
        super().__init__(message)


class ConfigError(HintmatchError, ValueError):
    """Schema violation in an experiment config; names the offending field."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
