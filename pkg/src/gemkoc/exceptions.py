"""Exception hierarchy. Every library error derives from :class:`GemkocError`."""


class GemkocError(Exception):
    pass


class DimensionError(GemkocError, ValueError):
    pass


class DegenerateDataError(GemkocError, ValueError):
    pass


class GraphConstructionError(GemkocError):
    pass


class IllConditionedSystemError(GemkocError):
    """The regularized layer system is singular or too badly conditioned to trust."""

    def __init__(self, message: str, layer: int | None = None):
        super().__init__(message)
        self.layer = layer


class SolverResidualError(GemkocError):
    pass


class DataFormatError(GemkocError, ValueError):
    pass


class ConfigError(GemkocError, ValueError):
    pass


class ModelFormatError(GemkocError, ValueError):
    pass
