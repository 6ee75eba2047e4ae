"""Exception hierarchy shared by every subpackage."""


class PnnError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PnnError, ValueError):
    pass


class GeometryError(PnnError, ValueError):
    pass


class DegenerateBatchError(PnnError, ValueError):
    pass


class NumericalError(PnnError, FloatingPointError):
    def __init__(self, message, name=None):
        super().__init__(message)
        self.name = name


class DivergenceError(NumericalError):
    pass


class ConfigError(PnnError, ValueError):
    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class DataError(PnnError, ValueError):
    pass


class DataFormatError(DataError):
    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class CorruptionError(DataError):
    pass


class StructureError(PnnError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class StemIncompatibleError(PnnError, ValueError):
    def __init__(self, message, name=None):
        super().__init__(message)
        self.name = name


class DegenerateTestError(PnnError, ValueError):
    pass


class SizeError(PnnError, ValueError):
    pass
